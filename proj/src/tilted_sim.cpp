#include "rubricrl/tilted_sim.hpp"

#include "rubricrl/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace rubricrl {

namespace {

void check_beta(double beta) {
    if (!(beta > 0.0) || !std::isfinite(beta)) {
        std::ostringstream os;
        os << "beta must be a positive finite number, got " << beta;
        throw DomainError(os.str());
    }
}

// Neumaier-compensated sum; 10^4-atom grids otherwise drift past 1e-12.
class KahanSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

} // namespace

DiscreteResponseDist::DiscreteResponseDist(std::vector<Atom> atoms) {
    if (atoms.empty()) {
        throw DomainError("distribution needs at least one atom");
    }
    KahanSum total;
    for (const auto& a : atoms) {
        if (!std::isfinite(a.gold_reward)) {
            throw DomainError("gold reward must be finite");
        }
        if (!(a.prob > 0.0 && a.prob <= 1.0)) {
            std::ostringstream os;
            os << "atom probability must lie in (0,1], got " << a.prob;
            throw DomainError(os.str());
        }
        total.add(a.prob);
    }
    if (std::abs(total.value() - 1.0) > 1e-12) {
        std::ostringstream os;
        os.precision(17);
        os << "atom probabilities sum to " << total.value() << ", expected 1";
        throw DomainError(os.str());
    }

    std::stable_sort(atoms.begin(), atoms.end(),
                     [](const Atom& a, const Atom& b) { return a.gold_reward < b.gold_reward; });
    for (const auto& a : atoms) {
        if (!atoms_.empty() && atoms_.back().gold_reward == a.gold_reward) {
            atoms_.back().prob += a.prob;
        } else {
            atoms_.push_back(a);
        }
    }

    mid_rank_.resize(atoms_.size());
    KahanSum below;
    for (std::size_t i = 0; i < atoms_.size(); ++i) {
        mid_rank_[i] = below.value() + 0.5 * atoms_[i].prob;
        below.add(atoms_[i].prob);
    }
}

DiscreteResponseDist DiscreteResponseDist::uniform_grid(std::size_t n) {
    if (n == 0) {
        throw DomainError("uniform grid needs at least one atom");
    }
    std::vector<Atom> atoms(n);
    const double p = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        atoms[i] = {(static_cast<double>(i) + 0.5) / static_cast<double>(n), p};
    }
    return DiscreteResponseDist(std::move(atoms));
}

TiltedDist tilt(const DiscreteResponseDist& dist, const MisspecMap& m, double beta) {
    check_beta(beta);
    TiltedDist t(dist, m, beta);
    const auto& atoms = dist.atoms();
    t.exponents_.resize(atoms.size());
    double max_exp = -INFINITY;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        t.exponents_[i] = apply_map(m, atoms[i].gold_reward) / beta;
        max_exp = std::max(max_exp, t.exponents_[i]);
    }
    t.probs_.resize(atoms.size());
    KahanSum z;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        t.probs_[i] = atoms[i].prob * std::exp(t.exponents_[i] - max_exp);
        z.add(t.probs_[i]);
    }
    const double norm = z.value();
    for (auto& q : t.probs_) {
        q /= norm;
    }
    return t;
}

double expected_gold_reward(const TiltedDist& t) {
    KahanSum s;
    const auto& atoms = t.base().atoms();
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        s.add(t.tilted_probs()[i] * atoms[i].gold_reward);
    }
    return s.value();
}

double win_rate_discrete(const TiltedDist& t) {
    KahanSum s;
    for (std::size_t i = 0; i < t.tilted_probs().size(); ++i) {
        s.add(t.tilted_probs()[i] * t.base().mid_rank(i));
    }
    return std::clamp(s.value(), 0.0, 1.0);
}

double kl_discrete(const TiltedDist& t) {
    const auto& a = t.exponents();
    const auto& atoms = t.base().atoms();
    const double max_exp = *std::max_element(a.begin(), a.end());

    KahanSum tilted_mean;
    KahanSum partition;
    for (std::size_t i = 0; i < a.size(); ++i) {
        tilted_mean.add(t.tilted_probs()[i] * (a[i] - max_exp));
        partition.add(atoms[i].prob * std::exp(a[i] - max_exp));
    }
    // The max_exp shift cancels between the two terms.
    const double kl = tilted_mean.value() - std::log(partition.value());
    return kl < 0.0 ? 0.0 : kl;
}

double monte_carlo_win_rate(const MisspecMap& m, double beta, std::uint64_t n,
                            std::uint64_t seed) {
    check_beta(beta);
    if (n == 0) {
        throw DomainError("Monte Carlo sample count must be at least 1");
    }
    std::mt19937_64 rng(seed);
    KahanSum weighted;
    KahanSum total;
    for (std::uint64_t i = 0; i < n; ++i) {
        // 53 random bits in [0,1); std::uniform_real_distribution is not
        // specified bit-exactly across standard libraries.
        const double r = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        // f(r) <= 1, so shifting by 1/beta keeps every weight <= 1.
        const double w = std::exp((apply_map(m, r) - 1.0) / beta);
        weighted.add(w * r);
        total.add(w);
    }
    return weighted.value() / total.value();
}

} // namespace rubricrl
