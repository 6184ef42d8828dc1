#pragma once

#include "rubricrl/misspec_map.hpp"

#include <cstdint>
#include <vector>

namespace rubricrl {

struct Atom {
    double gold_reward = 0.0;
    double prob = 0.0;
};

// Finite base-policy distribution of gold rewards. Atoms are kept sorted by
// reward with duplicates merged; probabilities are positive and sum to one
// within 1e-12.
class DiscreteResponseDist {
public:
    // Throws DomainError on non-finite rewards, non-positive probabilities or
    // a total outside 1 +- 1e-12.
    explicit DiscreteResponseDist(std::vector<Atom> atoms);

    // N equal-mass atoms at the midpoints (i + 1/2)/N of [0,1].
    static DiscreteResponseDist uniform_grid(std::size_t n);

    const std::vector<Atom>& atoms() const { return atoms_; }
    std::size_t size() const { return atoms_.size(); }

    // Mid-rank CDF at atom i: P(R < r_i) + P(R = r_i) / 2.
    double mid_rank(std::size_t i) const { return mid_rank_[i]; }

private:
    std::vector<Atom> atoms_;
    std::vector<double> mid_rank_;
};

// pi_0 tilted by exp(f(r)/beta).
class TiltedDist {
public:
    const DiscreteResponseDist& base() const { return base_; }
    double beta() const { return beta_; }
    const MisspecMap& map() const { return map_; }
    const std::vector<double>& tilted_probs() const { return probs_; }

    // Per-atom exponent f(r_i)/beta.
    const std::vector<double>& exponents() const { return exponents_; }

private:
    TiltedDist(DiscreteResponseDist base, MisspecMap map, double beta)
        : base_(std::move(base)), map_(std::move(map)), beta_(beta) {}

    DiscreteResponseDist base_;
    MisspecMap map_;
    double beta_;
    std::vector<double> exponents_;
    std::vector<double> probs_;

    friend TiltedDist tilt(const DiscreteResponseDist&, const MisspecMap&, double);
};

// Exponential tilting in log space. Throws DomainError for beta <= 0 and
// for gold rewards outside the map's domain [0,1].
TiltedDist tilt(const DiscreteResponseDist& dist, const MisspecMap& m, double beta);

double expected_gold_reward(const TiltedDist& t);

// sum_i q_i F_0(r_i) with the mid-rank convention, so an untilted policy
// scores exactly 1/2.
double win_rate_discrete(const TiltedDist& t);

// E_q[f(R)/beta] - log E_p[exp(f(R)/beta)], clamped at zero.
double kl_discrete(const TiltedDist& t);

// Self-normalised importance-sampling estimate of the uniform-base win rate
// from n i.i.d. U(0,1) gold rewards. Bit-identical for a given seed.
double monte_carlo_win_rate(const MisspecMap& m, double beta, std::uint64_t n,
                            std::uint64_t seed);

} // namespace rubricrl
