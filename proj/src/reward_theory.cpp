#include "rubricrl/reward_theory.hpp"

#include "rubricrl/error.hpp"
#include "rubricrl/gauss_legendre.hpp"

#include <algorithm>
#include <cmath>
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

// 1 - exp(-t), accurate for both small and large t.
double one_minus_exp_neg(double t) { return -std::expm1(-t); }

} // namespace

double kl_closed_form(double beta) {
    check_beta(beta);
    const double t = 1.0 / beta;
    if (t < 1e-3) {
        // KL = t E[u] - log E[e^{tu}] expanded around t = 0.
        const double t2 = t * t;
        return t2 / 24.0 - t2 * t2 / 960.0 + t2 * t2 * t2 / 18144.0;
    }
    if (t > 1e3) {
        // e^-t underflows and t itself may overflow; what is left is
        // log t - 1, with log t taken from beta directly.
        return -std::log(beta) - 1.0;
    }
    // Both terms are factored by exp(1/beta) so nothing overflows:
    //   t E[u]          = t / (1 - e^-t) - 1
    //   log E[e^{tu}]   = t + log(1 - e^-t) - log t
    const double q = one_minus_exp_neg(t);
    const double tilted_mean_term = t / q - 1.0;
    const double log_partition = t + std::log(q) - std::log(t);
    return std::max(0.0, tilted_mean_term - log_partition);
}

double win_rate_quadrature(const MisspecMap& m, double beta) {
    check_beta(beta);
    if (!m.invertible()) {
        throw UnsupportedMapError("win rate quadrature needs an invertible map, got '" + m.name() +
                                  "'");
    }
    const double t = 1.0 / beta;
    // Normalised density of the tilted proxy reward, shifted by its maximum:
    //   t e^{t(u-1)} / (1 - e^{-t})   integrates to one on [0,1].
    const double scale = t / one_minus_exp_neg(t);
    auto integrand = [&](double u) { return invert_map(m, u) * scale * std::exp(t * (u - 1.0)); };
    const auto cuts = m.breakpoints();
    const auto result = integrate_gl(integrand, 0.0, 1.0, cuts);
    return std::clamp(result.value, 0.0, 1.0);
}

std::vector<TradeoffPoint> tradeoff_curve(const MisspecMap& m, std::span<const double> betas) {
    if (betas.empty()) {
        throw DomainError("beta grid is empty");
    }
    std::vector<TradeoffPoint> points;
    points.reserve(betas.size());
    for (double beta : betas) {
        try {
            points.push_back({beta, kl_closed_form(beta), win_rate_quadrature(m, beta)});
        } catch (const DomainError& e) {
            std::ostringstream os;
            os << "beta=" << beta << ": " << e.what();
            throw DomainError(os.str());
        } catch (const NumericError& e) {
            std::ostringstream os;
            os << "beta=" << beta << ": " << e.what();
            throw NumericError(os.str());
        }
    }
    std::stable_sort(points.begin(), points.end(),
                     [](const TradeoffPoint& a, const TradeoffPoint& b) { return a.kl < b.kl; });
    return points;
}

std::vector<double> log_beta_grid(double hi, double lo, int count) {
    check_beta(hi);
    check_beta(lo);
    if (count < 1) {
        throw DomainError("beta grid needs at least one point");
    }
    if (count == 1) {
        return {hi};
    }
    std::vector<double> grid(count);
    const double log_hi = std::log(hi);
    const double log_lo = std::log(lo);
    for (int i = 0; i < count; ++i) {
        grid[i] = std::exp(log_hi + (log_lo - log_hi) * i / (count - 1));
    }
    grid.front() = hi;
    grid.back() = lo;
    return grid;
}

} // namespace rubricrl
