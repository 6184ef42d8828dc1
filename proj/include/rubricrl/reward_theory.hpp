#pragma once

#include "rubricrl/misspec_map.hpp"

#include <span>
#include <vector>

namespace rubricrl {

// One sample of a KL / win-rate tradeoff curve.
struct TradeoffPoint {
    double beta = 0.0;
    double kl = 0.0;       // nats
    double win_rate = 0.0; // in [0,1]
};

// KL(pi_r || pi_0) for a uniform gold-reward base policy tilted with penalty
// beta. Does not depend on the misspecification map. Throws DomainError for
// beta <= 0.
double kl_closed_form(double beta);

// Win rate (equivalently expected gold reward) of the tilted policy under a
// uniform base:
//
//   integral_0^1 f^-1(u) exp(u/beta) du / (beta (exp(1/beta) - 1))
//
// evaluated by adaptive Gauss-Legendre on panels split at the map's
// breakpoints. Throws DomainError for beta <= 0, UnsupportedMapError for
// custom maps and NumericError if quadrature fails.
double win_rate_quadrature(const MisspecMap& m, double beta);

// One point per beta, sorted by ascending KL. Errors from a single beta are
// rethrown with that beta in the message.
std::vector<TradeoffPoint> tradeoff_curve(const MisspecMap& m, std::span<const double> betas);

// `count` log-spaced betas from `hi` down to `lo` inclusive.
std::vector<double> log_beta_grid(double hi, double lo, int count);

} // namespace rubricrl
