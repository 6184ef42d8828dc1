#include "rubricrl/gauss_legendre.hpp"

#include "rubricrl/error.hpp"

#include <numbers>
#include <sstream>

namespace rubricrl {

GaussLegendreRule gauss_legendre_rule(int n) {
    GaussLegendreRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        // Tricomi initial guess for the i-th largest root
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0;
            double p1 = z;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (z * p1 - p0) / (z * z - 1.0);
            const double step = p1 / dp;
            z -= step;
            if (std::abs(step) < 1e-16) {
                break;
            }
        }
        // Recompute the derivative at the converged root for the weight.
        double p0 = 1.0;
        double p1 = z;
        for (int k = 2; k <= n; ++k) {
            const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        dp = n * (z * p1 - p0) / (z * z - 1.0);
        const double w = 2.0 / ((1.0 - z * z) * dp * dp);
        rule.nodes[i] = -z;
        rule.nodes[n - 1 - i] = z;
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    return rule;
}

const GaussLegendreRule& gauss_legendre_64() {
    static const GaussLegendreRule rule = gauss_legendre_rule(64);
    return rule;
}

namespace detail {

void throw_quadrature_failure(double a, double b, double coarse, double fine, int depth) {
    std::ostringstream os;
    os.precision(17);
    os << "quadrature did not converge on panel [" << a << ", " << b << "] at depth " << depth
       << ": coarse=" << coarse << " refined=" << fine << " diff=" << std::abs(fine - coarse);
    throw NumericError(os.str());
}

} // namespace detail

} // namespace rubricrl
