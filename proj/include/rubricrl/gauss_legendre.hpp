#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace rubricrl {

// Nodes and weights of an n-point Gauss-Legendre rule on [-1, 1], computed
// by Newton iteration on P_n. Nodes ascend.
struct GaussLegendreRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

GaussLegendreRule gauss_legendre_rule(int n);

// Shared 64-point rule used by the adaptive integrator.
const GaussLegendreRule& gauss_legendre_64();

struct QuadratureOptions {
    // Accept a panel once the rule on it and on its two halves agree to this.
    double panel_tolerance = 1e-10;
    int max_depth = 40;
};

struct QuadratureResult {
    double value = 0.0;
    int panels = 0;      // accepted panels
    int evaluations = 0; // integrand calls
};

// Adaptive bisection with a fixed-order Gauss-Legendre rule per panel.
// `cuts` are interior points where the integrand may be non-smooth; the
// interval is split there before any adaptation. Throws NumericError when a
// panel still disagrees at max_depth, naming the panel.
template <class F>
QuadratureResult integrate_gl(F&& f, double a, double b, std::span<const double> cuts,
                              const QuadratureOptions& opts = {});

namespace detail {

template <class F>
double gl_panel(F& f, double a, double b, const GaussLegendreRule& rule, int& evals) {
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    double sum = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        sum += rule.weights[i] * f(mid + half * rule.nodes[i]);
    }
    evals += static_cast<int>(rule.nodes.size());
    return half * sum;
}

[[noreturn]] void throw_quadrature_failure(double a, double b, double coarse, double fine,
                                           int depth);

template <class F>
double adapt(F& f, double a, double b, double whole, int depth, const QuadratureOptions& opts,
             const GaussLegendreRule& rule, QuadratureResult& out) {
    const double mid = 0.5 * (a + b);
    const double left = gl_panel(f, a, mid, rule, out.evaluations);
    const double right = gl_panel(f, mid, b, rule, out.evaluations);
    const double refined = left + right;
    if (std::abs(refined - whole) < opts.panel_tolerance) {
        ++out.panels;
        return refined;
    }
    if (depth >= opts.max_depth) {
        throw_quadrature_failure(a, b, whole, refined, depth);
    }
    return adapt(f, a, mid, left, depth + 1, opts, rule, out) +
           adapt(f, mid, b, right, depth + 1, opts, rule, out);
}

} // namespace detail

template <class F>
QuadratureResult integrate_gl(F&& f, double a, double b, std::span<const double> cuts,
                              const QuadratureOptions& opts) {
    const auto& rule = gauss_legendre_64();
    std::vector<double> edges{a};
    for (double c : cuts) {
        if (c > a && c < b) {
            edges.push_back(c);
        }
    }
    std::sort(edges.begin() + 1, edges.end());
    edges.push_back(b);

    QuadratureResult out;
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
        const double lo = edges[i];
        const double hi = edges[i + 1];
        const double whole = detail::gl_panel(f, lo, hi, rule, out.evaluations);
        out.value += detail::adapt(f, lo, hi, whole, 0, opts, rule, out);
    }
    return out;
}

} // namespace rubricrl
