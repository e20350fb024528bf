// Gauss-Legendre rules and the exponential-emission-time quadrature.
//
// Emission-time averages <f> = integral_0^inf (1/tau) e^{-t/tau} f(t) dt are
// evaluated in u = 1 - e^{-t/tau}, where the weight becomes du. The FSS phase
// makes f oscillate without decay as u -> 1, so a single Gauss-Legendre panel
// converges only algebraically; the rule is therefore composite, with dyadic
// panels in s = 1 - u (each panel spans tau*ln2 in t).
#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "swapsim/error.hpp"
#include "swapsim/quantum_core.hpp"

namespace swapsim {

struct QuadratureSpec {
    int nodes_per_panel = 16;
    int panels = 48;  // dyadic panels; the final panel covers the remaining tail
    double rel_tol = 1e-8;
    int max_nodes_per_panel = 256;

    void validate() const {
        if (nodes_per_panel < 2 || panels < 1 || max_nodes_per_panel < nodes_per_panel) {
            throw std::invalid_argument("QuadratureSpec: invalid node/panel counts");
        }
        if (!(rel_tol > 0.0) || rel_tol > 1e-8) {
            throw std::invalid_argument("QuadratureSpec: relative tolerance must be in (0, 1e-8]");
        }
    }
};

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// n-point Gauss-Legendre rule on [-1, 1] (Newton iteration on P_n).
inline QuadratureRule gauss_legendre(int n) {
    if (n < 1) throw std::invalid_argument("gauss_legendre: n must be positive");
    QuadratureRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    const unsigned un = static_cast<unsigned>(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            const double p = std::legendre(un, x);
            const double pm = n > 1 ? std::legendre(un - 1, x) : 1.0;
            dp = n * (x * p - pm) / (x * x - 1.0);
            const double dx = p / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        {
            const double p = std::legendre(un, x);
            const double pm = n > 1 ? std::legendre(un - 1, x) : 1.0;
            dp = n * (x * p - pm) / (x * x - 1.0);
        }
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[i] = -x;
        rule.nodes[n - 1 - i] = x;
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    return rule;
}

/// Nodes t_i (ns) and weights w_i (sum 1) for averages over an exponential
/// emission-time distribution with mean `tau_ns`.
inline QuadratureRule emission_time_rule(double tau_ns, int nodes_per_panel, int panels) {
    if (!(tau_ns > 0.0) || !std::isfinite(tau_ns)) throw std::invalid_argument("emission_time_rule: tau must be positive");
    const QuadratureRule gl = gauss_legendre(nodes_per_panel);
    QuadratureRule rule;
    rule.nodes.reserve(static_cast<std::size_t>(nodes_per_panel) * (panels + 1));
    rule.weights.reserve(rule.nodes.capacity());
    auto add_panel = [&](double s_lo, double s_hi) {
        const double half = 0.5 * (s_hi - s_lo);
        for (int i = 0; i < nodes_per_panel; ++i) {
            const double s = s_lo + half * (gl.nodes[i] + 1.0);
            rule.nodes.push_back(-tau_ns * std::log(s));
            rule.weights.push_back(half * gl.weights[i]);
        }
    };
    for (int j = 0; j < panels; ++j) add_panel(std::ldexp(1.0, -(j + 1)), std::ldexp(1.0, -j));
    add_panel(0.0, std::ldexp(1.0, -panels));
    return rule;
}

namespace detail {

inline double quad_distance(double a, double b) { return std::abs(a - b); }
inline double quad_distance(std::complex<double> a, std::complex<double> b) { return std::abs(a - b); }
inline double quad_distance(const Matrix& a, const Matrix& b) { return max_abs(a - b); }
inline double quad_size(double a) { return std::abs(a); }
inline double quad_size(std::complex<double> a) { return std::abs(a); }
inline double quad_size(const Matrix& a) { return max_abs(a); }

template <class F>
using quad_result_t = std::decay_t<std::invoke_result_t<const F&, double>>;

template <class F>
quad_result_t<F> apply_rule(const F& f, const QuadratureRule& rule) {
    quad_result_t<F> sum = f(rule.nodes[0]) * rule.weights[0];
    for (std::size_t i = 1; i < rule.nodes.size(); ++i) sum += f(rule.nodes[i]) * rule.weights[i];
    return sum;
}

}  // namespace detail

/// Adaptive emission-time average of f (double, complex or Matrix valued).
/// Doubles the nodes per panel until successive estimates differ by less than
/// rel_tol * max(1, |estimate|); throws NumericalError otherwise.
template <class F>
detail::quad_result_t<F> emission_average(const F& f, double tau_ns, const QuadratureSpec& spec = {}) {
    spec.validate();
    int n = spec.nodes_per_panel;
    detail::quad_result_t<F> previous = detail::apply_rule(f, emission_time_rule(tau_ns, n, spec.panels));
    while (2 * n <= spec.max_nodes_per_panel) {
        n *= 2;
        detail::quad_result_t<F> current = detail::apply_rule(f, emission_time_rule(tau_ns, n, spec.panels));
        const double scale = std::max(1.0, detail::quad_size(current));
        if (detail::quad_distance(current, previous) <= spec.rel_tol * scale) return current;
        previous = current;
    }
    throw NumericalError("emission-time quadrature did not converge within " +
                         std::to_string(spec.max_nodes_per_panel) + " nodes per panel");
}

}  // namespace swapsim
