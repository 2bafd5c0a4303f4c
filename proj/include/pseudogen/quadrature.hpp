#pragma once

#include "core.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <vector>

namespace pseudogen {

struct AxisRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

namespace detail {

// 8-point Gauss–Legendre on [-1, 1].
inline constexpr std::array<double, 8> kGaussNodes{
    -0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
    0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
inline constexpr std::array<double, 8> kGaussWeights{
    0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
    0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};

}  // namespace detail

/// Composite rule on [lo, hi] with `panels` sub-intervals. Periodic axes use
/// the equispaced trapezoid rule (spectrally accurate for smooth periodic
/// integrands), others 8-point Gauss–Legendre per panel.
inline AxisRule axis_rule(double lo, double hi, bool periodic, int panels) {
    require(panels >= 1 && hi > lo, "axis_rule: invalid interval or panel count");
    AxisRule rule;
    const double h = (hi - lo) / panels;
    if (periodic) {
        const int n = 8 * panels;
        const double hn = (hi - lo) / n;
        for (int k = 0; k < n; ++k) {
            rule.nodes.push_back(lo + k * hn);
            rule.weights.push_back(hn);
        }
        return rule;
    }
    for (int k = 0; k < panels; ++k) {
        const double mid = lo + (k + 0.5) * h;
        for (std::size_t g = 0; g < detail::kGaussNodes.size(); ++g) {
            rule.nodes.push_back(mid + 0.5 * h * detail::kGaussNodes[g]);
            rule.weights.push_back(0.5 * h * detail::kGaussWeights[g]);
        }
    }
    return rule;
}

/// Tensor-product quadrature of f over a box with fixed panels per axis.
template <int Dim, class F>
double integrate_box(F&& f, const std::array<double, Dim>& lo, const std::array<double, Dim>& hi,
                     const std::array<bool, Dim>& periodic, int panels) {
    static_assert(Dim == 1 || Dim == 2, "quadrature supports dimension 1 and 2");
    std::array<AxisRule, Dim> rules;
    for (int a = 0; a < Dim; ++a) {
        rules[a] = axis_rule(lo[a], hi[a], periodic[a], panels);
    }
    double sum = 0.0;
    Vec<Dim> q;
    if constexpr (Dim == 1) {
        for (std::size_t i = 0; i < rules[0].nodes.size(); ++i) {
            q[0] = rules[0].nodes[i];
            sum += rules[0].weights[i] * f(q);
        }
    } else {
        for (std::size_t i = 0; i < rules[0].nodes.size(); ++i) {
            double inner = 0.0;
            q[0] = rules[0].nodes[i];
            for (std::size_t j = 0; j < rules[1].nodes.size(); ++j) {
                q[1] = rules[1].nodes[j];
                inner += rules[1].weights[j] * f(q);
            }
            sum += rules[0].weights[i] * inner;
        }
    }
    return sum;
}

/// Doubles the panel count until two successive estimates agree to rel_tol.
template <int Dim, class F>
double integrate_adaptive(F&& f, const Domain<Dim>& domain, double rel_tol = 1e-12) {
    const int max_panels = Dim == 1 ? 8192 : 256;
    double previous = integrate_box<Dim>(f, domain.lo, domain.hi, domain.periodic, 4);
    for (int panels = 8; panels <= max_panels; panels *= 2) {
        const double current = integrate_box<Dim>(f, domain.lo, domain.hi, domain.periodic, panels);
        if (std::abs(current - previous) <= rel_tol * std::abs(current)) {
            return current;
        }
        previous = current;
    }
    return previous;
}

}  // namespace pseudogen
