#pragma once

#include "potentials.hpp"
#include "quadrature.hpp"

#include <limits>

namespace pseudogen {

namespace detail {

// Lowest energy on a coarse node set; used to keep exp(-βV) in range.
template <Potential P>
double energy_floor(const P& model) {
    constexpr int D = P::dim;
    const auto dom = model.domain();
    double floor = std::numeric_limits<double>::infinity();
    if constexpr (D <= 2) {
        integrate_box<D>(
            [&](const Vec<D>& q) {
                floor = std::min(floor, model.energy(q));
                return 0.0;
            },
            dom.lo, dom.hi, dom.periodic, 16);
    }
    return floor;
}

}  // namespace detail

/// Z = ∫ exp(−βV) over the model domain by adaptive composite quadrature.
/// Only dimensions 1 and 2 are supported; higher dimensions must be sampled.
template <Potential P>
double normalization_constant(const P& model, double beta) {
    constexpr int D = P::dim;
    require(beta > 0.0, "normalization_constant: beta must be positive");
    if constexpr (D > 2) {
        throw InvalidArgument("normalization_constant: quadrature unsupported for dimension " +
                              std::to_string(D) + ", use the sampling path instead");
    } else {
        const double shift = detail::energy_floor(model);
        const double scaled = integrate_adaptive<D>(
            [&](const Vec<D>& q) { return std::exp(-beta * (model.energy(q) - shift)); }, model.domain(),
            1e-13);
        const double z = scaled * std::exp(-beta * shift);
        if (!(z > 0.0) || !std::isfinite(z)) {
            throw NumericalError("normalization_constant: Z is not a positive finite number");
        }
        return z;
    }
}

/// f(q) = exp(−βV(q)) / Z.
template <Potential P>
class BoltzmannDensity {
public:
    static constexpr int dim = P::dim;

    BoltzmannDensity(P model, double beta)
        : model_(std::move(model)), beta_(beta), z_(normalization_constant(model_, beta)),
          log_z_(std::log(z_)) {}

    [[nodiscard]] double operator()(const Vec<dim>& q) const { return std::exp(log_density(q)); }
    [[nodiscard]] double log_density(const Vec<dim>& q) const { return -beta_ * model_.energy(q) - log_z_; }
    [[nodiscard]] double normalization() const { return z_; }
    [[nodiscard]] double beta() const { return beta_; }
    [[nodiscard]] const P& model() const { return model_; }

private:
    P model_;
    double beta_;
    double z_;
    double log_z_;
};

}  // namespace pseudogen
