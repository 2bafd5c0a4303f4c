#pragma once

#include "core.hpp"

#include <concepts>
#include <string>
#include <utility>
#include <vector>

namespace pseudogen {

/// A potential-energy model on an axis-aligned domain. Models are immutable
/// after construction and safe to share between threads.
template <class P>
concept Potential = requires(const P& model, const Vec<P::dim>& q) {
    { P::dim } -> std::convertible_to<int>;
    { model.energy(q) } -> std::convertible_to<double>;
    { model.gradient(q) } -> std::convertible_to<Vec<P::dim>>;
    { model.domain() } -> std::convertible_to<Domain<P::dim>>;
    { model.name() } -> std::convertible_to<std::string>;
};

template <class P>
concept HasHessian = Potential<P> && requires(const P& model, const Vec<P::dim>& q) {
    { model.hessian(q) } -> std::convertible_to<Mat<P::dim>>;
};

/// Hessian of V: analytic when the model provides one, else centered
/// differences of the gradient.
template <Potential P>
Mat<P::dim> hessian(const P& model, const Vec<P::dim>& q, double step = 1e-5) {
    if constexpr (HasHessian<P>) {
        return model.hessian(q);
    } else {
        constexpr int D = P::dim;
        Mat<D> H;
        for (int k = 0; k < D; ++k) {
            Vec<D> qp = q;
            Vec<D> qm = q;
            qp[k] += step;
            qm[k] -= step;
            H.col(k) = (model.gradient(qp) - model.gradient(qm)) / (2.0 * step);
        }
        return 0.5 * (H + H.transpose());
    }
}

/// V = 1 + 3cos(2πq) + 3cos²(2πq) − cos³(2πq) on the periodic unit interval.
/// Minima near q ≈ 0.318 and q ≈ 0.682, barriers at q = 0 (V = 6) and q = 0.5 (V = 2).
class PeriodicDoubleWell {
public:
    static constexpr int dim = 1;

    [[nodiscard]] static double value(double q) {
        const double c = std::cos(kTwoPi * q);
        return 1.0 + 3.0 * c + 3.0 * c * c - c * c * c;
    }
    [[nodiscard]] static double derivative(double q) {
        const double c = std::cos(kTwoPi * q);
        const double s = std::sin(kTwoPi * q);
        return -kTwoPi * s * (3.0 + 6.0 * c - 3.0 * c * c);
    }
    [[nodiscard]] static double second_derivative(double q) {
        const double c = std::cos(kTwoPi * q);
        const double s = std::sin(kTwoPi * q);
        const double w2 = kTwoPi * kTwoPi;
        return -w2 * c * (3.0 + 6.0 * c - 3.0 * c * c) + w2 * s * s * (6.0 - 6.0 * c);
    }

    [[nodiscard]] double energy(const Vec<1>& q) const { return value(q[0]); }
    [[nodiscard]] Vec<1> gradient(const Vec<1>& q) const { return Vec<1>(derivative(q[0])); }
    [[nodiscard]] Mat<1> hessian(const Vec<1>& q) const { return Mat<1>(second_derivative(q[0])); }
    [[nodiscard]] Domain<1> domain() const { return periodic_interval(); }
    [[nodiscard]] std::string name() const { return "double_well_1d"; }
};

inline PeriodicDoubleWell builtin_periodic_double_well() { return {}; }

/// V(q1, q2) = V_dw(q1) + ω²q2²/2; q1 periodic on [0,1), q2 reflecting on [−L, L].
class SeparableDoubleWell2D {
public:
    static constexpr int dim = 2;

    explicit SeparableDoubleWell2D(double omega = 4.0, double half_width = 1.5)
        : omega_(omega), half_width_(half_width) {
        require(omega > 0.0, "separable double well: omega must be positive");
        require(half_width > 0.0, "separable double well: half width must be positive");
    }

    [[nodiscard]] double energy(const Vec<2>& q) const {
        return PeriodicDoubleWell::value(q[0]) + 0.5 * omega_ * omega_ * q[1] * q[1];
    }
    [[nodiscard]] Vec<2> gradient(const Vec<2>& q) const {
        return {PeriodicDoubleWell::derivative(q[0]), omega_ * omega_ * q[1]};
    }
    [[nodiscard]] Mat<2> hessian(const Vec<2>& q) const {
        Mat<2> H = Mat<2>::Zero();
        H(0, 0) = PeriodicDoubleWell::second_derivative(q[0]);
        H(1, 1) = omega_ * omega_;
        return H;
    }
    [[nodiscard]] Domain<2> domain() const {
        return Domain<2>{{0.0, -half_width_}, {1.0, half_width_}, {true, false}};
    }
    [[nodiscard]] std::string name() const { return "separable_double_well_2d"; }
    [[nodiscard]] double omega() const { return omega_; }

private:
    double omega_;
    double half_width_;
};

/// Constant potential; pure diffusion.
template <int Dim>
class FlatPotential {
public:
    static constexpr int dim = Dim;

    explicit FlatPotential(Domain<Dim> domain, double level = 0.0) : domain_(domain), level_(level) {}

    [[nodiscard]] double energy(const Vec<Dim>&) const { return level_; }
    [[nodiscard]] Vec<Dim> gradient(const Vec<Dim>&) const { return Vec<Dim>::Zero(); }
    [[nodiscard]] Mat<Dim> hessian(const Vec<Dim>&) const { return Mat<Dim>::Zero(); }
    [[nodiscard]] Domain<Dim> domain() const { return domain_; }
    [[nodiscard]] std::string name() const { return "flat"; }

private:
    Domain<Dim> domain_;
    double level_;
};

/// V = Σ k_i (q_i − c_i)² / 2.
template <int Dim>
class HarmonicPotential {
public:
    static constexpr int dim = Dim;

    HarmonicPotential(Vec<Dim> stiffness, Vec<Dim> center, Domain<Dim> domain)
        : stiffness_(std::move(stiffness)), center_(std::move(center)), domain_(domain) {}

    [[nodiscard]] double energy(const Vec<Dim>& q) const {
        return 0.5 * (stiffness_.array() * (q - center_).array().square()).sum();
    }
    [[nodiscard]] Vec<Dim> gradient(const Vec<Dim>& q) const {
        return (stiffness_.array() * (q - center_).array()).matrix();
    }
    [[nodiscard]] Mat<Dim> hessian(const Vec<Dim>&) const { return stiffness_.asDiagonal(); }
    [[nodiscard]] Domain<Dim> domain() const { return domain_; }
    [[nodiscard]] std::string name() const { return "harmonic"; }

private:
    Vec<Dim> stiffness_;
    Vec<Dim> center_;
    Domain<Dim> domain_;
};

/// Periodic trigonometric series V = a₀ + Σ_k a_k cos(2πkx/L) + b_k sin(2πkx/L),
/// x = q − lo, on [lo, hi). cos_coeffs[0] is the constant term; sin_coeffs[0] is unused.
class TrigSeriesPotential {
public:
    static constexpr int dim = 1;

    TrigSeriesPotential(std::vector<double> cos_coeffs, std::vector<double> sin_coeffs,
                        double lo = 0.0, double hi = 1.0)
        : a_(std::move(cos_coeffs)), b_(std::move(sin_coeffs)), lo_(lo), hi_(hi) {
        require(hi > lo, "trig potential: empty period");
        require(!a_.empty() || !b_.empty(), "trig potential: no coefficients");
    }

    [[nodiscard]] double energy(const Vec<1>& q) const { return eval(q[0], 0); }
    [[nodiscard]] Vec<1> gradient(const Vec<1>& q) const { return Vec<1>(eval(q[0], 1)); }
    [[nodiscard]] Mat<1> hessian(const Vec<1>& q) const { return Mat<1>(eval(q[0], 2)); }
    [[nodiscard]] Domain<1> domain() const { return periodic_interval(lo_, hi_); }
    [[nodiscard]] std::string name() const { return "trig_series"; }

private:
    [[nodiscard]] double eval(double q, int order) const {
        const double w = kTwoPi / (hi_ - lo_);
        const double x = q - lo_;
        double v = (order == 0 && !a_.empty()) ? a_[0] : 0.0;
        const std::size_t n = std::max(a_.size(), b_.size());
        for (std::size_t k = 1; k < n; ++k) {
            const double kw = static_cast<double>(k) * w;
            const double c = std::cos(kw * x);
            const double s = std::sin(kw * x);
            const double ak = k < a_.size() ? a_[k] : 0.0;
            const double bk = k < b_.size() ? b_[k] : 0.0;
            switch (order) {
                case 0: v += ak * c + bk * s; break;
                case 1: v += kw * (-ak * s + bk * c); break;
                default: v += -kw * kw * (ak * c + bk * s); break;
            }
        }
        return v;
    }

    std::vector<double> a_;
    std::vector<double> b_;
    double lo_;
    double hi_;
};

/// V = Σ c_k q^k on a reflecting interval.
class PolynomialPotential {
public:
    static constexpr int dim = 1;

    PolynomialPotential(std::vector<double> coeffs, double lo, double hi)
        : c_(std::move(coeffs)), lo_(lo), hi_(hi) {
        require(hi > lo, "polynomial potential: empty interval");
        require(!c_.empty(), "polynomial potential: no coefficients");
    }

    [[nodiscard]] double energy(const Vec<1>& q) const { return eval(q[0], 0); }
    [[nodiscard]] Vec<1> gradient(const Vec<1>& q) const { return Vec<1>(eval(q[0], 1)); }
    [[nodiscard]] Mat<1> hessian(const Vec<1>& q) const { return Mat<1>(eval(q[0], 2)); }
    [[nodiscard]] Domain<1> domain() const { return reflecting_interval(lo_, hi_); }
    [[nodiscard]] std::string name() const { return "polynomial"; }

private:
    [[nodiscard]] double eval(double x, int order) const {
        double v = 0.0;
        for (std::size_t k = c_.size(); k-- > static_cast<std::size_t>(order);) {
            double factor = 1.0;
            for (int j = 0; j < order; ++j) {
                factor *= static_cast<double>(k - j);
            }
            v = v * x + factor * c_[k];
        }
        return v;
    }

    std::vector<double> c_;
    double lo_;
    double hi_;
};

}  // namespace pseudogen
