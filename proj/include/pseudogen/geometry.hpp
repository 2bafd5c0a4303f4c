#pragma once

#include "potentials.hpp"
#include "quadrature.hpp"
#include "sde.hpp"

#include <boost/random/sobol.hpp>

#include <functional>
#include <ostream>
#include <vector>

namespace pseudogen {

/// Diffeomorphism Φ: Q′ → Q from generalized coordinates u to Cartesian q,
/// with Jacobian J(u) = ∂Φ/∂u (J_ik = ∂Φ_i/∂u_k). The validity box is the
/// u-domain on which det J > 0 is checked.
template <int Dim>
struct CoordinateTransform {
    std::string name;
    std::function<Vec<Dim>(const Vec<Dim>&)> forward;
    std::function<Vec<Dim>(const Vec<Dim>&)> inverse;
    std::function<Mat<Dim>(const Vec<Dim>&)> jacobian;
    /// ∂J/∂u_k, optional; central differences of the Jacobian otherwise.
    std::function<Mat<Dim>(const Vec<Dim>&, int)> jacobian_derivative;
    Domain<Dim> validity;

    [[nodiscard]] Mat<Dim> jacobian_partial(const Vec<Dim>& u, int k, double step = 1e-5) const {
        if (jacobian_derivative) {
            return jacobian_derivative(u, k);
        }
        Vec<Dim> up = u;
        Vec<Dim> um = u;
        up[k] += step;
        um[k] -= step;
        return (jacobian(up) - jacobian(um)) / (2.0 * step);
    }

    /// h = JᵀJ.
    [[nodiscard]] Mat<Dim> metric(const Vec<Dim>& u) const {
        const Mat<Dim> j = jacobian(u);
        return j.transpose() * j;
    }

    /// Mass matrix in u: JᵀMJ.
    [[nodiscard]] Mat<Dim> mass_metric(const Vec<Dim>& u, const Mat<Dim>& mass) const {
        const Mat<Dim> j = jacobian(u);
        return j.transpose() * mass * j;
    }

    /// det J > 0 and Φ⁻¹(Φ(u)) = u to 1e-10 on n Sobol points of the box.
    void validate(std::size_t n = 1000) const {
        boost::random::sobol qrng(Dim);
        const double scale = 1.0 / (static_cast<double>(boost::random::sobol::max()) + 1.0);
        for (std::size_t s = 0; s < n; ++s) {
            Vec<Dim> u;
            for (int a = 0; a < Dim; ++a) {
                const double x = (static_cast<double>(qrng()) + 0.5) * scale;
                u[a] = validity.lo[a] + x * validity.length(a);
            }
            const double det = jacobian(u).determinant();
            if (!(det > 0.0)) {
                throw InvalidArgument("transform " + name + ": det J = " + format_double(det) + " at u = " +
                                      format_point<Dim>(u));
            }
            const Vec<Dim> back = validity.difference(inverse(forward(u)), u);
            if (back.norm() > 1e-10) {
                throw InvalidArgument("transform " + name + ": inverse mismatch " + format_double(back.norm()) +
                                      " at u = " + format_point<Dim>(u));
            }
        }
    }
};

template <int Dim>
CoordinateTransform<Dim> identity_transform(const Domain<Dim>& box) {
    CoordinateTransform<Dim> t;
    t.name = "identity";
    t.forward = [](const Vec<Dim>& u) { return u; };
    t.inverse = [](const Vec<Dim>& q) { return q; };
    t.jacobian = [](const Vec<Dim>&) { return Mat<Dim>::Identity(); };
    t.jacobian_derivative = [](const Vec<Dim>&, int) { return Mat<Dim>::Zero(); };
    t.validity = box;
    return t;
}

/// Φ(u) = u + A sin(2πu) on the periodic unit interval; a diffeomorphism
/// for |A| < 1/(2π). The inverse is found by Newton iteration.
inline CoordinateTransform<1> periodic_shear_transform(double amplitude = 0.1) {
    CoordinateTransform<1> t;
    t.name = "periodic_shear";
    t.forward = [amplitude](const Vec<1>& u) { return Vec<1>(u[0] + amplitude * std::sin(kTwoPi * u[0])); };
    t.jacobian = [amplitude](const Vec<1>& u) { return Mat<1>(1.0 + kTwoPi * amplitude * std::cos(kTwoPi * u[0])); };
    t.jacobian_derivative = [amplitude](const Vec<1>& u, int) {
        return Mat<1>(-kTwoPi * kTwoPi * amplitude * std::sin(kTwoPi * u[0]));
    };
    t.inverse = [amplitude](const Vec<1>& q) {
        double u = q[0];
        for (int it = 0; it < 100; ++it) {
            const double f = u + amplitude * std::sin(kTwoPi * u) - q[0];
            const double df = 1.0 + kTwoPi * amplitude * std::cos(kTwoPi * u);
            const double step = f / df;
            u -= step;
            if (std::abs(step) < 1e-15) {
                break;
            }
        }
        return Vec<1>(u);
    };
    t.validity = periodic_interval();
    t.validate();
    return t;
}

/// Polar map (r, θ) ↦ (r cos 2πθ, r sin 2πθ) on the annulus r ∈ [r_in, r_out],
/// θ periodic on [0, 1).
inline CoordinateTransform<2> annulus_transform(double r_in = 0.5, double r_out = 1.5) {
    require(r_in > 0.0 && r_out > r_in, "annulus_transform: need 0 < r_in < r_out");
    CoordinateTransform<2> t;
    t.name = "annulus";
    t.forward = [](const Vec<2>& u) {
        return Vec<2>(u[0] * std::cos(kTwoPi * u[1]), u[0] * std::sin(kTwoPi * u[1]));
    };
    t.inverse = [](const Vec<2>& q) {
        double theta = std::atan2(q[1], q[0]) / kTwoPi;
        if (theta < 0.0) {
            theta += 1.0;
        }
        return Vec<2>(q.norm(), theta);
    };
    t.jacobian = [](const Vec<2>& u) {
        const double c = std::cos(kTwoPi * u[1]);
        const double s = std::sin(kTwoPi * u[1]);
        Mat<2> j;
        j << c, -kTwoPi * u[0] * s, s, kTwoPi * u[0] * c;
        return j;
    };
    t.jacobian_derivative = [](const Vec<2>& u, int k) {
        const double c = std::cos(kTwoPi * u[1]);
        const double s = std::sin(kTwoPi * u[1]);
        Mat<2> d;
        if (k == 0) {
            d << 0.0, -kTwoPi * s, 0.0, kTwoPi * c;
        } else {
            d << -kTwoPi * s, -kTwoPi * kTwoPi * u[0] * c, kTwoPi * c, -kTwoPi * kTwoPi * u[0] * s;
        }
        return d;
    };
    t.validity = Domain<2>{{r_in, 0.0}, {r_out, 1.0}, {false, true}};
    t.validate();
    return t;
}

/// Symmetric positive-definite friction γ(u) with optional analytic
/// partial derivatives.
template <int Dim>
struct FrictionField {
    std::function<Mat<Dim>(const Vec<Dim>&)> value;
    std::function<Mat<Dim>(const Vec<Dim>&, int)> derivative;

    [[nodiscard]] Mat<Dim> partial(const Vec<Dim>& u, int k, double step = 1e-5) const {
        if (derivative) {
            return derivative(u, k);
        }
        Vec<Dim> up = u;
        Vec<Dim> um = u;
        up[k] += step;
        um[k] -= step;
        return (value(up) - value(um)) / (2.0 * step);
    }
};

template <int Dim>
FrictionField<Dim> constant_friction(const Mat<Dim>& gamma) {
    return {[gamma](const Vec<Dim>&) { return gamma; }, [](const Vec<Dim>&, int) { return Mat<Dim>::Zero(); }};
}

/// γ̃(u) = J(u)ᵀ γ J(u) for a constant Cartesian friction γ.
template <int Dim>
FrictionField<Dim> pulled_back_friction(const CoordinateTransform<Dim>& t, const Mat<Dim>& gamma) {
    FrictionField<Dim> f;
    f.value = [t, gamma](const Vec<Dim>& u) {
        const Mat<Dim> j = t.jacobian(u);
        return Mat<Dim>(j.transpose() * gamma * j);
    };
    f.derivative = [t, gamma](const Vec<Dim>& u, int k) {
        const Mat<Dim> j = t.jacobian(u);
        const Mat<Dim> dj = t.jacobian_partial(u, k);
        return Mat<Dim>(dj.transpose() * gamma * j + j.transpose() * gamma * dj);
    };
    return f;
}

/// (γ̃, σ̃) = (JᵀγJ, Jᵀσ) at u. Checks that fluctuation–dissipation
/// 2γ = βσσᵀ carries over to the transformed pair whenever it holds.
template <int Dim>
std::pair<Mat<Dim>, Mat<Dim>> transform_coefficients(const Mat<Dim>& gamma, const Mat<Dim>& sigma, double beta,
                                                     const CoordinateTransform<Dim>& t, const Vec<Dim>& u) {
    const Mat<Dim> j = t.jacobian(u);
    const double det = j.determinant();
    if (!(std::abs(det) > 1e-14)) {
        throw NumericalError("transform_coefficients: singular Jacobian at u = " + format_point<Dim>(u));
    }
    Mat<Dim> gamma_u = j.transpose() * gamma * j;
    const Mat<Dim> sigma_u = j.transpose() * sigma;
    const double scale = std::max(1.0, gamma.norm());
    const bool fd_in = (2.0 * gamma - beta * sigma * sigma.transpose()).norm() <= 1e-12 * scale;
    if (fd_in) {
        const double scale_u = std::max(1.0, gamma_u.norm());
        const double defect = (2.0 * gamma_u - beta * sigma_u * sigma_u.transpose()).norm();
        if (defect > 1e-12 * scale_u) {
            throw NumericalError("transform_coefficients: fluctuation-dissipation lost, defect " +
                                 format_double(defect));
        }
    }
    return {gamma_u, sigma_u};
}

/// g_i = β⁻¹ Σ_{j,k} γ_ij (det γ)^{−1/2} ∂_k((det γ)^{1/2} γ^{kj}), evaluated as
/// β⁻¹ γ (½ tr(γ⁻¹∂_kγ) γ⁻¹ − γ⁻¹ ∂_kγ γ⁻¹) summed over the row index k.
template <int Dim>
Vec<Dim> geometric_drift(const FrictionField<Dim>& friction, double beta, const Vec<Dim>& u) {
    const Mat<Dim> g = friction.value(u);
    const double det = g.determinant();
    if (!(det > 0.0)) {
        throw NumericalError("geometric_drift: det gamma = " + format_double(det) + " at u = " + format_point<Dim>(u));
    }
    const Mat<Dim> inv = g.inverse();
    Vec<Dim> div = Vec<Dim>::Zero();  // div_j = Σ_k (det)^{-1/2} ∂_k((det)^{1/2} γ^{kj})
    for (int k = 0; k < Dim; ++k) {
        const Mat<Dim> dg = friction.partial(u, k);
        const Mat<Dim> term = 0.5 * (inv * dg).trace() * inv - inv * dg * inv;
        div += term.row(k).transpose();
    }
    return (g * div) / beta;
}

/// Generalized Smoluchowski dynamics in u for a Cartesian model V, a
/// transform Φ, and a friction field γ̃(u): force −∇_u V(Φ(u)), geometric
/// drift from geometric_drift. The mass matrix is kept only to document
/// that the dynamics does not depend on it.
template <Potential P>
class GeneralizedSmoluchowski {
public:
    static constexpr int dim = P::dim;

    GeneralizedSmoluchowski(P model, CoordinateTransform<dim> transform, FrictionField<dim> friction)
        : model_(std::move(model)), transform_(std::move(transform)), friction_(std::move(friction)) {}

    [[nodiscard]] Mat<dim> friction(const Vec<dim>& u) const { return friction_.value(u); }
    [[nodiscard]] Vec<dim> force(const Vec<dim>& u) const { return -potential_gradient(u); }
    [[nodiscard]] Vec<dim> potential_gradient(const Vec<dim>& u) const {
        return transform_.jacobian(u).transpose() * model_.gradient(transform_.forward(u));
    }
    [[nodiscard]] double potential(const Vec<dim>& u) const { return model_.energy(transform_.forward(u)); }
    [[nodiscard]] Vec<dim> geometric_drift(const Vec<dim>& u, double beta) const {
        return pseudogen::geometric_drift(friction_, beta, u);
    }
    [[nodiscard]] Domain<dim> domain() const { return transform_.validity; }
    [[nodiscard]] const CoordinateTransform<dim>& transform() const { return transform_; }
    [[nodiscard]] const FrictionField<dim>& friction_field() const { return friction_; }
    [[nodiscard]] const P& model() const { return model_; }

private:
    P model_;
    CoordinateTransform<dim> transform_;
    FrictionField<dim> friction_;
};

/// Regular node grid on a u-box (nodes at cell centers) for grid functions.
template <int Dim>
struct NodeGrid {
    Domain<Dim> box;
    std::array<int, Dim> points{};

    [[nodiscard]] double spacing(int a) const { return box.length(a) / points[a]; }
    [[nodiscard]] std::size_t size() const {
        std::size_t n = 1;
        for (int a = 0; a < Dim; ++a) {
            n *= static_cast<std::size_t>(points[a]);
        }
        return n;
    }
    [[nodiscard]] std::array<int, Dim> multi_index(std::size_t flat) const {
        std::array<int, Dim> idx{};
        for (int a = Dim - 1; a >= 0; --a) {
            idx[a] = static_cast<int>(flat % static_cast<std::size_t>(points[a]));
            flat /= static_cast<std::size_t>(points[a]);
        }
        return idx;
    }
    [[nodiscard]] std::size_t flat_index(const std::array<int, Dim>& idx) const {
        std::size_t flat = 0;
        for (int a = 0; a < Dim; ++a) {
            flat = flat * static_cast<std::size_t>(points[a]) + static_cast<std::size_t>(idx[a]);
        }
        return flat;
    }
    [[nodiscard]] Vec<Dim> node(std::size_t flat) const {
        const auto idx = multi_index(flat);
        Vec<Dim> u;
        for (int a = 0; a < Dim; ++a) {
            u[a] = box.lo[a] + (idx[a] + 0.5) * spacing(a);
        }
        return u;
    }
    template <class F>
    [[nodiscard]] Vector sample(F&& f) const {
        Vector v(static_cast<Eigen::Index>(size()));
        for (std::size_t i = 0; i < size(); ++i) {
            v[static_cast<Eigen::Index>(i)] = f(node(i));
        }
        return v;
    }
};

namespace detail {

// Central difference along an axis; one-sided at closed walls.
template <int Dim>
double grid_partial(const NodeGrid<Dim>& grid, const Vector& f, std::size_t flat, int axis) {
    auto idx = grid.multi_index(flat);
    const int n = grid.points[axis];
    const double h = grid.spacing(axis);
    auto at = [&](int k) {
        auto j = idx;
        j[axis] = k;
        return f[static_cast<Eigen::Index>(grid.flat_index(j))];
    };
    const int i = idx[axis];
    if (grid.box.periodic[axis]) {
        return (at((i + 1) % n) - at((i + n - 1) % n)) / (2.0 * h);
    }
    if (i == 0) {
        return (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h);
    }
    if (i == n - 1) {
        return (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) / (2.0 * h);
    }
    return (at(i + 1) - at(i - 1)) / (2.0 * h);
}

}  // namespace detail

/// Āψ = β⁻¹Δ̃ψ − ∇Ṽ·γ⁻¹∇ψ with Δ̃ψ = (det γ)^{−1/2} ∂_k((det γ)^{1/2} γ^{kj} ∂_jψ),
/// by nested central differences on the node grid.
template <int Dim>
Vector generalized_generator_apply(const Vector& psi, const FrictionField<Dim>& friction,
                                   const std::function<Vec<Dim>(const Vec<Dim>&)>& potential_gradient, double beta,
                                   const NodeGrid<Dim>& grid) {
    for (int a = 0; a < Dim; ++a) {
        require(grid.points[a] >= 16, "generalized_generator_apply: need at least 16 points per axis");
    }
    require(psi.size() == static_cast<Eigen::Index>(grid.size()), "generalized_generator_apply: size mismatch");
    const std::size_t n = grid.size();
    std::vector<Vec<Dim>> dpsi(n);
    std::vector<Mat<Dim>> inv(n);
    Vector sqrt_det(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const Mat<Dim> g = friction.value(grid.node(i));
        const double det = g.determinant();
        if (!(det > 0.0)) {
            throw NumericalError("generalized_generator_apply: det gamma <= 0 at u = " + format_point<Dim>(grid.node(i)));
        }
        inv[i] = g.inverse();
        sqrt_det[static_cast<Eigen::Index>(i)] = std::sqrt(det);
        for (int a = 0; a < Dim; ++a) {
            dpsi[i][a] = detail::grid_partial(grid, psi, i, a);
        }
    }
    Vector out = Vector::Zero(static_cast<Eigen::Index>(n));
    for (int k = 0; k < Dim; ++k) {
        Vector flux(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) {
            flux[static_cast<Eigen::Index>(i)] = sqrt_det[static_cast<Eigen::Index>(i)] * inv[i].row(k).dot(dpsi[i]);
        }
        for (std::size_t i = 0; i < n; ++i) {
            out[static_cast<Eigen::Index>(i)] +=
                detail::grid_partial(grid, flux, i, k) / (beta * sqrt_det[static_cast<Eigen::Index>(i)]);
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        out[static_cast<Eigen::Index>(i)] -= potential_gradient(grid.node(i)).dot(inv[i] * dpsi[i]);
    }
    return out;
}

/// Unnormalized invariant density (f_Q∘Φ)(u)·√det h(u) ∝ exp(−βV(Φ(u)))|det J(u)|.
template <Potential P>
double unnormalized_invariant_density(const CoordinateTransform<P::dim>& t, const P& model, double beta,
                                      const Vec<P::dim>& u) {
    return std::exp(-beta * model.energy(t.forward(u))) * std::sqrt(t.metric(u).determinant());
}

/// Invariant density of the generalized Smoluchowski dynamics, normalized
/// by quadrature over the transform's validity box.
template <Potential P>
class InvariantDensity {
public:
    InvariantDensity(CoordinateTransform<P::dim> t, P model, double beta)
        : t_(std::move(t)), model_(std::move(model)), beta_(beta) {
        norm_ = integrate_adaptive<P::dim>(
            [&](const Vec<P::dim>& u) { return unnormalized_invariant_density(t_, model_, beta_, u); }, t_.validity,
            1e-12);
        require(norm_ > 0.0 && std::isfinite(norm_), "InvariantDensity: normalization failed");
    }
    [[nodiscard]] double operator()(const Vec<P::dim>& u) const {
        return unnormalized_invariant_density(t_, model_, beta_, u) / norm_;
    }
    [[nodiscard]] double normalization() const { return norm_; }

private:
    CoordinateTransform<P::dim> t_;
    P model_;
    double beta_;
    double norm_ = 1.0;
};

template <Potential P>
double invariant_measure_density(const CoordinateTransform<P::dim>& t, const P& model, double beta,
                                 const Vec<P::dim>& u) {
    return InvariantDensity<P>(t, model, beta)(u);
}

/// `u1..ud,density` rows.
template <int Dim, class F>
void write_density_csv(std::ostream& os, const NodeGrid<Dim>& grid, F&& density) {
    for (int a = 1; a <= Dim; ++a) {
        os << 'u' << a << ',';
    }
    os << "density\n";
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const Vec<Dim> u = grid.node(i);
        for (int a = 0; a < Dim; ++a) {
            os << format_double(u[a]) << ',';
        }
        os << format_double(density(u)) << '\n';
    }
}

}  // namespace pseudogen
