#pragma once

#include "linalg.hpp"
#include "parallel.hpp"
#include "potentials.hpp"
#include "rng.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <concepts>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace pseudogen {

template <int Dim>
struct SimConfig {
    double beta = 1.0;
    Mat<Dim> friction = Mat<Dim>::Identity();
    Mat<Dim> mass = Mat<Dim>::Identity();
    double dt = 1e-3;
    std::size_t n_steps = 0;
    std::uint64_t master_seed = 0;

    /// Scalar friction and mass times the identity.
    static SimConfig isotropic(double beta, double gamma, double mass = 1.0, double dt = 1e-3) {
        SimConfig cfg;
        cfg.beta = beta;
        cfg.friction = gamma * Mat<Dim>::Identity();
        cfg.mass = mass * Mat<Dim>::Identity();
        cfg.dt = dt;
        return cfg;
    }

    /// Checks β, dt, symmetry, and positive definiteness of M and γ. A zero
    /// friction matrix is accepted when allow_zero_friction is set
    /// (Hamiltonian limit of the Langevin integrator).
    void validate(bool allow_zero_friction = false) const {
        require(beta > 0.0 && std::isfinite(beta), "SimConfig: beta must be positive");
        require(dt > 0.0 && std::isfinite(dt), "SimConfig: dt must be positive");
        require((mass - mass.transpose()).norm() <= 1e-12 * mass.norm(), "SimConfig: mass is not symmetric");
        require(mass.llt().info() == Eigen::Success, "SimConfig: mass is not positive definite");
        if (allow_zero_friction && friction.isZero(0.0)) {
            return;
        }
        require((friction - friction.transpose()).norm() <= 1e-12 * friction.norm(),
                "SimConfig: friction is not symmetric");
        require(friction.llt().info() == Eigen::Success, "SimConfig: friction is not positive definite");
    }

    /// σ with σσᵀ = 2γ/β (lower Cholesky factor).
    [[nodiscard]] Mat<Dim> noise_amplitude() const {
        if (friction.isZero(0.0)) {
            return Mat<Dim>::Zero();
        }
        return Mat<Dim>((2.0 / beta) * friction).llt().matrixL();
    }
};

template <int Dim>
struct SimState {
    Vec<Dim> q = Vec<Dim>::Zero();
    Vec<Dim> p = Vec<Dim>::Zero();
    double t = 0.0;
};

template <class R>
concept NormalSource = requires(R& r) {
    { r.normal() } -> std::convertible_to<double>;
};

namespace detail {

// Symmetric PSD square root factor via eigen-decomposition; tolerates a
// singular covariance (γ = 0 gives exactly zero noise).
template <int Dim>
Mat<Dim> psd_factor(const Mat<Dim>& cov) {
    Eigen::SelfAdjointEigenSolver<Mat<Dim>> es(0.5 * (cov + cov.transpose()));
    Vec<Dim> ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

template <int Dim, class R>
Vec<Dim> draw_normal(R& rng) {
    Vec<Dim> xi;
    for (int k = 0; k < Dim; ++k) {
        xi[k] = rng.normal();
    }
    return xi;
}

template <Potential P>
Vec<P::dim> checked_gradient(const P& model, const Vec<P::dim>& q) {
    Vec<P::dim> g = model.gradient(q);
    if (!g.allFinite()) {
        throw NumericalError("non-finite force at q = " + format_point<P::dim>(q));
    }
    return g;
}

template <int Dim>
Mat<Dim> matrix_exponential(const Mat<Dim>& a) {
    return Mat<Dim>(expm(Matrix(a)));
}

}  // namespace detail

/// BAOAB splitting for dq = M⁻¹p dt, dp = −∇V dt − γM⁻¹p dt + σ dW with an
/// exact Ornstein–Uhlenbeck O-step over the full dt.
template <Potential P>
class LangevinIntegrator {
public:
    static constexpr int dim = P::dim;

    LangevinIntegrator(P model, SimConfig<dim> cfg) : model_(std::move(model)), cfg_(std::move(cfg)) {
        cfg_.validate(true);
        domain_ = model_.domain();
        inv_mass_ = cfg_.mass.inverse();
        damping_ = detail::matrix_exponential<dim>(-cfg_.friction * inv_mass_ * cfg_.dt);
        const Mat<dim> cov = (cfg_.mass - damping_ * cfg_.mass * damping_.transpose()) / cfg_.beta;
        noise_ = detail::psd_factor<dim>(cov);
    }

    /// n BAOAB steps; the force is evaluated once per step.
    template <NormalSource R>
    void advance(SimState<dim>& s, std::size_t n, R& rng) const {
        const double half = 0.5 * cfg_.dt;
        Vec<dim> force = detail::checked_gradient(model_, s.q);
        for (std::size_t k = 0; k < n; ++k) {
            s.p -= half * force;
            s.q += half * (inv_mass_ * s.p);
            domain_.fold_reflect(s.q, s.p);
            s.p = damping_ * s.p + noise_ * detail::draw_normal<dim>(rng);
            s.q += half * (inv_mass_ * s.p);
            domain_.fold_reflect(s.q, s.p);
            force = detail::checked_gradient(model_, s.q);
            s.p -= half * force;
        }
        s.t += static_cast<double>(n) * cfg_.dt;
    }

    template <NormalSource R>
    [[nodiscard]] SimState<dim> step(SimState<dim> s, R& rng) const {
        advance(s, 1, rng);
        return s;
    }

    [[nodiscard]] double hamiltonian(const SimState<dim>& s) const {
        return model_.energy(s.q) + 0.5 * s.p.dot(inv_mass_ * s.p);
    }
    [[nodiscard]] const SimConfig<dim>& config() const { return cfg_; }
    [[nodiscard]] const P& model() const { return model_; }
    /// Covariance factor L of the O-step noise, LLᵀ = (M − AMAᵀ)/β.
    [[nodiscard]] const Mat<dim>& momentum_noise() const { return noise_; }
    [[nodiscard]] const Mat<dim>& momentum_damping() const { return damping_; }

private:
    P model_;
    SimConfig<dim> cfg_;
    Domain<dim> domain_;
    Mat<dim> inv_mass_;
    Mat<dim> damping_;
    Mat<dim> noise_;
};

/// Euler–Maruyama for γ dq = −∇V dt + σ dW; momenta are left untouched.
template <Potential P>
class SmoluchowskiIntegrator {
public:
    static constexpr int dim = P::dim;

    SmoluchowskiIntegrator(P model, SimConfig<dim> cfg) : model_(std::move(model)), cfg_(std::move(cfg)) {
        cfg_.validate(false);
        domain_ = model_.domain();
        mobility_ = cfg_.friction.inverse();
        noise_ = Mat<dim>((2.0 * cfg_.dt / cfg_.beta) * mobility_).llt().matrixL();
    }

    template <NormalSource R>
    void advance(SimState<dim>& s, std::size_t n, R& rng) const {
        for (std::size_t k = 0; k < n; ++k) {
            const Vec<dim> force = detail::checked_gradient(model_, s.q);
            s.q += -cfg_.dt * (mobility_ * force) + noise_ * detail::draw_normal<dim>(rng);
            domain_.fold_reflect(s.q);
        }
        s.t += static_cast<double>(n) * cfg_.dt;
    }

    template <NormalSource R>
    [[nodiscard]] SimState<dim> step(SimState<dim> s, R& rng) const {
        advance(s, 1, rng);
        return s;
    }

    [[nodiscard]] const SimConfig<dim>& config() const { return cfg_; }
    /// L with LLᵀ = 2γ⁻¹dt/β.
    [[nodiscard]] const Mat<dim>& increment_noise() const { return noise_; }

private:
    P model_;
    SimConfig<dim> cfg_;
    Domain<dim> domain_;
    Mat<dim> mobility_;
    Mat<dim> noise_;
};

/// One Langevin step. Builds the integrator on every call; prefer
/// LangevinIntegrator::advance inside loops.
template <Potential P, NormalSource R>
SimState<P::dim> step_langevin(const SimState<P::dim>& state, const SimConfig<P::dim>& cfg, const P& model,
                               R& rng) {
    return LangevinIntegrator<P>(model, cfg).step(state, rng);
}

template <Potential P, NormalSource R>
SimState<P::dim> step_smoluchowski(const SimState<P::dim>& state, const SimConfig<P::dim>& cfg, const P& model,
                                   R& rng) {
    return SmoluchowskiIntegrator<P>(model, cfg).step(state, rng);
}

/// What the generalized-coordinate Smoluchowski step needs at a point u:
/// the friction γ(u), the force −∇Ṽ(u), and the geometric drift g(u).
template <class C>
concept GeneralizedDynamics = requires(const C& ctx, const Vec<C::dim>& u, double beta) {
    { ctx.friction(u) } -> std::convertible_to<Mat<C::dim>>;
    { ctx.force(u) } -> std::convertible_to<Vec<C::dim>>;
    { ctx.geometric_drift(u, beta) } -> std::convertible_to<Vec<C::dim>>;
    { ctx.domain() } -> std::convertible_to<Domain<C::dim>>;
};

/// Euler–Maruyama (Itô) step of γ(u) du = (−∇Ṽ(u) + g(u)) dt + σ(u) dW,
/// σσᵀ = 2γ(u)/β. Only β and dt are read from cfg.
template <GeneralizedDynamics C, NormalSource R>
SimState<C::dim> step_generalized_smoluchowski(SimState<C::dim> state, const SimConfig<C::dim>& cfg, const C& ctx,
                                               R& rng) {
    constexpr int D = C::dim;
    const Mat<D> gamma = ctx.friction(state.q);
    Eigen::LLT<Mat<D>> llt(gamma);
    if (llt.info() != Eigen::Success || (gamma - gamma.transpose()).norm() > 1e-12 * gamma.norm()) {
        throw NumericalError("friction is not positive definite at u = " + format_point<D>(state.q));
    }
    const Vec<D> drive = ctx.force(state.q) + ctx.geometric_drift(state.q, cfg.beta);
    if (!drive.allFinite()) {
        throw NumericalError("non-finite drift at u = " + format_point<D>(state.q));
    }
    // Noise γ⁻¹σ dW has covariance 2γ⁻¹dt/β; with γ = LLᵀ use L⁻ᵀξ.
    const Vec<D> xi = detail::draw_normal<D>(rng);
    const Vec<D> noise = std::sqrt(2.0 * cfg.dt / cfg.beta) * llt.matrixU().solve(xi);
    state.q += cfg.dt * llt.solve(drive) + noise;
    ctx.domain().fold_reflect(state.q);
    state.t += cfg.dt;
    return state;
}

template <int Dim>
struct CanonicalSample {
    std::vector<SimState<Dim>> states;
    double acceptance_rate = 0.0;
    double proposal_width = 0.0;
    std::vector<std::string> warnings;
};

struct MetropolisSettings {
    std::size_t burn_in = 1000;
    std::size_t thinning = 10;
    std::size_t samples_per_chain = 4096;
    double target_acceptance = 0.4;
};

/// Draws n canonical states: q by random-walk Metropolis on exp(−βV) with
/// the proposal width tuned during burn-in, p exactly from N(0, M/β).
/// Chains run on independent streams, so the result does not depend on
/// the thread count.
template <Potential P>
CanonicalSample<P::dim> sample_canonical(std::size_t n, const SimConfig<P::dim>& cfg, const P& model,
                                         const StreamFactory& streams, int threads = 1,
                                         MetropolisSettings settings = {}) {
    constexpr int D = P::dim;
    require(n >= 1, "sample_canonical: need at least one sample");
    require(settings.thinning >= 1 && settings.samples_per_chain >= 1, "sample_canonical: bad chain settings");
    cfg.validate(true);
    const Domain<D> dom = model.domain();
    const Mat<D> p_factor = Mat<D>(cfg.mass / cfg.beta).llt().matrixL();
    double min_len = dom.length(0);
    for (int a = 1; a < D; ++a) {
        min_len = std::min(min_len, dom.length(a));
    }

    const std::size_t chains = (n + settings.samples_per_chain - 1) / settings.samples_per_chain;
    CanonicalSample<D> out;
    out.states.resize(n);
    std::vector<std::size_t> accepted(chains, 0);
    std::vector<std::size_t> proposed(chains, 0);
    std::vector<double> widths(chains, 0.0);

    parallel_for(chains, threads, [&](std::size_t c) {
        RandomStream rng = streams.stream(c);
        Vec<D> q;
        for (int a = 0; a < D; ++a) {
            q[a] = dom.lo[a] + rng.uniform() * dom.length(a);
        }
        double energy = model.energy(q);
        double width = 0.1 * min_len;
        std::size_t window_accept = 0;
        auto propose = [&](bool count) {
            Vec<D> trial = q + width * detail::draw_normal<D>(rng);
            dom.fold(trial);
            bool ok = false;
            if (dom.contains(trial)) {
                const double e = model.energy(trial);
                ok = std::log(rng.uniform()) < -cfg.beta * (e - energy);
                if (ok) {
                    q = trial;
                    energy = e;
                }
            }
            if (count) {
                ++proposed[c];
                accepted[c] += ok ? 1 : 0;
            }
            return ok;
        };
        for (std::size_t k = 0; k < settings.burn_in; ++k) {
            window_accept += propose(false) ? 1 : 0;
            if ((k + 1) % 50 == 0) {
                const double rate = static_cast<double>(window_accept) / 50.0;
                width *= std::exp(2.0 * (rate - settings.target_acceptance));
                width = std::clamp(width, 1e-6 * min_len, min_len);
                window_accept = 0;
            }
        }
        widths[c] = width;
        const std::size_t first = c * settings.samples_per_chain;
        const std::size_t last = std::min(n, first + settings.samples_per_chain);
        for (std::size_t i = first; i < last; ++i) {
            for (std::size_t k = 0; k < settings.thinning; ++k) {
                propose(true);
            }
            SimState<D>& s = out.states[i];
            s.q = q;
            s.p = p_factor * detail::draw_normal<D>(rng);
            s.t = 0.0;
        }
    });

    std::size_t acc = 0;
    std::size_t tot = 0;
    double width_sum = 0.0;
    for (std::size_t c = 0; c < chains; ++c) {
        acc += accepted[c];
        tot += proposed[c];
        width_sum += widths[c];
    }
    out.acceptance_rate = tot ? static_cast<double>(acc) / static_cast<double>(tot) : 0.0;
    out.proposal_width = width_sum / static_cast<double>(chains);
    if (out.acceptance_rate < 0.1 || out.acceptance_rate > 0.9) {
        out.warnings.push_back("metropolis acceptance rate " + format_double(out.acceptance_rate) +
                               " outside [0.1, 0.9]");
    }
    return out;
}

/// C(t) = M − A M Aᵀ with A = exp(−γM⁻¹t); equals M(I − exp(−2γM⁻¹t)) when
/// γ and M commute. The momentum covariance at time t is C(t)/β.
template <int Dim>
Mat<Dim> ou_covariance(double t, const SimConfig<Dim>& cfg) {
    require(t > 0.0, "ou_covariance: t must be positive");
    const Mat<Dim> a = detail::matrix_exponential<Dim>(-cfg.friction * cfg.mass.inverse() * t);
    return cfg.mass - a * cfg.mass * a.transpose();
}

/// Transition density K(t, p, r) of the momentum Ornstein–Uhlenbeck process
/// dp = −γM⁻¹p dt + σ dW started at r.
template <int Dim>
double ou_kernel(double t, const Vec<Dim>& p, const Vec<Dim>& r, const SimConfig<Dim>& cfg) {
    require(t > 0.0, "ou_kernel: t must be positive");
    const Mat<Dim> a = detail::matrix_exponential<Dim>(-cfg.friction * cfg.mass.inverse() * t);
    const Mat<Dim> cov = (cfg.mass - a * cfg.mass * a.transpose()) / cfg.beta;
    Eigen::LLT<Mat<Dim>> llt(cov);
    if (llt.info() != Eigen::Success) {
        throw NumericalError("ou_kernel: covariance not positive definite at t = " + format_double(t));
    }
    const Vec<Dim> d = p - a * r;
    const Vec<Dim> z = llt.matrixL().solve(d);
    double log_det = 0.0;
    for (int k = 0; k < Dim; ++k) {
        log_det += 2.0 * std::log(llt.matrixL()(k, k));
    }
    return std::exp(-0.5 * z.squaredNorm() - 0.5 * log_det - 0.5 * Dim * std::log(kTwoPi));
}

/// Stationary momentum density f_P = N(0, M/β).
template <int Dim>
double momentum_density(const Vec<Dim>& p, const SimConfig<Dim>& cfg) {
    const Mat<Dim> cov = cfg.mass / cfg.beta;
    Eigen::LLT<Mat<Dim>> llt(cov);
    const Vec<Dim> z = llt.matrixL().solve(p);
    double log_det = 0.0;
    for (int k = 0; k < Dim; ++k) {
        log_det += 2.0 * std::log(llt.matrixL()(k, k));
    }
    return std::exp(-0.5 * z.squaredNorm() - 0.5 * log_det - 0.5 * Dim * std::log(kTwoPi));
}

/// Header `t,q1..qd,p1..pd`, one row per state.
template <int Dim>
void write_trajectory_csv(std::ostream& os, const std::vector<SimState<Dim>>& states) {
    os << 't';
    for (int k = 1; k <= Dim; ++k) {
        os << ",q" << k;
    }
    for (int k = 1; k <= Dim; ++k) {
        os << ",p" << k;
    }
    os << '\n';
    for (const auto& s : states) {
        os << format_double(s.t);
        for (int k = 0; k < Dim; ++k) {
            os << ',' << format_double(s.q[k]);
        }
        for (int k = 0; k < Dim; ++k) {
            os << ',' << format_double(s.p[k]);
        }
        os << '\n';
    }
}

/// Runs an integrator for n steps and stores every stride-th state
/// (including the initial one).
template <class Integrator, NormalSource R>
std::vector<SimState<Integrator::dim>> record_trajectory(const Integrator& integrator, SimState<Integrator::dim> s,
                                                          std::size_t n, std::size_t stride, R& rng) {
    require(stride >= 1, "record_trajectory: stride must be positive");
    std::vector<SimState<Integrator::dim>> out{s};
    for (std::size_t done = 0; done < n;) {
        const std::size_t chunk = std::min(stride, n - done);
        integrator.advance(s, chunk, rng);
        done += chunk;
        if (chunk == stride || done == n) {
            out.push_back(s);
        }
    }
    return out;
}

}  // namespace pseudogen
