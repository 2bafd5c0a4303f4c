#pragma once

#include "grid.hpp"
#include "operators.hpp"
#include "sde.hpp"
#include "stats.hpp"

#include <complex>
#include <vector>

namespace pseudogen {

/// Real trigonometric polynomial on a periodic interval [lo, hi):
/// f(x) = Σ_k a_k cos(kωx') + b_k sin(kωx'), x' = x − lo, ω = 2π/(hi − lo).
class TrigPolynomial {
public:
    TrigPolynomial(double lo, double hi, std::vector<double> cos_coeffs, std::vector<double> sin_coeffs)
        : lo_(lo), hi_(hi), a_(std::move(cos_coeffs)), b_(std::move(sin_coeffs)) {
        require(hi > lo, "TrigPolynomial: empty period");
        const std::size_t n = std::max(a_.size(), b_.size());
        a_.resize(n, 0.0);
        b_.resize(n, 0.0);
        if (!b_.empty()) {
            b_[0] = 0.0;
        }
    }

    /// Interpolant through values sampled at the cell centers lo + (j + ½)h
    /// of an even number of equal cells.
    static TrigPolynomial interpolate_cell_values(const Vector& values, double lo, double hi) {
        const auto n = values.size();
        require(n >= 2 && n % 2 == 0, "TrigPolynomial: need an even number of samples");
        const double h = (hi - lo) / static_cast<double>(n);
        const double w = kTwoPi / (hi - lo);
        const Eigen::Index half = n / 2;
        std::vector<double> a(static_cast<std::size_t>(half) + 1, 0.0);
        std::vector<double> b(static_cast<std::size_t>(half) + 1, 0.0);
        for (Eigen::Index k = 0; k <= half; ++k) {
            std::complex<double> c{0.0, 0.0};
            for (Eigen::Index j = 0; j < n; ++j) {
                const double phase = -kTwoPi * static_cast<double>(k * j % n) / static_cast<double>(n);
                c += values[j] * std::polar(1.0, phase);
            }
            c /= static_cast<double>(n);
            const double fac = (k == 0 || k == half) ? 1.0 : 2.0;
            const std::complex<double> d = fac * c * std::polar(1.0, -static_cast<double>(k) * w * 0.5 * h);
            a[static_cast<std::size_t>(k)] = d.real();
            b[static_cast<std::size_t>(k)] = -d.imag();
        }
        return TrigPolynomial(lo, hi, std::move(a), std::move(b));
    }

    /// Derivative of the given order (0 is the value).
    [[nodiscard]] double derivative(double x, int order) const {
        const double w = kTwoPi / (hi_ - lo_);
        const double theta = w * (x - lo_);
        const double c1 = std::cos(theta);
        const double s1 = std::sin(theta);
        double ck = 1.0;
        double sk = 0.0;
        double sum = 0.0;
        for (std::size_t k = 0; k < a_.size(); ++k) {
            if (k > 0) {
                const double cn = ck * c1 - sk * s1;
                sk = sk * c1 + ck * s1;
                ck = cn;
            }
            const double kw = static_cast<double>(k) * w;
            double scale = 1.0;
            for (int o = 0; o < order; ++o) {
                scale *= kw;
            }
            // d^m/dx^m of a cos + b sin cycles through (a c + b s), (−a s + b c), ...
            double term = 0.0;
            switch (order % 4) {
                case 0: term = a_[k] * ck + b_[k] * sk; break;
                case 1: term = -a_[k] * sk + b_[k] * ck; break;
                case 2: term = -a_[k] * ck - b_[k] * sk; break;
                default: term = a_[k] * sk - b_[k] * ck; break;
            }
            sum += scale * term;
        }
        return sum;
    }

    [[nodiscard]] double operator()(double x) const { return derivative(x, 0); }

    /// Σ_i c_i f_i for polynomials on the same interval.
    static TrigPolynomial combine(const std::vector<TrigPolynomial>& fs, const Vector& coeffs) {
        require(!fs.empty() && static_cast<Eigen::Index>(fs.size()) == coeffs.size(), "TrigPolynomial: bad combination");
        std::size_t n = 0;
        for (const auto& f : fs) {
            n = std::max(n, f.a_.size());
        }
        std::vector<double> a(n, 0.0);
        std::vector<double> b(n, 0.0);
        for (std::size_t i = 0; i < fs.size(); ++i) {
            for (std::size_t k = 0; k < fs[i].a_.size(); ++k) {
                a[k] += coeffs[static_cast<Eigen::Index>(i)] * fs[i].a_[k];
                b[k] += coeffs[static_cast<Eigen::Index>(i)] * fs[i].b_[k];
            }
        }
        return TrigPolynomial(fs.front().lo_, fs.front().hi_, std::move(a), std::move(b));
    }

    [[nodiscard]] std::size_t modes() const { return a_.empty() ? 0 : a_.size() - 1; }

private:
    double lo_;
    double hi_;
    std::vector<double> a_;
    std::vector<double> b_;
};

/// Constant, then cos and sin of each mode 1..max_mode.
inline std::vector<TrigPolynomial> fourier_basis(double lo, double hi, int max_mode) {
    require(max_mode >= 0, "fourier_basis: negative mode count");
    std::vector<TrigPolynomial> basis{TrigPolynomial(lo, hi, {1.0}, {})};
    for (int k = 1; k <= max_mode; ++k) {
        std::vector<double> c(static_cast<std::size_t>(k) + 1, 0.0);
        std::vector<double> s(static_cast<std::size_t>(k) + 1, 0.0);
        c.back() = 1.0;
        s.back() = 1.0;
        basis.emplace_back(lo, hi, c, std::vector<double>(static_cast<std::size_t>(k) + 1, 0.0));
        basis.emplace_back(lo, hi, std::vector<double>(static_cast<std::size_t>(k) + 1, 0.0), s);
    }
    return basis;
}

/// Gram–Schmidt (via Cholesky) of the functions in Σ_i w_i f(x_i) g(x_i).
inline std::vector<TrigPolynomial> orthonormalize(const std::vector<TrigPolynomial>& fs,
                                                  const std::vector<double>& points, const Vector& weights) {
    const auto m = static_cast<Eigen::Index>(fs.size());
    const auto n = static_cast<Eigen::Index>(points.size());
    Matrix values(n, m);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index k = 0; k < m; ++k) {
            values(i, k) = fs[static_cast<std::size_t>(k)](points[static_cast<std::size_t>(i)]);
        }
    }
    const Matrix gram = values.transpose() * weights.asDiagonal() * values;
    Eigen::LLT<Matrix> llt(gram);
    if (llt.info() != Eigen::Success) {
        throw NumericalError("orthonormalize: functions are linearly dependent on the points");
    }
    const Matrix coeffs = llt.matrixU().solve(Matrix::Identity(m, m));
    std::vector<TrigPolynomial> out;
    for (Eigen::Index k = 0; k < m; ++k) {
        out.push_back(TrigPolynomial::combine(fs, coeffs.col(k)));
    }
    return out;
}

/// Exact mean and variance of the displacement of BAOAB run on the
/// quadratic expansion of V about x0, started with p ~ N(0, M/β).
struct LinearizedMoments {
    std::vector<double> mean;
    std::vector<double> variance;
};

inline LinearizedMoments linearized_baoab_moments(double slope, double curvature, const SimConfig<1>& cfg,
                                                   const std::vector<std::size_t>& snapshot_steps) {
    const double m = cfg.mass(0, 0);
    const double dt = cfg.dt;
    const double h = 0.5 * dt;
    const double ca = std::exp(-cfg.friction(0, 0) * dt / m);
    const double noise_var = (1.0 - ca * ca) * m / cfg.beta;
    double mq = 0.0;
    double mp = 0.0;
    double cqq = 0.0;
    double cqp = 0.0;
    double cpp = m / cfg.beta;
    auto kick = [&] {
        mp += h * (-slope - curvature * mq);
        cpp = cpp - 2.0 * h * curvature * cqp + h * h * curvature * curvature * cqq;
        cqp = cqp - h * curvature * cqq;
    };
    auto drift = [&] {
        mq += h * mp / m;
        cqq = cqq + 2.0 * h / m * cqp + (h / m) * (h / m) * cpp;
        cqp = cqp + h / m * cpp;
    };
    LinearizedMoments out;
    std::size_t next = 0;
    const std::size_t last = snapshot_steps.empty() ? 0 : snapshot_steps.back();
    for (std::size_t k = 1; k <= last; ++k) {
        kick();
        drift();
        mp *= ca;
        cqp *= ca;
        cpp = ca * ca * cpp + noise_var;
        drift();
        kick();
        while (next < snapshot_steps.size() && snapshot_steps[next] == k) {
            out.mean.push_back(mq);
            out.variance.push_back(cqq);
            ++next;
        }
    }
    return out;
}

/// Monte Carlo estimates of E[f(X_t) − f(x0)] at several lags for one start
/// point x0 with p ~ N(0, M/β).
struct PointIncrements {
    Matrix mean;      ///< lags × functions
    Matrix variance;  ///< variance of each mean
    Eigen::MatrixXi control_order;
};

/// Pointwise estimator of S^t f(x0) − f(x0) for smooth periodic f in 1-D.
/// Each Langevin path is paired with a "shadow" path driven by the same
/// noise in the quadratic expansion of V about x0; the shadow displacement
/// is Gaussian with known moments, so a Taylor polynomial of f in the
/// shadow displacement is a zero-mean control variate. The control order
/// (0..4) is chosen per lag and function by smallest sample variance.
template <Potential P>
    requires(P::dim == 1)
class PointwiseTransferEstimator {
public:
    static constexpr int kMaxOrder = 4;

    PointwiseTransferEstimator(P model, SimConfig<1> cfg, std::vector<double> lags)
        : model_(std::move(model)), cfg_(std::move(cfg)), lags_(std::move(lags)) {
        cfg_.validate(true);
        require(model_.domain().periodic[0], "PointwiseTransferEstimator: domain must be periodic");
        steps_ = detail::lag_steps(lags_, cfg_.dt);
    }

    [[nodiscard]] const std::vector<double>& lags() const { return lags_; }

    PointIncrements estimate(double x0, const std::vector<TrigPolynomial>& fns, std::size_t n_paths,
                             const StreamFactory& streams, std::uint64_t point_id) const {
        require(n_paths >= 2, "PointwiseTransferEstimator: need at least two paths");
        const std::size_t nl = lags_.size();
        const std::size_t nf = fns.size();
        const double slope = model_.gradient(Vec<1>(x0))[0];
        const double curv = hessian(model_, Vec<1>(x0))(0, 0);
        const LinearizedMoments mom = linearized_baoab_moments(slope, curv, cfg_, steps_);

        // raw[f][o] = Taylor coefficient f^(o)(x0)/o!
        std::vector<std::array<double, kMaxOrder + 1>> taylor(nf);
        for (std::size_t f = 0; f < nf; ++f) {
            double fact = 1.0;
            for (int o = 0; o <= kMaxOrder; ++o) {
                fact *= o > 0 ? o : 1;
                taylor[f][static_cast<std::size_t>(o)] = fns[f].derivative(x0, o) / fact;
            }
        }
        // Gaussian moments E[Δ^o] of the shadow displacement.
        std::vector<std::array<double, kMaxOrder + 1>> gmom(nl);
        for (std::size_t l = 0; l < nl; ++l) {
            const double m = mom.mean[l];
            const double v = mom.variance[l];
            gmom[l] = {1.0, m, m * m + v, m * m * m + 3.0 * m * v, m * m * m * m + 6.0 * m * m * v + 3.0 * v * v};
        }

        std::vector<RunningStats> acc(nl * nf * (kMaxOrder + 1));
        const LangevinIntegrator<P> integrator(model_, cfg_);
        const double mass = cfg_.mass(0, 0);
        const double h = 0.5 * cfg_.dt;
        const double ca = integrator.momentum_damping()(0, 0);
        const double sa = integrator.momentum_noise()(0, 0);
        const double p_sd = std::sqrt(mass / cfg_.beta);

        RandomStream rng = streams.stream(point_id);
        for (std::size_t s = 0; s < n_paths; ++s) {
            double q = x0;
            double p = p_sd * rng.normal();
            double ql = x0;
            double pl = p;
            double force = -slope;
            std::size_t done = 0;
            for (std::size_t l = 0; l < nl; ++l) {
                for (; done < steps_[l]; ++done) {
                    p += h * force;
                    q += h * p / mass;
                    pl += h * (-slope - curv * (ql - x0));
                    ql += h * pl / mass;
                    const double xi = rng.normal();
                    p = ca * p + sa * xi;
                    pl = ca * pl + sa * xi;
                    q += h * p / mass;
                    ql += h * pl / mass;
                    force = -model_.gradient(Vec<1>(q))[0];
                    if (!std::isfinite(force)) {
                        throw NumericalError("non-finite force at q = " + format_double(q));
                    }
                    p += h * force;
                    pl += h * (-slope - curv * (ql - x0));
                }
                const double d = ql - x0;
                const std::array<double, kMaxOrder + 1> dp{1.0, d, d * d, d * d * d, d * d * d * d};
                for (std::size_t f = 0; f < nf; ++f) {
                    double y = fns[f](q) - taylor[f][0];
                    acc[index(l, f, 0, nf)].add(y);
                    for (int o = 1; o <= kMaxOrder; ++o) {
                        y -= taylor[f][static_cast<std::size_t>(o)] *
                             (dp[static_cast<std::size_t>(o)] - gmom[l][static_cast<std::size_t>(o)]);
                        acc[index(l, f, o, nf)].add(y);
                    }
                }
            }
        }

        PointIncrements out;
        out.mean.resize(static_cast<Eigen::Index>(nl), static_cast<Eigen::Index>(nf));
        out.variance.resizeLike(out.mean);
        out.control_order.resize(static_cast<Eigen::Index>(nl), static_cast<Eigen::Index>(nf));
        for (std::size_t l = 0; l < nl; ++l) {
            for (std::size_t f = 0; f < nf; ++f) {
                int best = 0;
                for (int o = 1; o <= kMaxOrder; ++o) {
                    if (acc[index(l, f, o, nf)].variance() < acc[index(l, f, best, nf)].variance()) {
                        best = o;
                    }
                }
                const auto& a = acc[index(l, f, best, nf)];
                const auto r = static_cast<Eigen::Index>(l);
                const auto c = static_cast<Eigen::Index>(f);
                out.mean(r, c) = a.mean();
                out.variance(r, c) = a.variance() / static_cast<double>(a.count());
                out.control_order(r, c) = best;
            }
        }
        return out;
    }

private:
    static std::size_t index(std::size_t l, std::size_t f, int o, std::size_t nf) {
        return (l * nf + f) * (kMaxOrder + 1) + static_cast<std::size_t>(o);
    }

    P model_;
    SimConfig<1> cfg_;
    std::vector<double> lags_;
    std::vector<std::size_t> steps_;
};

/// (G₂f)(x) = β⁻¹f″(x) − V′(x)f′(x) for a smooth f.
template <Potential P>
    requires(P::dim == 1)
double apply_g2(const P& model, double beta, const TrigPolynomial& f, double x) {
    return f.derivative(x, 2) / beta - model.gradient(Vec<1>(x))[0] * f.derivative(x, 1);
}

/// Finite-difference estimate of a pseudo-generator in a smooth basis.
struct PseudoGeneratorEstimate {
    int order = 2;
    OperatorMatrix estimate;                 ///< Richardson limit, Galerkin matrix in the basis
    Matrix standard_error;                   ///< entrywise, for `estimate`
    std::vector<double> lags;
    std::vector<Matrix> per_lag;             ///< raw finite differences at each lag
    std::vector<Matrix> per_lag_error;       ///< entrywise standard errors of per_lag
    std::vector<TrigPolynomial> basis;       ///< w-orthonormal on the cell centers
    Matrix basis_values;                     ///< cells × basis functions
    bool noise_dominated = false;
};

/// Pseudo-generator G_n (n = 1 or 2) by finite differences of S^t at small
/// lags, in the Fourier basis {1, cos 2πkq, sin 2πkq : k ≤ max_mode}
/// orthonormalized in the cell-weight inner product of a 1-D periodic grid:
///   n = 1: (S^t − I)/t,   n = 2: 2(S^t − I)/t²,
/// followed by polynomial (Richardson) extrapolation of the lag sequence to
/// t = 0. Start points are the cell centers; each lag uses independent
/// paths, so the extrapolation weights propagate the errors exactly.
template <Potential P>
    requires(P::dim == 1)
PseudoGeneratorEstimate pseudo_generator_fd(int order, const UlamGrid<1>& grid, const SimConfig<1>& cfg,
                                            const P& model, std::vector<double> lags, std::size_t n_per_cell,
                                            const StreamFactory& streams, int threads = 1, int max_mode = 1) {
    require(order == 1 || order == 2, "pseudo_generator_fd: order must be 1 or 2");
    require(!lags.empty(), "pseudo_generator_fd: no lags");
    for (std::size_t k = 1; k < lags.size(); ++k) {
        require(lags[k] < lags[k - 1], "pseudo_generator_fd: lags must be strictly decreasing");
    }
    require(n_per_cell >= 2, "pseudo_generator_fd: need at least two paths per cell");
    const Domain<1> dom = grid.domain();
    const auto n = static_cast<Eigen::Index>(grid.size());
    std::vector<double> points;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        points.push_back(grid.center(i)[0]);
    }
    const Vector& w = grid.weights();

    PseudoGeneratorEstimate out;
    out.order = order;
    out.lags = lags;
    out.basis = orthonormalize(fourier_basis(dom.lo[0], dom.hi[0], max_mode), points, w);
    const auto m = static_cast<Eigen::Index>(out.basis.size());
    out.basis_values.resize(n, m);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index k = 0; k < m; ++k) {
            out.basis_values(i, k) = out.basis[static_cast<std::size_t>(k)](points[static_cast<std::size_t>(i)]);
        }
    }
    const Matrix weighted_basis = w.asDiagonal() * out.basis_values;

    for (std::size_t l = 0; l < lags.size(); ++l) {
        const double t = lags[l];
        const double scale = order == 1 ? 1.0 / t : 2.0 / (t * t);
        const PointwiseTransferEstimator<P> estimator(model, cfg, {t});
        const StreamFactory lag_streams = streams.derive(100 + l);
        Matrix inc(n, m);
        Matrix var(n, m);
        parallel_for(grid.size(), threads, [&](std::size_t i) {
            const auto r = static_cast<Eigen::Index>(i);
            const PointIncrements pi = estimator.estimate(points[i], out.basis, n_per_cell, lag_streams, i);
            inc.row(r) = pi.mean.row(0);
            var.row(r) = pi.variance.row(0);
        });
        out.per_lag.push_back(scale * weighted_basis.transpose() * inc);
        const Matrix entry_var = scale * scale * weighted_basis.cwiseAbs2().transpose() * var;
        out.per_lag_error.push_back(entry_var.cwiseSqrt());
    }

    // Lagrange weights for extrapolation to t = 0.
    Matrix limit = Matrix::Zero(m, m);
    Matrix limit_var = Matrix::Zero(m, m);
    for (std::size_t j = 0; j < lags.size(); ++j) {
        double lj = 1.0;
        for (std::size_t k = 0; k < lags.size(); ++k) {
            if (k != j) {
                lj *= lags[k] / (lags[k] - lags[j]);
            }
        }
        limit += lj * out.per_lag[j];
        limit_var += lj * lj * out.per_lag_error[j].cwiseAbs2();
    }
    out.estimate.kind = OperatorKind::pseudo_generator;
    out.estimate.lag = 0.0;
    out.estimate.matrix = limit;
    out.estimate.weights = Vector::Ones(m);
    out.estimate.samples_per_cell = n_per_cell;
    out.standard_error = limit_var.cwiseSqrt();
    if (out.standard_error.norm() > limit.norm()) {
        out.noise_dominated = true;
        out.estimate.warnings.push_back("Monte Carlo noise exceeds the pseudo-generator estimate");
    }
    return out;
}

/// Galerkin matrix Bᵀ D_w A B of a grid operator in a w-orthonormal basis
/// given by its values on the cells.
inline Matrix galerkin_matrix(const Matrix& op, const Matrix& basis_values, const Vector& weights) {
    return basis_values.transpose() * weights.asDiagonal() * op * basis_values;
}

/// Pointwise errors of the Taylor and exponential reconstructions applied
/// to a smooth function u: ‖S^t u − R^t u‖_w and ‖S^t u − E^t u‖_w over a set
/// of weighted start points. E^t u uses u + sG₂u + Σ_{n≥2} sⁿλ^{n−1}/n! G₂u
/// (s = t²/2), exact when u is an eigenfunction of G₂ with eigenvalue λ.
struct ReconstructionErrors {
    std::vector<double> lags;
    std::vector<double> taylor_error;
    std::vector<double> exponential_error;
    std::vector<double> noise;  ///< (Σ w SE²)^{1/2}, the Monte Carlo floor
    std::vector<double> taylor_corrected;
    std::vector<double> exponential_corrected;
};

template <Potential P>
    requires(P::dim == 1)
ReconstructionErrors reconstruction_errors(const P& model, const SimConfig<1>& cfg, const TrigPolynomial& u,
                                           double eigenvalue, const std::vector<double>& points,
                                           const Vector& weights, const std::vector<double>& lags,
                                           std::size_t n_paths, const StreamFactory& streams, int threads = 1) {
    require(static_cast<Eigen::Index>(points.size()) == weights.size(), "reconstruction_errors: size mismatch");
    const PointwiseTransferEstimator<P> estimator(model, cfg, lags);
    const std::size_t np = points.size();
    std::vector<PointIncrements> inc(np);
    parallel_for(np, threads, [&](std::size_t i) { inc[i] = estimator.estimate(points[i], {u}, n_paths, streams, i); });

    const double wsum = weights.sum();
    ReconstructionErrors out;
    out.lags = lags;
    for (std::size_t l = 0; l < lags.size(); ++l) {
        const double s = 0.5 * lags[l] * lags[l];
        const double tail = std::abs(eigenvalue) > 0.0
                                ? (std::exp(eigenvalue * s) - 1.0 - eigenvalue * s) / eigenvalue
                                : 0.0;
        double er = 0.0;
        double ee = 0.0;
        double nv = 0.0;
        for (std::size_t i = 0; i < np; ++i) {
            const double wi = weights[static_cast<Eigen::Index>(i)] / wsum;
            const double gu = apply_g2(model, cfg.beta, u, points[i]);
            const double su = inc[i].mean(static_cast<Eigen::Index>(l), 0);
            const double dr = su - s * gu;
            const double de = dr - tail * gu;
            er += wi * dr * dr;
            ee += wi * de * de;
            nv += wi * inc[i].variance(static_cast<Eigen::Index>(l), 0);
        }
        out.taylor_error.push_back(std::sqrt(er));
        out.exponential_error.push_back(std::sqrt(ee));
        out.noise.push_back(std::sqrt(nv));
        out.taylor_corrected.push_back(std::sqrt(std::max(er - nv, 0.0)));
        out.exponential_corrected.push_back(std::sqrt(std::max(ee - nv, 0.0)));
    }
    return out;
}

}  // namespace pseudogen
