#pragma once

#include "geometry.hpp"
#include "operators.hpp"
#include "quadrature.hpp"
#include "reaction.hpp"
#include "smooth.hpp"
#include "spectral.hpp"
#include "stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>
#include <vector>

namespace pseudogen {

namespace detail {

inline std::size_t lag_index(const std::vector<double>& lags, double t) {
    for (std::size_t k = 0; k < lags.size(); ++k) {
        if (std::abs(lags[k] - t) <= 1e-12 * std::max(1.0, t)) {
            return k;
        }
    }
    throw InvalidArgument("lag " + format_double(t) + " was not computed");
}

// Sorted union of lag lists, snapped to multiples of dt.
inline std::vector<double> merge_lags(std::initializer_list<std::vector<double>> lists, double dt) {
    std::set<long long> steps;
    for (const auto& l : lists) {
        for (double t : l) {
            steps.insert(std::llround(t / dt));
        }
    }
    std::vector<double> out;
    for (long long s : steps) {
        out.push_back(static_cast<double>(s) * dt);
    }
    return out;
}

inline double snap(double t, double dt) { return static_cast<double>(std::llround(t / dt)) * dt; }

}  // namespace detail

/// Sign changes of a cell vector; wraps around on periodic grids. Each
/// change is reported at the shared face of the two cells.
struct SignStructure {
    std::size_t changes = 0;
    std::vector<double> crossings;
};

inline SignStructure sign_structure(const UlamGrid<1>& grid, const Vector& v) {
    SignStructure s;
    const std::size_t n = grid.size();
    const bool periodic = grid.domain().periodic[0];
    const std::size_t last = periodic ? n : n - 1;
    for (std::size_t i = 0; i < last; ++i) {
        const std::size_t j = (i + 1) % n;
        if ((v[static_cast<Eigen::Index>(i)] >= 0.0) != (v[static_cast<Eigen::Index>(j)] >= 0.0)) {
            ++s.changes;
            s.crossings.push_back(grid.lower_corner(i)[0] + grid.width(0));
        }
    }
    return s;
}

// ---------------------------------------------------------------------------
// Dominant eigenfunctions of S^t, P^t_Smol and E^t.

struct EigenfunctionStudy {
    UlamGrid<1> grid;
    SpectrumResult spatial{};
    SpectrumResult smoluchowski{};
    SpectrumResult exponential{};
    SpectrumResult generator{};
    double spatial_stderr = 0.0;       ///< of λ¹(S^t)
    double smoluchowski_stderr = 0.0;  ///< of λ¹(P^t)
    SignStructure spatial_signs{};
    double exponential_vs_spatial = 0.0;
    double smoluchowski_vs_spatial = 0.0;
    double constant_variation = 0.0;  ///< relative spread of the first eigenvector of S^t
    double timestep_change = std::numeric_limits<double>::quiet_NaN();  ///< |Δλ¹(S^t)|/λ¹ when dt is halved
    std::vector<std::string> warnings{};
};

template <Potential P>
    requires(P::dim == 1)
EigenfunctionStudy eigenfunction_study(const P& model, const SimConfig<1>& cfg, int cells, double lag,
                                       std::size_t n_per_cell, const StreamFactory& streams, int threads = 1,
                                       bool check_timestep = false) {
    EigenfunctionStudy st{.grid = UlamGrid<1>::with_boltzmann(model, cfg.beta, {cells})};
    const OperatorMatrix s = build_spatial_transfer(st.grid, lag, cfg, model, n_per_cell, streams, threads);
    const OperatorMatrix p = build_smoluchowski_transfer(st.grid, lag, cfg, model, n_per_cell, streams, threads);
    const OperatorMatrix g2 = build_g2_matrix(st.grid, cfg.beta);
    st.spatial = compute_spectrum(s, 3);
    st.smoluchowski = compute_spectrum(p, 3);
    st.exponential = compute_spectrum(exponential_operator(g2, lag), 3);
    st.generator = compute_spectrum(g2, 3);
    st.spatial_stderr = eigenvalue_standard_error(s, st.spatial, 1);
    st.smoluchowski_stderr = eigenvalue_standard_error(p, st.smoluchowski, 1);
    st.spatial_signs = sign_structure(st.grid, st.spatial.vectors.col(1));
    const Vector& w = st.grid.weights();
    st.exponential_vs_spatial = compare_eigenfunctions(st.exponential.vectors.col(1), st.spatial.vectors.col(1), w);
    st.smoluchowski_vs_spatial = compare_eigenfunctions(st.smoluchowski.vectors.col(1), st.spatial.vectors.col(1), w);
    const Vector v0 = st.spatial.vectors.col(0);
    st.constant_variation = (v0.maxCoeff() - v0.minCoeff()) / v0.cwiseAbs().maxCoeff();
    for (const auto* op : {&s, &p}) {
        st.warnings.insert(st.warnings.end(), op->warnings.begin(), op->warnings.end());
    }
    if (check_timestep) {
        SimConfig<1> fine = cfg;
        fine.dt = 0.5 * cfg.dt;
        const OperatorMatrix half = build_spatial_transfer(st.grid, lag, fine, model, n_per_cell, streams, threads);
        const double lambda = st.spatial.real(1);
        st.timestep_change = std::abs(compute_spectrum(half, 2).real(1) - lambda) / std::abs(lambda);
        if (st.timestep_change > 5e-3) {
            st.warnings.push_back("halving dt changes lambda_1(S^t) by " + format_double(100.0 * st.timestep_change) +
                                  "%, above 0.5%");
        }
    }
    return st;
}

// ---------------------------------------------------------------------------
// Extrapolation of S^τ by powers of S^τ, R^τ and E^τ.

struct ExtrapolationStudy {
    double tau = 0.0;
    std::vector<int> n;
    std::vector<double> spatial_lagged;  ///< λ¹(S^{nτ})
    std::vector<double> spatial_lagged_stderr;
    std::vector<double> spatial_power;  ///< λ¹(S^τ)ⁿ
    std::vector<double> taylor_power;   ///< λ¹(R^τ)ⁿ
    std::vector<double> exponential_power;
    double spatial = 0.0;
    double taylor = 0.0;
    double exponential = 0.0;
    std::vector<std::string> warnings;

    [[nodiscard]] double taylor_gap() const { return std::abs(spatial - taylor); }
    [[nodiscard]] double exponential_gap() const { return std::abs(spatial - exponential); }
};

template <Potential P>
    requires(P::dim == 1)
ExtrapolationStudy extrapolation_study(const P& model, const SimConfig<1>& cfg, int cells, double tau,
                                       int n_max, std::size_t n_per_cell, const StreamFactory& streams,
                                       int threads = 1) {
    require(n_max >= 1, "extrapolation_study: n_max must be positive");
    const auto grid = UlamGrid<1>::with_boltzmann(model, cfg.beta, {cells});
    std::vector<double> lags;
    for (int k = 1; k <= n_max; ++k) {
        lags.push_back(detail::snap(k * tau, cfg.dt));
    }
    const auto ops = build_spatial_transfer(grid, lags, cfg, model, n_per_cell, streams, threads);
    const OperatorMatrix g2 = build_g2_matrix(grid, cfg.beta);

    ExtrapolationStudy st;
    st.tau = tau;
    st.warnings = ops.front().warnings;
    st.taylor = compute_spectrum(taylor_operator(g2, tau), 2).real(1);
    st.exponential = compute_spectrum(exponential_operator(g2, tau), 2).real(1);
    for (int k = 1; k <= n_max; ++k) {
        const OperatorMatrix& op = ops[static_cast<std::size_t>(k - 1)];
        const SpectrumResult spec = compute_spectrum(op, 2);
        if (k == 1) {
            st.spatial = spec.real(1);
        }
        st.n.push_back(k);
        st.spatial_lagged.push_back(spec.real(1));
        st.spatial_lagged_stderr.push_back(eigenvalue_standard_error(op, spec, 1));
    }
    for (int k = 1; k <= n_max; ++k) {
        st.spatial_power.push_back(std::pow(st.spatial, k));
        st.taylor_power.push_back(std::pow(st.taylor, k));
        st.exponential_power.push_back(std::pow(st.exponential, k));
    }
    return st;
}

// ---------------------------------------------------------------------------
// Semigroup defect ‖S^{2t} − (S^t)²‖ on the dominant subspace.

struct SemigroupDefectStudy {
    double friction = 0.0;
    std::vector<double> lags;
    std::vector<double> spatial_defect;
    std::vector<double> smoluchowski_defect;
    std::vector<double> spatial_noise;  ///< noise(S^{2t}) + 2·noise(S^t)
    std::vector<double> smoluchowski_noise;
    double threshold = 0.0;
    double decay_lag = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::string> warnings;
};

/// The subspace is spanned by the top `modes` eigenvectors of the
/// finite-volume G₂ on the same grid, which keeps Monte Carlo noise in the
/// many small eigenvalues out of the norm. decay_lag is the first lag at
/// which the spatial defect drops to `threshold`, interpolated linearly in
/// log(defect) between grid lags.
template <Potential P>
    requires(P::dim == 1)
SemigroupDefectStudy semigroup_defect_study(const P& model, const SimConfig<1>& cfg, int cells,
                                            std::vector<double> lags, std::size_t n_per_cell, std::size_t modes,
                                            double threshold, const StreamFactory& streams, int threads = 1) {
    require(!lags.empty(), "semigroup_defect_study: no lags");
    std::sort(lags.begin(), lags.end());
    const auto grid = UlamGrid<1>::with_boltzmann(model, cfg.beta, {cells});
    const Vector& w = grid.weights();
    const Matrix basis = compute_spectrum(build_g2_matrix(grid, cfg.beta), modes).vectors;
    std::vector<double> doubled;
    for (double t : lags) {
        doubled.push_back(2.0 * t);
    }
    const auto all = detail::merge_lags({lags, doubled}, cfg.dt);
    const auto s = build_spatial_transfer(grid, all, cfg, model, n_per_cell, streams, threads);
    const auto p = build_smoluchowski_transfer(grid, all, cfg, model, n_per_cell, streams, threads);

    SemigroupDefectStudy st;
    st.friction = cfg.friction(0, 0);
    st.threshold = threshold;
    for (double t : lags) {
        const std::size_t i1 = detail::lag_index(all, detail::snap(t, cfg.dt));
        const std::size_t i2 = detail::lag_index(all, detail::snap(2.0 * t, cfg.dt));
        st.lags.push_back(t);
        for (auto [ops, defect, noise] : {std::tuple{&s, &st.spatial_defect, &st.spatial_noise},
                                          std::tuple{&p, &st.smoluchowski_defect, &st.smoluchowski_noise}}) {
            const Matrix& a1 = (*ops)[i1].matrix;
            const Matrix& a2 = (*ops)[i2].matrix;
            defect->push_back(restricted_operator_norm(a2 - a1 * a1, basis, w));
            noise->push_back(restricted_noise_norm((*ops)[i2], basis, w) +
                             2.0 * restricted_noise_norm((*ops)[i1], basis, w));
        }
    }
    for (std::size_t k = 0; k < st.lags.size(); ++k) {
        if (st.spatial_defect[k] <= threshold) {
            if (k == 0) {
                st.decay_lag = st.lags[0];
                st.warnings.push_back("defect already below threshold at the smallest lag");
            } else {
                const double l0 = std::log(st.spatial_defect[k - 1]);
                const double l1 = std::log(st.spatial_defect[k]);
                const double f = (l0 - std::log(threshold)) / (l0 - l1);
                st.decay_lag = st.lags[k - 1] + f * (st.lags[k] - st.lags[k - 1]);
            }
            break;
        }
    }
    if (std::isnan(st.decay_lag)) {
        st.warnings.push_back("spatial defect never drops below " + format_double(threshold));
    }
    return st;
}

// ---------------------------------------------------------------------------
// Overdamped limit: S^{t/ε} at friction 1/ε against P^t_Smol at unit friction.

struct OverdampedStudy {
    double lag = 0.0;  ///< Smoluchowski lag t
    std::vector<double> epsilon;
    std::vector<double> distance;
    std::vector<double> spatial_eigenvalue;
    std::vector<double> spatial_stderr;
    double smoluchowski_eigenvalue = 0.0;
    double smoluchowski_stderr = 0.0;
    double noise_floor = 0.0;  ///< distance between two independent reference builds
    std::vector<double> relative_gap;  ///< |λ¹(S) − λ¹(P)| / λ¹(P)
    std::vector<std::string> warnings;
};

/// Time-rescaled Smoluchowski at friction γ and lag t/ε coincides with
/// unit friction at lag t, so one reference operator serves every ε.
template <Potential P>
    requires(P::dim == 1)
OverdampedStudy overdamped_study(const P& model, const SimConfig<1>& cfg, int cells,
                                 const std::vector<double>& epsilons, double lag, double reference_dt,
                                 std::size_t n_per_cell, const StreamFactory& streams, int threads = 1) {
    require(!epsilons.empty(), "overdamped_study: no epsilons");
    require(reference_dt > 0.0, "overdamped_study: reference_dt must be positive");
    const auto grid = UlamGrid<1>::with_boltzmann(model, cfg.beta, {cells});
    const Vector& w = grid.weights();
    SimConfig<1> unit = cfg;
    unit.friction = Mat<1>(1.0);
    unit.dt = reference_dt;
    const OperatorMatrix p = build_smoluchowski_transfer(grid, lag, unit, model, n_per_cell, streams, threads);
    const SpectrumResult ps = compute_spectrum(p, 2);
    const OperatorMatrix replica =
        build_smoluchowski_transfer(grid, lag, unit, model, n_per_cell, streams.derive(epsilons.size()), threads);

    OverdampedStudy st;
    st.lag = lag;
    st.noise_floor = compare_eigenfunctions(compute_spectrum(replica, 2).vectors.col(1), ps.vectors.col(1), w);
    st.smoluchowski_eigenvalue = ps.real(1);
    st.smoluchowski_stderr = eigenvalue_standard_error(p, ps, 1);
    for (std::size_t k = 0; k < epsilons.size(); ++k) {
        const double eps = epsilons[k];
        require(eps > 0.0, "overdamped_study: epsilon must be positive");
        SimConfig<1> c = cfg;
        c.friction = Mat<1>(1.0 / eps);
        const OperatorMatrix s = build_spatial_transfer(grid, detail::snap(lag / eps, cfg.dt), c, model, n_per_cell,
                                                        streams.derive(k), threads);
        const SpectrumResult ss = compute_spectrum(s, 2);
        st.epsilon.push_back(eps);
        st.distance.push_back(compare_eigenfunctions(ss.vectors.col(1), ps.vectors.col(1), w));
        st.spatial_eigenvalue.push_back(ss.real(1));
        st.spatial_stderr.push_back(eigenvalue_standard_error(s, ss, 1));
        st.relative_gap.push_back(std::abs(ss.real(1) - ps.real(1)) / std::abs(ps.real(1)));
    }
    return st;
}

// ---------------------------------------------------------------------------
// Lag scan: largest lag with eigenfunction distance ≤ ν, per ε = 1/γ.

struct LagScanPoint {
    double epsilon = 0.0;
    double t_nu = 0.0;
    bool capped = false;
    bool non_monotone = false;
    std::vector<double> coarse_lags;
    std::vector<double> coarse_distance;
    std::vector<std::pair<double, double>> bisection;  ///< (t, distance) in evaluation order
};

struct LagScanStudy {
    double nu = 0.0;
    double tolerance = 0.0;
    std::vector<LagScanPoint> points;
    LineFit fit;  ///< t_ν = c₂ + c₁·log(ε)/ε²
    bool monotone_decreasing = false;
    std::vector<std::string> warnings;

    [[nodiscard]] double c1() const { return fit.slope; }
    [[nodiscard]] double c2() const { return fit.intercept; }
};

namespace detail {

template <Potential P>
double subdominant_distance(const UlamGrid<1>& grid, const std::vector<double>& lags, const SimConfig<1>& cfg,
                            const P& model, std::size_t n_per_cell, const StreamFactory& streams, int threads,
                            std::vector<double>& out) {
    const auto s = build_spatial_transfer(grid, lags, cfg, model, n_per_cell, streams, threads);
    const auto p = build_smoluchowski_transfer(grid, lags, cfg, model, n_per_cell, streams, threads);
    out.clear();
    for (std::size_t k = 0; k < lags.size(); ++k) {
        out.push_back(compare_eigenfunctions(compute_spectrum(s[k], 2).vectors.col(1),
                                             compute_spectrum(p[k], 2).vectors.col(1), grid.weights()));
    }
    return out.back();
}

}  // namespace detail

/// For each ε a coarse multi-lag pass brackets the first exceedance of ν;
/// bisection with fresh single-lag operators then narrows the bracket to
/// `tolerance`. If the coarse curve dips back below ν after the first
/// exceedance the widest bracket (up to the last exceedance) is used and
/// the point is flagged. Lags beyond the coarse grid are capped.
template <Potential P>
    requires(P::dim == 1)
LagScanStudy lagscan_study(const P& model, const SimConfig<1>& cfg, int cells,
                           const std::vector<double>& epsilons, double nu, const std::vector<double>& coarse_lags,
                           double tolerance, std::size_t n_per_cell, const StreamFactory& streams,
                           int threads = 1) {
    require(nu > 0.0, "lagscan: nu must be positive");
    require(tolerance >= cfg.dt, "lagscan: tolerance must be at least dt");
    require(epsilons.size() >= 2, "lagscan: need at least two epsilon values");
    const auto grid = UlamGrid<1>::with_boltzmann(model, cfg.beta, {cells});
    const auto coarse = detail::merge_lags({coarse_lags}, cfg.dt);

    LagScanStudy st;
    st.nu = nu;
    st.tolerance = tolerance;
    for (std::size_t e = 0; e < epsilons.size(); ++e) {
        const double eps = epsilons[e];
        require(eps > 0.0, "lagscan: epsilon must be positive");
        SimConfig<1> c = cfg;
        c.friction = Mat<1>(1.0 / eps);
        const StreamFactory es = streams.derive(e);
        LagScanPoint pt;
        pt.epsilon = eps;
        pt.coarse_lags = coarse;
        detail::subdominant_distance(grid, coarse, c, model, n_per_cell, es, threads, pt.coarse_distance);

        std::size_t first = coarse.size();
        std::size_t last = coarse.size();
        for (std::size_t k = 0; k < coarse.size(); ++k) {
            if (pt.coarse_distance[k] > nu) {
                first = std::min(first, k);
                last = k;
            }
        }
        if (first == coarse.size()) {
            pt.t_nu = coarse.back();
            pt.capped = true;
            st.points.push_back(pt);
            continue;
        }
        // Widest bracket: below ν before the first exceedance, above ν from the
        // last point on which the curve stays above.
        std::size_t hi_idx = first;
        for (std::size_t k = first; k < coarse.size(); ++k) {
            if (pt.coarse_distance[k] <= nu) {
                pt.non_monotone = true;
            }
        }
        if (pt.non_monotone) {
            hi_idx = last;
            for (std::size_t k = last; k-- > first;) {
                if (pt.coarse_distance[k] <= nu) {
                    break;
                }
                hi_idx = k;
            }
            st.warnings.push_back("epsilon " + format_double(eps) +
                                  ": non-monotone distance curve, widest bracket used");
        }
        double lo = first == 0 ? 0.0 : coarse[first - 1];
        double hi = coarse[hi_idx];
        std::vector<double> scratch;
        while (hi - lo > tolerance + 1e-12) {
            double mid = detail::snap(0.5 * (lo + hi), cfg.dt);
            if (mid <= lo || mid >= hi) {
                break;
            }
            const auto steps = static_cast<std::uint64_t>(std::llround(mid / cfg.dt));
            const double d = detail::subdominant_distance(grid, {mid}, c, model, n_per_cell,
                                                          es.derive(steps), threads, scratch);
            pt.bisection.emplace_back(mid, d);
            (d <= nu ? lo : hi) = mid;
        }
        pt.t_nu = 0.5 * (lo + hi);
        st.points.push_back(pt);
    }

    std::vector<double> x;
    std::vector<double> y;
    for (const auto& pt : st.points) {
        x.push_back(std::log(pt.epsilon) / (pt.epsilon * pt.epsilon));
        y.push_back(pt.t_nu);
    }
    st.fit = fit_line(x, y);
    std::vector<LagScanPoint> by_eps = st.points;
    std::sort(by_eps.begin(), by_eps.end(), [](const auto& a, const auto& b) { return a.epsilon < b.epsilon; });
    st.monotone_decreasing = true;
    for (std::size_t k = 1; k < by_eps.size(); ++k) {
        if (!(by_eps[k].t_nu < by_eps[k - 1].t_nu)) {
            st.monotone_decreasing = false;
        }
    }
    return st;
}

// ---------------------------------------------------------------------------
// Pseudo-generators at several frictions.

struct PseudoGeneratorStudy {
    int order = 2;
    std::vector<double> frictions;
    std::vector<PseudoGeneratorEstimate> estimates;
    Matrix target;  ///< Galerkin matrix of the finite-volume G₂ (order 2) or zero (order 1)
    std::vector<double> per_lag_norm;  ///< ‖finite-difference estimate‖_F per lag, first friction
    double lag_slope = 0.0;            ///< log-log slope of per_lag_norm against the lag
    double max_distance = 0.0;         ///< max pairwise ‖G(γ_a) − G(γ_b)‖_F
    double pooled_error = 0.0;         ///< pooled standard error of that pair
    double max_relative_error = 0.0;   ///< max ‖G(γ) − target‖ / ‖target‖ (order 2)
};

template <Potential P>
    requires(P::dim == 1)
PseudoGeneratorStudy pseudo_generator_study(int order, const P& model, const SimConfig<1>& cfg, int cells,
                                            const std::vector<double>& frictions, std::vector<double> lags,
                                            std::size_t n_per_cell, int max_mode, const StreamFactory& streams,
                                            int threads = 1) {
    require(!frictions.empty(), "pseudo_generator_study: no frictions");
    std::sort(lags.begin(), lags.end(), std::greater<>());
    const auto grid = UlamGrid<1>::with_boltzmann(model, cfg.beta, {cells});
    PseudoGeneratorStudy st;
    st.order = order;
    st.frictions = frictions;
    for (std::size_t k = 0; k < frictions.size(); ++k) {
        SimConfig<1> c = cfg;
        c.friction = Mat<1>(frictions[k]);
        st.estimates.push_back(pseudo_generator_fd(order, grid, c, model, lags, n_per_cell, streams.derive(k),
                                                   threads, max_mode));
    }
    const auto& first = st.estimates.front();
    st.target = order == 2 ? galerkin_matrix(build_g2_matrix(grid, cfg.beta).matrix, first.basis_values, grid.weights())
                           : Matrix::Zero(first.estimate.size(), first.estimate.size());
    for (const auto& m : first.per_lag) {
        st.per_lag_norm.push_back(m.norm());
    }
    if (lags.size() >= 2) {
        st.lag_slope = loglog_slope(first.lags, st.per_lag_norm);
    }
    for (std::size_t a = 0; a < st.estimates.size(); ++a) {
        if (order == 2) {
            st.max_relative_error = std::max(
                st.max_relative_error, (st.estimates[a].estimate.matrix - st.target).norm() / st.target.norm());
        }
        for (std::size_t b = a + 1; b < st.estimates.size(); ++b) {
            const double d = (st.estimates[a].estimate.matrix - st.estimates[b].estimate.matrix).norm();
            if (d >= st.max_distance) {
                st.max_distance = d;
                st.pooled_error = std::sqrt(st.estimates[a].standard_error.squaredNorm() +
                                            st.estimates[b].standard_error.squaredNorm());
            }
        }
    }
    return st;
}

// ---------------------------------------------------------------------------
// Reconstruction order for a smooth test function.

struct ReconstructionStudy {
    double eigenvalue = 0.0;
    ReconstructionErrors errors;
    double taylor_slope = 0.0;
    double exponential_slope = 0.0;
};

/// u is the trigonometric interpolant of the subdominant finite-volume G₂
/// eigenvector on `fine_cells` cells; errors are averaged over the centers
/// of `points` Boltzmann-weighted cells.
template <Potential P>
    requires(P::dim == 1)
ReconstructionStudy reconstruction_study(const P& model, const SimConfig<1>& cfg, int fine_cells,
                                         int points, const std::vector<double>& lags, std::size_t n_paths,
                                         const StreamFactory& streams, int threads = 1) {
    const auto fine = UlamGrid<1>::with_boltzmann(model, cfg.beta, {fine_cells});
    const SpectrumResult g2 = compute_spectrum(build_g2_matrix(fine, cfg.beta), 2);
    const Domain<1> dom = fine.domain();
    const TrigPolynomial u = TrigPolynomial::interpolate_cell_values(g2.vectors.col(1), dom.lo[0], dom.hi[0]);
    const auto coarse = UlamGrid<1>::with_boltzmann(model, cfg.beta, {points});
    std::vector<double> centers;
    for (std::size_t i = 0; i < coarse.size(); ++i) {
        centers.push_back(coarse.center(i)[0]);
    }
    ReconstructionStudy st;
    st.eigenvalue = g2.real(1);
    st.errors = reconstruction_errors(model, cfg, u, st.eigenvalue, centers, coarse.weights(), lags, n_paths, streams,
                                      threads);
    st.taylor_slope = loglog_slope(lags, st.errors.taylor_error);
    st.exponential_slope = loglog_slope(lags, st.errors.exponential_error);
    return st;
}

// ---------------------------------------------------------------------------
// Metastability bracket on the two-set partition.

struct MetastabilityStudy {
    std::vector<double> lags;
    std::vector<MetastabilityBounds> bounds;
    std::vector<std::size_t> set_sizes;
    std::vector<std::string> warnings;
};

template <Potential P>
    requires(P::dim == 1)
MetastabilityStudy metastability_study(const P& model, const SimConfig<1>& cfg, int cells,
                                       std::vector<double> lags, std::size_t sets, std::size_t n_per_cell,
                                       const StreamFactory& streams, int threads = 1) {
    std::sort(lags.begin(), lags.end());
    const auto grid = UlamGrid<1>::with_boltzmann(model, cfg.beta, {cells});
    const auto ops = build_spatial_transfer(grid, detail::merge_lags({lags}, cfg.dt), cfg, model, n_per_cell, streams,
                                            threads);
    MetastabilityStudy st;
    st.lags = lags;
    for (const auto& op : ops) {
        const SpectrumResult spec = compute_spectrum(op, sets + 1);
        const Partition part = metastable_partition(spec, sets);
        st.warnings.insert(st.warnings.end(), part.warnings.begin(), part.warnings.end());
        st.bounds.push_back(metastability_bounds(op, spec, part));
        if (st.set_sizes.empty()) {
            for (const auto& s : part.sets) {
                st.set_sizes.push_back(s.size());
            }
        }
    }
    return st;
}

// ---------------------------------------------------------------------------
// Reaction coordinate on the separable double well, ξ = q₁.

struct ReactionStudy {
    ProjectedCoefficients coefficients;
    VolatilityTransform volatility;
    std::vector<double> exact_b;  ///< bin average of −V′_dw under the ξ-marginal
    double projected_eigenvalue = 0.0;
    double full_eigenvalue = 0.0;
    double fraction_a_within = 0.0;  ///< fraction of bins with |a − 1| ≤ 2 SE (or exact)
    double fraction_b_within = 0.0;
    double worst_b_sigma = 0.0;
    double fraction_identity_within = 0.0;
    double eigenvalue_relative_gap = 0.0;
    double stationary_residual = 0.0;  ///< ‖νᵀG₂^ess‖∞
    std::vector<std::string> warnings;
};

inline ReactionStudy reaction_study(const SeparableDoubleWell2D& model, const SimConfig<2>& cfg, std::size_t n_samples,
                                    int bins, std::array<int, 2> full_cells, const StreamFactory& streams,
                                    int threads = 1) {
    const auto xi = linear_coordinate<2>(model.domain(), 0, 1.0, bins);
    ReactionStudy st;
    st.coefficients = estimate_coefficients(xi, cfg, model, n_samples, streams, threads);
    const auto& c = st.coefficients;
    st.volatility = volatility_transform(c, cfg.beta);
    st.warnings = c.warnings;

    // Exact bin-conditional mean of −V′_dw(q₁) under exp(−βV_dw) on each bin.
    for (std::size_t i = 0; i < c.bins(); ++i) {
        const double lo = c.z[i] - 0.5 * c.width;
        const double hi = c.z[i] + 0.5 * c.width;
        const std::array<double, 1> l{lo};
        const std::array<double, 1> h{hi};
        const std::array<bool, 1> per{false};
        const double mass = integrate_box<1>(
            [&](const Vec<1>& q) { return std::exp(-cfg.beta * PeriodicDoubleWell::value(q[0])); }, l, h, per, 4);
        const double num = integrate_box<1>(
            [&](const Vec<1>& q) {
                return -PeriodicDoubleWell::derivative(q[0]) * std::exp(-cfg.beta * PeriodicDoubleWell::value(q[0]));
            },
            l, h, per, 4);
        st.exact_b.push_back(num / mass);
    }

    std::size_t a_ok = 0;
    std::size_t b_ok = 0;
    std::size_t id_ok = 0;
    std::size_t active = 0;
    for (std::size_t i = 0; i < c.bins(); ++i) {
        if (!c.active(i)) {
            continue;
        }
        ++active;
        const double da = std::abs(c.a[i] - 1.0);
        a_ok += (da <= 2.0 * c.stderr_a[i] || da <= 1e-12) ? 1 : 0;
        const double db = std::abs(c.b[i] - st.exact_b[i]);
        b_ok += db <= 2.0 * c.stderr_b[i] ? 1 : 0;
        st.worst_b_sigma = std::max(st.worst_b_sigma, c.stderr_b[i] > 0.0 ? db / c.stderr_b[i] : 0.0);
        const double did = std::abs(c.b[i] - st.volatility.z_drift_identity[i]);
        id_ok += did <= 2.0 * st.volatility.identity_error[i] ? 1 : 0;
    }
    st.fraction_a_within = static_cast<double>(a_ok) / static_cast<double>(active);
    st.fraction_b_within = static_cast<double>(b_ok) / static_cast<double>(active);
    st.fraction_identity_within = static_cast<double>(id_ok) / static_cast<double>(active);

    const OperatorMatrix ess = build_g2ess_matrix(c, cfg.beta);
    st.projected_eigenvalue = compute_spectrum(ess, 2).real(1);
    st.stationary_residual = (ess.weights.transpose() * ess.matrix).cwiseAbs().maxCoeff();
    const auto full_grid = UlamGrid<2>::with_boltzmann(model, cfg.beta, full_cells);
    st.full_eigenvalue = compute_spectrum(build_g2_matrix(full_grid, cfg.beta), 2).real(1);
    st.eigenvalue_relative_gap =
        std::abs(st.projected_eigenvalue - st.full_eigenvalue) / std::abs(st.full_eigenvalue);
    return st;
}

// ---------------------------------------------------------------------------
// Generalized coordinates: invariant density of the u-dynamics.

struct GeometryStudy {
    std::string transform;
    std::vector<double> bin_centers;
    std::vector<double> histogram;  ///< empirical density per bin
    std::vector<double> density;    ///< bin-averaged invariant density
    double l1_error = 0.0;
    double max_constant_drift = 0.0;  ///< max |g| for a constant friction
    double mass_defect = 0.0;         ///< max |Δu| between runs with M and 2M
    std::size_t steps = 0;
};

/// Simulates the generalized Smoluchowski dynamics for Φ = u + A sin 2πu
/// with pulled-back friction JᵀγJ, histograms u, and compares with
/// (f_Q∘Φ)√det h. Also checks that g vanishes for a constant friction and
/// that trajectories do not depend on the constant mass.
template <Potential P>
    requires(P::dim == 1)
GeometryStudy geometry_study(const P& model, const SimConfig<1>& cfg, const CoordinateTransform<1>& transform,
                             std::size_t n_steps, int bins, const StreamFactory& streams) {
    require(bins >= 2, "geometry_study: need at least two bins");
    const GeneralizedSmoluchowski<P> dyn(model, transform, pulled_back_friction<1>(transform, cfg.friction));
    const Domain<1> box = transform.validity;
    const double width = box.length(0) / bins;

    GeometryStudy st;
    st.transform = transform.name;
    st.steps = n_steps;
    std::vector<double> counts(static_cast<std::size_t>(bins), 0.0);
    RandomStream rng = streams.stream(0);
    SimState<1> s;
    s.q = Vec<1>(box.lo[0] + 0.5 * box.length(0));
    s.p = Vec<1>::Zero();
    const std::size_t burn = std::min<std::size_t>(n_steps / 10, 100000);
    for (std::size_t k = 0; k < burn + n_steps; ++k) {
        s = step_generalized_smoluchowski(s, cfg, dyn, rng);
        if (k >= burn) {
            const auto b = std::min<std::size_t>(static_cast<std::size_t>((s.q[0] - box.lo[0]) / width),
                                                 static_cast<std::size_t>(bins - 1));
            counts[b] += 1.0;
        }
    }
    const InvariantDensity<P> rho(transform, model, cfg.beta);
    for (int b = 0; b < bins; ++b) {
        const double lo = box.lo[0] + b * width;
        st.bin_centers.push_back(lo + 0.5 * width);
        st.histogram.push_back(counts[static_cast<std::size_t>(b)] / (static_cast<double>(n_steps) * width));
        const std::array<double, 1> l{lo};
        const std::array<double, 1> h{lo + width};
        const std::array<bool, 1> per{false};
        st.density.push_back(integrate_box<1>([&](const Vec<1>& u) { return rho(u); }, l, h, per, 4) / width);
        st.l1_error += std::abs(st.histogram.back() - st.density.back()) * width;
    }

    const FrictionField<1> constant = constant_friction<1>(cfg.friction);
    for (int b = 0; b < bins; ++b) {
        st.max_constant_drift =
            std::max(st.max_constant_drift, std::abs(geometric_drift(constant, cfg.beta, Vec<1>(st.bin_centers[b]))[0]));
    }

    SimConfig<1> heavy = cfg;
    heavy.mass = 2.0 * cfg.mass;
    RandomStream r1 = streams.stream(1);
    RandomStream r2 = streams.stream(1);
    SimState<1> a = s;
    SimState<1> c = s;
    for (int k = 0; k < 1000; ++k) {
        a = step_generalized_smoluchowski(a, cfg, dyn, r1);
        c = step_generalized_smoluchowski(c, heavy, dyn, r2);
        st.mass_defect = std::max(st.mass_defect, std::abs(box.difference(a.q, c.q)[0]));
    }
    return st;
}

}  // namespace pseudogen
