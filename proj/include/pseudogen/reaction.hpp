#pragma once

#include "operators.hpp"
#include "sde.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <vector>

namespace pseudogen {

/// Scalar collective variable ξ with derivatives and a binning range.
/// An empty laplacian falls back to central differences of the gradient.
template <int Dim>
struct ReactionCoordinate {
    std::function<double(const Vec<Dim>&)> value;
    std::function<Vec<Dim>(const Vec<Dim>&)> gradient;
    std::function<double(const Vec<Dim>&)> laplacian;
    double z_min = 0.0;
    double z_max = 1.0;
    int n_bins = 64;
    bool periodic = false;

    [[nodiscard]] double laplacian_at(const Vec<Dim>& q, double step = 1e-5) const {
        if (laplacian) {
            return laplacian(q);
        }
        double lap = 0.0;
        for (int k = 0; k < Dim; ++k) {
            Vec<Dim> qp = q;
            Vec<Dim> qm = q;
            qp[k] += step;
            qm[k] -= step;
            lap += (gradient(qp)[k] - gradient(qm)[k]) / (2.0 * step);
        }
        return lap;
    }
};

/// ξ(q) = scale · q_axis on the corresponding (scaled) axis range.
template <int Dim>
ReactionCoordinate<Dim> linear_coordinate(const Domain<Dim>& domain, int axis, double scale = 1.0, int n_bins = 64) {
    require(axis >= 0 && axis < Dim && scale != 0.0, "linear_coordinate: bad axis or zero scale");
    ReactionCoordinate<Dim> xi;
    xi.value = [axis, scale](const Vec<Dim>& q) { return scale * q[axis]; };
    xi.gradient = [axis, scale](const Vec<Dim>&) {
        Vec<Dim> g = Vec<Dim>::Zero();
        g[axis] = scale;
        return g;
    };
    xi.laplacian = [](const Vec<Dim>&) { return 0.0; };
    const double a = scale * domain.lo[axis];
    const double b = scale * domain.hi[axis];
    xi.z_min = std::min(a, b);
    xi.z_max = std::max(a, b);
    xi.n_bins = n_bins;
    xi.periodic = domain.periodic[axis];
    return xi;
}

struct ProjectedCoefficients {
    std::vector<double> z;
    double width = 0.0;
    bool periodic = false;
    std::vector<double> a;
    std::vector<double> b;
    std::vector<double> free_energy;
    std::vector<double> stderr_a;
    std::vector<double> stderr_b;
    std::vector<double> stderr_free_energy;
    std::vector<std::size_t> count;
    std::size_t total = 0;
    double min_gradient_norm = 0.0;
    std::vector<std::string> warnings;

    [[nodiscard]] std::size_t bins() const { return z.size(); }
    [[nodiscard]] bool active(std::size_t i) const { return count[i] > 0; }
};

namespace detail {

// Ratio-of-means standard error from batch sums (sum of values, count).
inline double batch_ratio_error(const std::vector<double>& sums, const std::vector<double>& counts) {
    double total_s = 0.0;
    double total_c = 0.0;
    for (std::size_t k = 0; k < sums.size(); ++k) {
        total_s += sums[k];
        total_c += counts[k];
    }
    if (total_c <= 0.0 || sums.size() < 2) {
        return 0.0;
    }
    const double mean = total_s / total_c;
    double acc = 0.0;
    for (std::size_t k = 0; k < sums.size(); ++k) {
        const double r = sums[k] - mean * counts[k];
        acc += r * r;
    }
    const double nb = static_cast<double>(sums.size());
    return std::sqrt(acc * nb / (nb - 1.0)) / total_c;
}

// Halves the bin count until the median bin holds at least `min_median`
// samples (or two bins remain). NaN entries of zs are out of range.
inline std::size_t adapted_bin_count(const std::vector<double>& zs, double z_min, double z_max,
                                     std::size_t requested, std::size_t min_median) {
    std::size_t bins = requested;
    while (bins > 2) {
        std::vector<std::size_t> count(bins, 0);
        const double width = (z_max - z_min) / static_cast<double>(bins);
        for (double z : zs) {
            if (!std::isnan(z)) {
                ++count[std::min(bins - 1, static_cast<std::size_t>((z - z_min) / width))];
            }
        }
        std::nth_element(count.begin(), count.begin() + static_cast<long>(bins / 2), count.end());
        if (count[bins / 2] >= min_median) {
            break;
        }
        bins = std::max<std::size_t>(2, bins / 2);
    }
    return bins;
}

}  // namespace detail

/// Binned conditional averages along ξ from canonical samples:
/// a(z) = ⟨|∇ξ|²⟩, b(z) = ⟨β⁻¹Δξ − ∇ξ·∇V⟩, F(z) = −β⁻¹ log(bin mass / width)
/// (mean-centred over populated bins). Standard errors come from batch
/// means over contiguous sample blocks, which absorbs chain correlation.
template <Potential P>
ProjectedCoefficients estimate_coefficients(const ReactionCoordinate<P::dim>& xi, const SimConfig<P::dim>& cfg,
                                            const P& model, std::size_t n_samples, const StreamFactory& streams,
                                            int threads = 1, std::size_t n_batches = 64) {
    constexpr int D = P::dim;
    require(n_samples >= 10000, "estimate_coefficients: need at least 1e4 samples");
    require(xi.n_bins >= 2 && xi.z_max > xi.z_min, "estimate_coefficients: bad bin range");
    require(n_batches >= 2, "estimate_coefficients: need at least two batches");
    const auto sample = sample_canonical(n_samples, cfg, model, streams.derive(7), threads);
    std::vector<double> zs(n_samples);
    for (std::size_t s = 0; s < n_samples; ++s) {
        double z = xi.value(sample.states[s].q);
        if (xi.periodic) {
            const double L = xi.z_max - xi.z_min;
            z = xi.z_min + (z - xi.z_min - L * std::floor((z - xi.z_min) / L));
        }
        zs[s] = z < xi.z_min || z > xi.z_max ? std::numeric_limits<double>::quiet_NaN() : z;
    }

    const auto requested = static_cast<std::size_t>(xi.n_bins);
    const std::size_t nbins = detail::adapted_bin_count(zs, xi.z_min, xi.z_max, requested, 200);
    ProjectedCoefficients c;
    c.width = (xi.z_max - xi.z_min) / static_cast<double>(nbins);
    c.periodic = xi.periodic;
    c.warnings = sample.warnings;
    if (nbins != requested) {
        c.warnings.push_back("bin count reduced from " + std::to_string(requested) + " to " + std::to_string(nbins) +
                             " so that the median bin holds at least 200 samples");
    }
    for (std::size_t i = 0; i < nbins; ++i) {
        c.z.push_back(xi.z_min + (static_cast<double>(i) + 0.5) * c.width);
    }
    std::vector<double> sa(nbins * n_batches, 0.0);
    std::vector<double> sb(nbins * n_batches, 0.0);
    std::vector<double> sc(nbins * n_batches, 0.0);
    std::vector<double> sum_a(nbins, 0.0);
    std::vector<double> sum_b(nbins, 0.0);
    c.count.assign(nbins, 0);
    c.min_gradient_norm = std::numeric_limits<double>::infinity();
    const std::size_t per_batch = (n_samples + n_batches - 1) / n_batches;
    std::size_t outside = 0;
    for (std::size_t s = 0; s < n_samples; ++s) {
        const Vec<D>& q = sample.states[s].q;
        const double z = zs[s];
        if (std::isnan(z)) {
            ++outside;
            continue;
        }
        const auto bin = std::min(nbins - 1, static_cast<std::size_t>((z - xi.z_min) / c.width));
        const Vec<D> g = xi.gradient(q);
        c.min_gradient_norm = std::min(c.min_gradient_norm, g.norm());
        const double av = g.squaredNorm();
        const double bv = xi.laplacian_at(q) / cfg.beta - g.dot(model.gradient(q));
        const std::size_t k = bin * n_batches + s / per_batch;
        sa[k] += av;
        sb[k] += bv;
        sc[k] += 1.0;
        sum_a[bin] += av;
        sum_b[bin] += bv;
        ++c.count[bin];
    }
    if (c.min_gradient_norm < 1e-8) {
        throw NumericalError("estimate_coefficients: |grad xi| = " + format_double(c.min_gradient_norm) +
                             " is below 1e-8 on a sampled point");
    }
    if (outside > 0) {
        c.warnings.push_back(std::to_string(outside) + " samples outside the reaction-coordinate range");
    }
    c.total = n_samples - outside;

    double f_sum = 0.0;
    std::size_t active = 0;
    c.a.assign(nbins, 0.0);
    c.b.assign(nbins, 0.0);
    c.free_energy.assign(nbins, 0.0);
    c.stderr_a.assign(nbins, 0.0);
    c.stderr_b.assign(nbins, 0.0);
    c.stderr_free_energy.assign(nbins, 0.0);
    std::size_t sparse = 0;
    for (std::size_t i = 0; i < nbins; ++i) {
        if (c.count[i] == 0) {
            continue;
        }
        const double n = static_cast<double>(c.count[i]);
        c.a[i] = sum_a[i] / n;
        c.b[i] = sum_b[i] / n;
        const std::vector<double> ba(sa.begin() + static_cast<long>(i * n_batches),
                                     sa.begin() + static_cast<long>((i + 1) * n_batches));
        const std::vector<double> bb(sb.begin() + static_cast<long>(i * n_batches),
                                     sb.begin() + static_cast<long>((i + 1) * n_batches));
        const std::vector<double> bc(sc.begin() + static_cast<long>(i * n_batches),
                                     sc.begin() + static_cast<long>((i + 1) * n_batches));
        c.stderr_a[i] = detail::batch_ratio_error(ba, bc);
        c.stderr_b[i] = detail::batch_ratio_error(bb, bc);
        // Relative error of the bin mass from the batch spread of counts.
        double mean_count = n / static_cast<double>(n_batches);
        double var = 0.0;
        for (double x : bc) {
            var += (x - mean_count) * (x - mean_count);
        }
        var /= static_cast<double>(n_batches - 1);
        c.stderr_free_energy[i] = std::sqrt(var * static_cast<double>(n_batches)) / n / cfg.beta;
        c.free_energy[i] = -std::log(n / static_cast<double>(c.total) / c.width) / cfg.beta;
        f_sum += c.free_energy[i];
        ++active;
        sparse += c.count[i] < 20 ? 1 : 0;
    }
    for (std::size_t i = 0; i < nbins; ++i) {
        if (c.count[i] > 0) {
            c.free_energy[i] -= f_sum / static_cast<double>(active);
        }
    }
    const std::size_t empty = nbins - active;
    if (empty > 0) {
        c.warnings.push_back(std::to_string(empty) + " empty bins (flagged, not interpolated)");
    }
    if (sparse > 0) {
        c.warnings.push_back(std::to_string(sparse) + " bins with fewer than 20 samples; consider wider bins");
    }
    return c;
}

/// Finite-volume discretization of β⁻¹a(z)∂²_z + b(z)∂_z in the form
/// β⁻¹e^{βF}∂_z(a e^{−βF}∂_z), which equals it when b = −aF′ + β⁻¹a′:
/// G_ij = a_face √(ν_j/ν_i)/(βh²) with ν = e^{−βF}, a_face the mean of the
/// neighbouring a. Self-adjoint in the ν-weighted inner product; zero rows
/// for empty bins.
inline OperatorMatrix build_g2ess_matrix(const ProjectedCoefficients& c, double beta) {
    require(beta > 0.0, "build_g2ess_matrix: beta must be positive");
    const std::size_t n = c.bins();
    require(n >= 2, "build_g2ess_matrix: need at least two bins");
    for (std::size_t i = 0; i < n; ++i) {
        if (c.active(i) && !(c.a[i] > 0.0)) {
            throw InvalidArgument("build_g2ess_matrix: nonpositive a(z) in bin " + std::to_string(i));
        }
    }
    Vector nu = Vector::Zero(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        if (c.active(i)) {
            nu[static_cast<Eigen::Index>(i)] = std::exp(-beta * c.free_energy[i]);
        }
    }
    nu /= nu.sum();
    OperatorMatrix op;
    op.kind = OperatorKind::generator_g2;
    op.weights = nu;
    op.matrix = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    const double h2 = c.width * c.width;
    for (std::size_t i = 0; i < n; ++i) {
        if (!c.active(i)) {
            op.flagged_cells.push_back(i);
            continue;
        }
        const auto r = static_cast<Eigen::Index>(i);
        for (int step : {-1, 1}) {
            long j = static_cast<long>(i) + step;
            if (j < 0 || j >= static_cast<long>(n)) {
                if (!c.periodic) {
                    continue;
                }
                j = (j + static_cast<long>(n)) % static_cast<long>(n);
            }
            const auto col = static_cast<Eigen::Index>(j);
            if (col == r || !c.active(static_cast<std::size_t>(j))) {
                continue;
            }
            const double a_face = 0.5 * (c.a[i] + c.a[static_cast<std::size_t>(j)]);
            op.matrix(r, col) += a_face / (beta * h2) * std::sqrt(nu[col] / nu[r]);
        }
        op.matrix(r, r) = -op.matrix.row(r).sum();
    }
    if (!op.flagged_cells.empty()) {
        op.warnings.push_back(std::to_string(op.flagged_cells.size()) + " empty bins decoupled");
    }
    return op;
}

/// y = φ(z) = ∫₀^z σ(s)⁻¹ ds with σ = √a (trapezoid on the bin centers,
/// constant extension below the first center). In y the projected
/// dynamics has unit diffusion and drift b/σ − β⁻¹σ′ = −dF_y/dy with
/// F_y = F − β⁻¹ log σ.
struct VolatilityTransform {
    std::vector<double> z;
    std::vector<double> phi;
    std::vector<double> sigma;
    std::vector<double> y_diffusion;       ///< φ′² a, identically 1
    std::vector<double> y_drift;           ///< b/σ − β⁻¹σ′
    std::vector<double> y_free_energy;     ///< F − β⁻¹ log σ
    std::vector<double> z_drift_identity;  ///< −aF′ + β⁻¹a′ by central differences
    std::vector<double> identity_error;    ///< combined standard error of b − (−aF′ + β⁻¹a′)
};

inline VolatilityTransform volatility_transform(const ProjectedCoefficients& c, double beta) {
    const std::size_t n = c.bins();
    require(n >= 3, "volatility_transform: need at least three bins");
    VolatilityTransform vt;
    vt.z = c.z;
    for (std::size_t i = 0; i < n; ++i) {
        require(c.active(i), "volatility_transform: empty bin " + std::to_string(i));
        const double s = std::sqrt(c.a[i]);
        if (!(s >= 1e-8)) {
            throw NumericalError("volatility_transform: sigma below 1e-8 at z = " + format_double(c.z[i]));
        }
        vt.sigma.push_back(s);
    }
    vt.phi.assign(n, 0.0);
    vt.phi[0] = c.z[0] / vt.sigma[0];
    for (std::size_t i = 1; i < n; ++i) {
        vt.phi[i] = vt.phi[i - 1] + 0.5 * c.width * (1.0 / vt.sigma[i - 1] + 1.0 / vt.sigma[i]);
    }
    auto diff = [&](const std::vector<double>& f, std::size_t i) {
        if (c.periodic) {
            const std::size_t ip = (i + 1) % n;
            const std::size_t im = (i + n - 1) % n;
            return (f[ip] - f[im]) / (2.0 * c.width);
        }
        if (i == 0) {
            return (f[1] - f[0]) / c.width;
        }
        if (i == n - 1) {
            return (f[n - 1] - f[n - 2]) / c.width;
        }
        return (f[i + 1] - f[i - 1]) / (2.0 * c.width);
    };
    for (std::size_t i = 0; i < n; ++i) {
        const double dphi = 1.0 / vt.sigma[i];
        vt.y_diffusion.push_back(dphi * dphi * c.a[i]);
        vt.y_drift.push_back(c.b[i] / vt.sigma[i] - diff(vt.sigma, i) / beta);
        vt.y_free_energy.push_back(c.free_energy[i] - std::log(vt.sigma[i]) / beta);
        const double df = diff(c.free_energy, i);
        const double da = diff(c.a, i);
        vt.z_drift_identity.push_back(-c.a[i] * df + da / beta);
        // Neighbour errors of F and a enter through the difference quotient.
        const std::size_t ip = c.periodic ? (i + 1) % n : std::min(i + 1, n - 1);
        const std::size_t im = c.periodic ? (i + n - 1) % n : (i == 0 ? 0 : i - 1);
        const double span = static_cast<double>(c.periodic || (i > 0 && i < n - 1) ? 2 : 1) * c.width;
        const double se_df = std::hypot(c.stderr_free_energy[ip], c.stderr_free_energy[im]) / span;
        const double se_da = std::hypot(c.stderr_a[ip], c.stderr_a[im]) / span;
        vt.identity_error.push_back(std::sqrt(c.stderr_b[i] * c.stderr_b[i] + c.a[i] * c.a[i] * se_df * se_df +
                                              df * df * c.stderr_a[i] * c.stderr_a[i] + se_da * se_da / (beta * beta)));
    }
    return vt;
}

/// `z,a,b,F,stderr_a,stderr_b,count`
inline void write_coefficients_csv(std::ostream& os, const ProjectedCoefficients& c) {
    os << "z,a,b,F,stderr_a,stderr_b,count\n";
    for (std::size_t i = 0; i < c.bins(); ++i) {
        os << format_double(c.z[i]) << ',' << format_double(c.a[i]) << ',' << format_double(c.b[i]) << ','
           << format_double(c.free_energy[i]) << ',' << format_double(c.stderr_a[i]) << ','
           << format_double(c.stderr_b[i]) << ',' << c.count[i] << '\n';
    }
}

}  // namespace pseudogen
