#pragma once

#include "grid.hpp"
#include "linalg.hpp"
#include "parallel.hpp"
#include "sde.hpp"

#include <algorithm>
#include <ostream>
#include <string>
#include <vector>

namespace pseudogen {

enum class OperatorKind {
    spatial_transfer,
    smoluchowski_transfer,
    generator_g2,
    taylor,
    exponential,
    pseudo_generator,
    composed,
};

inline std::string to_string(OperatorKind kind) {
    switch (kind) {
        case OperatorKind::spatial_transfer: return "spatial_transfer";
        case OperatorKind::smoluchowski_transfer: return "smoluchowski_transfer";
        case OperatorKind::generator_g2: return "generator_g2";
        case OperatorKind::taylor: return "taylor";
        case OperatorKind::exponential: return "exponential";
        case OperatorKind::pseudo_generator: return "pseudo_generator";
        case OperatorKind::composed: return "composed";
    }
    return "unknown";
}

inline bool is_transfer(OperatorKind kind) {
    return kind == OperatorKind::spatial_transfer || kind == OperatorKind::smoluchowski_transfer ||
           kind == OperatorKind::exponential || kind == OperatorKind::composed;
}

/// A discretized operator acting on functions on the cells (densities with
/// respect to the Boltzmann weights). Transfer kinds are row-stochastic:
/// entry (i, j) is the probability of moving from cell i to cell j.
struct OperatorMatrix {
    OperatorKind kind = OperatorKind::spatial_transfer;
    double lag = 0.0;
    Matrix matrix;
    Vector weights;
    std::size_t samples_per_cell = 0;
    std::vector<std::size_t> flagged_cells;
    std::vector<std::string> warnings;

    [[nodiscard]] Eigen::Index size() const { return matrix.rows(); }
    [[nodiscard]] Vector apply(const Vector& u) const { return matrix * u; }
};

/// Largest |row sum − target| over all rows.
inline double row_sum_defect(const Matrix& m, double target) {
    return (m.rowwise().sum().array() - target).abs().maxCoeff();
}

namespace detail {

inline std::vector<std::size_t> lag_steps(const std::vector<double>& lags, double dt) {
    std::vector<std::size_t> steps;
    for (double t : lags) {
        require(t > 0.0, "transfer operator: lag must be positive");
        const double n = std::round(t / dt);
        require(n >= 1.0 && std::abs(n * dt - t) <= 1e-9 * std::max(1.0, t),
                "transfer operator: lag " + format_double(t) + " is not a multiple of dt " + format_double(dt));
        steps.push_back(static_cast<std::size_t>(n));
    }
    for (std::size_t k = 1; k < steps.size(); ++k) {
        require(steps[k] > steps[k - 1], "transfer operator: lags must be strictly increasing");
    }
    return steps;
}

}  // namespace detail

/// Ulam estimate of a sampled transfer operator at several lags from one
/// pass: for each cell, n_per_cell start points from the cell-conditional
/// Boltzmann density (momenta from N(0, M/β)) are integrated once and binned
/// at every lag. Cell i owns stream i, so results are independent of the
/// thread count, and a lag's matrix does not depend on which other lags
/// were requested.
template <class Integrator, Potential P>
std::vector<OperatorMatrix> build_sampled_transfer(const UlamGrid<P::dim>& grid, const std::vector<double>& lags,
                                                   const Integrator& integrator, const P& model,
                                                   std::size_t n_per_cell, const StreamFactory& streams,
                                                   int threads, OperatorKind kind) {
    constexpr int D = P::dim;
    require(n_per_cell >= 100, "transfer operator: n_per_cell must be at least 100");
    require(!lags.empty(), "transfer operator: no lags requested");
    const auto& cfg = integrator.config();
    const auto steps = detail::lag_steps(lags, cfg.dt);
    const auto n = static_cast<Eigen::Index>(grid.size());
    const Mat<D> p_factor = Mat<D>(cfg.mass / cfg.beta).llt().matrixL();

    std::vector<OperatorMatrix> out(lags.size());
    for (std::size_t k = 0; k < lags.size(); ++k) {
        out[k].kind = kind;
        out[k].lag = lags[k];
        out[k].matrix = Matrix::Zero(n, n);
        out[k].weights = grid.weights();
        out[k].samples_per_cell = n_per_cell;
    }

    parallel_for(grid.size(), threads, [&](std::size_t i) {
        const auto row = static_cast<Eigen::Index>(i);
        if (grid.is_empty(i)) {
            for (auto& op : out) {
                op.matrix(row, row) = 1.0;
            }
            return;
        }
        RandomStream rng = streams.stream(i);
        for (std::size_t s = 0; s < n_per_cell; ++s) {
            SimState<D> state;
            state.q = grid.sample_in_cell(i, model, rng);
            state.p = p_factor * detail::draw_normal<D>(rng);
            std::size_t done = 0;
            for (std::size_t k = 0; k < steps.size(); ++k) {
                integrator.advance(state, steps[k] - done, rng);
                done = steps[k];
                out[k].matrix(row, static_cast<Eigen::Index>(grid.locate(state.q))) += 1.0;
            }
        }
        for (auto& op : out) {
            op.matrix.row(row) /= op.matrix.row(row).sum();
        }
    });

    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid.is_empty(i)) {
            for (auto& op : out) {
                op.flagged_cells.push_back(i);
            }
        }
    }
    for (auto& op : out) {
        if (!op.flagged_cells.empty()) {
            op.warnings.push_back(std::to_string(op.flagged_cells.size()) +
                                  " cells with negligible weight set to identity rows");
        }
    }
    return out;
}

/// Spatial transfer operator S^t of the Langevin dynamics at several lags.
template <Potential P>
std::vector<OperatorMatrix> build_spatial_transfer(const UlamGrid<P::dim>& grid, const std::vector<double>& lags,
                                                   const SimConfig<P::dim>& cfg, const P& model,
                                                   std::size_t n_per_cell, const StreamFactory& streams,
                                                   int threads = 1) {
    const LangevinIntegrator<P> integrator(model, cfg);
    return build_sampled_transfer(grid, lags, integrator, model, n_per_cell, streams.derive(1), threads,
                                  OperatorKind::spatial_transfer);
}

template <Potential P>
OperatorMatrix build_spatial_transfer(const UlamGrid<P::dim>& grid, double lag, const SimConfig<P::dim>& cfg,
                                      const P& model, std::size_t n_per_cell, const StreamFactory& streams,
                                      int threads = 1) {
    return build_spatial_transfer(grid, std::vector<double>{lag}, cfg, model, n_per_cell, streams, threads).front();
}

/// Transfer operator of the Smoluchowski dynamics at several lags.
template <Potential P>
std::vector<OperatorMatrix> build_smoluchowski_transfer(const UlamGrid<P::dim>& grid,
                                                        const std::vector<double>& lags,
                                                        const SimConfig<P::dim>& cfg, const P& model,
                                                        std::size_t n_per_cell, const StreamFactory& streams,
                                                        int threads = 1) {
    const SmoluchowskiIntegrator<P> integrator(model, cfg);
    return build_sampled_transfer(grid, lags, integrator, model, n_per_cell, streams.derive(2), threads,
                                  OperatorKind::smoluchowski_transfer);
}

template <Potential P>
OperatorMatrix build_smoluchowski_transfer(const UlamGrid<P::dim>& grid, double lag, const SimConfig<P::dim>& cfg,
                                           const P& model, std::size_t n_per_cell, const StreamFactory& streams,
                                           int threads = 1) {
    return build_smoluchowski_transfer(grid, std::vector<double>{lag}, cfg, model, n_per_cell, streams, threads)
        .front();
}

/// Finite-volume (square-root approximation) discretization of
/// G₂ = β⁻¹Δ − ∇V·∇ on the grid: G_ij = √(w_j/w_i)/(βh²) for nearest
/// neighbours along an axis of width h, zero row sums. D_w G is symmetric,
/// so G is self-adjoint in the w-weighted inner product. Cells of
/// negligible weight are decoupled.
template <int Dim>
OperatorMatrix build_g2_matrix(const UlamGrid<Dim>& grid, double beta) {
    require(beta > 0.0, "build_g2_matrix: beta must be positive");
    const auto n = static_cast<Eigen::Index>(grid.size());
    const Vector& w = grid.weights();
    OperatorMatrix op;
    op.kind = OperatorKind::generator_g2;
    op.lag = 0.0;
    op.weights = w;
    op.matrix = Matrix::Zero(n, n);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid.is_empty(i)) {
            op.flagged_cells.push_back(i);
            continue;
        }
        const auto r = static_cast<Eigen::Index>(i);
        for (int a = 0; a < Dim; ++a) {
            const double rate = 1.0 / (beta * grid.width(a) * grid.width(a));
            for (int step : {-1, 1}) {
                const std::size_t j = grid.neighbour(i, a, step);
                if (j == grid.size() || j == i || grid.is_empty(j)) {
                    continue;
                }
                const auto c = static_cast<Eigen::Index>(j);
                op.matrix(r, c) += rate * std::sqrt(w[c] / w[r]);
            }
        }
        op.matrix(r, r) = 0.0;
        op.matrix(r, r) = -op.matrix.row(r).sum();
    }
    return op;
}

template <Potential P>
OperatorMatrix build_g2_matrix(const UlamGrid<P::dim>& grid, const SimConfig<P::dim>& cfg, const P&) {
    return build_g2_matrix(grid, cfg.beta);
}

/// R^t = I + (t²/2)G₂.
inline OperatorMatrix taylor_operator(const OperatorMatrix& g2, double t) {
    require(g2.kind == OperatorKind::generator_g2, "taylor_operator: expects a generator_g2 matrix");
    OperatorMatrix op = g2;
    op.kind = OperatorKind::taylor;
    op.lag = t;
    op.matrix = Matrix::Identity(g2.size(), g2.size()) + 0.5 * t * t * g2.matrix;
    return op;
}

/// E^t = exp((t²/2)G₂). Negative entries down to −1e-12 are clipped and the
/// rows renormalized; anything more negative is a numerical error.
inline OperatorMatrix exponential_operator(const OperatorMatrix& g2, double t) {
    require(g2.kind == OperatorKind::generator_g2, "exponential_operator: expects a generator_g2 matrix");
    OperatorMatrix op = g2;
    op.kind = OperatorKind::exponential;
    op.lag = t;
    op.matrix = expm(0.5 * t * t * g2.matrix);
    const double most_negative = op.matrix.minCoeff();
    if (most_negative < -1e-12) {
        throw NumericalError("exponential_operator: entry " + format_double(most_negative) + " below -1e-12 at t = " +
                             format_double(t));
    }
    op.matrix = op.matrix.cwiseMax(0.0);
    for (Eigen::Index r = 0; r < op.matrix.rows(); ++r) {
        op.matrix.row(r) /= op.matrix.row(r).sum();
    }
    return op;
}

/// Product of two transfer operators (apply `second` after `first`).
inline OperatorMatrix compose(const OperatorMatrix& first, const OperatorMatrix& second) {
    require(first.size() == second.size(), "compose: size mismatch");
    OperatorMatrix op = first;
    op.kind = OperatorKind::composed;
    op.lag = first.lag + second.lag;
    op.matrix = first.matrix * second.matrix;
    return op;
}

/// p(A → B) = Σ_{i∈A} w_i Σ_{j∈B} P_ij / Σ_{i∈A} w_i.
inline double transition_probability(const OperatorMatrix& op, const std::vector<std::size_t>& from,
                                     const std::vector<std::size_t>& to) {
    require(!from.empty(), "transition_probability: empty source set");
    const auto n = static_cast<std::size_t>(op.size());
    std::vector<char> in_target(n, 0);
    for (auto j : to) {
        require(j < n, "transition_probability: cell index out of range");
        in_target[j] = 1;
    }
    double num = 0.0;
    double den = 0.0;
    for (auto i : from) {
        require(i < n, "transition_probability: cell index out of range");
        const auto r = static_cast<Eigen::Index>(i);
        double row = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (in_target[j]) {
                row += op.matrix(r, static_cast<Eigen::Index>(j));
            }
        }
        num += op.weights[r] * row;
        den += op.weights[r];
    }
    require(den > 0.0, "transition_probability: source set has zero weight");
    return num / den;
}

/// `# kind t N` header followed by `i j value` for every nonzero entry.
inline void write_triplets(std::ostream& os, const OperatorMatrix& op) {
    os << "# " << to_string(op.kind) << ' ' << format_double(op.lag) << ' ' << op.size() << '\n';
    for (Eigen::Index i = 0; i < op.matrix.rows(); ++i) {
        for (Eigen::Index j = 0; j < op.matrix.cols(); ++j) {
            const double v = op.matrix(i, j);
            if (v != 0.0) {
                os << i << ' ' << j << ' ' << format_double(v) << '\n';
            }
        }
    }
}

template <int Dim>
void write_weights_csv(std::ostream& os, const UlamGrid<Dim>& grid) {
    os << "cell";
    for (int a = 1; a <= Dim; ++a) {
        os << ",center" << a;
    }
    os << ",weight\n";
    for (std::size_t i = 0; i < grid.size(); ++i) {
        os << i;
        const Vec<Dim> c = grid.center(i);
        for (int a = 0; a < Dim; ++a) {
            os << ',' << format_double(c[a]);
        }
        os << ',' << format_double(grid.weights()[static_cast<Eigen::Index>(i)]) << '\n';
    }
}

}  // namespace pseudogen
