#pragma once

#include "grid.hpp"
#include "linalg.hpp"
#include "operators.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <complex>
#include <numeric>
#include <ostream>
#include <vector>

namespace pseudogen {

struct SpectrumResult {
    std::vector<std::complex<double>> values;  ///< descending real part
    Matrix vectors;                            ///< real eigenvectors, ‖·‖_w = 1
    Vector residuals;                          ///< ‖Av − λv‖₂ / ‖v‖₂
    Vector weights;
    double max_imag = 0.0;
    bool self_adjoint = false;
    OperatorKind source = OperatorKind::spatial_transfer;
    double lag = 0.0;

    [[nodiscard]] double real(std::size_t k) const { return values.at(k).real(); }
    [[nodiscard]] std::size_t size() const { return values.size(); }
};

namespace detail {

// Rotates a complex eigenvector so its largest entry is real and positive,
// then takes the real part and w-normalizes.
inline Vector realify(const Eigen::VectorXcd& v, const Vector& w) {
    Eigen::Index imax = 0;
    v.cwiseAbs().maxCoeff(&imax);
    const std::complex<double> phase = std::abs(v[imax]) > 0.0 ? std::conj(v[imax]) / std::abs(v[imax]) : 1.0;
    Vector r = (v * phase).real();
    const double norm = weighted_norm(r, w);
    if (norm > 0.0) {
        r /= norm;
    }
    return r;
}

inline void fix_sign(Vector& v) {
    Eigen::Index imax = 0;
    v.cwiseAbs().maxCoeff(&imax);
    if (v[imax] < 0.0) {
        v = -v;
    }
}

}  // namespace detail

/// Top-k eigenpairs by real part (ties: ascending imaginary part). Operators
/// that are self-adjoint in the w-inner product to 1e-12 are solved through
/// the symmetric similarity transform and have exactly real spectra.
inline SpectrumResult compute_spectrum(const OperatorMatrix& op, std::size_t k) {
    const auto n = op.size();
    require(k >= 1 && static_cast<Eigen::Index>(k) <= n, "compute_spectrum: k must be in [1, N]");
    if (!op.matrix.allFinite()) {
        throw NumericalError("compute_spectrum: non-finite entries in " + to_string(op.kind) + " matrix at lag " +
                             format_double(op.lag));
    }
    Vector w = op.weights.size() == n ? op.weights : Vector::Ones(n);
    SpectrumResult res;
    res.weights = w;
    res.source = op.kind;
    res.lag = op.lag;
    res.vectors.resize(n, static_cast<Eigen::Index>(k));
    res.residuals.resize(static_cast<Eigen::Index>(k));

    const bool positive_weights = (w.array() > 0.0).all();
    res.self_adjoint = positive_weights && self_adjointness_defect(op.matrix, w) < 1e-12;

    if (res.self_adjoint) {
        Matrix sym = symmetrize_weighted(op.matrix, w);
        sym = 0.5 * (sym + sym.transpose());
        Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
        if (es.info() != Eigen::Success) {
            throw NumericalError("compute_spectrum: symmetric eigensolver failed for " + to_string(op.kind) +
                                 " at lag " + format_double(op.lag));
        }
        const Vector inv_sqrt = w.array().sqrt().inverse();
        for (std::size_t j = 0; j < k; ++j) {
            const Eigen::Index src = n - 1 - static_cast<Eigen::Index>(j);
            const double lambda = es.eigenvalues()[src];
            Vector v = inv_sqrt.asDiagonal() * es.eigenvectors().col(src);
            v /= weighted_norm(v, w);
            detail::fix_sign(v);
            res.values.emplace_back(lambda, 0.0);
            res.vectors.col(static_cast<Eigen::Index>(j)) = v;
            res.residuals[static_cast<Eigen::Index>(j)] = (op.matrix * v - lambda * v).norm() / v.norm();
        }
        return res;
    }

    Eigen::EigenSolver<Matrix> es(op.matrix, true);
    if (es.info() != Eigen::Success) {
        throw NumericalError("compute_spectrum: eigensolver failed for " + to_string(op.kind) + " at lag " +
                             format_double(op.lag));
    }
    const Eigen::VectorXcd vals = es.eigenvalues();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        if (vals[a].real() != vals[b].real()) {
            return vals[a].real() > vals[b].real();
        }
        return vals[a].imag() < vals[b].imag();
    });
    const Eigen::MatrixXcd vecs = es.eigenvectors();
    for (std::size_t j = 0; j < k; ++j) {
        const Eigen::Index src = order[j];
        const std::complex<double> lambda = vals[src];
        res.values.push_back(lambda);
        res.max_imag = std::max(res.max_imag, std::abs(lambda.imag()));
        Vector v = detail::realify(vecs.col(src), w);
        detail::fix_sign(v);
        res.vectors.col(static_cast<Eigen::Index>(j)) = v;
        const Eigen::VectorXcd vc = vecs.col(src);
        res.residuals[static_cast<Eigen::Index>(j)] = (op.matrix * vc - lambda * vc).norm() / vc.norm();
    }
    return res;
}

/// min over s = ±1 of ‖û − s·v̂‖_w with û, v̂ the w-normalized inputs.
inline double compare_eigenfunctions(const Vector& u, const Vector& v, const Vector& w) {
    require(u.size() == v.size() && u.size() == w.size(), "compare_eigenfunctions: size mismatch");
    const double nu = weighted_norm(u, w);
    const double nv = weighted_norm(v, w);
    require(nu > 0.0 && nv > 0.0, "compare_eigenfunctions: zero vector");
    const Vector a = u / nu;
    const Vector b = v / nv;
    return std::min(weighted_norm(a - b, w), weighted_norm(a + b, w));
}

struct Partition {
    std::vector<std::vector<std::size_t>> sets;
    bool metastable = true;
    std::vector<std::string> warnings;
};

/// Metastable sets from the dominant eigenvectors: sign structure of the
/// second eigenvector for n = 2, k-means on the rows of the first n
/// eigenvectors otherwise. A partition is called metastable when the gap
/// below λ_n exceeds the spread λ₁ − λ_n.
inline Partition metastable_partition(const SpectrumResult& spec, std::size_t n) {
    require(n >= 2 && n <= spec.size(), "metastable_partition: need 2 <= n <= number of computed modes");
    Partition part;
    const auto cells = static_cast<std::size_t>(spec.vectors.rows());
    if (n < spec.size()) {
        const double spread = spec.real(0) - spec.real(n - 1);
        const double gap = spec.real(n - 1) - spec.real(n);
        if (!(gap > spread)) {
            part.metastable = false;
            part.warnings.push_back("no spectral gap below the dominant eigenvalues; partition is not metastable");
        }
    }
    if (n == 2) {
        std::vector<std::size_t> plus;
        std::vector<std::size_t> minus;
        for (std::size_t i = 0; i < cells; ++i) {
            (spec.vectors(static_cast<Eigen::Index>(i), 1) >= 0.0 ? plus : minus).push_back(i);
        }
        if (plus.empty() || minus.empty()) {
            part.warnings.push_back("second eigenvector has no sign change; single set returned");
            part.metastable = false;
            part.sets.push_back(plus.empty() ? minus : plus);
        } else {
            part.sets = {plus, minus};
        }
        return part;
    }

    // Deterministic farthest-point initialization, then Lloyd iterations.
    const Matrix emb = spec.vectors.leftCols(static_cast<Eigen::Index>(n));
    std::vector<Eigen::Index> seeds{0};
    emb.col(1).maxCoeff(&seeds[0]);
    while (seeds.size() < n) {
        Eigen::Index best = 0;
        double best_d = -1.0;
        for (Eigen::Index i = 0; i < emb.rows(); ++i) {
            double d = std::numeric_limits<double>::infinity();
            for (auto s : seeds) {
                d = std::min(d, (emb.row(i) - emb.row(s)).squaredNorm());
            }
            if (d > best_d) {
                best_d = d;
                best = i;
            }
        }
        seeds.push_back(best);
    }
    Matrix centers(static_cast<Eigen::Index>(n), emb.cols());
    for (std::size_t c = 0; c < n; ++c) {
        centers.row(static_cast<Eigen::Index>(c)) = emb.row(seeds[c]);
    }
    std::vector<std::size_t> label(cells, 0);
    for (int iter = 0; iter < 100; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < cells; ++i) {
            Eigen::Index best = 0;
            (centers.rowwise() - emb.row(static_cast<Eigen::Index>(i))).rowwise().squaredNorm().minCoeff(&best);
            if (label[i] != static_cast<std::size_t>(best)) {
                label[i] = static_cast<std::size_t>(best);
                changed = true;
            }
        }
        Matrix sums = Matrix::Zero(centers.rows(), centers.cols());
        std::vector<double> counts(n, 0.0);
        for (std::size_t i = 0; i < cells; ++i) {
            sums.row(static_cast<Eigen::Index>(label[i])) += emb.row(static_cast<Eigen::Index>(i));
            counts[label[i]] += 1.0;
        }
        for (std::size_t c = 0; c < n; ++c) {
            if (counts[c] > 0.0) {
                centers.row(static_cast<Eigen::Index>(c)) = sums.row(static_cast<Eigen::Index>(c)) / counts[c];
            }
        }
        if (!changed && iter > 0) {
            break;
        }
    }
    part.sets.assign(n, {});
    for (std::size_t i = 0; i < cells; ++i) {
        part.sets[label[i]].push_back(i);
    }
    std::erase_if(part.sets, [](const auto& s) { return s.empty(); });
    if (part.sets.size() < n) {
        part.warnings.push_back("k-means produced empty clusters; fewer sets returned");
    }
    return part;
}

/// Smallest real part among all eigenvalues of the operator.
inline double spectrum_floor(const OperatorMatrix& op) {
    const Vector& w = op.weights;
    if (w.size() == op.size() && (w.array() > 0.0).all() && self_adjointness_defect(op.matrix, w) < 1e-12) {
        Matrix sym = symmetrize_weighted(op.matrix, w);
        sym = 0.5 * (sym + sym.transpose());
        return Eigen::SelfAdjointEigenSolver<Matrix>(sym, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
    }
    Eigen::EigenSolver<Matrix> es(op.matrix, false);
    if (es.info() != Eigen::Success) {
        throw NumericalError("spectrum_floor: eigensolver failed for " + to_string(op.kind));
    }
    return es.eigenvalues().real().minCoeff();
}

struct MetastabilityBounds {
    double lower = 0.0;
    double upper = 0.0;
    double diagonal_sum = 0.0;
    double spectrum_floor = 0.0;     ///< a, smallest real part of the full spectrum
    std::vector<double> rho;         ///< ρ_j = ‖Πv_j‖²_w for j = 2..n
    std::vector<double> eigenvalues; ///< λ_2..λ_n used
    std::vector<std::string> warnings;
};

/// Bracket of Σ_i p(A_i → A_i) by the dominant eigenvalues:
///   1 + Σ ρ_jλ_j + a Σ (1 − ρ_j)  ≤  Σ_i p(A_i → A_i)  ≤  1 + Σ λ_j,
/// ρ_j = ‖Πv_j‖²_w with Π the w-orthogonal projection onto the set
/// indicators and a the smallest real part over the whole spectrum of the
/// operator. Modes with |Im λ| > 1e-3 are skipped with a warning.
inline MetastabilityBounds metastability_bounds(const OperatorMatrix& op, const SpectrumResult& spec,
                                                const Partition& part) {
    const std::size_t n = part.sets.size();
    require(n >= 1, "metastability_bounds: empty partition");
    const Vector& w = op.weights;
    MetastabilityBounds b;
    b.spectrum_floor = spectrum_floor(op);
    std::vector<double> mass(n, 0.0);
    for (std::size_t s = 0; s < n; ++s) {
        for (auto i : part.sets[s]) {
            mass[s] += w[static_cast<Eigen::Index>(i)];
        }
    }
    std::size_t used = 1;
    for (std::size_t j = 1; j < spec.size() && used < n; ++j) {
        if (std::abs(spec.values[j].imag()) > 1e-3) {
            b.warnings.push_back("mode " + std::to_string(j) + " has |Im| > 1e-3 and is excluded");
            continue;
        }
        const Vector v = spec.vectors.col(static_cast<Eigen::Index>(j));
        double rho = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
            double proj = 0.0;
            for (auto i : part.sets[s]) {
                proj += w[static_cast<Eigen::Index>(i)] * v[static_cast<Eigen::Index>(i)];
            }
            rho += proj * proj / mass[s];
        }
        rho /= weighted_dot(v, v, w);
        b.rho.push_back(rho);
        b.eigenvalues.push_back(spec.real(j));
        ++used;
    }
    if (used < n) {
        b.warnings.push_back("not enough real modes for the partition size");
    }
    b.lower = 1.0;
    b.upper = 1.0;
    for (std::size_t j = 0; j < b.rho.size(); ++j) {
        b.lower += b.rho[j] * b.eigenvalues[j] + b.spectrum_floor * (1.0 - b.rho[j]);
        b.upper += b.eigenvalues[j];
    }
    for (std::size_t s = 0; s < n; ++s) {
        b.diagonal_sum += transition_probability(op, part.sets[s], part.sets[s]);
    }
    return b;
}

namespace detail {

// Per-row multinomial variance of (P̂f)_i for an Ulam estimate with n rows
// samples: (Σ_j P_ij f_j² − (Pf)_i²) / n.
inline Vector row_variance(const OperatorMatrix& op, const Vector& f) {
    require(op.samples_per_cell > 0, "Monte Carlo error: operator was not sampled");
    const Vector mean = op.matrix * f;
    const Vector second = op.matrix * f.cwiseAbs2();
    return (second - mean.cwiseAbs2()).cwiseMax(0.0) / static_cast<double>(op.samples_per_cell);
}

inline Matrix w_orthonormal(const Matrix& basis, const Vector& w) {
    const Matrix gram = basis.transpose() * w.asDiagonal() * basis;
    Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
    const Matrix inv_sqrt = es.eigenvectors() * es.eigenvalues().cwiseMax(1e-300).cwiseSqrt().cwiseInverse().asDiagonal() *
                            es.eigenvectors().transpose();
    return basis * inv_sqrt;
}

}  // namespace detail

/// First-order standard error of eigenvalue j of a sampled transfer
/// operator, treating w∘v as the left eigenvector (exact for w-reversible
/// dynamics).
inline double eigenvalue_standard_error(const OperatorMatrix& op, const SpectrumResult& spec, std::size_t j) {
    const Vector v = spec.vectors.col(static_cast<Eigen::Index>(j));
    const Vector var = detail::row_variance(op, v);
    const Vector wv = spec.weights.cwiseProduct(v);
    return std::sqrt(wv.cwiseAbs2().dot(var)) / weighted_dot(v, v, spec.weights);
}

/// Monte Carlo size of the restriction of a sampled operator to span(V):
/// Frobenius norm of the standard errors of its matrix in a w-orthonormal
/// basis of span(V). Bounds the operator-norm noise up to O(1) factors.
inline double restricted_noise_norm(const OperatorMatrix& op, const Matrix& basis, const Vector& w) {
    const Matrix q = detail::w_orthonormal(basis, w);
    double total = 0.0;
    for (Eigen::Index l = 0; l < q.cols(); ++l) {
        const Vector var = detail::row_variance(op, q.col(l));
        for (Eigen::Index k = 0; k < q.cols(); ++k) {
            total += (w.cwiseProduct(q.col(k))).cwiseAbs2().dot(var);
        }
    }
    return std::sqrt(total);
}

/// Operator norm of A on span(V) in the w-inner product:
/// sup over c of ‖AVc‖_w / ‖Vc‖_w.
inline double restricted_operator_norm(const Matrix& a, const Matrix& basis, const Vector& w) {
    const Vector sw = w.array().sqrt();
    const Matrix m = sw.asDiagonal() * a * detail::w_orthonormal(basis, w);
    Eigen::JacobiSVD<Matrix> svd(m);
    return svd.singularValues()[0];
}

/// `rank,re_lambda,im_lambda,residual`
inline void write_spectrum_csv(std::ostream& os, const SpectrumResult& spec) {
    os << "rank,re_lambda,im_lambda,residual\n";
    for (std::size_t j = 0; j < spec.size(); ++j) {
        os << j + 1 << ',' << format_double(spec.values[j].real()) << ',' << format_double(spec.values[j].imag())
           << ',' << format_double(spec.residuals[static_cast<Eigen::Index>(j)]) << '\n';
    }
}

/// `cell_center,u1,u2,...` for 1-D grids; multi-axis grids list each
/// center coordinate as cell_center1, cell_center2, ...
template <int Dim>
void write_eigenfunctions_csv(std::ostream& os, const UlamGrid<Dim>& grid, const SpectrumResult& spec,
                              std::size_t count) {
    count = std::min<std::size_t>(count, spec.size());
    if (Dim == 1) {
        os << "cell_center";
    } else {
        for (int a = 1; a <= Dim; ++a) {
            os << (a > 1 ? "," : "") << "cell_center" << a;
        }
    }
    for (std::size_t j = 1; j <= count; ++j) {
        os << ",u" << j;
    }
    os << '\n';
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const Vec<Dim> c = grid.center(i);
        for (int a = 0; a < Dim; ++a) {
            os << (a > 0 ? "," : "") << format_double(c[a]);
        }
        for (std::size_t j = 0; j < count; ++j) {
            os << ',' << format_double(spec.vectors(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        }
        os << '\n';
    }
}

}  // namespace pseudogen
