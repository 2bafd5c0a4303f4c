#pragma once

#include "core.hpp"

#include <Eigen/LU>

#include <array>
#include <cmath>

namespace pseudogen {

/// Matrix exponential by scaling and squaring with a degree-13 Padé
/// approximant (Higham 2005).
inline Matrix expm(const Matrix& a) {
    require(a.rows() == a.cols(), "expm: matrix must be square");
    const Eigen::Index n = a.rows();
    if (n == 0) {
        return a;
    }
    if (!a.allFinite()) {
        throw NumericalError("expm: matrix has non-finite entries");
    }
    static constexpr std::array<double, 14> b{
        64764752532480000.0, 32382376266240000.0, 7771770303897600.0, 1187353796428800.0,
        129060195264000.0,   10559470521600.0,    670442572800.0,     33522128640.0,
        1323241920.0,        40840800.0,          960960.0,           16380.0,
        182.0,               1.0};
    constexpr double theta13 = 5.371920351148152;

    const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
    int squarings = 0;
    if (norm1 > theta13) {
        squarings = static_cast<int>(std::ceil(std::log2(norm1 / theta13)));
    }
    const Matrix as = a / std::ldexp(1.0, squarings);
    const Matrix id = Matrix::Identity(n, n);
    const Matrix a2 = as * as;
    const Matrix a4 = a2 * a2;
    const Matrix a6 = a4 * a2;

    const Matrix u_inner = a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * id;
    const Matrix u = as * u_inner;
    const Matrix v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;

    Matrix r = (v - u).partialPivLu().solve(v + u);
    for (int k = 0; k < squarings; ++k) {
        r = r * r;
    }
    if (!r.allFinite()) {
        throw NumericalError("expm: result has non-finite entries");
    }
    return r;
}

inline double weighted_dot(const Vector& u, const Vector& v, const Vector& w) {
    return (w.array() * u.array() * v.array()).sum();
}

/// ‖u‖_w = (Σ w_i u_i²)^{1/2}.
inline double weighted_norm(const Vector& u, const Vector& w) { return std::sqrt(weighted_dot(u, u, w)); }

/// Rows scaled by √w: turns a w-self-adjoint matrix into a symmetric one.
inline Matrix symmetrize_weighted(const Matrix& a, const Vector& w) {
    const Vector s = w.array().sqrt();
    const Vector si = s.array().inverse();
    return s.asDiagonal() * a * si.asDiagonal();
}

/// ‖D_w A − Aᵀ D_w‖_F / ‖D_w A‖_F.
inline double self_adjointness_defect(const Matrix& a, const Vector& w) {
    const Matrix da = w.asDiagonal() * a;
    const double denom = da.norm();
    return denom > 0.0 ? (da - da.transpose()).norm() / denom : 0.0;
}

}  // namespace pseudogen
