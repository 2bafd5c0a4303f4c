#pragma once

#include <Eigen/Dense>

#include <array>
#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>

namespace pseudogen {

template <int Dim>
using Vec = Eigen::Matrix<double, Dim, 1>;

template <int Dim>
using Mat = Eigen::Matrix<double, Dim, Dim>;

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A numerical failure (non-finite force, failed factorization, ...).
class NumericalError : public Error {
public:
    using Error::Error;
};

inline void require(bool condition, const std::string& message) {
    if (!condition) {
        throw InvalidArgument(message);
    }
}

/// Shortest round-trip decimal form; identical bits give identical text.
inline std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

template <int Dim>
std::string format_point(const Vec<Dim>& q) {
    std::ostringstream os;
    os.precision(17);
    os << '(';
    for (int i = 0; i < q.size(); ++i) {
        os << (i ? ", " : "") << q[i];
    }
    os << ')';
    return os.str();
}

/// Axis-aligned configuration domain. Each axis is either periodic on
/// [lo, hi) or a closed box [lo, hi] with reflecting walls.
template <int Dim>
struct Domain {
    std::array<double, Dim> lo{};
    std::array<double, Dim> hi{};
    std::array<bool, Dim> periodic{};

    [[nodiscard]] double length(int axis) const { return hi[axis] - lo[axis]; }

    [[nodiscard]] double volume() const {
        double v = 1.0;
        for (int a = 0; a < Dim; ++a) {
            v *= length(a);
        }
        return v;
    }

    [[nodiscard]] bool contains(const Vec<Dim>& q) const {
        for (int a = 0; a < Dim; ++a) {
            if (q[a] < lo[a] || q[a] > hi[a]) {
                return false;
            }
        }
        return true;
    }

    /// Folds periodic axes into [lo, hi).
    void fold(Vec<Dim>& q) const {
        for (int a = 0; a < Dim; ++a) {
            if (periodic[a] && (q[a] < lo[a] || q[a] >= hi[a])) {
                const double L = length(a);
                double x = q[a] - lo[a];
                x -= L * std::floor(x / L);
                if (x >= L) {
                    x -= L;
                }
                q[a] = lo[a] + x;
            }
        }
    }

    /// Folds periodic axes and mirrors positions at reflecting walls,
    /// flipping the matching momentum component.
    void fold_reflect(Vec<Dim>& q, Vec<Dim>& p) const {
        for (int a = 0; a < Dim; ++a) {
            if (periodic[a]) {
                continue;
            }
            // A single reflection suffices unless a step jumps a whole box.
            for (int guard = 0; guard < 8 && (q[a] < lo[a] || q[a] > hi[a]); ++guard) {
                if (q[a] > hi[a]) {
                    q[a] = 2.0 * hi[a] - q[a];
                } else {
                    q[a] = 2.0 * lo[a] - q[a];
                }
                p[a] = -p[a];
            }
        }
        fold(q);
    }

    void fold_reflect(Vec<Dim>& q) const {
        Vec<Dim> dummy = Vec<Dim>::Zero();
        fold_reflect(q, dummy);
    }

    /// Minimum-image difference a - b along periodic axes.
    [[nodiscard]] Vec<Dim> difference(const Vec<Dim>& a, const Vec<Dim>& b) const {
        Vec<Dim> d = a - b;
        for (int ax = 0; ax < Dim; ++ax) {
            if (periodic[ax]) {
                const double L = length(ax);
                d[ax] -= L * std::round(d[ax] / L);
            }
        }
        return d;
    }
};

inline Domain<1> periodic_interval(double lo = 0.0, double hi = 1.0) {
    return Domain<1>{{lo}, {hi}, {true}};
}

inline Domain<1> reflecting_interval(double lo, double hi) {
    return Domain<1>{{lo}, {hi}, {false}};
}

}  // namespace pseudogen
