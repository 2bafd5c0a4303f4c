#pragma once

#include "boltzmann.hpp"

#include <vector>

namespace pseudogen {

/// Regular cell partition of a box domain with Boltzmann cell weights
/// w_i = ∫_cell f_Q. Flat cell indices are row-major (last axis fastest).
template <int Dim>
class UlamGrid {
public:
    static constexpr int dim = Dim;
    static constexpr double kEmptyWeight = 1e-14;

    UlamGrid(Domain<Dim> domain, std::array<int, Dim> cells) : domain_(domain), cells_(cells) {
        std::size_t total = 1;
        for (int a = 0; a < Dim; ++a) {
            require(cells[a] >= 2, "UlamGrid: need at least two cells per axis");
            require(domain.hi[a] > domain.lo[a], "UlamGrid: empty axis");
            width_[a] = domain.length(a) / cells[a];
            total *= static_cast<std::size_t>(cells[a]);
        }
        require(total <= 1u << 22, "UlamGrid: too many cells");
        size_ = total;
        weights_ = Vector::Constant(static_cast<Eigen::Index>(size_), 1.0 / static_cast<double>(size_));
        log_bound_.assign(size_, 0.0);
    }

    /// Grid over the model domain with Boltzmann weights at inverse temperature β.
    template <Potential P>
        requires(P::dim == Dim)
    static UlamGrid with_boltzmann(const P& model, double beta, std::array<int, Dim> cells) {
        UlamGrid grid(model.domain(), cells);
        grid.assign_weights(model, beta);
        return grid;
    }

    [[nodiscard]] std::size_t size() const { return size_; }
    [[nodiscard]] const Domain<Dim>& domain() const { return domain_; }
    [[nodiscard]] int cells(int axis) const { return cells_[axis]; }
    [[nodiscard]] double width(int axis) const { return width_[axis]; }
    [[nodiscard]] const Vector& weights() const { return weights_; }
    [[nodiscard]] double beta() const { return beta_; }

    [[nodiscard]] std::array<int, Dim> multi_index(std::size_t flat) const {
        std::array<int, Dim> idx{};
        for (int a = Dim - 1; a >= 0; --a) {
            idx[a] = static_cast<int>(flat % static_cast<std::size_t>(cells_[a]));
            flat /= static_cast<std::size_t>(cells_[a]);
        }
        return idx;
    }

    [[nodiscard]] std::size_t flat_index(const std::array<int, Dim>& idx) const {
        std::size_t flat = 0;
        for (int a = 0; a < Dim; ++a) {
            flat = flat * static_cast<std::size_t>(cells_[a]) + static_cast<std::size_t>(idx[a]);
        }
        return flat;
    }

    [[nodiscard]] Vec<Dim> lower_corner(std::size_t flat) const {
        const auto idx = multi_index(flat);
        Vec<Dim> c;
        for (int a = 0; a < Dim; ++a) {
            c[a] = domain_.lo[a] + idx[a] * width_[a];
        }
        return c;
    }

    [[nodiscard]] Vec<Dim> center(std::size_t flat) const {
        Vec<Dim> c = lower_corner(flat);
        for (int a = 0; a < Dim; ++a) {
            c[a] += 0.5 * width_[a];
        }
        return c;
    }

    /// Cell containing q; q is folded first, points on a closed upper wall
    /// belong to the last cell.
    [[nodiscard]] std::size_t locate(Vec<Dim> q) const {
        domain_.fold(q);
        std::array<int, Dim> idx{};
        for (int a = 0; a < Dim; ++a) {
            const int k = static_cast<int>(std::floor((q[a] - domain_.lo[a]) / width_[a]));
            idx[a] = std::clamp(k, 0, cells_[a] - 1);
        }
        return flat_index(idx);
    }

    [[nodiscard]] bool is_empty(std::size_t flat) const { return weights_[static_cast<Eigen::Index>(flat)] < kEmptyWeight; }

    /// Upper bound of −βV − log Z_shift inside the cell, for rejection sampling.
    [[nodiscard]] double log_density_bound(std::size_t flat) const { return log_bound_[flat]; }

    /// Neighbour along an axis (+1 or −1), or size() when it would cross a wall.
    [[nodiscard]] std::size_t neighbour(std::size_t flat, int axis, int step) const {
        auto idx = multi_index(flat);
        int k = idx[axis] + step;
        if (k < 0 || k >= cells_[axis]) {
            if (!domain_.periodic[axis]) {
                return size_;
            }
            k = (k + cells_[axis]) % cells_[axis];
        }
        idx[axis] = k;
        return flat_index(idx);
    }

    /// Draws q from the Boltzmann density restricted to a cell by rejection
    /// against the stored per-cell bound.
    template <Potential P, class R>
    Vec<Dim> sample_in_cell(std::size_t flat, const P& model, R& rng) const {
        require(has_weights_, "UlamGrid: sampling needs Boltzmann weights");
        const Vec<Dim> corner = lower_corner(flat);
        for (int attempt = 0; attempt < 1000000; ++attempt) {
            Vec<Dim> q;
            for (int a = 0; a < Dim; ++a) {
                q[a] = corner[a] + rng.uniform() * width_[a];
            }
            const double log_ratio = -beta_ * (model.energy(q) - shift_) - log_bound_[flat];
            if (std::log(rng.uniform()) < log_ratio) {
                return q;
            }
        }
        throw NumericalError("UlamGrid: rejection sampling failed in cell " + std::to_string(flat));
    }

    template <Potential P>
    void assign_weights(const P& model, double beta) {
        require(beta > 0.0, "UlamGrid: beta must be positive");
        beta_ = beta;
        has_weights_ = true;
        const double z = normalization_constant(model, beta);
        shift_ = detail::energy_floor(model);
        const double z_scaled = z * std::exp(beta * shift_);
        std::array<bool, Dim> closed{};
        for (std::size_t i = 0; i < size_; ++i) {
            const Vec<Dim> lo = lower_corner(i);
            std::array<double, Dim> a{};
            std::array<double, Dim> b{};
            for (int ax = 0; ax < Dim; ++ax) {
                a[ax] = lo[ax];
                b[ax] = lo[ax] + width_[ax];
            }
            const double mass = integrate_box<Dim>(
                [&](const Vec<Dim>& q) { return std::exp(-beta * (model.energy(q) - shift_)); }, a, b, closed, 2);
            weights_[static_cast<Eigen::Index>(i)] = mass / z_scaled;

            // Bound on the scaled density: maximum over a 9-point lattice plus
            // the largest change possible between lattice points.
            double max_log = -std::numeric_limits<double>::infinity();
            double max_grad = 0.0;
            const int m = 9;
            std::array<int, Dim> k{};
            for (int count = 0; count < ipow(m, Dim); ++count) {
                int rest = count;
                Vec<Dim> q;
                for (int ax = 0; ax < Dim; ++ax) {
                    k[ax] = rest % m;
                    rest /= m;
                    q[ax] = a[ax] + width_[ax] * k[ax] / (m - 1);
                }
                max_log = std::max(max_log, -beta * (model.energy(q) - shift_));
                max_grad = std::max(max_grad, model.gradient(q).norm());
            }
            double half_diag = 0.0;
            for (int ax = 0; ax < Dim; ++ax) {
                half_diag += std::pow(0.5 * width_[ax] / (m - 1), 2);
            }
            log_bound_[i] = max_log + 2.0 * beta * max_grad * std::sqrt(half_diag);
        }
    }

private:
    static int ipow(int b, int e) {
        int r = 1;
        for (int i = 0; i < e; ++i) {
            r *= b;
        }
        return r;
    }

    Domain<Dim> domain_;
    std::array<int, Dim> cells_;
    std::array<double, Dim> width_{};
    std::size_t size_ = 0;
    Vector weights_;
    std::vector<double> log_bound_;
    double beta_ = 1.0;
    double shift_ = 0.0;
    bool has_weights_ = false;
};

}  // namespace pseudogen
