#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace spde {

// Spatial dimension is a compile-time parameter restricted to 1 or 2.
template <int D>
using Vec = std::array<double, D>;

template <int D>
inline double norm_sq(const Vec<D>& v) {
    double s = 0.0;
    for (int i = 0; i < D; ++i) s += v[i] * v[i];
    return s;
}

template <int D>
inline Vec<D> axis_point(double value, int axis = 0) {
    Vec<D> p{};
    p[axis] = value;
    return p;
}

// Uniform box discretization of [-L, L]^D. Nodes are the centers of n cells
// per axis (n odd, so the origin is a node), spacing dx = 2L/n.
template <int D>
class GridSpec {
    static_assert(D == 1 || D == 2, "only dimensions 1 and 2 are supported");

public:
    GridSpec(double half_width, int nodes_per_axis)
        : half_width_(half_width), nodes_(nodes_per_axis) {
        if (!(half_width > 0.0))
            throw std::invalid_argument("grid half_width must be positive");
        if (nodes_ < 3 || nodes_ % 2 == 0)
            throw std::invalid_argument("grid nodes_per_axis must be odd and >= 3");
        spacing_ = 2.0 * half_width_ / static_cast<double>(nodes_);
    }

    static constexpr int dimension = D;

    double half_width() const { return half_width_; }
    double spacing() const { return spacing_; }
    int nodes_per_axis() const { return nodes_; }

    std::size_t node_count() const {
        std::size_t n = static_cast<std::size_t>(nodes_);
        return D == 1 ? n : n * n;
    }

    // Coordinate of node i along one axis; i = (n-1)/2 is the origin.
    double axis_coord(int i) const {
        return (i - (nodes_ - 1) / 2) * spacing_;
    }

    int center_index() const { return (nodes_ - 1) / 2; }

    std::size_t flat_index(const std::array<int, D>& idx) const {
        if constexpr (D == 1) {
            return static_cast<std::size_t>(idx[0]);
        } else {
            return static_cast<std::size_t>(idx[0]) * nodes_ + idx[1];
        }
    }

    std::array<int, D> axis_indices(std::size_t flat) const {
        if constexpr (D == 1) {
            return {static_cast<int>(flat)};
        } else {
            return {static_cast<int>(flat / nodes_), static_cast<int>(flat % nodes_)};
        }
    }

    Vec<D> node(std::size_t flat) const {
        auto idx = axis_indices(flat);
        Vec<D> p;
        for (int a = 0; a < D; ++a) p[a] = axis_coord(idx[a]);
        return p;
    }

    // Nearest node to an arbitrary point; used to anchor grid convolutions.
    std::array<int, D> nearest_node(const Vec<D>& x) const {
        std::array<int, D> idx;
        for (int a = 0; a < D; ++a) {
            int i = static_cast<int>(std::lround(x[a] / spacing_)) + (nodes_ - 1) / 2;
            if (i < 0 || i >= nodes_)
                throw std::invalid_argument("point lies outside the grid box");
            idx[a] = i;
        }
        return idx;
    }

    // Gaussian-tail truncation budget: the box must extend at least six
    // standard deviations past any point probed at horizon t_max.
    bool covers_horizon(double t_max) const {
        return half_width_ >= 6.0 * std::sqrt(t_max);
    }

    // True if the node keeps a margin of at least 6*sqrt(t) from the boundary.
    bool is_interior(const std::array<int, D>& idx, double t) const {
        double margin = 6.0 * std::sqrt(t);
        for (int a = 0; a < D; ++a) {
            if (std::abs(axis_coord(idx[a])) > half_width_ - margin) return false;
        }
        return true;
    }

    bool operator==(const GridSpec& other) const {
        return half_width_ == other.half_width_ && nodes_ == other.nodes_;
    }

private:
    double half_width_;
    int nodes_;
    double spacing_;
};

// Gridded real field. Values are stored row-major; out-of-box reads clamp
// to the boundary node (constant extrapolation).
template <int D>
class Field {
public:
    explicit Field(const GridSpec<D>& grid)
        : grid_(grid), values_(grid.node_count(), 0.0) {}

    template <class F>
    static Field sample(const GridSpec<D>& grid, F&& f) {
        Field out(grid);
        for (std::size_t k = 0; k < out.values_.size(); ++k)
            out.values_[k] = f(grid.node(k));
        return out;
    }

    const GridSpec<D>& grid() const { return grid_; }

    double& operator[](std::size_t k) { return values_[k]; }
    double operator[](std::size_t k) const { return values_[k]; }
    std::size_t size() const { return values_.size(); }

    double at(const std::array<int, D>& idx) const {
        return values_[grid_.flat_index(idx)];
    }

    // Clamped accessor realizing the constant boundary extension.
    double at_clamped(std::array<int, D> idx) const {
        for (int a = 0; a < D; ++a) {
            if (idx[a] < 0) idx[a] = 0;
            if (idx[a] >= grid_.nodes_per_axis()) idx[a] = grid_.nodes_per_axis() - 1;
        }
        return values_[grid_.flat_index(idx)];
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : values_) m = std::max(m, std::abs(v));
        return m;
    }

    Field& operator+=(const Field& other) {
        for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += other.values_[k];
        return *this;
    }

    Field& axpy(double a, const Field& other) {
        for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += a * other.values_[k];
        return *this;
    }

    Field& operator*=(double a) {
        for (double& v : values_) v *= a;
        return *this;
    }

    const std::vector<double>& values() const { return values_; }
    std::vector<double>& values() { return values_; }

private:
    GridSpec<D> grid_;
    std::vector<double> values_;
};

template <int D>
inline double max_abs_difference(const Field<D>& a, const Field<D>& b) {
    double m = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k)
        m = std::max(m, std::abs(a[k] - b[k]));
    return m;
}

}  // namespace spde
