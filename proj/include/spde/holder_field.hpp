#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include "spde/grid.hpp"
#include "spde/levy.hpp"
#include "spde/rng.hpp"

namespace spde {

// A coefficient field with declared Holder metadata. The evaluator accepts
// any point (named families are analytic); grids only enter when a field is
// sampled for convolution.
template <int D>
struct HolderField {
    std::function<double(double t, const Vec<D>&)> eval;
    double exponent = 1.0;   // Holder exponent of the spatial increments
    double seminorm = 0.0;   // declared [.]_alpha
    double sup_norm = 0.0;   // declared sup bound
    std::string name;        // family descriptor, used by config round-trips

    double operator()(double t, const Vec<D>& x) const { return eval(t, x); }
};

template <int D>
HolderField<D> constant_field(double value) {
    return {[value](double, const Vec<D>&) { return value; },
            1.0, 0.0, std::abs(value), "constant"};
}

// f(x) = x_1; only meaningful on a bounded box, used by identity tests.
template <int D>
HolderField<D> linear_field(double box_half_width = 1.0) {
    return {[](double, const Vec<D>& x) { return x[0]; },
            1.0, 1.0, box_half_width, "linear"};
}

// f(x) = min((x_1)_+^alpha, cap): nonnegative, nondecreasing, supported on
// the right half-space, with |f(x)-f(y)| comparable to |x-y|^alpha below the
// cap. This is the optimality test field.
template <int D>
HolderField<D> capped_power_field(double alpha, double cap = 1.0) {
    if (!(alpha > 0.0 && alpha <= 1.0))
        throw std::invalid_argument("capped power exponent must lie in (0,1]");
    if (!(cap > 0.0)) throw std::invalid_argument("field cap must be positive");
    return {[alpha, cap](double, const Vec<D>& x) {
                double v = x[0] > 0.0 ? std::pow(x[0], alpha) : 0.0;
                return std::min(v, cap);
            },
            alpha, 1.0, cap, "capped_power"};
}

// f(x) = scale * min(|x|^beta, cap); the drift fixture.
template <int D>
HolderField<D> capped_abs_power_field(double beta, double scale = 1.0, double cap = 1.0) {
    if (!(beta > 0.0 && beta <= 1.0))
        throw std::invalid_argument("capped power exponent must lie in (0,1]");
    if (!(cap > 0.0)) throw std::invalid_argument("field cap must be positive");
    return {[beta, scale, cap](double, const Vec<D>& x) {
                double r = std::sqrt(norm_sq<D>(x));
                return scale * std::min(std::pow(r, beta), cap);
            },
            beta, std::abs(scale), std::abs(scale) * cap, "capped_abs_power"};
}

template <int D>
HolderField<D> gaussian_bump_field(double amplitude, double width, Vec<D> center = {}) {
    if (!(width > 0.0)) throw std::invalid_argument("bump width must be positive");
    // Smooth; declared as Lipschitz with the bump's maximal slope.
    double slope = std::abs(amplitude) / width * std::exp(-0.5);
    return {[amplitude, width, center](double, const Vec<D>& x) {
                Vec<D> d;
                for (int i = 0; i < D; ++i) d[i] = x[i] - center[i];
                return amplitude * std::exp(-norm_sq<D>(d) / (2.0 * width * width));
            },
            1.0, slope, std::abs(amplitude), "gaussian_bump"};
}

// Separable jump coefficient g(t, x, v) = phi(t, x) * psi(v); psi lives on
// the charged mark annulus.
template <int D>
struct JumpCoefficient {
    HolderField<D> spatial;                     // phi
    std::function<double(double)> mark_factor;  // psi
    std::string mark_name;

    double mark_mean(const LevyMeasureSpec& spec) const {  // int psi d nu
        return spec.integrate([&](double v) { return mark_factor(v); });
    }
    double mark_l2_sq(const LevyMeasureSpec& spec) const {  // int psi^2 d nu
        return spec.integrate([&](double v) { return mark_factor(v) * mark_factor(v); });
    }
};

template <int D>
JumpCoefficient<D> separable_jump(HolderField<D> spatial, double psi_constant,
                                  std::string name = "constant") {
    return {std::move(spatial),
            [psi_constant](double) { return psi_constant; },
            std::move(name)};
}

// psi = 1/sqrt(mass), so the L^2(nu) norm is exactly one and the jump term's
// second moment coincides with the Wiener term's.
template <int D>
JumpCoefficient<D> unit_l2_jump(HolderField<D> spatial, const LevyMeasureSpec& spec) {
    if (!(spec.total_mass() > 0.0))
        throw std::invalid_argument("unit-L2 mark factor needs positive measure mass");
    return separable_jump<D>(std::move(spatial), 1.0 / std::sqrt(spec.total_mass()),
                             "unit_l2");
}

// Checks the declared metadata against node samples: declared seminorm and
// sup-norm must dominate what the grid actually sees.
template <int D>
void validate_holder_metadata(const HolderField<D>& field, const GridSpec<D>& grid,
                              double t = 0.0, int pair_samples = 2000,
                              std::uint64_t seed = 0) {
    rng::Stream stream(seed, 0, rng::Purpose::metadata);
    const std::size_t n = grid.node_count();
    double max_val = 0.0, max_ratio = 0.0;
    for (int s = 0; s < pair_samples; ++s) {
        std::size_t i = static_cast<std::size_t>(stream.next_uniform() * n);
        std::size_t j = static_cast<std::size_t>(stream.next_uniform() * n);
        if (i >= n) i = n - 1;
        if (j >= n) j = n - 1;
        Vec<D> xi = grid.node(i), xj = grid.node(j);
        double fi = field(t, xi), fj = field(t, xj);
        max_val = std::max({max_val, std::abs(fi), std::abs(fj)});
        if (i == j) continue;
        Vec<D> d;
        for (int a = 0; a < D; ++a) d[a] = xi[a] - xj[a];
        double dist = std::sqrt(norm_sq<D>(d));
        max_ratio = std::max(max_ratio, std::abs(fi - fj) / std::pow(dist, field.exponent));
    }
    const double slack = 1.0 + 1e-12;
    if (max_val > field.sup_norm * slack)
        throw std::invalid_argument("declared sup-norm understates the field: grid max " +
                                    std::to_string(max_val));
    if (max_ratio > field.seminorm * slack)
        throw std::invalid_argument("declared seminorm understates the field: empirical " +
                                    std::to_string(max_ratio));
}

}  // namespace spde
