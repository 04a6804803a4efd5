#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "spde/heat_kernel.hpp"

using namespace spde;

TEST_CASE("kernel matches the closed form") {
    CHECK(heat_kernel<1>(1.0, {0.0}) == Catch::Approx(0.3989422804014327).epsilon(1e-12));
    CHECK(heat_kernel<2>(0.5, {0.0, 0.0}) ==
          Catch::Approx(0.3183098861837907).epsilon(1e-12));
    CHECK(heat_kernel<1>(2.0, {2.0}) == Catch::Approx(0.1037768743551487).epsilon(1e-10));
    CHECK_THROWS_AS(heat_kernel<1>(0.0, {0.0}), std::domain_error);
    CHECK_THROWS_AS(heat_kernel<1>(-1.0, {0.0}), std::domain_error);
}

TEST_CASE("kernel gradient closed form and odd symmetry") {
    auto g0 = heat_kernel_gradient<1>(1.0, {0.0});
    CHECK(g0[0] == 0.0);
    auto g1 = heat_kernel_gradient<1>(1.0, {1.0});
    CHECK(g1[0] == Catch::Approx(-0.24197072451914337).epsilon(1e-12));
    CHECK_THROWS_AS(heat_kernel_gradient<1>(0.0, {1.0}), std::domain_error);
}

TEST_CASE("kernel gradient agrees with finite differences") {
    const double step = 1e-5;
    for (double t : {0.3, 1.0, 2.0}) {
        double bound = 4.0 * std::sqrt(t);
        for (double x : {-bound, -0.5 * bound, 0.1 * bound, bound}) {
            double fd = (heat_kernel<1>(t, {x + step}) - heat_kernel<1>(t, {x - step})) /
                        (2.0 * step);
            double g = heat_kernel_gradient<1>(t, {x})[0];
            double scale = std::max(std::abs(fd), 1e-30);
            CHECK(std::abs(g - fd) / scale < 1e-7);
        }
    }
    // d = 2: each component against its own central difference.
    double t = 0.7;
    Vec<2> p{0.4, -0.9};
    auto g = heat_kernel_gradient<2>(t, p);
    for (int c = 0; c < 2; ++c) {
        Vec<2> lo = p, hi = p;
        lo[c] -= step;
        hi[c] += step;
        double fd = (heat_kernel<2>(t, hi) - heat_kernel<2>(t, lo)) / (2.0 * step);
        CHECK(std::abs(g[c] - fd) / std::abs(fd) < 1e-7);
    }
}

TEST_CASE("semigroup preserves mass on constants") {
    GridSpec<1> grid(3.0, 257);
    Field<1> ones = Field<1>::sample(grid, [](const Vec<1>&) { return 1.0; });
    for (double t : {0.05, 0.25}) {
        Field<1> out = apply_semigroup<1>(t, ones);
        for (std::size_t k = 0; k < out.size(); ++k)
            CHECK(std::abs(out[k] - 1.0) < 1e-8);
    }
}

TEST_CASE("semigroup reproduces the Gaussian convolution identity") {
    // Density with variance 0.2 smoothed for t = 0.3 has variance 0.5.
    GridSpec<1> grid(4.0, 513);
    const double v0 = 0.2, t = 0.3, v1 = v0 + t;
    Field<1> density = Field<1>::sample(grid, [&](const Vec<1>& x) {
        return std::exp(-x[0] * x[0] / (2.0 * v0)) / std::sqrt(2.0 * std::numbers::pi * v0);
    });
    Field<1> out = apply_semigroup<1>(t, density);
    double worst = 0.0;
    for (std::size_t k = 0; k < out.size(); ++k) {
        auto idx = grid.axis_indices(k);
        if (!grid.is_interior(idx, t)) continue;
        double x = grid.node(k)[0];
        double expected =
            std::exp(-x * x / (2.0 * v1)) / std::sqrt(2.0 * std::numbers::pi * v1);
        worst = std::max(worst, std::abs(out[k] - expected));
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("semigroup composition matches a single application") {
    GridSpec<1> grid(3.0, 513);
    Field<1> bump = Field<1>::sample(
        grid, [](const Vec<1>& x) { return std::exp(-x[0] * x[0] * 2.0); });
    double s = 0.07, t = 0.12;
    Field<1> two_step = apply_semigroup<1>(s, apply_semigroup<1>(t, bump));
    Field<1> one_step = apply_semigroup<1>(s + t, bump);
    double worst = 0.0;
    for (std::size_t k = 0; k < bump.size(); ++k) {
        if (!grid.is_interior(grid.axis_indices(k), s + t)) continue;
        worst = std::max(worst, std::abs(two_step[k] - one_step[k]));
    }
    CHECK(worst < 1e-6);

    Field<1> zero_step = apply_semigroup<1>(0.0, bump);
    CHECK(max_abs_difference(zero_step, bump) == 0.0);
}

TEST_CASE("semigroup composition in two dimensions") {
    GridSpec<2> grid(2.0, 95);
    Field<2> bump = Field<2>::sample(
        grid, [](const Vec<2>& x) { return std::exp(-3.0 * norm_sq<2>(x)); });
    double s = 0.04, t = 0.05;
    Field<2> two_step = apply_semigroup<2>(s, apply_semigroup<2>(t, bump));
    Field<2> one_step = apply_semigroup<2>(s + t, bump);
    double worst = 0.0;
    for (std::size_t k = 0; k < bump.size(); ++k) {
        if (!grid.is_interior(grid.axis_indices(k), s + t)) continue;
        worst = std::max(worst, std::abs(two_step[k] - one_step[k]));
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("subtracted gradient convolution annihilates constants exactly") {
    GridSpec<1> grid(1.0, 129);
    Field<1> constant = Field<1>::sample(grid, [](const Vec<1>&) { return 7.25; });
    Vec<1> g = convolve_gradient_subtracted<1>(0.03, {0.0}, constant);
    CHECK(g[0] == 0.0);

    GridSpec<2> grid2(1.0, 65);
    Field<2> constant2 = Field<2>::sample(grid2, [](const Vec<2>&) { return -3.5; });
    Vec<2> g2 = convolve_gradient_subtracted<2>(0.02, {0.0, 0.0}, constant2);
    CHECK(g2[0] == 0.0);
    CHECK(g2[1] == 0.0);
}

TEST_CASE("subtracted gradient convolution recovers unit slope") {
    GridSpec<1> grid(2.0, 513);
    Field<1> linear = Field<1>::sample(grid, [](const Vec<1>& x) { return x[0]; });
    for (double t : {0.003, 0.01, 0.04}) {
        Vec<1> g = convolve_gradient_subtracted<1>(t, {0.0}, linear);
        CHECK(std::abs(g[0] - 1.0) < 1e-6);
    }
}

namespace {

// Independent oracle: direct midpoint quadrature of the subtracted integrand
// against the analytic field, Richardson-extrapolated over halved spacings.
double gradient_convolution_oracle(double t, double anchor, double (*f)(double)) {
    const double window = 10.0 * std::sqrt(t);
    double prev = 0.0, extrapolated = 0.0;
    double h = std::sqrt(t) / 40.0;
    for (int level = 0; level < 6; ++level) {
        long cells = static_cast<long>(std::ceil(2.0 * window / h));
        double acc = 0.0;
        double fx = f(anchor);
        for (long i = 0; i < cells; ++i) {
            double z = anchor - window + (i + 0.5) * (2.0 * window / cells);
            double w = anchor - z;
            double grad = -(w / t) * std::exp(-w * w / (2.0 * t)) /
                          std::sqrt(2.0 * std::numbers::pi * t);
            acc += grad * (f(z) - fx) * (2.0 * window / cells);
        }
        if (level > 0) extrapolated = acc + (acc - prev) / 3.0;
        prev = acc;
        h *= 0.5;
    }
    return extrapolated;
}

double capped_sqrt(double z) { return std::min(z > 0.0 ? std::sqrt(z) : 0.0, 1.0); }

}  // namespace

TEST_CASE("subtracted gradient convolution matches the refined oracle") {
    const double t = 0.01;
    GridSpec<1> grid(1.0, 1025);
    Field<1> field = Field<1>::sample(grid, [](const Vec<1>& x) { return capped_sqrt(x[0]); });
    double value = convolve_gradient_subtracted<1>(t, {0.0}, field)[0];
    double oracle = gradient_convolution_oracle(t, 0.0, capped_sqrt);
    CHECK(std::abs(value - oracle) / std::abs(oracle) < 1e-4);
}

TEST_CASE("scaled-quadrature semigroup forms agree with grid forms") {
    auto f = [](const Vec<1>& x) { return std::exp(-x[0] * x[0]); };
    KernelQuadratureTable table{{2048, 8.0}};
    double value = semigroup_value_at<1>(0.1, {0.3}, f, table);

    GridSpec<1> grid(4.0, 2049);
    Field<1> sampled = Field<1>::sample(grid, f);
    Field<1> grid_value = apply_semigroup<1>(0.1, sampled);
    auto idx = grid.nearest_node({0.3});
    // node 0.3 is not exactly on the grid; evaluate at the nearest node
    double x_node = grid.axis_coord(idx[0]);
    double direct = semigroup_value_at<1>(0.1, {x_node}, f, table);
    CHECK(std::abs(grid_value.at(idx) - direct) < 1e-9);

    CHECK(semigroup_value_at<1>(0.0, {0.3}, f, table) == f({0.3}));
    CHECK(value > 0.0);

    Vec<1> g = semigroup_gradient_at<1>(0.1, {0.3}, f, table);
    const double step = 1e-6;
    double fd = (semigroup_value_at<1>(0.1, {0.3 + step}, f, table) -
                 semigroup_value_at<1>(0.1, {0.3 - step}, f, table)) /
                (2.0 * step);
    CHECK(std::abs(g[0] - fd) < 1e-8);
}
