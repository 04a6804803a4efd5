#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "spde/grid.hpp"
#include "spde/heat_kernel.hpp"
#include "spde/holder_field.hpp"
#include "spde/levy.hpp"
#include "spde/rng.hpp"

namespace spde {

// Equation data. Every member is optional: absent means identically zero.
// g is separable by construction; h may carry a per-path random factor
// h2 ~ N(0,1) (the product form h1(t,x) h2(omega)).
template <int D>
struct Coefficients {
    std::optional<HolderField<D>> h;
    std::optional<HolderField<D>> f;
    std::optional<JumpCoefficient<D>> g;
    std::optional<std::array<HolderField<D>, D>> b;  // transport coefficient
    bool h_stochastic = false;
};

template <int D>
struct SolutionSample {
    double time = 0.0;
    Field<D> u;
    Field<D> term_h, term_f, term_g, term_forcing;
    std::array<Field<D>, D> gradient;
    SeedPair seed;
};

// Iterate storage for the fixed-point solver: u and its gradient at every
// window time node (index 0 is the window start).
template <int D>
struct WindowSolution {
    std::vector<Field<D>> u;
    std::vector<std::array<Field<D>, D>> gradient;
};

template <int D>
struct InitialState {
    Field<D> u;
    std::array<Field<D>, D> gradient;
};

namespace detail {

template <int D>
std::array<Field<D>, D> zero_gradient(const GridSpec<D>& grid) {
    if constexpr (D == 1) {
        return {Field<D>(grid)};
    } else {
        return {Field<D>(grid), Field<D>(grid)};
    }
}

template <int D>
double sample_h_factor(const Coefficients<D>& coeffs, SeedPair seed) {
    if (!coeffs.h_stochastic) return 1.0;
    rng::Stream stream(seed.master, seed.path_index, rng::Purpose::h_factor);
    return stream.next_normal();
}

}  // namespace detail

// Grid-pathway evaluator for the mild solution on a time window. The
// stochastic integrals use left-endpoint (Ito) evaluation per time cell;
// jump times are charged at the left node of their cell, which keeps the
// Poisson term's second moment equal to the discrete isometry sum.
template <int D>
class GridMildEvaluator {
public:
    GridMildEvaluator(const GridSpec<D>& grid, TimeGrid window,
                      const Coefficients<D>& coeffs, const LevyMeasureSpec* levy)
        : grid_(grid), window_(std::move(window)), coeffs_(coeffs), levy_(levy) {
        if (coeffs_.g && levy_ == nullptr)
            throw std::invalid_argument("jump coefficient requires a levy measure");
        double dx = grid_.spacing();
        if (window_.min_step() < dx * dx)
            throw std::invalid_argument(
                "time step unresolvable on the grid: need min step >= spacing^2");
        if (coeffs_.g && levy_) {
            mark_mean_ = coeffs_.g->mark_mean(*levy_);
        }
    }

    const TimeGrid& window() const { return window_; }

    // Per-cell jump weights J_j = sum of psi(mark) over jumps in cell j.
    std::vector<double> jump_cell_weights(const NoisePath& path) const {
        std::vector<double> w(window_.steps(), 0.0);
        if (!coeffs_.g) return w;
        double start = window_.node(0), end = window_.node(window_.steps());
        for (const auto& jump : path.jumps) {
            if (jump.time <= start || jump.time > end) continue;
            int local = window_.cell_of(jump.time);
            w[local] += coeffs_.g->mark_factor(jump.mark);
        }
        return w;
    }

    // Full solution sample at window node `index` for one path.
    // `path_offset`: index of the window's first node inside path.grid.
    // `forcing`: optional extra deterministic forcing, one gridded field per
    // window cell (added to the h-term integrand; this is how the drift
    // solver injects b . grad u).
    SolutionSample<D> evaluate(int index, const NoisePath& path, int path_offset = 0,
                               const std::vector<Field<D>>* forcing = nullptr,
                               const InitialState<D>* initial = nullptr) const {
        check_alignment(path, path_offset);
        if (forcing && static_cast<int>(forcing->size()) < index)
            throw std::invalid_argument("forcing must cover every window cell");

        SolutionSample<D> out{window_.node(index), Field<D>(grid_), Field<D>(grid_),
                              Field<D>(grid_),     Field<D>(grid_), Field<D>(grid_),
                              detail::zero_gradient(grid_),          path.seed};

        const double h2 = detail::sample_h_factor(coeffs_, path.seed);
        const auto jump_w = jump_cell_weights(path);
        const double t_i = window_.node(index);

        if (initial && index == 0) {
            out.u = initial->u;
            out.gradient = initial->gradient;
            return out;
        }

        if (initial) {
            double s = t_i - window_.node(0);
            Field<D> transported = apply_semigroup<D>(s, initial->u);
            out.u += transported;
            add_gradient(s, initial->u, 1.0, out.gradient);
        }

        for (int j = 0; j < index; ++j) {
            const double r_j = window_.node(j);
            const double s = t_i - r_j;
            const double dr = window_.step(j);

            if (coeffs_.h) {
                Field<D> slice = sample_field(*coeffs_.h, r_j);
                accumulate(s, slice, dr * h2, out.term_h, out.gradient);
            }
            if (coeffs_.f) {
                Field<D> slice = sample_field(*coeffs_.f, r_j);
                double dw = path.wiener_increments[path_offset + j];
                accumulate(s, slice, dw, out.term_f, out.gradient);
            }
            if (coeffs_.g) {
                Field<D> slice = sample_field(coeffs_.g->spatial, r_j);
                double weight = jump_w[j] - dr * mark_mean_;
                accumulate(s, slice, weight, out.term_g, out.gradient);
            }
            if (forcing) {
                accumulate(s, (*forcing)[j], dr, out.term_forcing, out.gradient);
            }
        }

        out.u += out.term_h;
        out.u += out.term_f;
        out.u += out.term_g;
        out.u += out.term_forcing;
        return out;
    }

    // u and gradient at every window node; node 0 carries the initial state
    // (zero for the first window).
    WindowSolution<D> evaluate_all(const NoisePath& path, int path_offset = 0,
                                   const std::vector<Field<D>>* forcing = nullptr,
                                   const InitialState<D>* initial = nullptr) const {
        WindowSolution<D> out;
        out.u.reserve(window_.steps() + 1);
        out.gradient.reserve(window_.steps() + 1);
        for (int i = 0; i <= window_.steps(); ++i) {
            auto sample = evaluate(i, path, path_offset, forcing, initial);
            out.u.push_back(std::move(sample.u));
            out.gradient.push_back(std::move(sample.gradient));
        }
        return out;
    }

private:
    void check_alignment(const NoisePath& path, int offset) const {
        if (offset < 0 || offset + window_.steps() > path.grid.steps())
            throw std::invalid_argument("window does not fit inside the noise path grid");
        double tol = 1e-12 * std::max(1.0, path.grid.horizon());
        for (int j = 0; j <= window_.steps(); ++j)
            if (std::abs(path.grid.node(offset + j) - window_.node(j)) > tol)
                throw std::invalid_argument("window nodes misaligned with the noise path");
    }

    Field<D> sample_field(const HolderField<D>& field, double r) const {
        return Field<D>::sample(grid_, [&](const Vec<D>& x) { return field(r, x); });
    }

    void add_gradient(double s, const Field<D>& src, double weight,
                      std::array<Field<D>, D>& acc) const {
        if (weight == 0.0) return;
        for (std::size_t k = 0; k < grid_.node_count(); ++k) {
            Vec<D> g = convolve_gradient_subtracted<D>(s, grid_.node(k), src);
            for (int a = 0; a < D; ++a) acc[a][k] += weight * g[a];
        }
    }

    void accumulate(double s, const Field<D>& slice, double weight, Field<D>& term,
                    std::array<Field<D>, D>& gradient) const {
        if (weight == 0.0) return;
        term.axpy(weight, apply_semigroup<D>(s, slice));
        add_gradient(s, slice, weight, gradient);
    }

    GridSpec<D> grid_;
    TimeGrid window_;
    Coefficients<D> coeffs_;
    const LevyMeasureSpec* levy_;
    double mark_mean_ = 0.0;
};

// Spec-level entry points: evaluate the mild solution (b = 0 pathway) at a
// node of the path's time grid.
template <int D>
SolutionSample<D> evaluate_mild(double t, const Coefficients<D>& coeffs,
                                const NoisePath& path, const GridSpec<D>& grid,
                                const LevyMeasureSpec* levy) {
    const auto& nodes = path.grid.nodes();
    double tol = 1e-12 * std::max(1.0, path.grid.horizon());
    int index = -1;
    for (int j = 0; j <= path.grid.steps(); ++j)
        if (std::abs(nodes[j] - t) <= tol) {
            index = j;
            break;
        }
    if (index < 0)
        throw std::invalid_argument("evaluation time must be a node of the path grid");
    TimeGrid window = index == path.grid.steps() ? path.grid : path.grid.slice(0, index);
    GridMildEvaluator<D> engine(grid, window, coeffs, levy);
    return engine.evaluate(index, path);
}

template <int D>
std::array<Field<D>, D> evaluate_gradient(double t, const Coefficients<D>& coeffs,
                                          const NoisePath& path, const GridSpec<D>& grid,
                                          const LevyMeasureSpec* levy) {
    return evaluate_mild<D>(t, coeffs, path, grid, levy).gradient;
}

// ---------------------------------------------------------------------------
// Anchored pathway: gradients of u(t, .) at a few points, evaluated with the
// kernel-scaled quadrature so accuracy is uniform down to tiny kernel times.
// The per-cell kernels are deterministic; a path evaluation is just a dot
// product with its increments, so Monte Carlo loops stay cheap.

template <int D>
class AnchoredGradientSampler {
public:
    AnchoredGradientSampler(std::vector<Vec<D>> anchors, const Coefficients<D>& coeffs,
                            const LevyMeasureSpec* levy, TimeGrid grid,
                            ScaledKernelQuadrature quadrature = {})
        : anchors_(std::move(anchors)), coeffs_(coeffs), levy_(levy),
          grid_(std::move(grid)), table_(quadrature) {
        if (coeffs_.g && !levy_)
            throw std::invalid_argument("jump coefficient requires a levy measure");
        const double t = grid_.horizon();
        const int m = grid_.steps();
        const std::size_t n_anchors = anchors_.size();

        if (coeffs_.g) {
            mark_mean_ = coeffs_.g->mark_mean(*levy_);
            mark_l2_sq_ = coeffs_.g->mark_l2_sq(*levy_);
        }

        wiener_kernel_.assign(n_anchors, {});
        jump_kernel_.assign(n_anchors, {});
        h_term_.assign(n_anchors, Vec<D>{});
        compensator_.assign(n_anchors, Vec<D>{});

        for (std::size_t a = 0; a < n_anchors; ++a) {
            if (coeffs_.f) wiener_kernel_[a].resize(m);
            if (coeffs_.g) jump_kernel_[a].resize(m);
            for (int j = 0; j < m; ++j) {
                const double r = grid_.node(j);
                const double s = t - r;
                if (coeffs_.f) {
                    wiener_kernel_[a][j] = semigroup_gradient_at<D>(
                        s, anchors_[a],
                        [&](const Vec<D>& z) { return (*coeffs_.f)(r, z); }, table_);
                }
                if (coeffs_.g) {
                    jump_kernel_[a][j] = semigroup_gradient_at<D>(
                        s, anchors_[a],
                        [&](const Vec<D>& z) { return coeffs_.g->spatial(r, z); }, table_);
                    for (int c = 0; c < D; ++c)
                        compensator_[a][c] += jump_kernel_[a][j][c] * grid_.step(j) * mark_mean_;
                }
                if (coeffs_.h) {
                    Vec<D> g = semigroup_gradient_at<D>(
                        s, anchors_[a],
                        [&](const Vec<D>& z) { return (*coeffs_.h)(r, z); }, table_);
                    for (int c = 0; c < D; ++c) h_term_[a][c] += g[c] * grid_.step(j);
                }
            }
        }
    }

    const TimeGrid& time_grid() const { return grid_; }
    std::size_t anchor_count() const { return anchors_.size(); }

    // Gradient of u(horizon, anchor) for one noise path on the same grid.
    std::vector<Vec<D>> evaluate(const NoisePath& path) const {
        if (!(path.grid == grid_))
            throw std::invalid_argument("path grid does not match the sampler grid");
        const double h2 = detail::sample_h_factor(coeffs_, path.seed);
        std::vector<Vec<D>> out(anchors_.size(), Vec<D>{});
        for (std::size_t a = 0; a < anchors_.size(); ++a) {
            Vec<D> acc{};
            for (int c = 0; c < D; ++c) acc[c] = h_term_[a][c] * h2;
            if (coeffs_.f) {
                for (int j = 0; j < grid_.steps(); ++j) {
                    double dw = path.wiener_increments[j];
                    for (int c = 0; c < D; ++c) acc[c] += wiener_kernel_[a][j][c] * dw;
                }
            }
            if (coeffs_.g) {
                for (const auto& jump : path.jumps) {
                    if (jump.time > grid_.horizon()) continue;
                    int cell = grid_.cell_of(jump.time);
                    double psi = coeffs_.g->mark_factor(jump.mark);
                    for (int c = 0; c < D; ++c) acc[c] += jump_kernel_[a][cell][c] * psi;
                }
                for (int c = 0; c < D; ++c) acc[c] -= compensator_[a][c];
            }
            out[a] = acc;
        }
        return out;
    }

    // Discrete isometry value of E|grad u(anchor_a) - grad u(anchor_b)|^2 on
    // this grid: exactly the expectation of the Monte Carlo estimator above.
    double isometry_second_moment(std::size_t a, std::size_t b) const {
        if (coeffs_.h_stochastic)
            throw std::invalid_argument("p=2 isometry pathway requires deterministic h");
        double acc = 0.0;
        Vec<D> h_diff{};
        for (int c = 0; c < D; ++c) h_diff[c] = h_term_[a][c] - h_term_[b][c];
        acc += norm_sq<D>(h_diff);
        for (int j = 0; j < grid_.steps(); ++j) {
            double dr = grid_.step(j);
            if (coeffs_.f) {
                Vec<D> d{};
                for (int c = 0; c < D; ++c)
                    d[c] = wiener_kernel_[a][j][c] - wiener_kernel_[b][j][c];
                acc += norm_sq<D>(d) * dr;
            }
            if (coeffs_.g) {
                Vec<D> d{};
                for (int c = 0; c < D; ++c)
                    d[c] = jump_kernel_[a][j][c] - jump_kernel_[b][j][c];
                acc += norm_sq<D>(d) * dr * mark_l2_sq_;
            }
        }
        return acc;
    }

private:
    std::vector<Vec<D>> anchors_;
    Coefficients<D> coeffs_;
    const LevyMeasureSpec* levy_;
    TimeGrid grid_;
    KernelQuadratureTable table_;
    double mark_mean_ = 0.0, mark_l2_sq_ = 0.0;
    std::vector<std::vector<Vec<D>>> wiener_kernel_;  // [anchor][cell]
    std::vector<std::vector<Vec<D>>> jump_kernel_;
    std::vector<Vec<D>> h_term_;       // deterministic h-term gradient
    std::vector<Vec<D>> compensator_;  // jump compensator gradient
};

// ---------------------------------------------------------------------------
// Deterministic second moment E|grad u(t,x) - grad u(t,y)|^2 via the Ito and
// Poisson isometries: a pure double quadrature, no Monte Carlo error.

struct SecondMomentQuadrature {
    int time_cells = 4096;
    double grading = 3.0;  // s = t * u^grading, midpoint cells in u
    ScaledKernelQuadrature kernel;
};

template <int D>
double second_moment_p2(double t, const Vec<D>& x, const Vec<D>& y,
                        const Coefficients<D>& coeffs, const LevyMeasureSpec* levy,
                        const SecondMomentQuadrature& q = {}) {
    if (!(t > 0.0)) throw std::domain_error("second_moment_p2 requires t > 0");
    if (coeffs.h_stochastic)
        throw std::invalid_argument("p=2 isometry pathway requires deterministic h");
    if (coeffs.g && !levy)
        throw std::invalid_argument("jump coefficient requires a levy measure");

    KernelQuadratureTable table(q.kernel);
    double mark_l2_sq = coeffs.g ? coeffs.g->mark_l2_sq(*levy) : 0.0;

    double acc_f = 0.0, acc_g = 0.0;
    Vec<D> h_linear{};
    const int m = q.time_cells;
    for (int i = 0; i < m; ++i) {
        double u = (i + 0.5) / m;
        double s = t * std::pow(u, q.grading);
        double ds = t * q.grading * std::pow(u, q.grading - 1.0) / m;
        double r = t - s;
        if (coeffs.f) {
            Vec<D> gx = semigroup_gradient_at<D>(
                s, x, [&](const Vec<D>& z) { return (*coeffs.f)(r, z); }, table);
            Vec<D> gy = semigroup_gradient_at<D>(
                s, y, [&](const Vec<D>& z) { return (*coeffs.f)(r, z); }, table);
            Vec<D> d{};
            for (int c = 0; c < D; ++c) d[c] = gx[c] - gy[c];
            acc_f += norm_sq<D>(d) * ds;
        }
        if (coeffs.g) {
            Vec<D> gx = semigroup_gradient_at<D>(
                s, x, [&](const Vec<D>& z) { return coeffs.g->spatial(r, z); }, table);
            Vec<D> gy = semigroup_gradient_at<D>(
                s, y, [&](const Vec<D>& z) { return coeffs.g->spatial(r, z); }, table);
            Vec<D> d{};
            for (int c = 0; c < D; ++c) d[c] = gx[c] - gy[c];
            acc_g += norm_sq<D>(d) * ds;
        }
        if (coeffs.h) {
            Vec<D> gx = semigroup_gradient_at<D>(
                s, x, [&](const Vec<D>& z) { return (*coeffs.h)(r, z); }, table);
            Vec<D> gy = semigroup_gradient_at<D>(
                s, y, [&](const Vec<D>& z) { return (*coeffs.h)(r, z); }, table);
            for (int c = 0; c < D; ++c) h_linear[c] += (gx[c] - gy[c]) * ds;
        }
    }
    return acc_f + mark_l2_sq * acc_g + norm_sq<D>(h_linear);
}

// Single-anchor variant: E|grad u(t, x)|^2.
template <int D>
double gradient_second_moment_p2(double t, const Vec<D>& x, const Coefficients<D>& coeffs,
                                 const LevyMeasureSpec* levy,
                                 const SecondMomentQuadrature& q = {}) {
    if (!(t > 0.0)) throw std::domain_error("gradient_second_moment_p2 requires t > 0");
    if (coeffs.h_stochastic)
        throw std::invalid_argument("p=2 isometry pathway requires deterministic h");
    KernelQuadratureTable table(q.kernel);
    double mark_l2_sq = coeffs.g ? coeffs.g->mark_l2_sq(*levy) : 0.0;
    double acc = 0.0;
    Vec<D> h_linear{};
    const int m = q.time_cells;
    for (int i = 0; i < m; ++i) {
        double u = (i + 0.5) / m;
        double s = t * std::pow(u, q.grading);
        double ds = t * q.grading * std::pow(u, q.grading - 1.0) / m;
        double r = t - s;
        if (coeffs.f) {
            Vec<D> g = semigroup_gradient_at<D>(
                s, x, [&](const Vec<D>& z) { return (*coeffs.f)(r, z); }, table);
            acc += norm_sq<D>(g) * ds;
        }
        if (coeffs.g) {
            Vec<D> g = semigroup_gradient_at<D>(
                s, x, [&](const Vec<D>& z) { return coeffs.g->spatial(r, z); }, table);
            acc += norm_sq<D>(g) * ds * mark_l2_sq;
        }
        if (coeffs.h) {
            Vec<D> g = semigroup_gradient_at<D>(
                s, x, [&](const Vec<D>& z) { return (*coeffs.h)(r, z); }, table);
            for (int c = 0; c < D; ++c) h_linear[c] += g[c] * ds;
        }
    }
    return acc + norm_sq<D>(h_linear);
}

// Cumulative E|grad u(t_k, x)|^2 over increasing horizons, computed as
// partial sums of one nonnegative quadrature, hence exactly nondecreasing.
// Assumes time-independent coefficients (true for every named family).
template <int D>
std::vector<double> gradient_second_moment_profile(const std::vector<double>& horizons,
                                                   const Vec<D>& x,
                                                   const Coefficients<D>& coeffs,
                                                   const LevyMeasureSpec* levy,
                                                   const SecondMomentQuadrature& q = {}) {
    if (horizons.empty()) return {};
    for (std::size_t k = 0; k + 1 < horizons.size(); ++k)
        if (!(horizons[k] > 0.0 && horizons[k] < horizons[k + 1]))
            throw std::invalid_argument("profile horizons must be positive and increasing");
    if (coeffs.h)
        throw std::invalid_argument(
            "profile covers the martingale terms only; the h term is not a sum of squares");

    KernelQuadratureTable table(q.kernel);
    double mark_l2_sq = coeffs.g ? coeffs.g->mark_l2_sq(*levy) : 0.0;

    auto integrand = [&](double s) {
        double val = 0.0;
        if (coeffs.f) {
            Vec<D> g = semigroup_gradient_at<D>(
                s, x, [&](const Vec<D>& z) { return (*coeffs.f)(0.0, z); }, table);
            val += norm_sq<D>(g);
        }
        if (coeffs.g) {
            Vec<D> g = semigroup_gradient_at<D>(
                s, x, [&](const Vec<D>& z) { return coeffs.g->spatial(0.0, z); }, table);
            val += norm_sq<D>(g) * mark_l2_sq;
        }
        return val;
    };

    std::vector<double> out;
    out.reserve(horizons.size());
    double acc = 0.0;
    // Graded cells on (0, t_1], then uniform midpoint cells per segment.
    const int m0 = q.time_cells;
    for (int i = 0; i < m0; ++i) {
        double u = (i + 0.5) / m0;
        double s = horizons[0] * std::pow(u, q.grading);
        double ds = horizons[0] * q.grading * std::pow(u, q.grading - 1.0) / m0;
        acc += integrand(s) * ds;
    }
    out.push_back(acc);
    const int seg_cells = std::max(64, q.time_cells / 8);
    for (std::size_t k = 1; k < horizons.size(); ++k) {
        double lo = horizons[k - 1], hi = horizons[k];
        double h = (hi - lo) / seg_cells;
        for (int i = 0; i < seg_cells; ++i) acc += integrand(lo + (i + 0.5) * h) * h;
        out.push_back(acc);
    }
    return out;
}

}  // namespace spde
