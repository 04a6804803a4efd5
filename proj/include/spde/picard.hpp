#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "spde/mild_solution.hpp"

namespace spde {

struct PicardLogEntry {
    int window = 0;
    int iterate = 0;
    double distance = 0.0;  // sup over window nodes of |u_n - u_{n-1}| and gradient
    double ratio = 0.0;     // distance / previous distance (0 for the first)
};

struct PicardOptions {
    double tolerance = 1e-4;
    int max_iterates = 20;
    double contraction_threshold = 0.5;  // probe acceptance for window sizing
    double min_window_fraction = 1.0 / 65536.0;
    int initial_window_cells = 0;  // 0: start from the full horizon
};

class PicardDivergenceError : public std::runtime_error {
public:
    PicardDivergenceError(const std::string& msg, std::vector<PicardLogEntry> log)
        : std::runtime_error(msg), history(std::move(log)) {}
    std::vector<PicardLogEntry> history;
};

// Sup distance between iterates over window nodes 1..m, in both the value
// and the gradient.
template <int D>
double iterate_distance(const WindowSolution<D>& a, const WindowSolution<D>& b) {
    double m = 0.0;
    for (std::size_t i = 1; i < a.u.size(); ++i) {
        m = std::max(m, max_abs_difference(a.u[i], b.u[i]));
        for (int c = 0; c < D; ++c)
            m = std::max(m, max_abs_difference(a.gradient[i][c], b.gradient[i][c]));
    }
    return m;
}

// One window of the continuity method. The map S solves the b = 0 mild
// equation with the transport term frozen at the previous iterate:
// forcing = b . grad u_prev, evaluated at the left node of each cell. Data
// terms (h, f, g, restart transport) do not depend on the iterate and are
// computed once.
template <int D>
class PicardWindow {
public:
    PicardWindow(const GridSpec<D>& grid, TimeGrid window, const Coefficients<D>& coeffs,
                 const LevyMeasureSpec* levy, const NoisePath& path, int path_offset,
                 const InitialState<D>* initial)
        : grid_(grid), coeffs_(coeffs),
          engine_(grid, std::move(window), strip_drift(coeffs), levy),
          path_(&path), path_offset_(path_offset),
          initial_(initial) {
        data_terms_ = engine_.evaluate_all(*path_, path_offset_, nullptr, initial_);
    }

    const TimeGrid& window() const { return engine_.window(); }

    WindowSolution<D> zero_iterate() const {
        WindowSolution<D> out;
        const int m = engine_.window().steps();
        out.u.assign(m + 1, Field<D>(grid_));
        out.gradient.assign(m + 1, detail::zero_gradient(grid_));
        return out;
    }

    // S(prev): data terms plus the drift forcing built from prev's gradient.
    WindowSolution<D> apply(const WindowSolution<D>& prev) const {
        if (!coeffs_.b) return data_terms_;

        const TimeGrid& w = engine_.window();
        std::vector<Field<D>> forcing;
        forcing.reserve(w.steps());
        for (int j = 0; j < w.steps(); ++j) {
            double r = w.node(j);
            Field<D> field(grid_);
            for (std::size_t k = 0; k < grid_.node_count(); ++k) {
                Vec<D> x = grid_.node(k);
                double val = 0.0;
                for (int c = 0; c < D; ++c)
                    val += (*coeffs_.b)[c](r, x) * prev.gradient[j][c][k];
                field[k] = val;
            }
            forcing.push_back(std::move(field));
        }

        WindowSolution<D> out = data_terms_;
        GridMildEvaluator<D> drift_engine(grid_, w, Coefficients<D>{}, nullptr);
        for (int i = 1; i <= w.steps(); ++i) {
            auto sample = drift_engine.evaluate(i, *path_, path_offset_, &forcing, nullptr);
            out.u[i] += sample.term_forcing;
            for (int c = 0; c < D; ++c) out.gradient[i][c] += sample.gradient[c];
        }
        return out;
    }

private:
    static Coefficients<D> strip_drift(Coefficients<D> c) {
        c.b.reset();
        return c;
    }

    GridSpec<D> grid_;
    Coefficients<D> coeffs_;
    GridMildEvaluator<D> engine_;
    const NoisePath* path_;
    int path_offset_;
    const InitialState<D>* initial_;
    WindowSolution<D> data_terms_;
};

// Spec-level single step: apply S once to a given iterate.
template <int D>
WindowSolution<D> picard_step(const WindowSolution<D>& prev, const Coefficients<D>& coeffs,
                              const GridSpec<D>& grid, TimeGrid window,
                              const LevyMeasureSpec* levy, const NoisePath& path,
                              int path_offset = 0, const InitialState<D>* initial = nullptr) {
    PicardWindow<D> w(grid, std::move(window), coeffs, levy, path, path_offset, initial);
    return w.apply(prev);
}

namespace detail {

// Probe ratio d2/d1 from two S applications started at zero. d1 is
// b-independent and d2 is exactly linear in b, so larger drift never yields
// a smaller probe ratio.
template <int D>
double probe_contraction_ratio(const PicardWindow<D>& window) {
    auto u0 = window.zero_iterate();
    auto u1 = window.apply(u0);
    double d1 = iterate_distance(u1, u0);
    if (d1 == 0.0) return 0.0;  // zero data: S is constant at 0
    auto u2 = window.apply(u1);
    double d2 = iterate_distance(u2, u1);
    return d2 / d1;
}

}  // namespace detail

// Window length for which the frozen-drift map is observed to contract:
// halve the candidate until the probe ratio drops below the threshold.
template <int D>
double estimate_window(const Coefficients<D>& coeffs, const NoisePath& path,
                       const GridSpec<D>& grid, const LevyMeasureSpec* levy,
                       const PicardOptions& opts = {}) {
    const int total = path.grid.steps();
    int cells = opts.initial_window_cells > 0 ? std::min(opts.initial_window_cells, total)
                                              : total;
    std::vector<PicardLogEntry> history;
    while (true) {
        PicardWindow<D> window(grid, path.grid.slice(0, cells), coeffs, levy, path, 0,
                               nullptr);
        double ratio = detail::probe_contraction_ratio(window);
        history.push_back({0, static_cast<int>(history.size()) + 1, 0.0, ratio});
        if (ratio < opts.contraction_threshold) return window.window().horizon();
        if (cells == 1 ||
            window.window().horizon() / 2.0 < path.grid.horizon() * opts.min_window_fraction)
            throw PicardDivergenceError(
                "no contracting window found: probe ratio " + std::to_string(ratio) +
                    " at the smallest admissible window",
                history);
        cells /= 2;
    }
}

template <int D>
struct DriftSolution {
    std::vector<double> times;
    std::vector<Field<D>> u;
    std::vector<std::array<Field<D>, D>> gradient;
    std::vector<PicardLogEntry> log;
    std::vector<int> window_cells;          // cells consumed per window
    std::vector<double> window_residuals;   // ||S(u*) - u*|| per window
};

// Continuity-method solve over [0, horizon]: size a contracting window,
// iterate S to the tolerance, transport the terminal state by the heat
// semigroup, repeat. The same NoisePath drives every iterate.
template <int D>
DriftSolution<D> solve_with_drift(const Coefficients<D>& coeffs, const NoisePath& path,
                                  const GridSpec<D>& grid, const LevyMeasureSpec* levy,
                                  const PicardOptions& opts = {}) {
    const int total = path.grid.steps();
    int window_cells = total;
    if (coeffs.b) {
        double t_window = estimate_window<D>(coeffs, path, grid, levy, opts);
        // convert the returned duration back to a cell count on this grid
        window_cells = 0;
        while (window_cells < total &&
               path.grid.node(window_cells + 1) <= t_window * (1.0 + 1e-12))
            ++window_cells;
        window_cells = std::max(window_cells, 1);
    }

    DriftSolution<D> out;
    out.times.push_back(0.0);
    out.u.emplace_back(grid);
    out.gradient.push_back(detail::zero_gradient(grid));

    std::vector<PicardLogEntry> log;
    InitialState<D> state{Field<D>(grid), detail::zero_gradient(grid)};
    bool have_state = false;
    int start = 0;
    int window_index = 0;
    int cells = window_cells;

    while (start < total) {
        cells = std::min(cells, total - start);
        TimeGrid window = path.grid.slice(start, start + cells);
        PicardWindow<D> pw(grid, window, coeffs, levy, path, start,
                           have_state ? &state : nullptr);

        auto prev = pw.zero_iterate();
        if (have_state) {
            prev.u[0] = state.u;
            prev.gradient[0] = state.gradient;
        }
        double prev_distance = -1.0;
        bool converged = false;
        std::vector<PicardLogEntry> window_log;
        WindowSolution<D> current = prev;
        for (int it = 1; it <= opts.max_iterates; ++it) {
            current = pw.apply(prev);
            current.u[0] = prev.u[0];
            current.gradient[0] = prev.gradient[0];
            double d = iterate_distance(current, prev);
            double ratio = prev_distance > 0.0 ? d / prev_distance : 0.0;
            window_log.push_back({window_index, it, d, ratio});
            if (d < opts.tolerance) {
                converged = true;
                break;
            }
            if (it >= 2 && ratio >= 1.0) break;  // not contracting, shrink window
            prev = current;
            prev_distance = d;
        }

        log.insert(log.end(), window_log.begin(), window_log.end());
        if (!converged) {
            if (cells == 1 ||
                window.horizon() - window.node(0) <
                    2.0 * path.grid.horizon() * opts.min_window_fraction)
                throw PicardDivergenceError(
                    "picard iteration failed to contract at the smallest window", log);
            cells = std::max(1, cells / 2);
            continue;
        }

        // residual of the declared fixed point
        auto residual_check = pw.apply(current);
        residual_check.u[0] = current.u[0];
        residual_check.gradient[0] = current.gradient[0];
        out.window_residuals.push_back(iterate_distance(residual_check, current));

        for (int i = 1; i <= cells; ++i) {
            out.times.push_back(window.node(i));
            out.u.push_back(current.u[i]);
            out.gradient.push_back(current.gradient[i]);
        }
        state.u = current.u[cells];
        state.gradient = current.gradient[cells];
        have_state = true;
        out.window_cells.push_back(cells);
        start += cells;
        ++window_index;
        cells = window_cells;
    }

    out.log = std::move(log);
    return out;
}

}  // namespace spde
