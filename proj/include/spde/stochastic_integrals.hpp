#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "spde/levy.hpp"
#include "spde/parallel.hpp"
#include "spde/stats.hpp"

namespace spde {

class AlignmentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Step integrand for Brownian integrals: value F_j on (t_{j-1}, t_j].
struct StepIntegrandW {
    std::vector<double> breakpoints;  // size m+1, starts at 0
    std::vector<double> values;       // size m

    static StepIntegrandW constant(double value, double horizon) {
        return {{0.0, horizon}, {value}};
    }

    double l2_norm_sq() const {  // int F^2 dr
        double acc = 0.0;
        for (std::size_t j = 0; j < values.size(); ++j)
            acc += values[j] * values[j] * (breakpoints[j + 1] - breakpoints[j]);
        return acc;
    }

    void validate() const {
        if (breakpoints.size() != values.size() + 1 || values.empty())
            throw std::invalid_argument("step integrand shape mismatch");
        if (breakpoints.front() != 0.0)
            throw std::invalid_argument("step integrand must start at 0");
        for (std::size_t j = 0; j + 1 < breakpoints.size(); ++j)
            if (!(breakpoints[j] < breakpoints[j + 1]))
                throw std::invalid_argument("step breakpoints must increase");
    }
};

// Step integrand for compensated Poisson integrals: value H_{i,j} on the
// time cell (t_{i-1}, t_i] times the mark cell E_j; mark cells are disjoint
// subintervals of the charged annulus.
struct StepIntegrandN {
    std::vector<double> breakpoints;                    // size m1+1
    std::vector<std::pair<double, double>> mark_cells;  // [lo, hi), disjoint
    std::vector<std::vector<double>> values;            // [time][mark]

    static StepIntegrandN constant(double value, double horizon,
                                   const LevyMeasureSpec& spec) {
        return {{0.0, horizon},
                {{spec.inner_cutoff(), spec.outer_radius()}},
                {{value}}};
    }

    void validate(const LevyMeasureSpec& spec) const {
        if (breakpoints.size() < 2 || breakpoints.front() != 0.0)
            throw std::invalid_argument("step integrand must start at 0");
        for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i)
            if (!(breakpoints[i] < breakpoints[i + 1]))
                throw std::invalid_argument("step breakpoints must increase");
        if (values.size() + 1 != breakpoints.size())
            throw std::invalid_argument("step integrand shape mismatch");
        for (const auto& row : values)
            if (row.size() != mark_cells.size())
                throw std::invalid_argument("step integrand shape mismatch");
        for (std::size_t j = 0; j < mark_cells.size(); ++j) {
            auto [lo, hi] = mark_cells[j];
            if (!(lo < hi))
                throw std::invalid_argument("mark cell must be a nonempty interval");
            if (lo < spec.inner_cutoff() || hi > spec.outer_radius())
                throw std::invalid_argument("mark cell outside the measure support");
            for (std::size_t k = j + 1; k < mark_cells.size(); ++k) {
                auto [lo2, hi2] = mark_cells[k];
                if (lo < hi2 && lo2 < hi)
                    throw std::invalid_argument("mark cells must be disjoint");
            }
        }
    }

    int mark_cell_of(double v) const {
        for (std::size_t j = 0; j < mark_cells.size(); ++j)
            if (v >= mark_cells[j].first && v < mark_cells[j].second)
                return static_cast<int>(j);
        return -1;
    }

    // Sum_{i,j} H_{i,j} * dt_i * nu(E_j), the exact compensator of a step form.
    double compensator(const LevyMeasureSpec& spec) const {
        double acc = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i) {
            double dt = breakpoints[i + 1] - breakpoints[i];
            for (std::size_t j = 0; j < mark_cells.size(); ++j)
                acc += values[i][j] * dt * spec.measure_of_interval(mark_cells[j].first,
                                                                    mark_cells[j].second);
        }
        return acc;
    }

    // int int H^p nu dr for even powers used by the moment checks.
    double power_norm(double p, const LevyMeasureSpec& spec) const {
        double acc = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i) {
            double dt = breakpoints[i + 1] - breakpoints[i];
            for (std::size_t j = 0; j < mark_cells.size(); ++j)
                acc += std::pow(std::abs(values[i][j]), p) * dt *
                       spec.measure_of_interval(mark_cells[j].first, mark_cells[j].second);
        }
        return acc;
    }
};

namespace detail {

// Maps each step interval to the matching node range of the path grid;
// every breakpoint must coincide with a grid node.
inline std::vector<int> align_breakpoints(const std::vector<double>& breakpoints,
                                          const TimeGrid& grid) {
    std::vector<int> node_of(breakpoints.size());
    double tol = 1e-12 * std::max(1.0, grid.horizon());
    for (std::size_t i = 0; i < breakpoints.size(); ++i) {
        int found = -1;
        for (int j = 0; j <= grid.steps(); ++j) {
            if (std::abs(grid.node(j) - breakpoints[i]) <= tol) {
                found = j;
                break;
            }
        }
        if (found < 0)
            throw AlignmentError("step breakpoint does not align with the path time grid");
        node_of[i] = found;
    }
    return node_of;
}

}  // namespace detail

// Ito integral of a step integrand: sum of F_j times the Wiener increment
// over (t_{j-1}, t_j].
inline double ito_integral(const StepIntegrandW& f, const NoisePath& path) {
    f.validate();
    auto node_of = detail::align_breakpoints(f.breakpoints, path.grid);
    double acc = 0.0;
    for (std::size_t j = 0; j < f.values.size(); ++j) {
        double inc = 0.0;
        for (int cell = node_of[j]; cell < node_of[j + 1]; ++cell)
            inc += path.wiener_increments[cell];
        acc += f.values[j] * inc;
    }
    return acc;
}

// Compensated Poisson integral of a step integrand: jump sum minus the
// deterministic compensator.
inline double poisson_integral(const StepIntegrandN& h, const NoisePath& path,
                               const LevyMeasureSpec& spec) {
    h.validate(spec);
    detail::align_breakpoints(h.breakpoints, path.grid);
    double acc = 0.0;
    for (const auto& jump : path.jumps) {
        if (jump.time > h.breakpoints.back()) continue;
        int cell = h.mark_cell_of(jump.mark);
        if (cell < 0) continue;
        std::size_t window = 0;
        while (window + 1 < h.breakpoints.size() && jump.time > h.breakpoints[window + 1])
            ++window;
        acc += h.values[window][cell];
    }
    return acc - h.compensator(spec);
}

enum class MomentKind { ito_isometry, ito_p4_bound, poisson_isometry, poisson_p4_bound };

inline const char* to_string(MomentKind k) {
    switch (k) {
        case MomentKind::ito_isometry: return "ito_isometry";
        case MomentKind::ito_p4_bound: return "ito_p4_bound";
        case MomentKind::poisson_isometry: return "poisson_isometry";
        case MomentKind::poisson_p4_bound: return "poisson_p4_bound";
    }
    return "?";
}

struct MomentReport {
    MomentKind kind;
    double target = 0.0;    // exact value (equalities) or bound (inequalities)
    double estimate = 0.0;
    double std_error = 0.0;
    long paths = 0;
    std::uint64_t seed = 0;
    bool pass = false;
    double mean = 0.0;       // raw martingale mean, for the compensation check
    double mean_std_error = 0.0;
};

// The paper pins no value for the p = 4 Poisson constant; the harness
// compares the empirical ratio against this recorded figure and the tests
// assert the ratio is stable across seeds.
inline constexpr double recorded_poisson_p4_constant = 8.0;

// Monte Carlo verification of the step-integrand moment identities.
// Equalities pass within 3 standard errors; bounds pass when the estimate
// does not exceed the bound by more than 3 standard errors.
inline MomentReport check_moment_identity(
    MomentKind kind, const std::variant<StepIntegrandW, StepIntegrandN>& integrand,
    const LevyMeasureSpec* spec, long paths, std::uint64_t seed,
    const TimeGrid* grid_override = nullptr) {
    if (paths < 10000)
        throw std::invalid_argument("moment checks need at least 1e4 paths");

    const bool is_ito =
        kind == MomentKind::ito_isometry || kind == MomentKind::ito_p4_bound;
    if (is_ito != std::holds_alternative<StepIntegrandW>(integrand))
        throw std::invalid_argument("moment kind does not match the integrand type");
    if (!is_ito && spec == nullptr)
        throw std::invalid_argument("poisson moment checks need a levy measure");

    MomentReport report;
    report.kind = kind;
    report.paths = paths;
    report.seed = seed;

    // Default grid: the integrand's own breakpoints, so increments map
    // one-to-one onto step intervals.
    TimeGrid grid = [&] {
        if (grid_override) return *grid_override;
        if (is_ito)
            return TimeGrid::from_nodes(std::get<StepIntegrandW>(integrand).breakpoints);
        return TimeGrid::from_nodes(std::get<StepIntegrandN>(integrand).breakpoints);
    }();

    std::vector<double> samples(static_cast<std::size_t>(paths));
    std::vector<double> raw(static_cast<std::size_t>(paths));

    if (is_ito) {
        const auto& f = std::get<StepIntegrandW>(integrand);
        f.validate();
        parallel_for(paths, [&](long i) {
            NoisePath path{grid, sample_wiener(grid, {seed, static_cast<std::uint64_t>(i)}),
                           {}, {seed, static_cast<std::uint64_t>(i)}};
            raw[static_cast<std::size_t>(i)] = ito_integral(f, path);
        });
        double l2 = f.l2_norm_sq();
        if (kind == MomentKind::ito_isometry) {
            report.target = l2;
            for (std::size_t i = 0; i < raw.size(); ++i) samples[i] = raw[i] * raw[i];
        } else {
            report.target = 3.0 * l2 * l2;  // exact Gaussian fourth moment
            for (std::size_t i = 0; i < raw.size(); ++i) {
                double sq = raw[i] * raw[i];
                samples[i] = sq * sq;
            }
        }
    } else {
        const auto& h = std::get<StepIntegrandN>(integrand);
        h.validate(*spec);
        parallel_for(paths, [&](long i) {
            SeedPair sp{seed, static_cast<std::uint64_t>(i)};
            NoisePath path{grid, {}, {}, sp};
            path.wiener_increments.assign(static_cast<std::size_t>(grid.steps()), 0.0);
            if (spec->total_mass() > 0.0)
                path.jumps = sample_jumps(grid.horizon(), *spec, sp);
            raw[static_cast<std::size_t>(i)] = poisson_integral(h, path, *spec);
        });
        if (kind == MomentKind::poisson_isometry) {
            report.target = h.power_norm(2.0, *spec);
            for (std::size_t i = 0; i < raw.size(); ++i) samples[i] = raw[i] * raw[i];
        } else {
            report.target = recorded_poisson_p4_constant * h.power_norm(4.0, *spec);
            for (std::size_t i = 0; i < raw.size(); ++i) {
                double sq = raw[i] * raw[i];
                samples[i] = sq * sq;
            }
        }
    }

    SampleStats stats = summarize(samples);
    report.estimate = stats.mean;
    report.std_error = stats.std_error;
    SampleStats raw_stats = summarize(raw);
    report.mean = raw_stats.mean;
    report.mean_std_error = raw_stats.std_error;

    switch (kind) {
        case MomentKind::ito_isometry:
        case MomentKind::poisson_isometry:
            report.pass = std::abs(report.estimate - report.target) <= 3.0 * report.std_error;
            break;
        case MomentKind::ito_p4_bound: {
            const auto& f = std::get<StepIntegrandW>(integrand);
            double l2 = f.l2_norm_sq();
            bool exact_ok =
                std::abs(report.estimate - 3.0 * l2 * l2) <= 3.0 * report.std_error;
            bool bound_ok = report.estimate <= 6.0 * l2 * l2 + 3.0 * report.std_error;
            report.pass = exact_ok && bound_ok;
            break;
        }
        case MomentKind::poisson_p4_bound:
            report.pass = report.estimate <= report.target + 3.0 * report.std_error;
            break;
    }
    return report;
}

}  // namespace spde
