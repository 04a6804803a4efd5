#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "spde/mild_solution.hpp"
#include "spde/parallel.hpp"
#include "spde/stats.hpp"

namespace spde {

struct MomentRow {
    int k = 0;          // dyadic index, delta = 2^-k
    double delta = 0.0;
    double moment = 0.0;
    double std_error = 0.0;  // zero on the exact pathway
};

struct LogLogFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    double slope_std_error = 0.0;
    int rows_used = 0;
    std::vector<int> dropped;  // k of rows excluded for non-positive moments
};

// OLS of log(moment) against log(delta). Rows with non-positive moments are
// dropped (recorded in `dropped`); fewer than four usable rows is an error.
inline LogLogFit fit_loglog(std::span<const MomentRow> rows) {
    std::vector<double> xs, ys;
    LogLogFit out;
    for (const auto& r : rows) {
        if (r.moment > 0.0) {
            xs.push_back(std::log(r.delta));
            ys.push_back(std::log(r.moment));
        } else {
            out.dropped.push_back(r.k);
        }
    }
    if (xs.size() < 4)
        throw std::invalid_argument("log-log fit needs at least four positive rows");
    LineFit fit = fit_line(xs, ys);
    out.slope = fit.slope;
    out.intercept = fit.intercept;
    out.r_squared = fit.r_squared;
    out.slope_std_error = fit.slope_std_error;
    out.rows_used = static_cast<int>(fit.points);
    return out;
}

enum class FitOutcome { pass, fail, indeterminate, degenerate };

inline const char* to_string(FitOutcome o) {
    switch (o) {
        case FitOutcome::pass: return "pass";
        case FitOutcome::fail: return "fail";
        case FitOutcome::indeterminate: return "indeterminate";
        case FitOutcome::degenerate: return "degenerate";
    }
    return "?";
}

struct RegularityConfig {
    double p = 2.0;
    double alpha = 0.5;        // declared exponent of f (and of g's spatial factor)
    double t = 0.25;
    double anchor = 0.0;
    int k_min = 3;
    int k_max = 10;
    long paths = 20000;
    std::uint64_t seed = 0;
    bool exact = true;          // p = 2 isometry quadrature instead of Monte Carlo
    double fit_tolerance = 0.05;
    double max_slope_std_error = 0.1;  // beyond this the fit is indeterminate
    SecondMomentQuadrature quadrature;
    int mc_time_cells = 2048;          // path grid for the Monte Carlo pathway
    double mc_time_grading = 3.0;

    double gamma() const { return alpha + 2.0 / p - 1.0; }
    double predicted_slope() const { return gamma() * p; }
};

template <int D>
struct RegularityReport {
    std::vector<MomentRow> rows;
    std::optional<LogLogFit> fit;
    double predicted_slope = 0.0;
    double fit_tolerance = 0.0;
    FitOutcome outcome = FitOutcome::degenerate;
    std::vector<int> fitted_ks;  // rows admitted to the fit window
};

// Increment-moment estimate of the Holder seminorm of grad u at the
// configured anchor: moments at dyadic separations, then a log-log fit
// against the predicted slope gamma * p.
template <int D>
RegularityReport<D> estimate_seminorm(const RegularityConfig& config,
                                      const Coefficients<D>& coeffs,
                                      const GridSpec<D>& grid, const LevyMeasureSpec* levy) {
    if (!(config.p >= 2.0)) throw std::invalid_argument("moment order p must be >= 2");
    if (!(config.gamma() > 0.0))
        throw std::invalid_argument("gamma = alpha + 2/p - 1 must be positive");
    if (config.k_min > config.k_max)
        throw std::invalid_argument("empty dyadic range");
    if (config.exact && (config.p != 2.0 || coeffs.h_stochastic))
        throw std::invalid_argument(
            "exact pathway requires p = 2 and deterministic h");

    const double dx = grid.spacing();
    for (int k = config.k_min; k <= config.k_max; ++k) {
        double delta = std::ldexp(1.0, -k);
        if (delta < 2.0 * dx)
            throw std::invalid_argument(
                "pair distance 2^-" + std::to_string(k) +
                " is below twice the grid spacing; refine the grid");
    }

    RegularityReport<D> report;
    report.predicted_slope = config.predicted_slope();
    report.fit_tolerance = config.fit_tolerance;

    const Vec<D> x0 = axis_point<D>(config.anchor);

    if (config.exact) {
        for (int k = config.k_min; k <= config.k_max; ++k) {
            double delta = std::ldexp(1.0, -k);
            Vec<D> x1 = x0;
            x1[0] += delta;
            double m = second_moment_p2<D>(config.t, x1, x0, coeffs, levy, config.quadrature);
            report.rows.push_back({k, delta, m, 0.0});
        }
    } else {
        std::vector<Vec<D>> anchors{x0};
        for (int k = config.k_min; k <= config.k_max; ++k) {
            Vec<D> x1 = x0;
            x1[0] += std::ldexp(1.0, -k);
            anchors.push_back(x1);
        }
        TimeGrid path_grid = TimeGrid::graded_toward_end(config.t, config.mc_time_cells,
                                                         config.mc_time_grading);
        AnchoredGradientSampler<D> sampler(anchors, coeffs, levy, path_grid,
                                           config.quadrature.kernel);
        const std::size_t n_k = anchors.size() - 1;
        std::vector<std::vector<double>> stats(n_k,
                                               std::vector<double>(config.paths, 0.0));
        parallel_for(config.paths, [&](long i) {
            NoisePath path = sample_path(path_grid, levy,
                                         {config.seed, static_cast<std::uint64_t>(i)});
            auto grads = sampler.evaluate(path);
            for (std::size_t k = 0; k < n_k; ++k) {
                Vec<D> d{};
                for (int c = 0; c < D; ++c) d[c] = grads[k + 1][c] - grads[0][c];
                stats[k][static_cast<std::size_t>(i)] =
                    std::pow(norm_sq<D>(d), config.p / 2.0);
            }
        });
        for (std::size_t k = 0; k < n_k; ++k) {
            SampleStats s = summarize(stats[k]);
            report.rows.push_back({config.k_min + static_cast<int>(k),
                                   std::ldexp(1.0, -(config.k_min + static_cast<int>(k))),
                                   s.mean, s.std_error});
        }
    }

    bool degenerate = true;
    for (const auto& r : report.rows)
        if (r.moment > 0.0) degenerate = false;
    if (degenerate) {
        report.outcome = FitOutcome::degenerate;
        return report;
    }

    // Fit window: drop separations within 4 dx of the grid resolution, where
    // discretization bias dominates.
    std::vector<MomentRow> fit_rows;
    for (const auto& r : report.rows) {
        if (r.delta >= 4.0 * dx) {
            fit_rows.push_back(r);
            report.fitted_ks.push_back(r.k);
        }
    }
    LogLogFit fit = fit_loglog(fit_rows);
    report.fit = fit;
    if (fit.slope_std_error > config.max_slope_std_error && !config.exact) {
        report.outcome = FitOutcome::indeterminate;
    } else {
        report.outcome = std::abs(fit.slope - report.predicted_slope) <= config.fit_tolerance
                             ? FitOutcome::pass
                             : FitOutcome::fail;
    }
    return report;
}

// ---------------------------------------------------------------------------
// Optimality experiment: the ratio sqrt(E|grad u(t,x) - grad u(t,0)|^2)/x^delta
// along dyadic x. For probe exponents above the field's Holder index the
// ratio diverges as x -> 0 with log-log slope alpha - delta; at the index
// itself it stays within a bounded band.

struct OptimalityRow {
    int k = 0;
    double x = 0.0;
    double moment = 0.0;  // second moment of the gradient increment
    double ratio = 0.0;
};

struct OptimalityConfig {
    int k_min = 1;
    int k_max = 9;
    double field_cap = 4.0;  // cap far above the probe window keeps pure scaling
    SecondMomentQuadrature quadrature;
};

inline std::vector<OptimalityRow> optimality_experiment(
    double alpha, double probe_exponent, double t, const GridSpec<1>& grid,
    const OptimalityConfig& config = {}, const LevyMeasureSpec* levy = nullptr,
    const JumpCoefficient<1>* jump = nullptr) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("field exponent must lie in (0,1)");
    if (probe_exponent < alpha || !(probe_exponent < 1.0))
        throw std::invalid_argument(
            "probe exponent must lie in [alpha, 1): below the Holder index the "
            "ratio test is vacuous");
    if (jump && !levy)
        throw std::invalid_argument("jump variant requires a levy measure");

    Coefficients<1> coeffs;
    if (jump) {
        coeffs.g = *jump;
    } else {
        coeffs.f = capped_power_field<1>(alpha, config.field_cap);
    }

    std::vector<OptimalityRow> rows;
    const Vec<1> origin{0.0};
    for (int k = config.k_min; k <= config.k_max; ++k) {
        double x = std::ldexp(1.0, -k);
        if (x < 2.0 * grid.spacing())
            throw std::invalid_argument("probe point below twice the grid spacing");
        double m = second_moment_p2<1>(t, Vec<1>{x}, origin, coeffs, levy,
                                       config.quadrature);
        rows.push_back({k, x, m, std::sqrt(m) / std::pow(x, probe_exponent)});
    }
    return rows;
}

inline LogLogFit fit_ratio_slope(std::span<const OptimalityRow> rows) {
    std::vector<MomentRow> converted;
    for (const auto& r : rows) converted.push_back({r.k, r.x, r.ratio, 0.0});
    return fit_loglog(converted);
}

}  // namespace spde
