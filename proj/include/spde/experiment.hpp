#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "spde/config.hpp"
#include "spde/holder_field.hpp"
#include "spde/levy.hpp"

namespace spde {

class ConfigValidationError : public std::runtime_error {
public:
    explicit ConfigValidationError(std::vector<std::string> violations)
        : std::runtime_error(join(violations)), violations(std::move(violations)) {}
    std::vector<std::string> violations;

private:
    static std::string join(const std::vector<std::string>& v) {
        std::string msg = "invalid config:";
        for (const auto& s : v) msg += "\n  - " + s;
        return msg;
    }
};

// Named coefficient-field description, loadable from config text.
struct FieldSpec {
    std::string family = "none";  // none|constant|linear|capped_power|capped_abs_power|gaussian_bump
    double exponent = 0.5;
    double scale = 1.0;
    double cap = 1.0;
    double value = 0.0;  // constant family
    double width = 1.0;  // bump family

    bool present() const { return family != "none"; }
    bool operator==(const FieldSpec&) const = default;
};

struct MarkFactorSpec {
    std::string family = "unit_l2";  // unit_l2|constant
    double value = 1.0;
    bool operator==(const MarkFactorSpec&) const = default;
};

struct LevyConfig {
    std::string family = "none";  // none|uniform|power_law
    double inner = 0.5;
    double outer = 1.0;
    double mass = 2.0;    // uniform family
    double sigma = 0.5;   // power-law family
    double scale = 1.0;
    bool present() const { return family != "none"; }
    bool operator==(const LevyConfig&) const = default;
};

struct ExperimentConfig {
    std::string experiment = "isometry";
    std::uint64_t seed = 0;
    long paths = 100000;
    std::string out_dir = "out";
    bool exact = false;
    int dimension = 1;

    double grid_half_width = 4.0;
    int grid_nodes = 257;

    double horizon = 0.25;
    int time_steps = 128;
    std::string time_grading = "uniform";  // uniform|graded
    double time_grading_exponent = 3.0;

    double p = 2.0;
    double alpha = 0.5;
    double beta = 0.3;

    FieldSpec field_f, field_h, field_b, field_g;
    MarkFactorSpec mark_factor;
    LevyConfig levy;
    bool h_stochastic = false;

    int k_min = 3;
    int k_max = 10;
    double anchor = 0.0;
    double fit_tolerance = 0.05;
    double probe_exponent = 0.7;

    double picard_tolerance = 1e-4;
    int picard_max_iterates = 20;

    int quadrature_time_cells = 4096;
    double quadrature_grading = 3.0;
    int quadrature_kernel_points = 2048;

    bool operator==(const ExperimentConfig&) const = default;

    double gamma() const { return alpha + 2.0 / p - 1.0; }
};

inline std::string format_config_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace detail {

inline void load_field(const ConfigText& text, const std::string& section, FieldSpec& spec) {
    spec.family = text.get_string(section, "family", spec.family);
    spec.exponent = text.get_double(section, "exponent", spec.exponent);
    spec.scale = text.get_double(section, "scale", spec.scale);
    spec.cap = text.get_double(section, "cap", spec.cap);
    spec.value = text.get_double(section, "value", spec.value);
    spec.width = text.get_double(section, "width", spec.width);
}

inline void save_field(ConfigText& text, const std::string& section, const FieldSpec& spec) {
    text.set(section, "family", spec.family);
    text.set(section, "exponent", format_config_double(spec.exponent));
    text.set(section, "scale", format_config_double(spec.scale));
    text.set(section, "cap", format_config_double(spec.cap));
    text.set(section, "value", format_config_double(spec.value));
    text.set(section, "width", format_config_double(spec.width));
}

}  // namespace detail

// Parses config text over a base configuration (per-experiment defaults);
// every key is optional.
inline ExperimentConfig load_config(const std::string& content,
                                    ExperimentConfig c = ExperimentConfig{}) {
    ConfigText text = ConfigText::parse(content);
    c.experiment = text.get_string("", "experiment", c.experiment);
    c.seed = text.get_u64("", "seed", c.seed);
    c.paths = text.get_long("", "paths", c.paths);
    c.out_dir = text.get_string("", "out_dir", c.out_dir);
    c.exact = text.get_bool("", "exact", c.exact);
    c.dimension = static_cast<int>(text.get_long("", "dimension", c.dimension));

    c.grid_half_width = text.get_double("grid", "half_width", c.grid_half_width);
    c.grid_nodes = static_cast<int>(text.get_long("grid", "nodes", c.grid_nodes));

    c.horizon = text.get_double("time", "horizon", c.horizon);
    c.time_steps = static_cast<int>(text.get_long("time", "steps", c.time_steps));
    c.time_grading = text.get_string("time", "grading", c.time_grading);
    c.time_grading_exponent =
        text.get_double("time", "grading_exponent", c.time_grading_exponent);

    c.p = text.get_double("", "p", c.p);
    c.alpha = text.get_double("", "alpha", c.alpha);
    c.beta = text.get_double("", "beta", c.beta);

    detail::load_field(text, "field.f", c.field_f);
    detail::load_field(text, "field.h", c.field_h);
    detail::load_field(text, "field.b", c.field_b);
    detail::load_field(text, "field.g", c.field_g);
    c.h_stochastic = text.get_bool("field.h", "stochastic", c.h_stochastic);
    c.mark_factor.family = text.get_string("field.g", "psi", c.mark_factor.family);
    c.mark_factor.value = text.get_double("field.g", "psi_value", c.mark_factor.value);

    c.levy.family = text.get_string("levy", "family", c.levy.family);
    c.levy.inner = text.get_double("levy", "inner", c.levy.inner);
    c.levy.outer = text.get_double("levy", "outer", c.levy.outer);
    c.levy.mass = text.get_double("levy", "mass", c.levy.mass);
    c.levy.sigma = text.get_double("levy", "sigma", c.levy.sigma);
    c.levy.scale = text.get_double("levy", "scale", c.levy.scale);

    c.k_min = static_cast<int>(text.get_long("regularity", "k_min", c.k_min));
    c.k_max = static_cast<int>(text.get_long("regularity", "k_max", c.k_max));
    c.anchor = text.get_double("regularity", "anchor", c.anchor);
    c.fit_tolerance = text.get_double("regularity", "fit_tolerance", c.fit_tolerance);
    c.probe_exponent = text.get_double("regularity", "probe_exponent", c.probe_exponent);

    c.picard_tolerance = text.get_double("picard", "tolerance", c.picard_tolerance);
    c.picard_max_iterates =
        static_cast<int>(text.get_long("picard", "max_iterates", c.picard_max_iterates));

    c.quadrature_time_cells =
        static_cast<int>(text.get_long("quadrature", "time_cells", c.quadrature_time_cells));
    c.quadrature_grading = text.get_double("quadrature", "grading", c.quadrature_grading);
    c.quadrature_kernel_points = static_cast<int>(
        text.get_long("quadrature", "kernel_points", c.quadrature_kernel_points));

    return c;
}

inline std::string serialize(const ExperimentConfig& c) {
    ConfigText text;
    text.set("", "experiment", c.experiment);
    text.set("", "seed", std::to_string(c.seed));
    text.set("", "paths", std::to_string(c.paths));
    text.set("", "out_dir", c.out_dir);
    text.set("", "exact", c.exact ? "true" : "false");
    text.set("", "dimension", std::to_string(c.dimension));
    text.set("", "p", format_config_double(c.p));
    text.set("", "alpha", format_config_double(c.alpha));
    text.set("", "beta", format_config_double(c.beta));

    text.set("grid", "half_width", format_config_double(c.grid_half_width));
    text.set("grid", "nodes", std::to_string(c.grid_nodes));

    text.set("time", "horizon", format_config_double(c.horizon));
    text.set("time", "steps", std::to_string(c.time_steps));
    text.set("time", "grading", c.time_grading);
    text.set("time", "grading_exponent", format_config_double(c.time_grading_exponent));

    detail::save_field(text, "field.f", c.field_f);
    detail::save_field(text, "field.h", c.field_h);
    text.set("field.h", "stochastic", c.h_stochastic ? "true" : "false");
    detail::save_field(text, "field.b", c.field_b);
    detail::save_field(text, "field.g", c.field_g);
    text.set("field.g", "psi", c.mark_factor.family);
    text.set("field.g", "psi_value", format_config_double(c.mark_factor.value));

    text.set("levy", "family", c.levy.family);
    text.set("levy", "inner", format_config_double(c.levy.inner));
    text.set("levy", "outer", format_config_double(c.levy.outer));
    text.set("levy", "mass", format_config_double(c.levy.mass));
    text.set("levy", "sigma", format_config_double(c.levy.sigma));
    text.set("levy", "scale", format_config_double(c.levy.scale));

    text.set("regularity", "k_min", std::to_string(c.k_min));
    text.set("regularity", "k_max", std::to_string(c.k_max));
    text.set("regularity", "anchor", format_config_double(c.anchor));
    text.set("regularity", "fit_tolerance", format_config_double(c.fit_tolerance));
    text.set("regularity", "probe_exponent", format_config_double(c.probe_exponent));

    text.set("picard", "tolerance", format_config_double(c.picard_tolerance));
    text.set("picard", "max_iterates", std::to_string(c.picard_max_iterates));

    text.set("quadrature", "time_cells", std::to_string(c.quadrature_time_cells));
    text.set("quadrature", "grading", format_config_double(c.quadrature_grading));
    text.set("quadrature", "kernel_points", std::to_string(c.quadrature_kernel_points));

    return text.serialize();
}

inline std::vector<std::string> validate(const ExperimentConfig& c) {
    std::vector<std::string> violations;
    auto known = {"isometry", "mild", "gradient-moment", "picard", "exponent", "optimality"};
    bool ok = false;
    for (const char* name : known)
        if (c.experiment == name) ok = true;
    if (!ok) violations.push_back("unknown experiment '" + c.experiment + "'");

    if (c.dimension != 1 && c.dimension != 2)
        violations.push_back("dimension must be 1 or 2");
    if (!(c.grid_half_width > 0.0)) violations.push_back("grid half_width must be positive");
    if (c.grid_nodes < 3 || c.grid_nodes % 2 == 0)
        violations.push_back("grid nodes must be odd and >= 3");
    if (!(c.horizon > 0.0)) violations.push_back("time horizon must be positive");
    if (c.time_steps < 1) violations.push_back("time steps must be >= 1");
    if (c.time_grading != "uniform" && c.time_grading != "graded")
        violations.push_back("time grading must be 'uniform' or 'graded'");
    if (!(c.p >= 2.0)) violations.push_back("moment order p must be >= 2");

    bool needs_gamma = c.experiment == "exponent" || c.experiment == "gradient-moment" ||
                       c.experiment == "picard";
    if (needs_gamma && !(c.gamma() > 0.0))
        violations.push_back("gamma = alpha + 2/p - 1 must be positive (got " +
                             format_config_double(c.gamma()) + ")");
    if (c.experiment == "picard" && c.field_b.present() && !(c.beta < c.gamma()))
        violations.push_back("drift requires 0 < beta < gamma = alpha + 2/p - 1");
    if (c.experiment == "optimality" && !(c.probe_exponent >= c.alpha))
        violations.push_back("probe exponent must be >= alpha");

    if (c.experiment == "exponent" || c.experiment == "optimality") {
        if (c.k_min > c.k_max) violations.push_back("k_min must not exceed k_max");
        double dx = 2.0 * c.grid_half_width / c.grid_nodes;
        double delta_min = std::ldexp(1.0, -c.k_max);
        if (delta_min < 2.0 * dx)
            violations.push_back(
                "smallest pair distance 2^-" + std::to_string(c.k_max) +
                " is below twice the grid spacing; increase grid nodes");
    }

    if (!(c.grid_half_width >= 6.0 * std::sqrt(c.horizon)))
        violations.push_back("grid half_width must be at least 6*sqrt(horizon)");

    if (c.paths < 1) violations.push_back("paths must be positive");
    if (c.levy.present()) {
        if (!(c.levy.inner > 0.0))
            violations.push_back("levy inner cutoff must be positive");
        if (!(c.levy.outer > c.levy.inner))
            violations.push_back("levy outer radius must exceed the inner cutoff");
        if (c.levy.family == "power_law" && !(c.levy.sigma < 2.0))
            violations.push_back("power-law sigma must be < 2 (levy integrability)");
    }
    if (c.field_g.present() && !c.levy.present())
        violations.push_back("jump coefficient g requires a levy measure");
    return violations;
}

inline ExperimentConfig load_and_validate(const std::string& content) {
    ExperimentConfig c = load_config(content);
    auto violations = validate(c);
    if (!violations.empty()) throw ConfigValidationError(std::move(violations));
    return c;
}

// Construction helpers shared by the runners and tests.

template <int D>
std::optional<HolderField<D>> make_field(const FieldSpec& spec) {
    if (!spec.present()) return std::nullopt;
    if (spec.family == "constant") return constant_field<D>(spec.value);
    if (spec.family == "linear") return linear_field<D>();
    if (spec.family == "capped_power")
        return capped_power_field<D>(spec.exponent, spec.cap);
    if (spec.family == "capped_abs_power")
        return capped_abs_power_field<D>(spec.exponent, spec.scale, spec.cap);
    if (spec.family == "gaussian_bump")
        return gaussian_bump_field<D>(spec.scale, spec.width);
    throw std::invalid_argument("unknown field family '" + spec.family + "'");
}

inline std::optional<LevyMeasureSpec> make_levy(const LevyConfig& cfg) {
    if (!cfg.present()) return std::nullopt;
    if (cfg.family == "uniform")
        return LevyMeasureSpec::uniform(cfg.inner, cfg.outer, cfg.mass);
    if (cfg.family == "power_law")
        return LevyMeasureSpec::power_law(cfg.inner, cfg.outer, cfg.sigma, cfg.scale);
    throw std::invalid_argument("unknown levy family '" + cfg.family + "'");
}

template <int D>
std::optional<JumpCoefficient<D>> make_jump(const FieldSpec& spatial,
                                            const MarkFactorSpec& mark,
                                            const LevyMeasureSpec* levy) {
    auto field = make_field<D>(spatial);
    if (!field) return std::nullopt;
    if (!levy) throw std::invalid_argument("jump coefficient requires a levy measure");
    if (mark.family == "unit_l2") return unit_l2_jump<D>(std::move(*field), *levy);
    if (mark.family == "constant")
        return separable_jump<D>(std::move(*field), mark.value);
    throw std::invalid_argument("unknown mark factor family '" + mark.family + "'");
}

}  // namespace spde
