#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "spde/runners.hpp"

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Numerical laboratory for the stochastic transport-diffusion equation"};
    app.require_subcommand(1);

    const std::vector<std::string> experiments = {"isometry",  "mild",     "gradient-moment",
                                                  "picard",    "exponent", "optimality"};
    std::string config_path, out_dir;
    std::uint64_t seed = 0;
    long paths = 0;
    bool exact = false;

    for (const auto& name : experiments) {
        auto* sub = app.add_subcommand(name, "run the " + name + " experiment");
        sub->add_option("--config", config_path, "experiment config file");
        sub->add_option("--seed", seed, "master seed (overrides config)");
        sub->add_option("--paths", paths, "Monte Carlo path count (overrides config)");
        sub->add_option("--out", out_dir, "output directory (overrides config)");
        sub->add_flag("--exact", exact, "force the p=2 quadrature pathway");
    }

    CLI11_PARSE(app, argc, argv);
    CLI::App* sub = app.get_subcommands().front();

    try {
        spde::ExperimentConfig cfg = spde::default_config(sub->get_name());
        if (sub->count("--config")) cfg = spde::load_config(read_file(config_path), cfg);
        cfg.experiment = sub->get_name();
        if (sub->count("--seed")) cfg.seed = seed;
        if (sub->count("--paths")) cfg.paths = paths;
        if (sub->count("--out")) cfg.out_dir = out_dir;
        if (sub->count("--exact")) cfg.exact = true;

        int status = spde::run(cfg);
        std::cout << cfg.experiment << ": " << (status == 0 ? "pass" : "FAIL")
                  << " (artifacts in " << cfg.out_dir << ")\n";
        return status;
    } catch (const spde::ConfigValidationError& err) {
        std::cerr << err.what() << "\n";
        return 2;
    } catch (const spde::ConfigParseError& err) {
        std::cerr << "config parse error: " << err.what() << "\n";
        return 2;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    }
}
