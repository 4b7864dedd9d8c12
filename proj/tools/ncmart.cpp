// ncmart run <experiment> [--key=value ...] --out <path>
// ncmart list
//
// Exit status: 0 all invariants hold, 1 some invariant failed, 2 usage or
// parameter error.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "ncmart/cli.hpp"
#include "ncmart/error.hpp"

namespace {

// Remaining "--key=value" or "--key value" arguments become config entries.
void apply_overrides(ncmart::ExperimentConfig& cfg, const std::vector<std::string>& args) {
    for (std::size_t i = 0; i < args.size(); ++i) {
        std::string a = args[i];
        if (a.rfind("--", 0) != 0) throw ncmart::ParameterError("unexpected argument '" + a + "'");
        a = a.substr(2);
        const auto eq = a.find('=');
        if (eq != std::string::npos) {
            cfg.set(a.substr(0, eq), a.substr(eq + 1));
        } else if (i + 1 < args.size() && args[i + 1].rfind("--", 0) != 0) {
            cfg.set(a, args[++i]);
        } else {
            cfg.set(a, "1");
        }
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"noncommutative martingale inequalities: experiment runner"};
    app.require_subcommand(1);

    auto* list = app.add_subcommand("list", "print the experiment registry");
    auto* run = app.add_subcommand("run", "run an experiment and write CSV");
    run->allow_extras();
    std::string experiment, out, config_path;
    run->add_option("experiment", experiment, "experiment name")->required();
    run->add_option("--out,-o", out, "output CSV path");
    run->add_option("--config,-c", config_path, "key = value file; flags override it");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    if (list->parsed()) {
        for (const auto& e : ncmart::experiment_registry()) std::cout << e.name << "\t" << e.description << "\n";
        return 0;
    }

    ncmart::SweepResult result;
    std::string path;
    try {
        ncmart::ExperimentConfig cfg;
        if (!config_path.empty()) {
            std::ifstream is(config_path);
            if (!is) throw ncmart::ParameterError("cannot read config " + config_path);
            cfg = ncmart::parse_config(is, cfg);
        }
        apply_overrides(cfg, run->remaining());
        cfg.experiment = experiment;
        if (!out.empty()) cfg.output = out;
        if (cfg.output.empty()) throw ncmart::ParameterError("--out is required");
        path = cfg.output;
        result = ncmart::run_experiment(cfg);
        ncmart::write_outputs(result, path);
    } catch (const ncmart::ParameterError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    std::cout << result.experiment << ": " << result.rows.size() << " rows";
    if (result.slope) std::cout << ", slope " << result.slope->slope << " +- " << result.slope->stderr_;
    std::cout << ", wrote " << path << "\n";
    for (const auto& f : result.failures) std::cerr << "FAIL " << f << "\n";
    return result.ok() ? 0 : 1;
}
