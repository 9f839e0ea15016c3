// Command-line driver for the investment and early-exercise experiments.

#include <iostream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "hjbpen/bench.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Penalty and policy iteration solvers for discrete HJB equations and HJB obstacle problems"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    app.add_option("--config", config_path, "key = value settings file; flags override it");

    // Flag name -> setting key, applied in this order after the config file.
    const std::vector<std::pair<std::string, std::string>> flags = {
        {"--experiment", "experiment"},   {"--M", "M"},
        {"--N", "N"},                     {"--solver", "solver"},
        {"--rho", "rho"},                 {"--penalty", "penalty"},
        {"--u0", "u0"},                   {"--tol", "tol"},
        {"--delta", "delta"},             {"--grid-points", "grid_points"},
        {"--out", "out"},                 {"--rhos", "rhos"},
        {"--reference-rho", "reference_rho"}, {"--u0-list", "u0_list"},
        {"--n-list", "n_list"},
    };
    const std::map<std::string, std::string> help = {
        {"experiment", "investment | early_exercise (rho-sweep)"},
        {"M", "time steps"},
        {"N", "spatial intervals"},
        {"solver", "penalty | penalty_linesearch | policy | explicit"},
        {"rho", "penalty parameter"},
        {"penalty", "max | smooth:<eps>"},
        {"u0", "fixed control of the penalised HJB (investment)"},
        {"tol", "relative residual tolerance"},
        {"delta", "obstacle scaling for policy iteration"},
        {"grid_points", "control grid size"},
        {"out", "output directory"},
        {"rhos", "comma-separated rho list (rho-sweep)"},
        {"reference_rho", "rho of the early-exercise reference (rho-sweep)"},
        {"u0_list", "comma-separated u0 list (u0-sweep)"},
        {"n_list", "comma-separated N list (guess-study)"},
    };
    std::map<std::string, std::string> given;
    for (const auto& [flag, key] : flags) app.add_option(flag, given[key], help.at(key));

    auto* investment = app.add_subcommand("investment", "implicit march of the investment HJB");
    auto* early = app.add_subcommand("early-exercise", "implicit march of the early-exercise obstacle problem");
    auto* sweep = app.add_subcommand("rho-sweep", "single-step error against a reference for a list of rho");
    auto* u0 = app.add_subcommand("u0-sweep", "penalty/policy gap for a list of u0 (investment)");
    auto* guess = app.add_subcommand("guess-study", "iteration counts with M = 1 for a list of N (early exercise)");
    for (auto* sub : {investment, early, sweep, u0, guess}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    hjbpen::RunConfig cfg;
    try {
        if (!config_path.empty()) hjbpen::apply_config_file(cfg, config_path);
        for (const auto& [flag, key] : flags)
            if (app.count(flag) > 0) hjbpen::apply_setting(cfg, key, given[key]);
        if (early->parsed()) cfg.experiment = hjbpen::Experiment::early_exercise;
        if (investment->parsed() || u0->parsed()) cfg.experiment = hjbpen::Experiment::investment;
        cfg.validate();
    } catch (const std::exception& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 1;
    }

    if (investment->parsed()) return hjbpen::cmd_investment(cfg, std::cout);
    if (early->parsed()) return hjbpen::cmd_early_exercise(cfg, std::cout);
    if (sweep->parsed()) return hjbpen::cmd_rho_sweep(cfg, std::cout);
    if (u0->parsed()) return hjbpen::cmd_u0_sweep(cfg, std::cout);
    return hjbpen::cmd_guess_study(cfg, std::cout);
}
