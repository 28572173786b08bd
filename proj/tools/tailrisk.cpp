#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "tailrisk/errors.hpp"
#include "tailrisk/harness.hpp"

namespace {

struct CommonOpts {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    bool verbose = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "experiment config (JSON)")->required();
    cmd->add_option("--seed", opts.seed, "root seed, overrides the config value");
    cmd->add_option("--out", opts.out, "output directory, overrides the config value");
    cmd->add_flag("--verbose", opts.verbose, "progress lines on stderr");
}

int dispatch(const CommonOpts& opts, int (*runner)(const tailrisk::ExperimentConfig&,
                                                   const std::string&, bool)) {
    tailrisk::ExperimentConfig cfg = tailrisk::load_config(opts.config_path);
    if (opts.seed) cfg.seed = *opts.seed;
    if (opts.out) cfg.out = *opts.out;
    return runner(cfg, cfg.out, opts.verbose);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"tail-risk estimation and optimization harness"};
    app.require_subcommand(1);

    CommonOpts est_opts, opt_opts, cmp_opts;
    CLI::App* est = app.add_subcommand("estimate", "fixed-decision CVaR estimation -> estimate.csv");
    add_common(est, est_opts);
    CLI::App* opt = app.add_subcommand("optimize", "solver run -> trajectory.csv + report.json");
    add_common(opt, opt_opts);
    CLI::App* cmp = app.add_subcommand("compare", "sample-requirement comparison -> compare.csv");
    add_common(cmp, cmp_opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (est->parsed()) return dispatch(est_opts, tailrisk::run_estimate);
        if (opt->parsed()) return dispatch(opt_opts, tailrisk::run_optimize);
        if (cmp->parsed()) return dispatch(cmp_opts, tailrisk::run_compare);
    } catch (const tailrisk::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
