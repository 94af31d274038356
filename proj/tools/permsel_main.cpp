// permsel: LASSO penalty selection by response permutation, with BIC, CV and
// covariance-test comparisons, simulation sweeps and train/test evaluation.

#include <spdlog/spdlog.h>

#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "permsel/errors.hpp"
#include "permsel/harness.hpp"

namespace {

struct Flags {
    std::string config, scenario, data, response, out, methods, family;
    std::uint64_t seed = 0;
    int threads = 1, n_perms = 0, folds = 0, grid_size = 0, splits = 0, draws = 0;
    double alpha = 0, grid_ratio = 0, split_fraction = 0, sigma2 = 0, sphere_snr = 0;
    long long sphere_n = 0, sphere_p = 0;
    std::vector<long long> sphere_s;
    int replicates = 0;
    bool no_header = false, no_timing = false, dump_data = false, verbose = false, quiet = false;
};

template <class T, class F>
void if_given(const CLI::App& app, const char* name, const T& value, F&& apply) {
    if (app.count(name) > 0) apply(value);
}

}  // namespace

int main(int argc, char** argv) {
    using namespace permsel;
    CLI::App app{"Penalty selection for the LASSO by permutation of the response"};
    app.set_version_flag("--version", std::string(software_version()));
    app.require_subcommand(1, 1);
    app.fallthrough();

    Flags f;
    app.add_option("--config", f.config, "JSON configuration file (flags given on the command line take precedence)");
    app.add_option("--scenario", f.scenario, "JSON scenario specification for simulate");
    app.add_option("--data", f.data, "CSV dataset (select, realdata)");
    app.add_option("--response", f.response, "response column name or 0-based number (default: last column)");
    app.add_flag("--no-header", f.no_header, "CSV has no header row");
    app.add_option("--seed", f.seed, "master seed");
    app.add_option("--threads", f.threads, "thread budget")->check(CLI::PositiveNumber);
    app.add_option("--out", f.out, "output directory");
    app.add_option("--methods", f.methods, "comma-separated subset of perm,bic,cv,covtest");
    app.add_option("--family", f.family, "gaussian or binomial");
    app.add_option("--n-perms", f.n_perms, "permutations for permutation selection");
    app.add_option("--folds", f.folds, "cross-validation folds");
    app.add_option("--alpha", f.alpha, "covariance-test level");
    app.add_option("--grid-size", f.grid_size, "points on the lambda grid");
    app.add_option("--grid-ratio", f.grid_ratio, "smallest/largest lambda on the grid");
    app.add_option("--split-fraction", f.split_fraction, "training fraction (realdata)");
    app.add_option("--splits", f.splits, "number of random splits (realdata)");
    app.add_option("--sigma2", f.sigma2, "known error variance for the covariance test");
    app.add_option("--replicates", f.replicates, "replicates per scenario (simulate)");
    app.add_flag("--no-timing", f.no_timing, "write NA instead of CPU seconds (byte-stable outputs)");
    app.add_flag("--dump-data", f.dump_data, "simulate: write every generated dataset as CSV");
    app.add_option("--sphere-n", f.sphere_n, "sphere-study rows");
    app.add_option("--sphere-p", f.sphere_p, "sphere-study columns");
    app.add_option("--sphere-s", f.sphere_s, "sphere-study true-variable counts");
    app.add_option("--sphere-snr", f.sphere_snr, "sphere-study SNR");
    app.add_option("--draws", f.draws, "sphere-study draws per distribution");
    app.add_flag("-v,--verbose", f.verbose, "debug logging");
    app.add_flag("-q,--quiet", f.quiet, "warnings and errors only");

    app.add_subcommand("select", "choose lambda on a CSV dataset with each requested method");
    app.add_subcommand("simulate", "run a factorial simulation sweep");
    app.add_subcommand("sphere-study", "compare permuted-response and uniform-sphere null penalties");
    app.add_subcommand("realdata", "repeated train/test evaluation on a CSV dataset");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(ExitCode::Usage);
    }

    spdlog::set_pattern("[%l] %v");
    spdlog::set_level(f.verbose ? spdlog::level::debug : f.quiet ? spdlog::level::warn : spdlog::level::info);

    try {
        RunConfig cfg;
        if (!f.config.empty()) load_config_file(f.config, cfg);
        if (!f.scenario.empty()) load_scenario_file(f.scenario, cfg);
        cfg.command = parse_command(app.get_subcommands().front()->get_name());

        if_given(app, "--data", f.data, [&](const auto& v) { cfg.data = v; });
        if_given(app, "--response", f.response, [&](const auto& v) { cfg.response = v; });
        if (f.no_header) cfg.header = false;
        if_given(app, "--seed", f.seed, [&](auto v) { cfg.seed = v; });
        if_given(app, "--threads", f.threads, [&](auto v) { cfg.threads = v; });
        if_given(app, "--out", f.out, [&](const auto& v) { cfg.out = v; });
        if_given(app, "--methods", f.methods, [&](const auto& v) { cfg.methods = parse_methods(v); });
        if_given(app, "--family", f.family, [&](const auto& v) {
            cfg.family = parse_family(v);
            cfg.scenarios.family = cfg.family;
        });
        if_given(app, "--n-perms", f.n_perms, [&](auto v) { cfg.selector.permutations = v; });
        if_given(app, "--folds", f.folds, [&](auto v) { cfg.selector.folds = v; });
        if_given(app, "--alpha", f.alpha, [&](auto v) { cfg.selector.alpha = v; });
        if_given(app, "--grid-size", f.grid_size, [&](auto v) { cfg.selector.path.grid_size = v; });
        if_given(app, "--grid-ratio", f.grid_ratio, [&](auto v) { cfg.selector.path.grid_ratio = v; });
        if_given(app, "--split-fraction", f.split_fraction, [&](auto v) { cfg.split_fraction = v; });
        if_given(app, "--splits", f.splits, [&](auto v) { cfg.splits = v; });
        if_given(app, "--sigma2", f.sigma2, [&](auto v) { cfg.selector.sigma2 = v; });
        if_given(app, "--replicates", f.replicates, [&](auto v) { cfg.scenarios.replicates = v; });
        if (f.no_timing) cfg.timing = false;
        if (f.dump_data) cfg.dump_data = true;
        if_given(app, "--sphere-n", f.sphere_n, [&](auto v) { cfg.sphere.n = v; });
        if_given(app, "--sphere-p", f.sphere_p, [&](auto v) { cfg.sphere.p = v; });
        if_given(app, "--sphere-s", f.sphere_s, [&](const auto& v) { cfg.sphere.s.assign(v.begin(), v.end()); });
        if_given(app, "--sphere-snr", f.sphere_snr, [&](auto v) { cfg.sphere.snr = v; });
        if_given(app, "--draws", f.draws, [&](auto v) { cfg.sphere.draws = v; });

        run_command(cfg);
        spdlog::info("outputs written to {}", cfg.out.string());
        return static_cast<int>(ExitCode::Success);
    } catch (const Error& e) {
        spdlog::error("{}", e.what());
        return static_cast<int>(e.code());
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return static_cast<int>(ExitCode::Numerical);
    }
}
