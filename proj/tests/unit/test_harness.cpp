#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "permsel/csv.hpp"
#include "permsel/errors.hpp"
#include "permsel/harness.hpp"
#include "test_support.hpp"

using namespace permsel;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("permsel_unit_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<std::string> lines(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

// Writes a CSV with predictors x0..x{p-1} and response y = signal·x_planted + noise.
fs::path planted_csv(const fs::path& dir, Index n, Index p, Index planted, double signal, bool binary,
                     std::uint64_t seed) {
    const Matrix X = permsel::testing::gaussian_matrix(n, p, seed);
    const Matrix e = permsel::testing::gaussian_matrix(n, 1, seed + 1);
    const fs::path file = dir / "data.csv";
    CsvWriter w(file);
    std::vector<std::string> cols;
    for (Index j = 0; j < p; ++j) cols.push_back("v" + std::to_string(j));
    cols.push_back("y");
    w.header(cols);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < p; ++j) w.field(X(i, j));
        const double lin = signal * X(i, planted) + e(i, 0);
        w.field(binary ? (lin > 0 ? 1.0 : 0.0) : lin);
        w.end_row();
    }
    return file;
}

RunConfig small_simulation(const fs::path& out) {
    RunConfig cfg;
    cfg.command = Command::Simulate;
    cfg.out = out;
    cfg.timing = false;
    cfg.scenarios.structures = {sim::Structure::Block};
    cfg.scenarios.n = {60};
    cfg.scenarios.p = 40;
    cfg.scenarios.s = {3};
    cfg.scenarios.snr = {2.0};
    cfg.scenarios.replicates = 3;
    cfg.selector.permutations = 30;
    cfg.selector.folds = 5;
    return cfg;
}

}  // namespace

TEST_CASE("command names") {
    for (auto c : {Command::Select, Command::Simulate, Command::SphereStudy, Command::RealData})
        CHECK(parse_command(to_string(c)) == c);
    CHECK(parse_command("sphere-study") == Command::SphereStudy);
    CHECK_THROWS_AS(parse_command("fit"), UsageError);
}

TEST_CASE("defaults follow the documented choices") {
    const RunConfig cfg;
    CHECK(cfg.selector.permutations == 100);
    CHECK(cfg.selector.folds == 10);
    CHECK(cfg.selector.alpha == 0.05);
    CHECK(cfg.selector.path.grid_size == 100);
    CHECK(cfg.selector.path.grid_ratio == 1e-3);
    CHECK(cfg.splits == 10);
    CHECK(cfg.split_fraction == doctest::Approx(2.0 / 3.0));
    CHECK(cfg.scenarios.replicates == 100);
    CHECK(cfg.scenarios.expand().size() == 4 * 2 * 4 * 2);
}

TEST_CASE("config text: keys, lists, scalars, errors") {
    RunConfig cfg;
    load_config_text(R"({"command":"simulate","methods":"perm,cv","n_perms":50,"folds":5,"alpha":0.1,
                         "grid_size":40,"grid_ratio":0.01,"sigma2":2.5,"seed":7,"threads":3,
                         "scenarios":{"structure":["B","D"],"n":200,"p":100,"s":[1,5],"snr":2,"replicates":4},
                         "sphere":{"n":50,"p":500,"s":[10],"draws":20}})",
                     cfg);
    CHECK(cfg.command == Command::Simulate);
    CHECK(cfg.methods == std::vector<Method>{Method::Permutation, Method::CV});
    CHECK(cfg.selector.permutations == 50);
    CHECK(cfg.selector.alpha == 0.1);
    CHECK(*cfg.selector.sigma2 == 2.5);
    CHECK(cfg.seed == 7);
    CHECK(cfg.threads == 3);
    CHECK(cfg.scenarios.structures == std::vector<sim::Structure>{sim::Structure::Block, sim::Structure::AR1Slow});
    CHECK(cfg.scenarios.n == std::vector<Index>{200});
    CHECK(cfg.scenarios.replicates == 4);
    CHECK(cfg.sphere.draws == 20);
    const auto scen = cfg.scenarios.expand();
    CHECK(scen.size() == 4);
    CHECK(scen.front().id == "B-n200-p100-s1-snr2");

    load_config_text(R"({"sigma2":null,"methods":["bic"]})", cfg);
    CHECK_FALSE(cfg.selector.sigma2.has_value());
    CHECK(cfg.methods == std::vector<Method>{Method::BIC});

    CHECK_THROWS_AS(load_config_text(R"({"bogus":1})", cfg), UsageError);
    CHECK_THROWS_AS(load_config_text(R"({"folds":"ten"})", cfg), UsageError);
    CHECK_THROWS_AS(load_config_text("{not json", cfg), UsageError);
    CHECK_THROWS_AS(load_config_text(R"({"scenarios":{"structure":"Z"}})", cfg), UsageError);
    CHECK_THROWS_AS(load_config_file("/nonexistent/config.json", cfg), UsageError);
}

TEST_CASE("scenario file and binomial ids") {
    const fs::path dir = scratch("scenario");
    std::ofstream(dir / "s.json") << R"({"structure":"B","n":[500],"p":100,"s":5,"family":"binomial",
                                          "odds":[1.35],"reading":"literal","signs":"random","replicates":2,"seed":11})";
    RunConfig cfg;
    load_scenario_file(dir / "s.json", cfg);
    CHECK(cfg.seed == 11);
    CHECK(cfg.scenarios.family == Family::Binomial);
    CHECK(cfg.scenarios.reading == sim::EffectReading::Literal);
    CHECK(cfg.scenarios.signs == sim::SignPolicy::Random);
    const auto sc = cfg.scenarios.expand();
    REQUIRE(sc.size() == 1);
    CHECK(sc[0].id == "B-n500-p100-s5-odds1.35");
    CHECK(sc[0].effects.odds == 1.35);
    fs::remove_all(dir);
}

TEST_CASE("manifest: stable, complete, and reloadable") {
    RunConfig cfg;
    cfg.seed = 99;
    cfg.selector.sigma2 = 1.5;
    const std::string m1 = manifest_json(cfg);
    CHECK(m1 == manifest_json(cfg));
    const auto j = nlohmann::json::parse(m1);
    CHECK(j["seed"] == 99);
    CHECK(j["version"] == std::string(software_version()));
    CHECK(j["config"]["n_perms"] == 100);
    CHECK(j["config"]["sigma2"] == 1.5);
    RunConfig back;
    load_config_text(j["config"].dump(), back);
    back.seed = j["seed"].get<std::uint64_t>();
    back.command = parse_command(j["command"].get<std::string>());
    CHECK(manifest_json(back) == m1);
}

TEST_CASE("parallel_for visits every index once and rethrows the first error") {
    for (int threads : {1, 2, 5}) {
        std::vector<std::atomic<int>> hits(57);
        parallel_for(57, threads, [&](std::size_t i) { ++hits[i]; });
        for (auto& h : hits) CHECK(h.load() == 1);
        try {
            parallel_for(20, threads, [](std::size_t i) {
                if (i == 7 || i == 13) throw DataError("bad " + std::to_string(i));
            });
            FAIL("expected an exception");
        } catch (const DataError& e) {
            CHECK(std::string(e.what()) == "bad 7");
        }
    }
}

TEST_CASE("format_mean_se") {
    CHECK(format_mean_se(MeanSe{5.0, 1.0, 2}) == "5.00 (1.00)");
    CHECK(format_mean_se(MeanSe{123.456, std::numeric_limits<double>::quiet_NaN(), 1}) == "123.46 (NA)");
}

TEST_CASE("select: planted predictor recovered; reruns are byte-identical") {
    const fs::path dir = scratch("select");
    RunConfig cfg;
    cfg.command = Command::Select;
    cfg.data = planted_csv(dir, 20, 5, 2, 10.0, false, 3);
    cfg.methods = {Method::Permutation};
    cfg.timing = false;
    cfg.out = dir / "a";
    const SelectOutput so = run_select(cfg);
    REQUIRE(so.results.size() == 1);
    CHECK(std::find(so.results[0].selected.begin(), so.results[0].selected.end(), 2) != so.results[0].selected.end());
    CHECK(so.predictor_names[2] == "v2");

    cfg.methods = {Method::Permutation, Method::BIC, Method::CV, Method::CovTest};
    run_command(cfg);
    cfg.out = dir / "b";
    run_command(cfg);
    for (const char* f : {"selection.csv", "selected_perm.csv", "selected_bic.csv", "selected_cv.csv",
                          "selected_covtest.csv", "diagnostics_perm.csv", "diagnostics_bic.csv", "diagnostics_cv.csv",
                          "diagnostics_covtest.csv"}) {
        CAPTURE(f);
        REQUIRE(fs::exists(dir / "a" / f));
        CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
    }
    CHECK(fs::exists(dir / "a" / "manifest.json"));
    const auto sel = lines(dir / "a" / "selected_perm.csv");
    CHECK(sel[0] == "index,name,coefficient");
    bool named = false;
    for (const auto& l : sel) named = named || l.rfind("2,v2,", 0) == 0;
    CHECK(named);
    fs::remove_all(dir);
}

TEST_CASE("select: scope guards") {
    const fs::path dir = scratch("guards");
    RunConfig cfg;
    cfg.command = Command::Select;
    cfg.out = dir / "o";
    cfg.data = planted_csv(dir, 30, 4, 1, 3.0, true, 5);
    cfg.family = Family::Binomial;
    cfg.methods = {Method::CovTest};
    CHECK_THROWS_AS(run_select(cfg), UsageError);

    cfg.family = Family::Gaussian;
    cfg.data = planted_csv(dir, 10, 20, 1, 3.0, false, 5);
    CHECK_THROWS_AS(run_select(cfg), UsageError);  // p >= n without a known σ²
    cfg.selector.sigma2 = 1.0;
    CHECK_NOTHROW(run_select(cfg));

    cfg.data = dir / "missing.csv";
    CHECK_THROWS_AS(run_select(cfg), DataError);
    fs::remove_all(dir);
}

TEST_CASE("simulate: row accounting, failures, determinism across thread budgets") {
    const fs::path dir = scratch("simulate");
    RunConfig cfg = small_simulation(dir / "t1");
    run_command(cfg);
    const auto rows = lines(dir / "t1" / "replicates.csv");
    CHECK(rows.size() == 1 + 3 * 4);
    const auto summary = lines(dir / "t1" / "summary.csv");
    CHECK(summary.size() == 1 + 4);
    CHECK(summary[0].rfind("scenario_id,method,power_mean,power_se,fdr_mean,fdr_se,size_mean,size_se,misclass_mean,"
                           "misclass_se,seconds_mean,seconds_se",
                           0) == 0);

    cfg.threads = 3;
    cfg.out = dir / "t3";
    run_command(cfg);
    for (const char* f : {"replicates.csv", "summary.csv"}) CHECK(slurp(dir / "t1" / f) == slurp(dir / "t3" / f));

    cfg.scenarios.replicates = 1;
    const SimulateOutput one = run_simulate(cfg);
    for (const auto& s : one.summaries) {
        CHECK(s.replicates == 1);
        CHECK(std::isnan(s.size.se));
    }
    fs::remove_all(dir);
}

TEST_CASE("simulate: binomial covariance-test cells are marked, not dropped") {
    RunConfig cfg = small_simulation(scratch("simbin"));
    cfg.scenarios.family = Family::Binomial;
    cfg.scenarios.odds = {2.5};
    cfg.scenarios.n = {80};
    cfg.scenarios.replicates = 2;
    const SimulateOutput so = run_simulate(cfg);
    CHECK(so.records.size() == 2 * 4);
    for (const auto& r : so.records)
        if (r.method == "covtest") {
            CHECK_FALSE(r.ok);
            CHECK(r.error == "not-implemented");
        } else {
            CHECK(r.ok);
        }
    for (const auto& s : so.summaries)
        if (s.method == "covtest") CHECK(s.failures == 2);
    fs::remove_all(cfg.out);
}

TEST_CASE("simulate: dataset dump") {
    RunConfig cfg = small_simulation(scratch("dump"));
    cfg.scenarios.replicates = 2;
    cfg.methods = {Method::Permutation};
    cfg.dump_data = true;
    run_command(cfg);
    CHECK(fs::exists(cfg.out / "data" / "B-n60-p40-s3-snr2-r1.csv"));
    CHECK(lines(cfg.out / "data" / "B-n60-p40-s3-snr2-r2.csv").size() == 61);
    fs::remove_all(cfg.out);
}

TEST_CASE("sphere study: outputs and bound columns") {
    RunConfig cfg;
    cfg.command = Command::SphereStudy;
    cfg.out = scratch("sphere");
    cfg.sphere.n = 30;
    cfg.sphere.p = 300;
    cfg.sphere.s = {3, 30};
    cfg.sphere.draws = 200;
    const SphereStudyOutput so = run_sphere_study(cfg);
    REQUIRE(so.regimes.size() == 2);
    const auto b = sim::sphere_bound(30, 300);
    CHECK(so.bound.exact == b.exact);
    for (const auto& r : so.regimes) {
        CHECK(r.permuted.size() == 200);
        CHECK(r.uniform.size() == 200);
        for (double v : r.permuted) CHECK(v <= 1.0 + 1e-12);
        CHECK(r.ks_distance == doctest::Approx(ks_two_sample(r.permuted, r.uniform)));
    }
    run_command(cfg);
    const auto summary = lines(cfg.out / "sphere_summary.csv");
    REQUIRE(summary.size() == 3);
    CHECK(summary[1].find(format_number(b.exact)) != std::string::npos);
    CHECK(summary[2].find(format_number(b.exact)) != std::string::npos);
    CHECK(lines(cfg.out / "sphere_samples.csv").size() == 1 + 2 * 200);
    fs::remove_all(cfg.out);
}

TEST_CASE("realdata: table schema and per-split records") {
    const fs::path dir = scratch("realdata");
    RunConfig cfg;
    cfg.command = Command::RealData;
    cfg.out = dir / "o";
    cfg.data = planted_csv(dir, 300, 100, 4, 2.0, true, 9);
    cfg.family = Family::Binomial;
    cfg.methods = {Method::Permutation, Method::BIC, Method::CV};
    cfg.splits = 3;
    cfg.selector.folds = 5;
    run_command(cfg);
    const auto table = lines(cfg.out / "table.csv");
    REQUIRE(table.size() == 4);
    CHECK(table[0] == "Method,Model Size,Percent Misclassified,CPU seconds");
    for (std::size_t k = 1; k < table.size(); ++k) {
        CHECK(table[k].find(" (") != std::string::npos);
        CHECK(table[k].back() == ')');
    }
    CHECK(lines(cfg.out / "splits.csv").size() == 1 + 3 * 3);

    cfg.family = Family::Gaussian;
    cfg.data = planted_csv(dir, 60, 10, 4, 2.0, false, 9);
    cfg.out = dir / "g";
    cfg.methods = {Method::Permutation, Method::CovTest};
    cfg.splits = 2;
    run_command(cfg);
    CHECK(lines(cfg.out / "table.csv")[0] == "Method,Model Size,Test MSE,CPU seconds");
    fs::remove_all(dir);
}
