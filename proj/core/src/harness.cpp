#include "permsel/harness.hpp"

#include <spdlog/spdlog.h>

#include <atomic>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "permsel/csv.hpp"
#include "permsel/errors.hpp"

#ifndef PERMSEL_VERSION
#define PERMSEL_VERSION "0.0.0"
#endif

namespace permsel {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string_view software_version() { return PERMSEL_VERSION; }

std::string_view to_string(Command c) {
    switch (c) {
        case Command::Select: return "select";
        case Command::Simulate: return "simulate";
        case Command::SphereStudy: return "sphere-study";
        case Command::RealData: return "realdata";
    }
    return "?";
}

Command parse_command(std::string_view name) {
    if (name == "select") return Command::Select;
    if (name == "simulate") return Command::Simulate;
    if (name == "sphere-study") return Command::SphereStudy;
    if (name == "realdata") return Command::RealData;
    throw UsageError("unknown command '" + std::string(name) + "'");
}

// ------------------------------------------------------------------ scenarios

namespace {

std::string_view reading_name(sim::EffectReading r) {
    return r == sim::EffectReading::OddsScale ? "odds" : "literal";
}

sim::EffectReading parse_reading(std::string_view s) {
    if (s == "odds") return sim::EffectReading::OddsScale;
    if (s == "literal") return sim::EffectReading::Literal;
    throw UsageError("effect reading must be 'odds' or 'literal'");
}

std::string_view signs_name(sim::SignPolicy s) { return s == sim::SignPolicy::Positive ? "positive" : "random"; }

sim::SignPolicy parse_signs(std::string_view s) {
    if (s == "positive") return sim::SignPolicy::Positive;
    if (s == "random") return sim::SignPolicy::Random;
    throw UsageError("sign policy must be 'positive' or 'random'");
}

}  // namespace

std::vector<sim::Scenario> ScenarioGrid::expand() const {
    if (replicates < 1) throw UsageError("replicate count must be at least 1");
    if (p < 1) throw UsageError("p must be positive");
    const GlmFamily fam = family == Family::Gaussian ? GlmFamily::gaussian() : GlmFamily::binomial();
    const std::vector<double>& signals = fam.is_gaussian() ? snr : odds;
    std::vector<sim::Scenario> out;
    for (auto st : structures)
        for (Index nn : n)
            for (Index ss : s)
                for (double sig : signals) {
                    sim::Scenario sc;
                    sc.covariance.structure = st;
                    sc.covariance.p = p;
                    sc.n = nn;
                    sc.effects.s = ss;
                    sc.effects.family = fam;
                    sc.effects.reading = reading;
                    sc.effects.signs = signs;
                    if (fam.is_gaussian()) {
                        sc.snr = sig;
                    } else {
                        sc.effects.odds = sig;
                    }
                    sc.id = std::string(sim::to_string(st)) + "-n" + std::to_string(nn) + "-p" + std::to_string(p) +
                            "-s" + std::to_string(ss) + (fam.is_gaussian() ? "-snr" : "-odds") + format_number(sig);
                    out.push_back(std::move(sc));
                }
    return out;
}

// --------------------------------------------------------------------- config

namespace {

template <class T>
std::vector<T> scalar_or_list(const json& v) {
    std::vector<T> out;
    if (v.is_array()) {
        for (const auto& e : v) out.push_back(e.get<T>());
    } else {
        out.push_back(v.get<T>());
    }
    return out;
}

void apply_scenarios(const json& j, RunConfig& cfg) {
    ScenarioGrid& g = cfg.scenarios;
    for (const auto& [key, v] : j.items()) {
        if (key == "structure" || key == "structures") {
            g.structures.clear();
            for (const auto& name : scalar_or_list<std::string>(v)) g.structures.push_back(sim::parse_structure(name));
        } else if (key == "n") {
            g.n = scalar_or_list<Index>(v);
        } else if (key == "p") {
            g.p = v.get<Index>();
        } else if (key == "s") {
            g.s = scalar_or_list<Index>(v);
        } else if (key == "snr") {
            g.snr = scalar_or_list<double>(v);
        } else if (key == "odds") {
            g.odds = scalar_or_list<double>(v);
        } else if (key == "family") {
            g.family = parse_family(v.get<std::string>());
        } else if (key == "reading") {
            g.reading = parse_reading(v.get<std::string>());
        } else if (key == "signs") {
            g.signs = parse_signs(v.get<std::string>());
        } else if (key == "replicates") {
            g.replicates = v.get<int>();
        } else if (key == "seed") {
            cfg.seed = v.get<std::uint64_t>();
        } else {
            throw UsageError("unknown scenario key '" + key + "'");
        }
    }
}

void apply_sphere(const json& j, SphereStudyConfig& s) {
    for (const auto& [key, v] : j.items()) {
        if (key == "n") s.n = v.get<Index>();
        else if (key == "p") s.p = v.get<Index>();
        else if (key == "s") s.s = scalar_or_list<Index>(v);
        else if (key == "snr") s.snr = v.get<double>();
        else if (key == "draws") s.draws = v.get<int>();
        else throw UsageError("unknown sphere-study key '" + key + "'");
    }
}

void apply_config(const json& j, RunConfig& cfg) {
    if (!j.is_object()) throw UsageError("configuration must be a JSON object");
    for (const auto& [key, v] : j.items()) {
        if (key == "command") cfg.command = parse_command(v.get<std::string>());
        else if (key == "data") cfg.data = v.get<std::string>();
        else if (key == "response") cfg.response = v.is_number() ? std::to_string(v.get<long long>()) : v.get<std::string>();
        else if (key == "header") cfg.header = v.get<bool>();
        else if (key == "out") cfg.out = v.get<std::string>();
        else if (key == "methods") {
            if (v.is_array()) {
                cfg.methods.clear();
                for (const auto& m : v) cfg.methods.push_back(parse_method(m.get<std::string>()));
            } else {
                cfg.methods = parse_methods(v.get<std::string>());
            }
        } else if (key == "family") cfg.family = parse_family(v.get<std::string>());
        else if (key == "n_perms") cfg.selector.permutations = v.get<int>();
        else if (key == "folds") cfg.selector.folds = v.get<int>();
        else if (key == "alpha") cfg.selector.alpha = v.get<double>();
        else if (key == "grid_size") cfg.selector.path.grid_size = v.get<int>();
        else if (key == "grid_ratio") cfg.selector.path.grid_ratio = v.get<double>();
        else if (key == "max_deviance_ratio") cfg.selector.path.max_deviance_ratio = v.get<double>();
        else if (key == "tolerance") cfg.selector.path.solver.tolerance = v.get<double>();
        else if (key == "max_sweeps") cfg.selector.path.solver.max_sweeps = v.get<int>();
        else if (key == "sigma2") {
            if (v.is_null()) cfg.selector.sigma2.reset();
            else cfg.selector.sigma2 = v.get<double>();
        } else if (key == "seed") cfg.seed = v.get<std::uint64_t>();
        else if (key == "threads") cfg.threads = v.get<int>();
        else if (key == "split_fraction") cfg.split_fraction = v.get<double>();
        else if (key == "splits") cfg.splits = v.get<int>();
        else if (key == "timing") cfg.timing = v.get<bool>();
        else if (key == "dump_data") cfg.dump_data = v.get<bool>();
        else if (key == "scenarios") apply_scenarios(v, cfg);
        else if (key == "sphere") apply_sphere(v, cfg.sphere);
        else throw UsageError("unknown configuration key '" + key + "'");
    }
}

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open configuration file " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw UsageError(path.string() + ": " + e.what());
    }
}

}  // namespace

void load_config_text(std::string_view text, RunConfig& cfg) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw UsageError(std::string("configuration: ") + e.what());
    }
    try {
        apply_config(j, cfg);
    } catch (const json::exception& e) {
        throw UsageError(std::string("configuration: ") + e.what());
    }
}

void load_config_file(const fs::path& path, RunConfig& cfg) {
    const json j = read_json_file(path);
    try {
        apply_config(j, cfg);
    } catch (const json::exception& e) {
        throw UsageError(path.string() + ": " + e.what());
    }
}

void load_scenario_file(const fs::path& path, RunConfig& cfg) {
    const json j = read_json_file(path);
    try {
        apply_scenarios(j, cfg);
    } catch (const json::exception& e) {
        throw UsageError(path.string() + ": " + e.what());
    }
}

std::string manifest_json(const RunConfig& cfg) {
    json m;
    m["software"] = "permsel";
    m["version"] = std::string(software_version());
    m["command"] = std::string(to_string(cfg.command));
    m["seed"] = cfg.seed;
    json c;
    c["data"] = cfg.data.string();
    c["response"] = cfg.response;
    c["header"] = cfg.header;
    c["out"] = cfg.out.string();
    json methods = json::array();
    for (Method meth : cfg.methods) methods.push_back(std::string(to_string(meth)));
    c["methods"] = methods;
    c["family"] = std::string(to_string(cfg.family));
    c["n_perms"] = cfg.selector.permutations;
    c["folds"] = cfg.selector.folds;
    c["alpha"] = cfg.selector.alpha;
    c["grid_size"] = cfg.selector.path.grid_size;
    c["grid_ratio"] = cfg.selector.path.grid_ratio;
    c["max_deviance_ratio"] = cfg.selector.path.max_deviance_ratio;
    c["tolerance"] = cfg.selector.path.solver.tolerance;
    c["max_sweeps"] = cfg.selector.path.solver.max_sweeps;
    c["sigma2"] = cfg.selector.sigma2 ? json(*cfg.selector.sigma2) : json(nullptr);
    c["split_fraction"] = cfg.split_fraction;
    c["splits"] = cfg.splits;
    c["timing"] = cfg.timing;
    c["dump_data"] = cfg.dump_data;
    c["threads"] = cfg.threads;

    const ScenarioGrid& g = cfg.scenarios;
    json sc;
    json st = json::array();
    for (auto s : g.structures) st.push_back(std::string(sim::to_string(s)));
    sc["structures"] = st;
    sc["n"] = g.n;
    sc["p"] = g.p;
    sc["s"] = g.s;
    sc["snr"] = g.snr;
    sc["odds"] = g.odds;
    sc["family"] = std::string(to_string(g.family));
    sc["reading"] = std::string(reading_name(g.reading));
    sc["signs"] = std::string(signs_name(g.signs));
    sc["replicates"] = g.replicates;
    c["scenarios"] = sc;

    json sp;
    sp["n"] = cfg.sphere.n;
    sp["p"] = cfg.sphere.p;
    sp["s"] = cfg.sphere.s;
    sp["snr"] = cfg.sphere.snr;
    sp["draws"] = cfg.sphere.draws;
    c["sphere"] = sp;
    m["config"] = c;
    return m.dump(2) + "\n";
}

// ------------------------------------------------------------------- workers

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body) {
    if (count == 0) return;
    const auto workers = static_cast<std::size_t>(std::max(1, threads));
    std::vector<std::exception_ptr> errors(count);
    if (workers == 1 || count == 1) {
        for (std::size_t i = 0; i < count; ++i) {
            try {
                body(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    } else {
        std::atomic<std::size_t> next{0};
        auto work = [&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        };
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < std::min(workers, count); ++t) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

std::string format_mean_se(const MeanSe& m) {
    auto fmt = [](double v) {
        if (std::isnan(v)) return std::string("NA");
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.2f", v);
        return std::string(buf);
    };
    return fmt(m.mean) + " (" + fmt(m.se) + ")";
}

// ------------------------------------------------------------------- helpers

namespace {

void prepare_out_dir(const RunConfig& cfg) {
    std::error_code ec;
    fs::create_directories(cfg.out, ec);
    if (ec) throw UsageError("cannot create output directory " + cfg.out.string() + ": " + ec.message());
}

void write_manifest(const RunConfig& cfg) {
    std::ofstream out(cfg.out / "manifest.json", std::ios::binary);
    if (!out) throw DataError("cannot write " + (cfg.out / "manifest.json").string());
    out << manifest_json(cfg);
}

GlmFamily glm_of(Family f) { return f == Family::Gaussian ? GlmFamily::gaussian() : GlmFamily::binomial(); }

double timed(const RunConfig& cfg, double seconds) {
    return cfg.timing ? seconds : std::numeric_limits<double>::quiet_NaN();
}

Dataset load_dataset(const RunConfig& cfg) {
    if (cfg.data.empty()) throw UsageError("no input data given (--data)");
    const Table t = read_csv(cfg.data, cfg.header);
    const std::string response =
        cfg.response.empty() ? t.names.back() : cfg.response;
    return split_response(t, response, glm_of(cfg.family));
}

std::uint64_t method_seed(std::uint64_t master, Method m, std::string_view context,
                          std::initializer_list<std::uint64_t> coords) {
    return derive_seed(master, std::string("method:") + std::string(to_string(m)) + ":" + std::string(context), coords);
}

std::string join_names(const ActiveSet& set, const std::vector<std::string>& names) {
    std::string out;
    for (std::size_t k = 0; k < set.size(); ++k) {
        if (k) out += ';';
        out += names[static_cast<std::size_t>(set[k])];
    }
    return out;
}

void write_summary_csv(const fs::path& path, const std::vector<MethodSummary>& summaries) {
    CsvWriter w(path);
    w.header({"scenario_id", "method", "power_mean", "power_se", "fdr_mean", "fdr_se", "size_mean", "size_se",
              "misclass_mean", "misclass_se", "seconds_mean", "seconds_se", "replicates", "failures"});
    for (const auto& s : summaries) {
        w.field(s.scenario).field(s.method);
        for (const MeanSe* m : {&s.power, &s.fdr, &s.size, &s.misclass, &s.seconds}) w.field(m->mean).field(m->se);
        w.field(static_cast<long long>(s.replicates)).field(static_cast<long long>(s.failures));
        w.end_row();
    }
}

void write_matrix_csv(const fs::path& path, const Matrix& X, const ResponseVector& y) {
    CsvWriter w(path);
    std::vector<std::string> cols;
    for (Index j = 0; j < X.cols(); ++j) cols.push_back("x" + std::to_string(j));
    cols.push_back("y");
    w.header(cols);
    for (Index i = 0; i < X.rows(); ++i) {
        for (Index j = 0; j < X.cols(); ++j) w.field(X(i, j));
        w.field(y[i]);
        w.end_row();
    }
}

}  // namespace

// -------------------------------------------------------------------- select

SelectOutput run_select(const RunConfig& cfg) {
    if (cfg.methods.empty()) throw UsageError("no selection methods requested");
    Dataset d = load_dataset(cfg);
    DesignMatrix X = standardize(d.predictors);
    X.set_names(d.predictor_names);
    const ResponseVector y = prepare_response(d.response);
    check_pair(X, y);
    if (y.family().is_binomial() && !y.has_both_classes()) throw DataError("binomial response has a single class");
    for (Method m : cfg.methods)
        if (m == Method::CovTest && y.family().is_binomial())
            throw UsageError("covariance test is not implemented for the binomial family");

    SelectOutput out;
    out.predictor_names = d.predictor_names;
    out.design = X;
    out.results.resize(cfg.methods.size());
    parallel_for(cfg.methods.size(), cfg.threads, [&](std::size_t k) {
        const Method m = cfg.methods[k];
        out.results[k] = run_selector(m, X, y, cfg.selector, method_seed(cfg.seed, m, "select", {}));
    });
    return out;
}

// ------------------------------------------------------------------ simulate

SimulateOutput run_simulate(const RunConfig& cfg) {
    if (cfg.methods.empty()) throw UsageError("no selection methods requested");
    const auto scenarios = cfg.scenarios.expand();
    const auto reps = static_cast<std::size_t>(cfg.scenarios.replicates);
    const std::size_t nm = cfg.methods.size();

    for (const auto& sc : scenarios)
        if (sc.effects.family.is_binomial())
            for (Method m : cfg.methods)
                if (m == Method::CovTest)
                    spdlog::warn("{}: covariance test is not implemented for the binomial family; cells marked",
                                 sc.id);

    SimulateOutput out;
    out.records.resize(scenarios.size() * reps * nm);
    std::mutex log_mutex;
    std::atomic<std::size_t> done{0};
    const std::size_t total = scenarios.size() * reps;

    parallel_for(total, cfg.threads, [&](std::size_t task) {
        const std::size_t si = task / reps;
        const std::size_t r = task % reps;
        const sim::Scenario& sc = scenarios[si];
        auto record_at = [&](std::size_t k) -> ReplicateRecord& { return out.records[task * nm + k]; };
        for (std::size_t k = 0; k < nm; ++k) {
            auto& rec = record_at(k);
            rec.scenario = sc.id;
            rec.replicate = r;
            rec.method = std::string(to_string(cfg.methods[k]));
        }

        sim::SimulatedData data;
        DesignMatrix X;
        ResponseVector y;
        try {
            data = sim::simulate(sc, derive_seed(cfg.seed, "data:" + sc.id, {r}));
            X = standardize(data.raw_predictors);
            y = prepare_response(data.response);
            if (y.family().is_binomial() && !y.has_both_classes())
                throw DataError("simulated binomial response has a single class");
        } catch (const std::exception& e) {
            for (std::size_t k = 0; k < nm; ++k) {
                record_at(k).ok = false;
                record_at(k).error = std::string("data generation: ") + e.what();
            }
            std::lock_guard lock(log_mutex);
            spdlog::warn("{} replicate {}: data generation failed: {}", sc.id, r, e.what());
            return;
        }

        for (std::size_t k = 0; k < nm; ++k) {
            const Method m = cfg.methods[k];
            auto& rec = record_at(k);
            if (m == Method::CovTest && y.family().is_binomial()) {
                rec.ok = false;
                rec.error = "not-implemented";
                continue;
            }
            try {
                SelectorConfig sel = cfg.selector;
                if (!sel.sigma2 && y.family().is_gaussian()) sel.sigma2 = data.truth.sigma2;
                const SelectionResult res = run_selector(m, X, y, sel, method_seed(cfg.seed, m, sc.id, {r}));
                rec.lambda = res.lambda.value_or(std::numeric_limits<double>::quiet_NaN());
                rec.score = score_selection(res.selected, data.truth.effects.indices);
                rec.seconds = timed(cfg, res.cpu_seconds);
                rec.truncated = res.truncated;
            } catch (const std::exception& e) {
                rec.ok = false;
                rec.error = e.what();
                std::lock_guard lock(log_mutex);
                spdlog::warn("{} replicate {} method {}: {}", sc.id, r, rec.method, e.what());
            }
        }
        const std::size_t finished = ++done;
        if (finished % std::max<std::size_t>(1, total / 10) == 0 || finished == total) {
            std::lock_guard lock(log_mutex);
            spdlog::info("simulate: {}/{} replicates done", finished, total);
        }
    });

    out.summaries = aggregate(out.records);
    for (const auto& s : out.summaries) {
        if (s.failures > 0)
            spdlog::warn("{} / {}: {} of {} replicates failed and are excluded", s.scenario, s.method, s.failures,
                         s.failures + s.replicates);
        if (s.replicates == 1) spdlog::warn("{} / {}: single replicate, standard errors are NA", s.scenario, s.method);
    }
    return out;
}

// -------------------------------------------------------------- sphere study

SphereStudyOutput run_sphere_study(const RunConfig& cfg) {
    const SphereStudyConfig& sc = cfg.sphere;
    if (sc.draws < 1) throw UsageError("sphere study needs at least one draw");
    SphereStudyOutput out;
    out.bound = sim::sphere_bound(sc.n, sc.p);
    out.regimes.resize(sc.s.size());

    parallel_for(sc.s.size(), cfg.threads, [&](std::size_t k) {
        SphereRegime& reg = out.regimes[k];
        reg.s = sc.s[k];
        const auto s_u = static_cast<std::uint64_t>(reg.s);
        sim::Scenario scen;
        scen.covariance.structure = sim::Structure::Independent;
        scen.covariance.p = sc.p;
        scen.n = sc.n;
        scen.effects.s = reg.s;
        scen.effects.family = GlmFamily::gaussian();
        scen.snr = sc.snr;
        scen.id = "sphere-s" + std::to_string(reg.s);
        const sim::SimulatedData data = sim::simulate(scen, derive_seed(cfg.seed, "sphere-data", {s_u}));
        const DesignMatrix X = standardize(data.raw_predictors);

        auto normalized = [](Vector v) {
            v.array() -= v.mean();
            const double norm = v.norm();
            if (!(norm > 0.0)) throw NumericalError("sphere study: degenerate response");
            return Vector(v / norm);
        };
        const Vector y = normalized(data.response.values());
        const Index n = sc.n;
        const int chunk = 250;
        Matrix batch(n, chunk);

        Rng perm_rng = make_rng(cfg.seed, "sphere-permutations", {s_u});
        Rng unif_rng = make_rng(cfg.seed, "sphere-uniform", {s_u});
        for (int start = 0; start < sc.draws; start += chunk) {
            const int m = std::min(chunk, sc.draws - start);
            for (int c = 0; c < m; ++c) {
                const Permutation pi = sample_permutation(n, perm_rng);
                for (Index i = 0; i < n; ++i) batch(i, c) = y[pi[i]];
            }
            const Vector lp = lambda_max_batch(X, batch.leftCols(m), GlmFamily::gaussian());
            for (int c = 0; c < m; ++c) {
                reg.permuted.push_back(lp[c]);
                batch.col(c) = normalized(sim::sample_unit_sphere(n, unif_rng));
            }
            const Vector lu = lambda_max_batch(X, batch.leftCols(m), GlmFamily::gaussian());
            for (int c = 0; c < m; ++c) reg.uniform.push_back(lu[c]);
        }
        reg.permuted_median = median(reg.permuted);
        reg.uniform_median = median(reg.uniform);
        reg.ks_distance = ks_two_sample(reg.permuted, reg.uniform);
        const double a = static_cast<double>(reg.permuted.size());
        const double b = static_cast<double>(reg.uniform.size());
        reg.ks_pvalue = ks_pvalue(reg.ks_distance, a * b / (a + b));
    });
    return out;
}

// ----------------------------------------------------------------- real data

RealDataOutput run_realdata(const RunConfig& cfg) {
    if (cfg.methods.empty()) throw UsageError("no selection methods requested");
    if (cfg.splits < 1) throw UsageError("number of splits must be at least 1");
    const Dataset d = load_dataset(cfg);
    const GlmFamily fam = d.response.family();
    for (Method m : cfg.methods)
        if (m == Method::CovTest && fam.is_binomial())
            throw UsageError("covariance test is not implemented for the binomial family");

    const auto splits = static_cast<std::size_t>(cfg.splits);
    const std::size_t nm = cfg.methods.size();
    RealDataOutput out;
    out.family = cfg.family;
    out.records.resize(splits * nm);

    parallel_for(splits, cfg.threads, [&](std::size_t s) {
        Rng rng = make_rng(cfg.seed, "split", {s});
        TrainTestSplit tt = train_test_split(d.predictors, d.response, cfg.split_fraction, rng);
        for (std::size_t k = 0; k < nm; ++k) {
            const Method m = cfg.methods[k];
            const SelectionResult res =
                run_selector(m, tt.train_X, tt.train_y, cfg.selector, method_seed(cfg.seed, m, "realdata", {s}));
            RealDataRecord& rec = out.records[s * nm + k];
            rec.split = static_cast<int>(s) + 1;
            rec.method = m;
            rec.lambda = res.lambda.value_or(std::numeric_limits<double>::quiet_NaN());
            rec.model_size = static_cast<Index>(res.selected.size());
            LassoFit fit;
            if (res.fit) {
                fit = *res.fit;
            } else {
                fit.coefficients = Vector::Zero(tt.train_X.p());
                if (fam.is_binomial()) {
                    const double pbar = tt.train_y.mean();
                    fit.intercept = std::log(pbar / (1.0 - pbar));
                }
            }
            rec.test_error = fam.is_binomial() ? misclassification(fit, tt.test_X, tt.test_y)
                                               : test_mse(fit, tt.test_X, tt.test_y, tt.train_offset);
            rec.seconds = timed(cfg, res.cpu_seconds);
        }
    });

    std::vector<ReplicateRecord> reps;
    for (const auto& r : out.records) {
        ReplicateRecord rr;
        rr.scenario = "realdata";
        rr.replicate = static_cast<std::size_t>(r.split);
        rr.method = std::string(to_string(r.method));
        rr.score.model_size = r.model_size;
        rr.misclass = r.test_error;
        rr.seconds = r.seconds;
        reps.push_back(std::move(rr));
    }
    out.summaries = aggregate(reps);
    for (auto& s : out.summaries) s.power = mean_se({});
    return out;
}

// ------------------------------------------------------------------ dispatch

namespace {

void emit_select(const RunConfig& cfg, const SelectOutput& so) {
    const auto& names = so.predictor_names;
    CsvWriter w(cfg.out / "selection.csv");
    w.header({"method", "lambda", "model_size", "cpu_seconds", "truncated", "selected"});
    for (const auto& r : so.results) {
        w.field(to_string(r.method))
            .field(r.lambda.value_or(std::numeric_limits<double>::quiet_NaN()))
            .field(static_cast<long long>(r.selected.size()))
            .field(timed(cfg, r.cpu_seconds))
            .field(r.truncated ? "true" : "false")
            .field(join_names(r.selected, names));
        w.end_row();
    }
    for (const auto& r : so.results) {
        const std::string tag(to_string(r.method));
        CsvWriter v(cfg.out / ("selected_" + tag + ".csv"));
        v.header({"index", "name", "coefficient"});
        for (Index j : r.selected) {
            v.field(j).field(names[static_cast<std::size_t>(j)]).field(r.fit ? r.fit->coefficients[j] : 0.0);
            v.end_row();
        }
    }
}

void emit_simulate(const RunConfig& cfg, const SimulateOutput& so) {
    CsvWriter w(cfg.out / "replicates.csv");
    w.header({"scenario_id", "replicate", "method", "status", "lambda", "model_size", "true_positives",
              "false_positives", "power", "fdr", "misclass", "seconds", "truncated", "error"});
    for (const auto& r : so.records) {
        w.field(r.scenario).field(static_cast<long long>(r.replicate + 1)).field(r.method);
        w.field(r.ok ? "ok" : "failed");
        if (r.ok) {
            w.field(r.lambda).field(r.score.model_size).field(r.score.true_positives).field(r.score.false_positives);
            w.field(r.score.power.value_or(std::numeric_limits<double>::quiet_NaN())).field(r.score.fdr);
        } else {
            for (int k = 0; k < 6; ++k) w.field("NA");
        }
        w.field(r.misclass).field(r.seconds).field(r.truncated ? "true" : "false");
        std::string err = r.error;
        for (char& c : err)
            if (c == ',' || c == '\n') c = ';';
        w.field(err);
        w.end_row();
    }
    write_summary_csv(cfg.out / "summary.csv", so.summaries);

    if (cfg.dump_data) {
        const fs::path dir = cfg.out / "data";
        fs::create_directories(dir);
        for (const auto& sc : cfg.scenarios.expand())
            for (int r = 0; r < cfg.scenarios.replicates; ++r) {
                const auto data = sim::simulate(sc, derive_seed(cfg.seed, "data:" + sc.id, {static_cast<std::uint64_t>(r)}));
                write_matrix_csv(dir / (sc.id + "-r" + std::to_string(r + 1) + ".csv"), data.raw_predictors,
                                 data.response);
            }
    }
}

void emit_sphere(const RunConfig& cfg, const SphereStudyOutput& so) {
    CsvWriter w(cfg.out / "sphere_samples.csv");
    w.header({"s", "draw", "lambda0_permuted", "lambda0_uniform"});
    for (const auto& reg : so.regimes)
        for (std::size_t k = 0; k < reg.permuted.size(); ++k) {
            w.field(reg.s).field(static_cast<long long>(k + 1)).field(reg.permuted[k]).field(reg.uniform[k]);
            w.end_row();
        }
    CsvWriter s(cfg.out / "sphere_summary.csv");
    s.header({"s", "n", "p", "draws", "median_permuted", "median_uniform", "bound_exact", "bound_approx",
              "ks_distance", "ks_pvalue"});
    for (const auto& reg : so.regimes) {
        s.field(reg.s).field(cfg.sphere.n).field(cfg.sphere.p).field(cfg.sphere.draws);
        s.field(reg.permuted_median).field(reg.uniform_median).field(so.bound.exact).field(so.bound.approximation);
        s.field(reg.ks_distance).field(reg.ks_pvalue);
        s.end_row();
    }
}

void emit_realdata(const RunConfig& cfg, const RealDataOutput& ro) {
    const bool binomial = ro.family == Family::Binomial;
    CsvWriter w(cfg.out / "splits.csv");
    w.header({"split", "method", "lambda", "model_size", binomial ? "percent_misclassified" : "test_mse", "cpu_seconds"});
    for (const auto& r : ro.records) {
        w.field(r.split).field(to_string(r.method)).field(r.lambda).field(r.model_size).field(r.test_error).field(r.seconds);
        w.end_row();
    }
    CsvWriter t(cfg.out / "table.csv");
    t.header({"Method", "Model Size", binomial ? "Percent Misclassified" : "Test MSE", "CPU seconds"});
    for (const auto& s : ro.summaries) {
        t.field(s.method).field(format_mean_se(s.size)).field(format_mean_se(s.misclass)).field(format_mean_se(s.seconds));
        t.end_row();
    }
    write_summary_csv(cfg.out / "summary.csv", ro.summaries);
}

}  // namespace

void run_command(const RunConfig& cfg) {
    if (cfg.threads < 1) throw UsageError("thread budget must be at least 1");
    prepare_out_dir(cfg);
    write_manifest(cfg);
    switch (cfg.command) {
        case Command::Select: {
            const auto so = run_select(cfg);
            emit_select(cfg, so);
            for (const auto& r : so.results)
                write_diagnostics_csv(cfg.out / ("diagnostics_" + std::string(to_string(r.method)) + ".csv"), r,
                                      so.design);
            break;
        }
        case Command::Simulate: emit_simulate(cfg, run_simulate(cfg)); break;
        case Command::SphereStudy: emit_sphere(cfg, run_sphere_study(cfg)); break;
        case Command::RealData: emit_realdata(cfg, run_realdata(cfg)); break;
    }
}

}  // namespace permsel
