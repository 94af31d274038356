#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "permsel/evaluation.hpp"
#include "permsel/selectors.hpp"
#include "permsel/simgen.hpp"

namespace permsel {

enum class Command { Select, Simulate, SphereStudy, RealData };

std::string_view to_string(Command c);
Command parse_command(std::string_view name);

/// Axes of a factorial simulation sweep. Every combination of the listed
/// values is one scenario.
struct ScenarioGrid {
    std::vector<sim::Structure> structures{sim::Structure::Independent, sim::Structure::Block,
                                           sim::Structure::AR1Fast, sim::Structure::AR1Slow};
    std::vector<Index> n{200, 1000};
    Index p = 500;
    std::vector<Index> s{1, 5, 10, 20};
    std::vector<double> snr{0.5, 2.0};        // Gaussian signal levels
    std::vector<double> odds{1.15, 1.35};     // Binomial signal levels (odds ratios)
    Family family = Family::Gaussian;
    sim::EffectReading reading = sim::EffectReading::OddsScale;
    sim::SignPolicy signs = sim::SignPolicy::Positive;
    int replicates = 100;

    std::vector<sim::Scenario> expand() const;
};

struct SphereStudyConfig {
    Index n = 100;
    Index p = 10000;
    std::vector<Index> s{10, 1000};
    double snr = 2.0;
    int draws = 1000;
};

struct RunConfig {
    Command command = Command::Select;
    std::filesystem::path data;
    std::string response;                     // name or 0-based column number; empty = last column
    bool header = true;
    std::filesystem::path out = "permsel-out";
    std::vector<Method> methods{Method::Permutation, Method::BIC, Method::CV, Method::CovTest};
    Family family = Family::Gaussian;
    SelectorConfig selector{};
    std::uint64_t seed = 20240101;
    int threads = 1;
    double split_fraction = 2.0 / 3.0;
    int splits = 10;
    bool timing = true;                       // false writes NA instead of CPU seconds
    bool dump_data = false;                   // simulate: write each replicate's X and y
    ScenarioGrid scenarios{};
    SphereStudyConfig sphere{};
};

/// Merges a JSON configuration into `cfg`. Unknown keys are usage errors.
void load_config_file(const std::filesystem::path& path, RunConfig& cfg);
void load_config_text(std::string_view json_text, RunConfig& cfg);
/// Reads a scenario file: the grid axes, plus optionally "seed".
void load_scenario_file(const std::filesystem::path& path, RunConfig& cfg);

/// The fully resolved configuration with seed and software version, as
/// stable, pretty-printed JSON.
std::string manifest_json(const RunConfig& cfg);

std::string_view software_version();

/// Runs body(i) for i in [0, count) on up to `threads` workers. Results must
/// be written to index-addressed slots; the first exception by index is
/// rethrown after all workers finish.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body);

struct SelectOutput {
    std::vector<SelectionResult> results;
    std::vector<std::string> predictor_names;
    DesignMatrix design;
};

struct SimulateOutput {
    std::vector<ReplicateRecord> records;
    std::vector<MethodSummary> summaries;
};

struct SphereRegime {
    Index s = 0;
    std::vector<double> permuted;             // λ₀ of permuted normalized responses
    std::vector<double> uniform;              // λ₀ of uniform sphere vectors
    double permuted_median = 0.0;
    double uniform_median = 0.0;
    double ks_distance = 0.0;
    double ks_pvalue = 0.0;
};

struct SphereStudyOutput {
    sim::SphereBound bound;
    std::vector<SphereRegime> regimes;
};

struct RealDataRecord {
    int split = 0;
    Method method = Method::Permutation;
    double lambda = 0.0;
    Index model_size = 0;
    double test_error = 0.0;                  // percent misclassified (Binomial) or test MSE (Gaussian)
    double seconds = 0.0;
};

struct RealDataOutput {
    Family family = Family::Gaussian;
    std::vector<RealDataRecord> records;
    std::vector<MethodSummary> summaries;     // size, misclass (or MSE), seconds
};

SelectOutput run_select(const RunConfig& cfg);
SimulateOutput run_simulate(const RunConfig& cfg);
SphereStudyOutput run_sphere_study(const RunConfig& cfg);
RealDataOutput run_realdata(const RunConfig& cfg);

/// Dispatches on cfg.command and writes all outputs under cfg.out.
void run_command(const RunConfig& cfg);

/// "mean (SE)" with two decimals; "NA" for missing parts.
std::string format_mean_se(const MeanSe& m);

}  // namespace permsel
