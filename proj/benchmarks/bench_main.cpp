#include <benchmark/benchmark.h>
#include <spdlog/spdlog.h>

#include "permsel/rng.hpp"
#include "permsel/selectors.hpp"
#include "permsel/simgen.hpp"
#include "permsel/solver.hpp"

namespace {

using namespace permsel;

struct Data {
    DesignMatrix X;
    ResponseVector y;
};

Data make_data(Index n, Index p, Family family) {
    spdlog::set_level(spdlog::level::err);
    sim::Scenario sc;
    sc.covariance.p = p;
    sc.n = n;
    sc.effects.s = 10;
    sc.effects.family = GlmFamily{family};
    const sim::SimulatedData d = sim::simulate(sc, derive_seed(1, "bench", {static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(p)}));
    return {standardize(d.raw_predictors), prepare_response(d.response)};
}

void BM_LambdaMaxBatch(benchmark::State& state) {
    const Data d = make_data(state.range(0), state.range(1), Family::Gaussian);
    Rng rng = make_rng(2, "bench-perm");
    Matrix ys(d.y.size(), 100);
    for (Index k = 0; k < 100; ++k) ys.col(k) = permute_response(d.y, sample_permutation(d.y.size(), rng)).values();
    for (auto _ : state) benchmark::DoNotOptimize(lambda_max_batch(d.X, ys, GlmFamily::gaussian()));
}
BENCHMARK(BM_LambdaMaxBatch)->Args({200, 500})->Args({500, 2000})->Unit(benchmark::kMillisecond);

void BM_FitPathGaussian(benchmark::State& state) {
    const Data d = make_data(state.range(0), state.range(1), Family::Gaussian);
    for (auto _ : state) benchmark::DoNotOptimize(fit_path(d.X, d.y));
}
BENCHMARK(BM_FitPathGaussian)->Args({200, 500})->Args({1000, 500})->Unit(benchmark::kMillisecond);

void BM_FitPathBinomial(benchmark::State& state) {
    const Data d = make_data(state.range(0), state.range(1), Family::Binomial);
    for (auto _ : state) benchmark::DoNotOptimize(fit_path(d.X, d.y));
}
BENCHMARK(BM_FitPathBinomial)->Args({500, 100})->Unit(benchmark::kMillisecond);

void BM_Selector(benchmark::State& state) {
    const Data d = make_data(200, 500, Family::Gaussian);
    const auto method = static_cast<Method>(state.range(0));
    state.SetLabel(std::string(to_string(method)));
    SelectorConfig cfg;
    cfg.sigma2 = 1.0;
    for (auto _ : state) benchmark::DoNotOptimize(run_selector(method, d.X, d.y, cfg, 3));
}
BENCHMARK(BM_Selector)
    ->Arg(static_cast<int>(Method::Permutation))
    ->Arg(static_cast<int>(Method::BIC))
    ->Arg(static_cast<int>(Method::CV))
    ->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
