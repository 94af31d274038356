#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "permsel/data.hpp"
#include "permsel/rng.hpp"
#include "permsel/solver.hpp"

namespace permsel::sim {

/// (A) independent, (B) ρ = 0.5 within residue classes mod 10,
/// (C) AR(1) with base 0.9, (D) AR(1) with base 0.99.
enum class Structure { Independent, Block, AR1Fast, AR1Slow };

std::string_view to_string(Structure s);
/// Accepts A-D or independent/block/ar1fast/ar1slow.
Structure parse_structure(std::string_view name);

struct CovarianceSpec {
    Structure structure = Structure::Independent;
    Index p = 0;
    double block_rho = 0.5;
    int block_period = 10;
    double ar_fast = 0.9;
    double ar_slow = 0.99;

    /// Population covariance σ_ij.
    double entry(Index i, Index j) const;
    /// Σ restricted to `indices` (rows and columns in the given order).
    Matrix submatrix(const std::vector<Index>& indices) const;
    /// Full p×p Σ; intended for small p.
    Matrix full() const;
    /// Analytic lower bound on the smallest eigenvalue of Σ.
    double min_eigenvalue_bound() const;
};

/// n rows drawn iid from N_p(0, Σ): block structure via a shared factor per
/// residue class, AR(1) via the scalar recursion.
Matrix sample_predictors(Index n, const CovarianceSpec& spec, Rng& rng);

/// How Binomial effect sizes are drawn from the signal level.
enum class EffectReading {
    OddsScale,   // exp(β) ~ N(odds, 0.02²), signal given as an odds ratio (e.g. 1.35)
    Literal,     // exp(β) ~ N(μ_β, 0.02²) with μ_β = log(odds)
};

enum class SignPolicy { Positive, Random };

struct EffectsSpec {
    Index s = 0;
    GlmFamily family{};
    double gaussian_low = 0.25;
    double gaussian_high = 1.0;
    double odds = 1.35;            // Binomial signal level as an odds ratio
    double effect_sd = 0.02;
    EffectReading reading = EffectReading::OddsScale;
    SignPolicy signs = SignPolicy::Positive;
};

struct Effects {
    std::vector<Index> indices;    // sorted true-variable indices
    Vector beta;                   // aligned with indices
};

Effects draw_effects(const EffectsSpec& spec, Index p, Rng& rng);

/// σ² = βᵀ Σ_ss β / SNR.
double noise_variance_for_snr(const Vector& beta, const Matrix& sigma_ss, double snr);

/// Columns `indices` of X.
Matrix select_columns(const Matrix& X, const std::vector<Index>& indices);

/// y = X_s β + ε, ε ~ N(0, σ² I).
ResponseVector gen_gaussian_response(const Matrix& Xs, const Vector& beta, double sigma2, Rng& rng);

struct LogisticResponse {
    ResponseVector y;
    double intercept = 0.0;        // μ = −mean(X_s β)
};

/// η_i = μ + x_{i,s}ᵀβ with μ centering the linear predictor; y_i ~ Bernoulli(logistic(η_i)).
LogisticResponse gen_logistic_response(const Matrix& Xs, const Vector& beta, Rng& rng);

/// A standard normal vector scaled to unit norm.
Vector sample_unit_sphere(Index n, Rng& rng);

struct SphereBound {
    double exact = 0.0;            // √(1 − p^(−2/(n−1)))
    double approximation = 0.0;    // √(2 log p / n)
};

SphereBound sphere_bound(Index n, Index p);

/// One fully specified simulation setting.
struct Scenario {
    std::string id;
    CovarianceSpec covariance;
    Index n = 200;
    EffectsSpec effects;
    double snr = 2.0;              // Gaussian only
};

struct ScenarioTruth {
    Effects effects;
    double sigma2 = 0.0;           // Gaussian
    double intercept = 0.0;        // Binomial
};

struct SimulatedData {
    Matrix raw_predictors;
    ResponseVector response;
    ScenarioTruth truth;
};

/// Draws X, β and y for one replicate. Deterministic in `seed`.
SimulatedData simulate(const Scenario& scenario, std::uint64_t seed);

}  // namespace permsel::sim
