#pragma once

#include <optional>
#include <string>
#include <vector>

#include "permsel/data.hpp"

namespace permsel {

// Penalties live on the unnormalized objective scale:
//   Gaussian:  minimize  ½‖y − Xβ‖² + λ‖β‖₁
//   Binomial:  maximize  Σᵢ [yᵢηᵢ − log(1 + e^ηᵢ)] − λ‖β‖₁,  η = β₀ + Xβ
// With unit-norm columns, glmnet's per-observation penalty is λ/√n.

/// Sorted indices of the nonzero coefficients.
using ActiveSet = std::vector<Index>;

struct SolverOptions {
    double tolerance = 1e-7;          // max absolute coefficient change per sweep
    int max_sweeps = 10000;
    double prob_floor = 1e-5;         // logistic probabilities clamped to [floor, 1 − floor] for weights
    double zero_threshold = 1e-12;    // |β| below this after convergence is set to exactly 0
    int max_backtracks = 30;
    bool verify_descent = false;      // throw if a Gaussian sweep increases the objective
};

struct LassoFit {
    double lambda = 0.0;
    Vector coefficients;
    double intercept = 0.0;           // Binomial only
    bool converged = false;
    int iterations = 0;               // coordinate-descent sweeps
    std::string diagnostic;

    ActiveSet active_set() const;
    Index df() const;
};

struct LassoPath {
    std::vector<double> grid;         // full requested grid, strictly decreasing
    std::vector<LassoFit> fits;       // fits[k] is at grid[k]; may stop early
    GlmFamily family{};
    bool truncated = false;
    std::string truncation_reason;

    std::size_t size() const { return fits.size(); }
};

struct PathOptions {
    int grid_size = 100;
    double grid_ratio = 1e-3;
    /// Stop once the fraction of null deviance explained exceeds this value.
    /// Values ≥ 1 disable the rule.
    double max_deviance_ratio = 0.999;
    SolverOptions solver{};
};

/// Smallest penalty at which the fit is empty.
/// Gaussian: max_j |x_jᵀy|. Binomial: max_j |x_jᵀ(y − ȳ)|.
double lambda_max(const DesignMatrix& X, const ResponseVector& y);

/// The same quantity for every column of a matrix of responses (one per column).
Vector lambda_max_batch(const DesignMatrix& X, const Matrix& responses, GlmFamily family);

/// Log-spaced grid from lambda0 down to ratio·lambda0.
std::vector<double> lambda_grid(double lambda0, int size, double ratio);

LassoFit fit_at_lambda(const DesignMatrix& X, const ResponseVector& y, double lambda,
                       const LassoFit* warm = nullptr, const SolverOptions& opts = {});

LassoPath fit_path(const DesignMatrix& X, const ResponseVector& y, const PathOptions& opts = {});

/// Fit along a caller-supplied decreasing grid.
LassoPath fit_path_on_grid(const DesignMatrix& X, const ResponseVector& y, std::vector<double> grid,
                           const PathOptions& opts = {});

/// Working log-likelihood. Gaussian: −½‖y − η‖² (normalizing constants dropped).
/// Binomial: Σᵢ [yᵢηᵢ − log(1 + e^ηᵢ)].
double log_likelihood(GlmFamily family, const Vector& y, const Vector& eta);

/// η = β₀ + Xβ for the rows of `rows` (standardized with the fit's record).
Vector linear_predictor(const Matrix& rows, const LassoFit& fit);

/// ∇_β ℓ at (β₀, β): Xᵀ(y − μ(η)).
Vector loglik_gradient(const DesignMatrix& X, const ResponseVector& y, const Vector& beta, double intercept);

/// −ℓ + λ‖β‖₁ (minimization form).
double penalized_objective(const DesignMatrix& X, const ResponseVector& y, const LassoFit& fit);

/// Deviance of the null model: ‖y‖² for Gaussian, intercept-only −2ℓ for Binomial.
double null_deviance(const ResponseVector& y);

struct KktReport {
    double max_active_violation = 0.0;    // max |g_j − λ·sign(β_j)| over active j
    double max_inactive_violation = 0.0;  // max (|g_j| − λ)_+ over inactive j
    double intercept_violation = 0.0;     // |Σ(y − μ)| for Binomial
    bool pass = false;

    double max_violation() const;
};

KktReport kkt_check(const DesignMatrix& X, const ResponseVector& y, const LassoFit& fit, double tol);

/// Soft-thresholding operator S(z, t) = sign(z)·max(|z| − t, 0).
inline double soft_threshold(double z, double t) {
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

}  // namespace permsel
