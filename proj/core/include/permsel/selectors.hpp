#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "permsel/data.hpp"
#include "permsel/lars.hpp"
#include "permsel/rng.hpp"
#include "permsel/solver.hpp"

namespace permsel {

enum class Method { Permutation, BIC, CV, CovTest };

std::string_view to_string(Method m);
Method parse_method(std::string_view name);
std::vector<Method> parse_methods(std::string_view comma_list);

struct PermutationDiagnostics {
    std::vector<double> null_lambdas;   // λ₀ of each permuted response, in draw order
    int permutations = 0;
    std::uint64_t seed = 0;
};

/// Criterion value per fitted grid point (BIC score or CV error).
struct CriterionCurve {
    std::vector<double> lambdas;
    std::vector<Index> df;
    std::vector<double> values;
    std::vector<double> neg2loglik;     // BIC only
};

struct CvDiagnostics {
    CriterionCurve curve;
    std::vector<int> folds;             // fold id per observation
    int refolds = 0;
};

struct CovTestDiagnostics {
    CovTestPValues pvalues;
    Index r_star = 0;                   // 1-based; 0 when no p-value reaches α
};

using Diagnostics = std::variant<std::monostate, PermutationDiagnostics, CriterionCurve, CvDiagnostics,
                                 CovTestDiagnostics>;

struct SelectionResult {
    Method method = Method::Permutation;
    std::optional<double> lambda;       // absent for the empty covariance-test model
    ActiveSet selected;
    std::optional<LassoFit> fit;        // fit at the chosen λ on the full data
    Diagnostics diagnostics;
    double cpu_seconds = 0.0;
    bool truncated = false;
};

/// Median; even counts average the two central order statistics.
double median(std::vector<double> values);

/// Index of the smallest value; ties resolve to the earliest (largest λ) entry.
std::size_t argmin_first(const std::vector<double>& values);

/// −2ℓ at the fitted linear predictor, constants dropped. Gaussian: RSS/σ²
/// when σ² is known, otherwise n·log(RSS/n) (σ² profiled out). Binomial: deviance.
double bic_neg2loglik(const ResponseVector& y, const Vector& eta, std::optional<double> sigma2 = std::nullopt);

/// −2ℓ + df·log n.
inline double bic_criterion(double neg2loglik, Index df, Index n) {
    return neg2loglik + static_cast<double>(df) * std::log(static_cast<double>(n));
}

/// λ̂ = median of λ₀ over `permutations` uniformly drawn permutations of y,
/// followed by a single fit at λ̂.
SelectionResult select_permutation(const DesignMatrix& X, const ResponseVector& y, int permutations,
                                   std::uint64_t seed, const SolverOptions& solver = {});

SelectionResult select_bic(const LassoPath& path, const DesignMatrix& X, const ResponseVector& y,
                           std::optional<double> sigma2 = std::nullopt);

enum class CvLoss { Default, SquaredError, Deviance, Misclassification };

/// Fold id per observation: a random partition into K groups of size ⌊n/K⌋ or ⌈n/K⌉.
std::vector<int> assign_folds(Index n, int K, Rng& rng);

SelectionResult select_cv(const DesignMatrix& X, const ResponseVector& y, int K, const PathOptions& path_opts,
                          std::uint64_t seed, CvLoss loss = CvLoss::Default);

/// r* = max{r : p_r ≤ α}; λ_CT is the knot of the r*-th addition and the
/// selected set is the active set right after it. No p-value ≤ α selects ∅.
SelectionResult select_covtest(const CovTestPValues& pvalues, const LarsPath& path, double alpha);

struct SelectorConfig {
    int permutations = 100;
    int folds = 10;
    double alpha = 0.05;
    PathOptions path{};
    LarsOptions lars{};
    CvLoss cv_loss = CvLoss::Default;
    std::optional<double> sigma2;       // known error variance (covariance test, Gaussian BIC)
};

/// Runs one selector end to end (including any path it needs) and records
/// the thread CPU time it used. `seed` feeds the method's own random stream.
SelectionResult run_selector(Method method, const DesignMatrix& X, const ResponseVector& y, const SelectorConfig& cfg,
                             std::uint64_t seed);

/// Writes the method's diagnostics as CSV (null λ₀ samples, BIC or CV curve, p-values).
void write_diagnostics_csv(const std::filesystem::path& path, const SelectionResult& result, const DesignMatrix& X);

}  // namespace permsel
