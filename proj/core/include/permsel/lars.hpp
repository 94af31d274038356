#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "permsel/data.hpp"
#include "permsel/solver.hpp"

namespace permsel {

enum class LarsEventKind { Add, Drop };

struct LarsEvent {
    double lambda = 0.0;       // knot
    LarsEventKind kind = LarsEventKind::Add;
    Index variable = -1;
    ActiveSet active_after;    // sorted
    Vector coefficients;       // solution at this knot (continuous in λ)
};

/// Exact LASSO knot path (least-angle regression with the lasso modification)
/// for the Gaussian objective ½‖y − Xβ‖² + λ‖β‖₁.
struct LarsPath {
    std::vector<LarsEvent> events;
    /// True when the path was followed all the way down to λ = 0.
    bool complete = false;
    bool truncated = false;
    std::string truncation_reason;
    Vector final_coefficients;     // solution at λ = 0 when complete

    std::size_t size() const { return events.size(); }
    std::vector<double> knots() const;
    /// Positions in `events` of the addition events, in path order.
    std::vector<std::size_t> addition_events() const;
    /// Penalty of the knot following event `e`; nullopt when it was not reached.
    std::optional<double> next_knot(std::size_t e) const;
    /// Solution at the knot following event `e` (or at λ = 0 after the last event).
    std::optional<Vector> next_coefficients(std::size_t e) const;
};

struct LarsOptions {
    int max_steps = 0;               // 0 → no limit beyond 8·min(n, p)
    double min_rcond = 1e-12;        // active Gram reciprocal condition below this truncates
};

LarsPath lars_path(const DesignMatrix& X, const ResponseVector& y, const LarsOptions& opts = {});

/// Lasso on the columns `subset` only, solved on their Gram matrix to high
/// accuracy. Returns coefficients aligned with `subset`.
Vector lasso_on_subset(const DesignMatrix& X, const ResponseVector& y, const ActiveSet& subset, double lambda);

/// Covariance statistic for the addition event at position `e` of path.events:
///   T = (⟨y, Xβ̂(λ_next)⟩ − ⟨y, X_A β̃_A(λ_next)⟩) / σ²
/// with A the active set before the event and β̃_A the lasso refit on A.
/// nullopt when the next knot lies beyond the computed part of the path.
std::optional<double> covariance_statistic(const LarsPath& path, std::size_t e, const ResponseVector& y,
                                           const DesignMatrix& X, double sigma2);

enum class Sigma2Source { Known, Estimated };

struct CovTestEntry {
    std::size_t event = 0;     // position in path.events
    double lambda = 0.0;
    Index variable = -1;
    double statistic = 0.0;
    double p_value = 1.0;
};

struct CovTestPValues {
    std::vector<CovTestEntry> entries;    // aligned with addition events, in order
    double sigma2 = 0.0;
    Sigma2Source source = Sigma2Source::Known;
    bool truncated = false;

    std::size_t size() const { return entries.size(); }
};

/// p_k = exp(−T_k) for every addition event whose statistic is available.
CovTestPValues cov_test_pvalues(const LarsPath& path, const ResponseVector& y, const DesignMatrix& X,
                                double sigma2, Sigma2Source source = Sigma2Source::Known);

/// Residual variance of the least-squares fit, RSS/(n − p − 1); requires n > p + 1.
double estimate_sigma2(const DesignMatrix& X, const ResponseVector& y);

/// CSV with columns event,lambda,variable,statistic,p_value.
void write_pvalues_csv(const std::filesystem::path& path, const CovTestPValues& pv, const DesignMatrix& X);

}  // namespace permsel
