#include "permsel/lars.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <spdlog/spdlog.h>

#include "permsel/csv.hpp"
#include "permsel/errors.hpp"

namespace permsel {

namespace {

// Backend over the design: correlations come from the residual.
struct DesignBackend {
    const Matrix& X;
    const Vector& y;
    std::vector<char> usable;

    Index p() const { return X.cols(); }
    Vector correlations(const Vector& beta) const { return X.transpose() * (y - X * beta); }
    Matrix gram(const std::vector<Index>& A) const {
        Matrix XA(X.rows(), static_cast<Index>(A.size()));
        for (std::size_t k = 0; k < A.size(); ++k) XA.col(static_cast<Index>(k)) = X.col(A[k]);
        return XA.transpose() * XA;
    }
    Vector direction_correlations(const std::vector<Index>& A, const Vector& d) const {
        Vector u = Vector::Zero(X.rows());
        for (std::size_t k = 0; k < A.size(); ++k) u.noalias() += d[static_cast<Index>(k)] * X.col(A[k]);
        return X.transpose() * u;
    }
};

// Backend over a precomputed Gram matrix G = XᵀX and b = Xᵀy.
struct GramBackend {
    const Matrix& G;
    const Vector& b;
    std::vector<char> usable;

    Index p() const { return G.cols(); }
    Vector correlations(const Vector& beta) const { return b - G * beta; }
    Matrix gram(const std::vector<Index>& A) const {
        const auto k = static_cast<Index>(A.size());
        Matrix out(k, k);
        for (Index r = 0; r < k; ++r)
            for (Index c = 0; c < k; ++c) out(r, c) = G(A[static_cast<std::size_t>(r)], A[static_cast<std::size_t>(c)]);
        return out;
    }
    Vector direction_correlations(const std::vector<Index>& A, const Vector& d) const {
        Vector a = Vector::Zero(G.rows());
        for (std::size_t k = 0; k < A.size(); ++k) a.noalias() += d[static_cast<Index>(k)] * G.col(A[k]);
        return a;
    }
};

ActiveSet sorted(std::vector<Index> v) {
    std::sort(v.begin(), v.end());
    return v;
}

template <class Backend>
LarsPath run_lars(const Backend& B, Index max_active, const LarsOptions& opts) {
    LarsPath path;
    const Index p = B.p();
    Vector beta = Vector::Zero(p);
    Vector c = B.correlations(beta);

    double lambda = 0.0;
    Index first = -1;
    for (Index j = 0; j < p; ++j) {
        if (!B.usable[static_cast<std::size_t>(j)]) continue;
        if (std::abs(c[j]) > lambda) {
            lambda = std::abs(c[j]);
            first = j;
        }
    }
    if (first < 0) {
        path.complete = true;
        path.final_coefficients = beta;
        return path;
    }

    std::vector<Index> A{first};
    std::vector<char> in_active(static_cast<std::size_t>(p), 0);
    in_active[static_cast<std::size_t>(first)] = 1;
    path.events.push_back({lambda, LarsEventKind::Add, first, {first}, beta});

    const int max_steps = opts.max_steps > 0 ? opts.max_steps : static_cast<int>(8 * std::max<Index>(1, std::min(p, max_active)));
    const double lambda0 = lambda;
    const double eps = 1e-12 * lambda0;
    Index just_dropped = -1;

    for (int step = 0;; ++step) {
        if (step >= max_steps) {
            path.truncated = true;
            path.truncation_reason = "step limit " + std::to_string(max_steps) + " reached";
            return path;
        }
        const auto k = static_cast<Index>(A.size());
        const Matrix GA = B.gram(A);
        Eigen::LLT<Matrix> llt(GA);
        if (llt.info() != Eigen::Success || llt.rcond() < opts.min_rcond) {
            path.truncated = true;
            path.truncation_reason = "active-set Gram matrix is numerically singular at " + std::to_string(k) +
                                     " active variables";
            return path;
        }
        Vector s(k);
        for (Index i = 0; i < k; ++i) {
            const Index j = A[static_cast<std::size_t>(i)];
            const double bj = beta[j];
            s[i] = bj != 0.0 ? (bj > 0 ? 1.0 : -1.0) : (c[j] >= 0 ? 1.0 : -1.0);
        }
        const Vector d = llt.solve(s);
        const Vector a = B.direction_correlations(A, d);

        double gamma = lambda;   // reaching λ = 0
        Index who = -1;
        LarsEventKind kind = LarsEventKind::Add;
        if (k < max_active) {
            for (Index j = 0; j < p; ++j) {
                if (in_active[static_cast<std::size_t>(j)] || !B.usable[static_cast<std::size_t>(j)] || j == just_dropped) continue;
                const double g1 = (1.0 - a[j]) > 0.0 ? (lambda - c[j]) / (1.0 - a[j]) : std::numeric_limits<double>::infinity();
                const double g2 = (1.0 + a[j]) > 0.0 ? (lambda + c[j]) / (1.0 + a[j]) : std::numeric_limits<double>::infinity();
                for (double g : {g1, g2}) {
                    if (g > eps && g < gamma) {
                        gamma = g;
                        who = j;
                        kind = LarsEventKind::Add;
                    }
                }
            }
        }
        for (Index i = 0; i < k; ++i) {
            const Index j = A[static_cast<std::size_t>(i)];
            if (d[i] == 0.0 || beta[j] == 0.0) continue;
            const double g = -beta[j] / d[i];
            if (g > eps && g < gamma) {
                gamma = g;
                who = j;
                kind = LarsEventKind::Drop;
            }
        }

        for (Index i = 0; i < k; ++i) beta[A[static_cast<std::size_t>(i)]] += gamma * d[i];
        if (who < 0 || gamma >= lambda * (1.0 - 1e-12)) {
            // No change before λ reaches 0: the final segment ends at the
            // least-squares solution on the active set.
            path.complete = true;
            path.final_coefficients = beta;
            return path;
        }
        lambda -= gamma;
        just_dropped = -1;
        if (kind == LarsEventKind::Drop) {
            beta[who] = 0.0;
            A.erase(std::find(A.begin(), A.end(), who));
            in_active[static_cast<std::size_t>(who)] = 0;
            just_dropped = who;
        } else {
            A.push_back(who);
            in_active[static_cast<std::size_t>(who)] = 1;
        }
        c = B.correlations(beta);
        path.events.push_back({lambda, kind, who, sorted(A), beta});
        if (A.empty()) {
            path.truncated = true;
            path.truncation_reason = "active set emptied";
            return path;
        }
    }
}

}  // namespace

std::vector<double> LarsPath::knots() const {
    std::vector<double> k;
    k.reserve(events.size());
    for (const auto& e : events) k.push_back(e.lambda);
    return k;
}

std::vector<std::size_t> LarsPath::addition_events() const {
    std::vector<std::size_t> out;
    for (std::size_t e = 0; e < events.size(); ++e)
        if (events[e].kind == LarsEventKind::Add) out.push_back(e);
    return out;
}

std::optional<double> LarsPath::next_knot(std::size_t e) const {
    if (e + 1 < events.size()) return events[e + 1].lambda;
    if (e + 1 == events.size() && complete) return 0.0;
    return std::nullopt;
}

std::optional<Vector> LarsPath::next_coefficients(std::size_t e) const {
    if (e + 1 < events.size()) return events[e + 1].coefficients;
    if (e + 1 == events.size() && complete) return final_coefficients;
    return std::nullopt;
}

LarsPath lars_path(const DesignMatrix& X, const ResponseVector& y, const LarsOptions& opts) {
    if (!y.family().is_gaussian()) throw UsageError("lars_path: the knot path is implemented for the Gaussian family only");
    check_pair(X, y);
    std::vector<char> usable(static_cast<std::size_t>(X.p()));
    for (Index j = 0; j < X.p(); ++j) usable[static_cast<std::size_t>(j)] = !X.zero_variance(j);
    DesignBackend backend{X.values(), y.values(), std::move(usable)};
    // Centered columns span at most n − 1 dimensions.
    LarsPath path = run_lars(backend, std::min(X.p(), X.n() - 1), opts);
    if (path.truncated) spdlog::info("lars_path: {} after {} events", path.truncation_reason, path.events.size());
    return path;
}

Vector lasso_on_subset(const DesignMatrix& X, const ResponseVector& y, const ActiveSet& subset, double lambda) {
    const auto k = static_cast<Index>(subset.size());
    if (k == 0) return Vector{};
    Matrix XA(X.n(), k);
    for (Index i = 0; i < k; ++i) XA.col(i) = X.col(subset[static_cast<std::size_t>(i)]);
    const Matrix G = XA.transpose() * XA;
    const Vector b = XA.transpose() * y.values();
    GramBackend backend{G, b, std::vector<char>(static_cast<std::size_t>(k), 1)};
    const LarsPath sub = run_lars(backend, k, LarsOptions{});

    // The solution is piecewise linear in λ between knots.
    if (sub.events.empty() || lambda >= sub.events.front().lambda) return Vector::Zero(k);
    for (std::size_t e = 0; e < sub.events.size(); ++e) {
        const auto lo = sub.next_knot(e);
        const auto lo_beta = sub.next_coefficients(e);
        if (!lo || !lo_beta) break;
        if (lambda >= *lo) {
            const double hi = sub.events[e].lambda;
            const double t = hi > *lo ? (hi - lambda) / (hi - *lo) : 1.0;
            return sub.events[e].coefficients + t * (*lo_beta - sub.events[e].coefficients);
        }
    }
    throw NumericalError("lasso_on_subset: refit path did not reach lambda=" + std::to_string(lambda));
}

namespace {

// The segment ending at knot e moves along the active set A of event e−1.
// Restricted to A, the lasso solution below λ_e keeps that direction until a
// coefficient reaches zero, so it is a linear extrapolation whenever no sign
// changes before `lambda`.
std::optional<Vector> continue_on_subset(const LarsPath& path, std::size_t e, const ActiveSet& A, double lambda) {
    const LarsEvent& prev = path.events[e - 1];
    const LarsEvent& cur = path.events[e];
    const double span = prev.lambda - cur.lambda;
    if (!(span > 1e-10 * prev.lambda)) return std::nullopt;
    const double step = cur.lambda - lambda;
    Vector out(static_cast<Index>(A.size()));
    for (std::size_t k = 0; k < A.size(); ++k) {
        const double b = cur.coefficients[A[k]];
        const double slope = (b - prev.coefficients[A[k]]) / span;
        const double next = b + step * slope;
        if (b == 0.0 || (next > 0.0) != (b > 0.0)) return std::nullopt;
        out[static_cast<Index>(k)] = next;
    }
    return out;
}

}  // namespace

std::optional<double> covariance_statistic(const LarsPath& path, std::size_t e, const ResponseVector& y,
                                           const DesignMatrix& X, double sigma2) {
    if (!(sigma2 > 0.0)) throw UsageError("covariance_statistic: sigma2 must be positive");
    if (e >= path.events.size() || path.events[e].kind != LarsEventKind::Add)
        throw UsageError("covariance_statistic: event " + std::to_string(e) + " is not an addition event");
    const auto lambda_next = path.next_knot(e);
    const auto beta_next = path.next_coefficients(e);
    if (!lambda_next || !beta_next) return std::nullopt;

    const double full = y.values().dot(X.values() * *beta_next);
    double reduced = 0.0;
    if (e > 0) {
        const ActiveSet& A = path.events[e - 1].active_after;
        if (!A.empty()) {
            auto fast = continue_on_subset(path, e, A, *lambda_next);
            const Vector bt = fast ? std::move(*fast) : lasso_on_subset(X, y, A, *lambda_next);
            for (std::size_t k = 0; k < A.size(); ++k)
                reduced += bt[static_cast<Index>(k)] * X.col(A[k]).dot(y.values());
        }
    }
    return (full - reduced) / sigma2;
}

CovTestPValues cov_test_pvalues(const LarsPath& path, const ResponseVector& y, const DesignMatrix& X, double sigma2,
                                Sigma2Source source) {
    CovTestPValues out;
    out.sigma2 = sigma2;
    out.source = source;
    out.truncated = path.truncated;
    for (std::size_t e : path.addition_events()) {
        const auto T = covariance_statistic(path, e, y, X, sigma2);
        if (!T) {
            out.truncated = true;
            break;
        }
        CovTestEntry entry;
        entry.event = e;
        entry.lambda = path.events[e].lambda;
        entry.variable = path.events[e].variable;
        entry.statistic = *T;
        entry.p_value = std::clamp(std::exp(-std::max(*T, 0.0)), 0.0, 1.0);
        out.entries.push_back(entry);
    }
    return out;
}

double estimate_sigma2(const DesignMatrix& X, const ResponseVector& y) {
    check_pair(X, y);
    const Index n = X.n();
    const Index p = X.p() - X.zero_variance_count();
    if (n <= p + 1)
        throw UsageError("estimating sigma2 needs n > p + 1 (n=" + std::to_string(n) + ", p=" + std::to_string(p) +
                         "); supply a known error variance instead");
    Eigen::ColPivHouseholderQR<Matrix> qr(X.values());
    const Vector beta = qr.solve(y.values());
    const double rss = (y.values() - X.values() * beta).squaredNorm();
    return rss / static_cast<double>(n - qr.rank() - 1);
}

void write_pvalues_csv(const std::filesystem::path& path, const CovTestPValues& pv, const DesignMatrix& X) {
    CsvWriter w(path);
    w.header({"event", "lambda", "variable", "statistic", "p_value"});
    for (std::size_t k = 0; k < pv.entries.size(); ++k) {
        const auto& e = pv.entries[k];
        w.field(static_cast<long long>(k + 1)).field(e.lambda).field(X.name(e.variable)).field(e.statistic).field(e.p_value);
        w.end_row();
    }
}

}  // namespace permsel
