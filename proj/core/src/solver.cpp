#include "permsel/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <spdlog/spdlog.h>

#include "permsel/errors.hpp"

namespace permsel {

namespace {

double log1pexp(double x) {
    if (x > 35.0) return x;
    if (x < -35.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

/// Shared read-only view of one (X, y) problem.
struct Problem {
    Problem(const DesignMatrix& design, const ResponseVector& response)
        : X(design.values()), y(response.values()), family(response.family()) {
        check_pair(design, response);
        usable.resize(static_cast<std::size_t>(X.cols()));
        norms2.resize(X.cols());
        for (Index j = 0; j < X.cols(); ++j) {
            usable[static_cast<std::size_t>(j)] = !design.zero_variance(j);
            norms2[j] = X.col(j).squaredNorm();
            if (norms2[j] <= 0.0) usable[static_cast<std::size_t>(j)] = false;
        }
        if (family.is_binomial() && !response.has_both_classes())
            throw DataError("binomial response has a single class; the null model is undefined");
    }

    bool is_usable(Index j) const { return usable[static_cast<std::size_t>(j)] != 0; }

    const Matrix& X;
    const Vector& y;
    GlmFamily family;
    Vector norms2;
    std::vector<char> usable;
};

double l1(const Vector& b) { return b.lpNorm<1>(); }

double binomial_loglik(const Vector& y, const Vector& eta) {
    double s = 0.0;
    for (Index i = 0; i < y.size(); ++i) s += y[i] * eta[i] - log1pexp(eta[i]);
    return s;
}

void hard_zero(LassoFit& fit, double threshold) {
    for (Index j = 0; j < fit.coefficients.size(); ++j)
        if (std::abs(fit.coefficients[j]) < threshold) fit.coefficients[j] = 0.0;
}

// Candidate set for the next solve: current nonzeros plus predictors passing
// the sequential strong rule |g_j| ≥ 2λ − λ_prev. Final KKT scans add any
// predictor the rule missed, so the rule only affects speed.
std::vector<Index> strong_candidates(const Problem& P, const Vector& beta, const Vector& grad, double lambda,
                                     double lambda_prev) {
    std::vector<Index> c;
    const double cut = 2.0 * lambda - lambda_prev;
    for (Index j = 0; j < beta.size(); ++j) {
        if (!P.is_usable(j)) continue;
        if (beta[j] != 0.0 || std::abs(grad[j]) >= cut) c.push_back(j);
    }
    return c;
}

// Adds usable j outside `in_set` with |g_j| > λ. Returns how many were added.
std::size_t add_violators(const Problem& P, const Vector& grad, double lambda, std::vector<Index>& cand) {
    std::vector<char> in(static_cast<std::size_t>(grad.size()), 0);
    for (Index j : cand) in[static_cast<std::size_t>(j)] = 1;
    std::size_t added = 0;
    for (Index j = 0; j < grad.size(); ++j) {
        if (in[static_cast<std::size_t>(j)] || !P.is_usable(j)) continue;
        if (std::abs(grad[j]) > lambda) {
            cand.push_back(j);
            ++added;
        }
    }
    std::sort(cand.begin(), cand.end());
    return added;
}

struct SolveStatus {
    int sweeps = 0;
    bool converged = true;
};

// ---------------------------------------------------------------- Gaussian

class GaussianSolver {
public:
    GaussianSolver(const Problem& P, const SolverOptions& opts) : P_(P), opts_(opts) {}

    /// Minimizes over coordinates in `cand`; residual r = y − Xβ kept in sync.
    SolveStatus solve(double lambda, Vector& beta, Vector& r, const std::vector<Index>& cand) {
        SolveStatus st;
        std::vector<Index> active;
        while (true) {
            if (st.sweeps >= opts_.max_sweeps) {
                st.converged = false;
                return st;
            }
            const double d = sweep(lambda, beta, r, cand);
            ++st.sweeps;
            if (d < opts_.tolerance) return st;
            active.clear();
            for (Index j : cand)
                if (beta[j] != 0.0) active.push_back(j);
            if (opts_.verify_descent) {
                while (st.sweeps < opts_.max_sweeps) {
                    const double da = sweep(lambda, beta, r, active);
                    ++st.sweeps;
                    if (da < opts_.tolerance) break;
                }
            } else {
                gram_sweeps(lambda, beta, r, active, st);
            }
        }
    }

private:
    // Active-set sweeps on the Gram matrix of the active columns; r is
    // brought back in sync once at the end.
    void gram_sweeps(double lambda, Vector& beta, Vector& r, const std::vector<Index>& active, SolveStatus& st) {
        const auto m = static_cast<Index>(active.size());
        if (m == 0) return;
        Matrix XA(P_.X.rows(), m);
        Vector b(m), b0(m);
        for (Index k = 0; k < m; ++k) {
            XA.col(k) = P_.X.col(active[static_cast<std::size_t>(k)]);
            b[k] = beta[active[static_cast<std::size_t>(k)]];
        }
        b0 = b;
        Matrix G(m, m);
        G.noalias() = XA.transpose() * XA;
        Vector g = XA.transpose() * r;
        while (st.sweeps < opts_.max_sweeps) {
            double maxd = 0.0;
            for (Index k = 0; k < m; ++k) {
                const double old = b[k];
                const double nj = P_.norms2[active[static_cast<std::size_t>(k)]];
                const double nw = soft_threshold(g[k] + nj * old, lambda) / nj;
                if (nw != old) {
                    g.noalias() -= (nw - old) * G.col(k);
                    b[k] = nw;
                    maxd = std::max(maxd, std::abs(nw - old));
                }
            }
            ++st.sweeps;
            if (maxd < opts_.tolerance) break;
        }
        r.noalias() -= XA * (b - b0);
        for (Index k = 0; k < m; ++k) beta[active[static_cast<std::size_t>(k)]] = b[k];
    }

    double sweep(double lambda, Vector& beta, Vector& r, const std::vector<Index>& coords) {
        const double before = opts_.verify_descent ? objective(lambda, beta, r) : 0.0;
        double maxd = 0.0;
        for (Index j : coords) {
            const double old = beta[j];
            const double nj = P_.norms2[j];
            const double z = P_.X.col(j).dot(r) + nj * old;
            const double nw = soft_threshold(z, lambda) / nj;
            if (nw != old) {
                r.noalias() -= (nw - old) * P_.X.col(j);
                beta[j] = nw;
                maxd = std::max(maxd, std::abs(nw - old));
            }
        }
        if (opts_.verify_descent) {
            const double after = objective(lambda, beta, r);
            if (after > before + 1e-10 * std::max(1.0, std::abs(before)))
                throw NumericalError("coordinate descent increased the objective");
        }
        return maxd;
    }

    double objective(double lambda, const Vector& beta, const Vector& r) const {
        return 0.5 * r.squaredNorm() + lambda * l1(beta);
    }

    const Problem& P_;
    const SolverOptions& opts_;
};

// ---------------------------------------------------------------- Binomial

class LogisticSolver {
public:
    LogisticSolver(const Problem& P, const SolverOptions& opts) : P_(P), opts_(opts) {}

    /// Proximal Newton (IRLS) outer loop with weighted coordinate descent on
    /// the quadratic model. eta = b0 + Xβ is kept in sync.
    SolveStatus solve(double lambda, double& b0, Vector& beta, Vector& eta, const std::vector<Index>& cand) {
        SolveStatus st;
        const Index n = P_.X.rows();
        Vector w(n), wr(n);
        double obj = objective(lambda, beta, eta);
        // Early quadratic models are solved loosely; the final one at full tolerance.
        double inner_tol = std::max(opts_.tolerance, 1e-3);
        for (int outer = 0; outer < 200; ++outer) {
            for (Index i = 0; i < n; ++i) {
                const double mu = sigmoid(eta[i]);
                const double pc = std::clamp(mu, opts_.prob_floor, 1.0 - opts_.prob_floor);
                w[i] = pc * (1.0 - pc);
                wr[i] = (P_.y[i] - mu) / w[i];   // working residual z − η
            }
            const double wsum = w.sum();
            Vector beta_new = beta;
            double b0_new = b0;
            Vector r = wr;  // residual of the quadratic model at the new point
            Vector h = Vector::Zero(beta.size());
            for (Index j : cand) h[j] = (P_.X.col(j).array().square() * w.array()).sum();

            std::vector<Index> active;
            while (true) {
                if (st.sweeps >= opts_.max_sweeps) {
                    st.converged = false;
                    return st;
                }
                double d = weighted_sweep(lambda, beta_new, b0_new, r, w, wsum, h, cand);
                ++st.sweeps;
                if (d < inner_tol) break;
                active.clear();
                for (Index j : cand)
                    if (beta_new[j] != 0.0) active.push_back(j);
                while (st.sweeps < opts_.max_sweeps) {
                    const double da = weighted_sweep(lambda, beta_new, b0_new, r, w, wsum, h, active);
                    ++st.sweeps;
                    if (da < inner_tol) break;
                }
            }

            // Step control on the true penalized objective.
            Vector dbeta = beta_new - beta;
            double db0 = b0_new - b0;
            Vector deta = Vector::Constant(n, db0);
            for (Index j : cand)
                if (dbeta[j] != 0.0) deta.noalias() += dbeta[j] * P_.X.col(j);
            double step = 1.0;
            Vector eta_try = eta + deta;
            Vector beta_try = beta_new;
            double obj_try = objective(lambda, beta_try, eta_try);
            int bt = 0;
            while (obj_try > obj + 1e-12 * std::max(1.0, std::abs(obj)) && bt < opts_.max_backtracks) {
                step *= 0.5;
                beta_try = beta + step * dbeta;
                eta_try = eta + step * deta;
                obj_try = objective(lambda, beta_try, eta_try);
                ++bt;
            }
            const double change = std::max(step * dbeta.cwiseAbs().maxCoeff(), step * std::abs(db0));
            beta = std::move(beta_try);
            eta = std::move(eta_try);
            b0 += step * db0;
            obj = std::min(obj, obj_try);
            if (change < opts_.tolerance && inner_tol <= opts_.tolerance) return st;
            inner_tol = std::max(opts_.tolerance, std::min(inner_tol, 0.1 * change));
            if (bt == opts_.max_backtracks) {
                st.converged = false;
                return st;
            }
        }
        st.converged = false;
        return st;
    }

    double objective(double lambda, const Vector& beta, const Vector& eta) const {
        return -binomial_loglik(P_.y, eta) + lambda * l1(beta);
    }

private:
    double weighted_sweep(double lambda, Vector& beta, double& b0, Vector& r, const Vector& w, double wsum,
                          const Vector& h, const std::vector<Index>& coords) {
        double maxd = 0.0;
        for (Index j : coords) {
            if (h[j] <= 0.0) continue;
            const double old = beta[j];
            const double g = (P_.X.col(j).array() * w.array() * r.array()).sum();
            const double nw = soft_threshold(g + h[j] * old, lambda) / h[j];
            if (nw != old) {
                r.noalias() -= (nw - old) * P_.X.col(j);
                beta[j] = nw;
                maxd = std::max(maxd, std::abs(nw - old));
            }
        }
        const double d0 = (w.array() * r.array()).sum() / wsum;
        if (d0 != 0.0) {
            b0 += d0;
            r.array() -= d0;
            maxd = std::max(maxd, std::abs(d0));
        }
        return maxd;
    }

    const Problem& P_;
    const SolverOptions& opts_;
};

// One penalty value, starting from (b0, beta); the strong-rule reference is
// the previous penalty and the gradient at the starting point.
LassoFit solve_one(const Problem& P, double lambda, double lambda_prev, double b0, Vector beta,
                   const SolverOptions& opts) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw UsageError("lambda must be finite and non-negative");
    LassoFit fit;
    fit.lambda = lambda;
    const Index p = P.X.cols();
    for (Index j = 0; j < p; ++j)
        if (!P.is_usable(j)) beta[j] = 0.0;

    bool converged = true;
    int sweeps = 0;
    if (P.family.is_gaussian()) {
        Vector r = P.y - P.X * beta;
        Vector grad = P.X.transpose() * r;
        auto cand = strong_candidates(P, beta, grad, lambda, std::max(lambda_prev, lambda));
        GaussianSolver solver(P, opts);
        while (true) {
            auto st = solver.solve(lambda, beta, r, cand);
            sweeps += st.sweeps;
            converged = converged && st.converged;
            if (!st.converged) break;
            grad.noalias() = P.X.transpose() * r;
            if (add_violators(P, grad, lambda, cand) == 0) break;
        }
        fit.intercept = 0.0;
    } else {
        Vector eta = (P.X * beta).array() + b0;
        auto gradient = [&](const Vector& e) {
            Vector res(e.size());
            for (Index i = 0; i < e.size(); ++i) res[i] = P.y[i] - sigmoid(e[i]);
            return Vector(P.X.transpose() * res);
        };
        Vector grad = gradient(eta);
        auto cand = strong_candidates(P, beta, grad, lambda, std::max(lambda_prev, lambda));
        LogisticSolver solver(P, opts);
        while (true) {
            auto st = solver.solve(lambda, b0, beta, eta, cand);
            sweeps += st.sweeps;
            converged = converged && st.converged;
            if (!st.converged) break;
            grad = gradient(eta);
            if (add_violators(P, grad, lambda, cand) == 0) break;
        }
        fit.intercept = b0;
    }
    fit.coefficients = std::move(beta);
    fit.converged = converged;
    fit.iterations = sweeps;
    if (!converged) {
        fit.diagnostic = "coordinate descent did not converge within " + std::to_string(opts.max_sweeps) +
                         " sweeps at lambda=" + std::to_string(lambda);
    }
    hard_zero(fit, opts.zero_threshold);
    return fit;
}

double deviance_of(const Problem& P, const LassoFit& fit) {
    Vector eta = P.X * fit.coefficients;
    eta.array() += fit.intercept;
    if (P.family.is_gaussian()) return (P.y - eta).squaredNorm();
    return -2.0 * binomial_loglik(P.y, eta);
}

}  // namespace

ActiveSet LassoFit::active_set() const {
    ActiveSet s;
    for (Index j = 0; j < coefficients.size(); ++j)
        if (coefficients[j] != 0.0) s.push_back(j);
    return s;
}

Index LassoFit::df() const {
    Index k = 0;
    for (Index j = 0; j < coefficients.size(); ++j) k += coefficients[j] != 0.0;
    return k;
}

double lambda_max(const DesignMatrix& X, const ResponseVector& y) {
    check_pair(X, y);
    if (y.family().is_binomial()) {
        if (!y.has_both_classes()) throw DataError("binomial response has a single class; lambda_max is undefined");
        Vector c = y.values().array() - y.mean();
        return (X.values().transpose() * c).cwiseAbs().maxCoeff();
    }
    return (X.values().transpose() * y.values()).cwiseAbs().maxCoeff();
}

Vector lambda_max_batch(const DesignMatrix& X, const Matrix& responses, GlmFamily family) {
    if (responses.rows() != X.n()) throw DataError("lambda_max_batch: response rows do not match design rows");
    Matrix centered = responses;
    if (family.is_binomial()) centered.rowwise() -= responses.colwise().mean();
    const Matrix ip = X.values().transpose() * centered;
    return ip.cwiseAbs().colwise().maxCoeff().transpose();
}

std::vector<double> lambda_grid(double lambda0, int size, double ratio) {
    if (size < 2) throw UsageError("grid size must be at least 2");
    if (!(ratio > 0.0 && ratio < 1.0)) throw UsageError("grid ratio must lie in (0, 1)");
    if (!(lambda0 > 0.0)) throw NumericalError("lambda_max is zero; every penalty gives the empty model");
    std::vector<double> g(static_cast<std::size_t>(size));
    const double step = std::log(ratio) / (size - 1);
    for (int k = 0; k < size; ++k) g[static_cast<std::size_t>(k)] = lambda0 * std::exp(step * k);
    g.front() = lambda0;
    return g;
}

LassoFit fit_at_lambda(const DesignMatrix& X, const ResponseVector& y, double lambda, const LassoFit* warm,
                       const SolverOptions& opts) {
    Problem P(X, y);
    Vector beta = Vector::Zero(X.p());
    double b0 = 0.0;
    if (P.family.is_binomial()) b0 = P.family.link(y.mean());
    if (warm) {
        if (warm->coefficients.size() != X.p()) throw UsageError("warm start has the wrong length");
        beta = warm->coefficients;
        if (P.family.is_binomial()) b0 = warm->intercept;
    }
    const double lprev = warm ? std::max(warm->lambda, lambda) : lambda_max(X, y);
    return solve_one(P, lambda, lprev, b0, std::move(beta), opts);
}

LassoPath fit_path_on_grid(const DesignMatrix& X, const ResponseVector& y, std::vector<double> grid,
                           const PathOptions& opts) {
    for (std::size_t k = 1; k < grid.size(); ++k)
        if (!(grid[k] < grid[k - 1])) throw UsageError("lambda grid must be strictly decreasing");
    Problem P(X, y);
    LassoPath path;
    path.family = y.family();
    path.grid = std::move(grid);
    path.fits.reserve(path.grid.size());

    const double null_dev = null_deviance(y);
    Vector beta = Vector::Zero(X.p());
    double b0 = P.family.is_binomial() ? P.family.link(y.mean()) : 0.0;
    double lprev = path.grid.empty() ? 0.0 : std::max(path.grid.front(), lambda_max(X, y));
    for (std::size_t k = 0; k < path.grid.size(); ++k) {
        const double lambda = path.grid[k];
        LassoFit fit = solve_one(P, lambda, lprev, b0, beta, opts.solver);
        if (!fit.converged) {
            path.truncated = true;
            path.truncation_reason = fit.diagnostic;
            spdlog::warn("fit_path: {}; path truncated after {} of {} points", fit.diagnostic, k, path.grid.size());
            break;
        }
        beta = fit.coefficients;
        b0 = fit.intercept;
        lprev = lambda;
        path.fits.push_back(std::move(fit));
        if (opts.max_deviance_ratio < 1.0 && null_dev > 0.0) {
            const double ratio = 1.0 - deviance_of(P, path.fits.back()) / null_dev;
            if (ratio > opts.max_deviance_ratio && k + 1 < path.grid.size()) {
                path.truncated = true;
                path.truncation_reason = "deviance ratio exceeded " + std::to_string(opts.max_deviance_ratio);
                break;
            }
        }
    }
    return path;
}

LassoPath fit_path(const DesignMatrix& X, const ResponseVector& y, const PathOptions& opts) {
    return fit_path_on_grid(X, y, lambda_grid(lambda_max(X, y), opts.grid_size, opts.grid_ratio), opts);
}

double log_likelihood(GlmFamily family, const Vector& y, const Vector& eta) {
    if (y.size() != eta.size()) throw DataError("log_likelihood: length mismatch");
    if (family.is_gaussian()) return -0.5 * (y - eta).squaredNorm();
    return binomial_loglik(y, eta);
}

Vector linear_predictor(const Matrix& rows, const LassoFit& fit) {
    Vector eta = rows * fit.coefficients;
    eta.array() += fit.intercept;
    return eta;
}

Vector loglik_gradient(const DesignMatrix& X, const ResponseVector& y, const Vector& beta, double intercept) {
    check_pair(X, y);
    Vector eta = X.values() * beta;
    eta.array() += intercept;
    Vector res(eta.size());
    for (Index i = 0; i < eta.size(); ++i)
        res[i] = y[i] - (y.family().is_gaussian() ? eta[i] : sigmoid(eta[i]));
    return X.values().transpose() * res;
}

double penalized_objective(const DesignMatrix& X, const ResponseVector& y, const LassoFit& fit) {
    const Vector eta = linear_predictor(X.values(), fit);
    return -log_likelihood(y.family(), y.values(), eta) + fit.lambda * l1(fit.coefficients);
}

double null_deviance(const ResponseVector& y) {
    if (y.family().is_gaussian()) return y.values().squaredNorm();
    const double mu = y.mean();
    if (mu <= 0.0 || mu >= 1.0) return 0.0;
    const Vector eta = Vector::Constant(y.size(), std::log(mu / (1.0 - mu)));
    return -2.0 * binomial_loglik(y.values(), eta);
}

double KktReport::max_violation() const {
    return std::max({max_active_violation, max_inactive_violation, intercept_violation});
}

KktReport kkt_check(const DesignMatrix& X, const ResponseVector& y, const LassoFit& fit, double tol) {
    KktReport rep;
    const Vector g = loglik_gradient(X, y, fit.coefficients, fit.intercept);
    for (Index j = 0; j < g.size(); ++j) {
        const double b = fit.coefficients[j];
        if (b != 0.0) {
            const double s = b > 0.0 ? 1.0 : -1.0;
            rep.max_active_violation = std::max(rep.max_active_violation, std::abs(g[j] - fit.lambda * s));
        } else {
            rep.max_inactive_violation = std::max(rep.max_inactive_violation, std::abs(g[j]) - fit.lambda);
        }
    }
    if (y.family().is_binomial()) {
        Vector eta = linear_predictor(X.values(), fit);
        double s = 0.0;
        for (Index i = 0; i < eta.size(); ++i) s += y[i] - sigmoid(eta[i]);
        rep.intercept_violation = std::abs(s);
    }
    rep.pass = rep.max_violation() <= tol;
    return rep;
}

}  // namespace permsel
