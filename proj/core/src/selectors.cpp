#include "permsel/selectors.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <numeric>

#include <spdlog/spdlog.h>

#include "permsel/csv.hpp"
#include "permsel/errors.hpp"
#include "permsel/timing.hpp"

namespace permsel {

std::string_view to_string(Method m) {
    switch (m) {
        case Method::Permutation: return "perm";
        case Method::BIC: return "bic";
        case Method::CV: return "cv";
        case Method::CovTest: return "covtest";
    }
    return "?";
}

Method parse_method(std::string_view name) {
    if (name == "perm" || name == "permutation") return Method::Permutation;
    if (name == "bic") return Method::BIC;
    if (name == "cv") return Method::CV;
    if (name == "covtest" || name == "ct") return Method::CovTest;
    throw UsageError("unknown method '" + std::string(name) + "' (expected perm, bic, cv or covtest)");
}

std::vector<Method> parse_methods(std::string_view list) {
    std::vector<Method> out;
    std::size_t start = 0;
    while (start <= list.size()) {
        const auto end = std::min(list.find(',', start), list.size());
        const auto tok = list.substr(start, end - start);
        if (!tok.empty()) {
            const Method m = parse_method(tok);
            if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
        }
        start = end + 1;
    }
    if (out.empty()) throw UsageError("no methods selected");
    return out;
}

double median(std::vector<double> v) {
    if (v.empty()) throw UsageError("median of an empty sample");
    const std::size_t m = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(m), v.end());
    const double hi = v[m];
    if (v.size() % 2 == 1) return hi;
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(m));
    return 0.5 * (lo + hi);
}

std::size_t argmin_first(const std::vector<double>& values) {
    if (values.empty()) throw UsageError("argmin of an empty sequence");
    std::size_t best = 0;
    for (std::size_t k = 1; k < values.size(); ++k)
        if (values[k] < values[best]) best = k;
    return best;
}

SelectionResult select_permutation(const DesignMatrix& X, const ResponseVector& y, int permutations,
                                   std::uint64_t seed, const SolverOptions& solver) {
    if (permutations < 1) throw UsageError("number of permutations must be at least 1");
    check_pair(X, y);
    SelectionResult res;
    res.method = Method::Permutation;
    PermutationDiagnostics diag;
    diag.permutations = permutations;
    diag.seed = seed;
    diag.null_lambdas.reserve(static_cast<std::size_t>(permutations));

    Rng rng(seed);
    constexpr int chunk = 64;
    const Index n = y.size();
    Matrix batch(n, chunk);
    for (int start = 0; start < permutations; start += chunk) {
        const int m = std::min(chunk, permutations - start);
        for (int c = 0; c < m; ++c) {
            const Permutation pi = sample_permutation(n, rng);
            for (Index i = 0; i < n; ++i) batch(i, c) = y[pi[i]];
        }
        const Vector lam = lambda_max_batch(X, batch.leftCols(m), y.family());
        for (int c = 0; c < m; ++c) diag.null_lambdas.push_back(lam[c]);
    }
    const double lambda = median(diag.null_lambdas);
    LassoFit fit = fit_at_lambda(X, y, lambda, nullptr, solver);
    if (!fit.converged) throw NumericalError("permutation selection: " + fit.diagnostic);
    res.lambda = lambda;
    res.selected = fit.active_set();
    res.fit = std::move(fit);
    res.diagnostics = std::move(diag);
    return res;
}

double bic_neg2loglik(const ResponseVector& y, const Vector& eta, std::optional<double> sigma2) {
    if (y.family().is_binomial()) return -2.0 * log_likelihood(y.family(), y.values(), eta);
    if (sigma2) return (y.values() - eta).squaredNorm() / *sigma2;
    const auto n = static_cast<double>(y.size());
    const double rss = std::max((y.values() - eta).squaredNorm(), std::numeric_limits<double>::min());
    return n * std::log(rss / n);
}

SelectionResult select_bic(const LassoPath& path, const DesignMatrix& X, const ResponseVector& y,
                           std::optional<double> sigma2) {
    if (path.fits.empty()) throw NumericalError("select_bic: empty path");
    if (sigma2 && !(*sigma2 > 0.0)) throw UsageError("error variance must be positive");
    CriterionCurve curve;
    for (const auto& fit : path.fits) {
        const Vector eta = linear_predictor(X.values(), fit);
        const double m2ll = bic_neg2loglik(y, eta, sigma2);
        curve.lambdas.push_back(fit.lambda);
        curve.df.push_back(fit.df());
        curve.neg2loglik.push_back(m2ll);
        curve.values.push_back(bic_criterion(m2ll, fit.df(), y.size()));
    }
    const std::size_t k = argmin_first(curve.values);
    SelectionResult res;
    res.method = Method::BIC;
    res.lambda = path.fits[k].lambda;
    res.selected = path.fits[k].active_set();
    res.fit = path.fits[k];
    res.truncated = path.truncated;
    res.diagnostics = std::move(curve);
    return res;
}

std::vector<int> assign_folds(Index n, int K, Rng& rng) {
    if (K < 2 || K > n) throw UsageError("fold count K must satisfy 2 <= K <= n");
    const Permutation pi = sample_permutation(n, rng);
    std::vector<int> folds(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) folds[static_cast<std::size_t>(pi[i])] = static_cast<int>(i % K);
    return folds;
}

namespace {

double heldout_loss(CvLoss loss, double y, double eta) {
    switch (loss) {
        case CvLoss::SquaredError: return (y - eta) * (y - eta);
        case CvLoss::Deviance: {
            const double ll = y * eta - (eta > 35.0 ? eta : std::log1p(std::exp(eta)));
            return -2.0 * ll;
        }
        case CvLoss::Misclassification: {
            const double prob = 1.0 / (1.0 + std::exp(-eta));
            if (prob == 0.5) return 1.0;
            return (prob > 0.5 ? 1.0 : 0.0) == y ? 0.0 : 1.0;
        }
        case CvLoss::Default: break;
    }
    return 0.0;
}

bool folds_have_both_classes(const ResponseVector& y, const std::vector<int>& folds, int K) {
    for (int k = 0; k < K; ++k) {
        bool zero = false, one = false;
        for (Index i = 0; i < y.size(); ++i)
            if (folds[static_cast<std::size_t>(i)] != k) (y[i] == 0.0 ? zero : one) = true;
        if (!(zero && one)) return false;
    }
    return true;
}

}  // namespace

SelectionResult select_cv(const DesignMatrix& X, const ResponseVector& y, int K, const PathOptions& path_opts,
                          std::uint64_t seed, CvLoss loss) {
    check_pair(X, y);
    const Index n = X.n();
    if (loss == CvLoss::Default) loss = y.family().is_gaussian() ? CvLoss::SquaredError : CvLoss::Deviance;
    if (y.family().is_gaussian() && loss != CvLoss::SquaredError)
        throw UsageError("Gaussian cross-validation uses squared error");

    const LassoPath full = fit_path(X, y, path_opts);
    if (full.fits.empty()) throw NumericalError("select_cv: full-data path is empty");
    std::vector<double> grid;
    for (const auto& f : full.fits) grid.push_back(f.lambda);

    Rng rng(seed);
    CvDiagnostics diag;
    diag.folds = assign_folds(n, K, rng);
    if (y.family().is_binomial() && !folds_have_both_classes(y, diag.folds, K)) {
        diag.folds = assign_folds(n, K, rng);
        diag.refolds = 1;
        if (!folds_have_both_classes(y, diag.folds, K))
            throw DataError("cross-validation: a training fold has a single class after refolding; use fewer folds");
    }

    std::vector<double> err(grid.size(), 0.0);
    for (int k = 0; k < K; ++k) {
        std::vector<Index> train, test;
        for (Index i = 0; i < n; ++i) (diag.folds[static_cast<std::size_t>(i)] == k ? test : train).push_back(i);
        const DesignMatrix Xtr = X.subset_rows(train);
        Vector ytr_raw(static_cast<Index>(train.size()));
        for (std::size_t i = 0; i < train.size(); ++i) ytr_raw[static_cast<Index>(i)] = y[train[i]];
        const ResponseVector ytr_in(ytr_raw, y.family());
        const ResponseVector ytr = prepare_response(ytr_in);
        const double offset = y.family().is_gaussian() ? ytr_in.mean() : 0.0;

        Matrix raw_test(static_cast<Index>(test.size()), X.p());
        for (std::size_t i = 0; i < test.size(); ++i) raw_test.row(static_cast<Index>(i)) = X.values().row(test[i]);
        const Matrix Xte = Xtr.record().apply(raw_test);

        // Same per-observation penalty on the smaller training set.
        const double scale = std::sqrt(static_cast<double>(train.size()) / static_cast<double>(n));
        std::vector<double> fold_grid(grid.size());
        for (std::size_t g = 0; g < grid.size(); ++g) fold_grid[g] = grid[g] * scale;
        const LassoPath fp = fit_path_on_grid(Xtr, ytr, fold_grid, path_opts);
        if (fp.fits.empty()) throw NumericalError("select_cv: fold path is empty");

        for (std::size_t g = 0; g < grid.size(); ++g) {
            const LassoFit& fit = fp.fits[std::min(g, fp.fits.size() - 1)];
            const Vector eta = linear_predictor(Xte, fit).array() + offset;
            double e = 0.0;
            for (std::size_t i = 0; i < test.size(); ++i) e += heldout_loss(loss, y[test[i]], eta[static_cast<Index>(i)]);
            err[g] += e;
        }
    }

    diag.curve.lambdas = grid;
    diag.curve.values = err;
    for (const auto& f : full.fits) diag.curve.df.push_back(f.df());
    const std::size_t best = argmin_first(err);

    SelectionResult res;
    res.method = Method::CV;
    res.lambda = grid[best];
    res.selected = full.fits[best].active_set();
    res.fit = full.fits[best];
    res.truncated = full.truncated;
    res.diagnostics = std::move(diag);
    return res;
}

SelectionResult select_covtest(const CovTestPValues& pvalues, const LarsPath& path, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw UsageError("alpha must lie in (0, 1)");
    SelectionResult res;
    res.method = Method::CovTest;
    res.truncated = pvalues.truncated || path.truncated;
    CovTestDiagnostics diag;
    diag.pvalues = pvalues;
    for (std::size_t r = 0; r < pvalues.entries.size(); ++r)
        if (pvalues.entries[r].p_value <= alpha) diag.r_star = static_cast<Index>(r + 1);
    if (diag.r_star > 0) {
        const auto& entry = pvalues.entries[static_cast<std::size_t>(diag.r_star - 1)];
        if (entry.event >= path.events.size()) throw UsageError("select_covtest: p-values do not match the path");
        res.lambda = path.events[entry.event].lambda;
        res.selected = path.events[entry.event].active_after;
    }
    res.diagnostics = std::move(diag);
    return res;
}

SelectionResult run_selector(Method method, const DesignMatrix& X, const ResponseVector& y, const SelectorConfig& cfg,
                             std::uint64_t seed) {
    CpuStopwatch clock;
    SelectionResult res;
    switch (method) {
        case Method::Permutation:
            res = select_permutation(X, y, cfg.permutations, seed, cfg.path.solver);
            break;
        case Method::BIC:
            res = select_bic(fit_path(X, y, cfg.path), X, y, cfg.sigma2);
            break;
        case Method::CV:
            res = select_cv(X, y, cfg.folds, cfg.path, seed, cfg.cv_loss);
            break;
        case Method::CovTest: {
            if (!y.family().is_gaussian())
                throw UsageError("covariance test is not implemented for the binomial family");
            const double sigma2 = cfg.sigma2 ? *cfg.sigma2 : estimate_sigma2(X, y);
            const Sigma2Source src = cfg.sigma2 ? Sigma2Source::Known : Sigma2Source::Estimated;
            const LarsPath path = lars_path(X, y, cfg.lars);
            res = select_covtest(cov_test_pvalues(path, y, X, sigma2, src), path, cfg.alpha);
            break;
        }
    }
    res.cpu_seconds = clock.elapsed();
    return res;
}

void write_diagnostics_csv(const std::filesystem::path& path, const SelectionResult& result, const DesignMatrix& X) {
    if (const auto* d = std::get_if<PermutationDiagnostics>(&result.diagnostics)) {
        CsvWriter w(path);
        w.header({"permutation", "null_lambda"});
        for (std::size_t k = 0; k < d->null_lambdas.size(); ++k) {
            w.field(static_cast<long long>(k + 1)).field(d->null_lambdas[k]);
            w.end_row();
        }
    } else if (const auto* c = std::get_if<CriterionCurve>(&result.diagnostics)) {
        CsvWriter w(path);
        w.header({"index", "lambda", "df", "neg2loglik", "bic"});
        for (std::size_t k = 0; k < c->values.size(); ++k) {
            w.field(static_cast<long long>(k + 1)).field(c->lambdas[k]).field(c->df[k]).field(c->neg2loglik[k]).field(c->values[k]);
            w.end_row();
        }
    } else if (const auto* v = std::get_if<CvDiagnostics>(&result.diagnostics)) {
        CsvWriter w(path);
        w.header({"index", "lambda", "df", "cv_error"});
        for (std::size_t k = 0; k < v->curve.values.size(); ++k) {
            w.field(static_cast<long long>(k + 1)).field(v->curve.lambdas[k]).field(v->curve.df[k]).field(v->curve.values[k]);
            w.end_row();
        }
    } else if (const auto* t = std::get_if<CovTestDiagnostics>(&result.diagnostics)) {
        write_pvalues_csv(path, t->pvalues, X);
    }
}

}  // namespace permsel
