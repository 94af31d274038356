#include "permsel/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "permsel/errors.hpp"

namespace permsel::sim {

std::string_view to_string(Structure s) {
    switch (s) {
        case Structure::Independent: return "A";
        case Structure::Block: return "B";
        case Structure::AR1Fast: return "C";
        case Structure::AR1Slow: return "D";
    }
    return "?";
}

Structure parse_structure(std::string_view name) {
    if (name == "A" || name == "independent") return Structure::Independent;
    if (name == "B" || name == "block") return Structure::Block;
    if (name == "C" || name == "ar1fast") return Structure::AR1Fast;
    if (name == "D" || name == "ar1slow") return Structure::AR1Slow;
    throw UsageError("unknown covariance structure '" + std::string(name) + "' (expected A, B, C or D)");
}

double CovarianceSpec::entry(Index i, Index j) const {
    if (i == j) return 1.0;
    switch (structure) {
        case Structure::Independent: return 0.0;
        case Structure::Block: return (i % block_period) == (j % block_period) ? block_rho : 0.0;
        case Structure::AR1Fast: return std::pow(ar_fast, static_cast<double>(std::abs(i - j)));
        case Structure::AR1Slow: return std::pow(ar_slow, static_cast<double>(std::abs(i - j)));
    }
    return 0.0;
}

Matrix CovarianceSpec::submatrix(const std::vector<Index>& idx) const {
    const auto k = static_cast<Index>(idx.size());
    Matrix S(k, k);
    for (Index a = 0; a < k; ++a)
        for (Index b = 0; b < k; ++b) S(a, b) = entry(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
    return S;
}

Matrix CovarianceSpec::full() const {
    std::vector<Index> all(static_cast<std::size_t>(p));
    std::iota(all.begin(), all.end(), Index{0});
    return submatrix(all);
}

double CovarianceSpec::min_eigenvalue_bound() const {
    switch (structure) {
        case Structure::Independent: return 1.0;
        case Structure::Block: return 1.0 - block_rho;
        case Structure::AR1Fast: return (1.0 - ar_fast) / (1.0 + ar_fast);
        case Structure::AR1Slow: return (1.0 - ar_slow) / (1.0 + ar_slow);
    }
    return 0.0;
}

Matrix sample_predictors(Index n, const CovarianceSpec& spec, Rng& rng) {
    if (n < 1 || spec.p < 1) throw UsageError("sample_predictors: n and p must be positive");
    std::normal_distribution<double> z(0.0, 1.0);
    const Index p = spec.p;
    Matrix X(n, p);
    switch (spec.structure) {
        case Structure::Independent:
            for (Index j = 0; j < p; ++j)
                for (Index i = 0; i < n; ++i) X(i, j) = z(rng);
            break;
        case Structure::Block: {
            const double a = std::sqrt(spec.block_rho);
            const double b = std::sqrt(1.0 - spec.block_rho);
            Matrix factor(n, spec.block_period);
            for (Index c = 0; c < spec.block_period; ++c)
                for (Index i = 0; i < n; ++i) factor(i, c) = z(rng);
            for (Index j = 0; j < p; ++j)
                for (Index i = 0; i < n; ++i) X(i, j) = a * factor(i, j % spec.block_period) + b * z(rng);
            break;
        }
        case Structure::AR1Fast:
        case Structure::AR1Slow: {
            const double rho = spec.structure == Structure::AR1Fast ? spec.ar_fast : spec.ar_slow;
            const double innov = std::sqrt(1.0 - rho * rho);
            for (Index i = 0; i < n; ++i) X(i, 0) = z(rng);
            for (Index j = 1; j < p; ++j)
                for (Index i = 0; i < n; ++i) X(i, j) = rho * X(i, j - 1) + innov * z(rng);
            break;
        }
    }
    return X;
}

Effects draw_effects(const EffectsSpec& spec, Index p, Rng& rng) {
    if (spec.s < 0 || spec.s > p) throw UsageError("number of true variables must lie in [0, p]");
    std::vector<Index> pool(static_cast<std::size_t>(p));
    std::iota(pool.begin(), pool.end(), Index{0});
    for (Index i = 0; i < spec.s; ++i) {
        std::uniform_int_distribution<Index> pick(i, p - 1);
        std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(rng))]);
    }
    Effects e;
    e.indices.assign(pool.begin(), pool.begin() + spec.s);
    std::sort(e.indices.begin(), e.indices.end());
    e.beta.resize(spec.s);

    std::bernoulli_distribution coin(0.5);
    if (spec.family.is_gaussian()) {
        std::uniform_real_distribution<double> u(spec.gaussian_low, spec.gaussian_high);
        for (Index k = 0; k < spec.s; ++k) e.beta[k] = u(rng);
    } else {
        const double centre = spec.reading == EffectReading::OddsScale ? spec.odds : std::log(spec.odds);
        std::normal_distribution<double> z(centre, spec.effect_sd);
        for (Index k = 0; k < spec.s; ++k) {
            double odds = z(rng);
            for (int tries = 0; odds <= 0.0; ++tries) {
                if (tries > 1000) throw UsageError("effect distribution has no positive mass; check the signal level");
                odds = z(rng);
            }
            e.beta[k] = std::log(odds);
        }
    }
    if (spec.signs == SignPolicy::Random)
        for (Index k = 0; k < spec.s; ++k)
            if (coin(rng)) e.beta[k] = -e.beta[k];
    return e;
}

double noise_variance_for_snr(const Vector& beta, const Matrix& sigma_ss, double snr) {
    if (!(snr > 0.0)) throw UsageError("SNR must be positive");
    if (beta.size() != sigma_ss.rows()) throw UsageError("noise_variance_for_snr: dimension mismatch");
    const double signal = beta.dot(sigma_ss * beta);
    if (!(signal > 0.0)) throw UsageError("zero signal: cannot reach a target SNR");
    return signal / snr;
}

Matrix select_columns(const Matrix& X, const std::vector<Index>& indices) {
    Matrix out(X.rows(), static_cast<Index>(indices.size()));
    for (std::size_t k = 0; k < indices.size(); ++k) out.col(static_cast<Index>(k)) = X.col(indices[k]);
    return out;
}

ResponseVector gen_gaussian_response(const Matrix& Xs, const Vector& beta, double sigma2, Rng& rng) {
    if (Xs.cols() != beta.size()) throw UsageError("gen_gaussian_response: dimension mismatch");
    if (sigma2 < 0.0) throw UsageError("noise variance must be non-negative");
    Vector y = beta.size() ? Vector(Xs * beta) : Vector::Zero(Xs.rows());
    if (sigma2 > 0.0) {
        std::normal_distribution<double> eps(0.0, std::sqrt(sigma2));
        for (Index i = 0; i < y.size(); ++i) y[i] += eps(rng);
    }
    return ResponseVector(std::move(y), GlmFamily::gaussian());
}

LogisticResponse gen_logistic_response(const Matrix& Xs, const Vector& beta, Rng& rng) {
    if (Xs.cols() != beta.size()) throw UsageError("gen_logistic_response: dimension mismatch");
    Vector eta = beta.size() ? Vector(Xs * beta) : Vector::Zero(Xs.rows());
    const double mu = eta.size() ? -eta.mean() : 0.0;
    eta.array() += mu;
    Vector y(eta.size());
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (Index i = 0; i < eta.size(); ++i) {
        const double q = 1.0 / (1.0 + std::exp(-eta[i]));
        y[i] = u(rng) < q ? 1.0 : 0.0;
    }
    return {ResponseVector(std::move(y), GlmFamily::binomial()), mu};
}

Vector sample_unit_sphere(Index n, Rng& rng) {
    if (n < 1) throw UsageError("sample_unit_sphere: n must be positive");
    std::normal_distribution<double> z(0.0, 1.0);
    Vector v(n);
    double norm = 0.0;
    while (!(norm > 0.0)) {
        for (Index i = 0; i < n; ++i) v[i] = z(rng);
        norm = v.norm();
    }
    return v / norm;
}

SphereBound sphere_bound(Index n, Index p) {
    if (n < 2 || p < 2) throw UsageError("sphere_bound needs n >= 2 and p >= 2");
    const double dn = static_cast<double>(n);
    const double dp = static_cast<double>(p);
    SphereBound b;
    b.exact = std::sqrt(-std::expm1(-2.0 * std::log(dp) / (dn - 1.0)));
    b.approximation = std::sqrt(2.0 * std::log(dp) / dn);
    return b;
}

SimulatedData simulate(const Scenario& sc, std::uint64_t seed) {
    CovarianceSpec cov = sc.covariance;
    Rng effects_rng = make_rng(seed, "effects");
    Rng predictor_rng = make_rng(seed, "predictors");
    Rng response_rng = make_rng(seed, "response");

    SimulatedData d;
    d.truth.effects = draw_effects(sc.effects, cov.p, effects_rng);
    d.raw_predictors = sample_predictors(sc.n, cov, predictor_rng);
    const Matrix Xs = select_columns(d.raw_predictors, d.truth.effects.indices);
    if (sc.effects.family.is_gaussian()) {
        d.truth.sigma2 = d.truth.effects.beta.size()
                             ? noise_variance_for_snr(d.truth.effects.beta, cov.submatrix(d.truth.effects.indices), sc.snr)
                             : 1.0;
        d.response = gen_gaussian_response(Xs, d.truth.effects.beta, d.truth.sigma2, response_rng);
    } else {
        auto lr = gen_logistic_response(Xs, d.truth.effects.beta, response_rng);
        d.truth.intercept = lr.intercept;
        d.response = std::move(lr.y);
    }
    return d;
}

}  // namespace permsel::sim
