#include <cmath>

#include "doctest.h"
#include "permsel/errors.hpp"
#include "permsel/solver.hpp"
#include "test_support.hpp"

using namespace permsel;
using permsel::testing::gaussian_problem;
using permsel::testing::binomial_problem;

namespace {

ResponseVector gaussian_y(const Vector& v) { return ResponseVector(v, GlmFamily::gaussian()); }

// Design with orthonormal centered columns and y = Q c exactly.
struct Orthonormal {
    DesignMatrix X;
    ResponseVector y;
};

Orthonormal orthonormal_problem(Index n, const Vector& c, std::uint64_t seed) {
    const Index p = c.size();
    const Matrix Q = permsel::testing::orthonormal_columns(n, p, seed);
    return {standardize(Q), gaussian_y(Q * c)};
}

double lattice_min(const Matrix& X, const Vector& y, double lambda, Vector& arg) {
    const Matrix G = X.transpose() * X;
    const Vector b = X.transpose() * y;
    const double yy = y.squaredNorm();
    auto obj = [&](const Vector& beta) {
        return 0.5 * yy - beta.dot(b) + 0.5 * beta.dot(G * beta) + lambda * beta.lpNorm<1>();
    };
    Vector center = Vector::Zero(3);
    double half = 6.0, step = 0.05, best = obj(center);
    arg = center;
    for (int level = 0; level < 4; ++level) {
        const int m = static_cast<int>(std::lround(half / step));
        Vector cand(3);
        for (int i = -m; i <= m; ++i)
            for (int j = -m; j <= m; ++j)
                for (int k = -m; k <= m; ++k) {
                    cand << center[0] + i * step, center[1] + j * step, center[2] + k * step;
                    const double v = obj(cand);
                    if (v < best) {
                        best = v;
                        arg = cand;
                    }
                }
        center = arg;
        half = 2.0 * step;
        step /= 10.0;
    }
    return best;
}

}  // namespace

TEST_CASE("lambda_max: self inner product is 1") {
    Matrix col = permsel::testing::gaussian_matrix(30, 1, 4);
    const DesignMatrix X = standardize(col);
    const ResponseVector y = gaussian_y(X.values().col(0));
    CHECK(lambda_max(X, y) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("lambda_max: columns orthogonal to y give 0") {
    const Matrix Q = permsel::testing::orthonormal_columns(40, 4, 6);
    const DesignMatrix X = standardize(Q.leftCols(3));
    CHECK(lambda_max(X, gaussian_y(Q.col(3))) < 1e-14);
}

TEST_CASE("lambda_max matches a direct loop (Gaussian and Binomial)") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto g = gaussian_problem(50, 200, 3, 0.5, seed);
        CHECK(std::abs(lambda_max(g.X, g.y) - permsel::testing::naive_max_inner(g.X.values(), g.y.values())) < 1e-12);
        const auto b = binomial_problem(50, 200, 3, 0.5, seed);
        Vector centered = b.y.values().array() - b.y.mean();
        CHECK(std::abs(lambda_max(b.X, b.y) - permsel::testing::naive_max_inner(b.X.values(), centered)) < 1e-12);
    }
}

TEST_CASE("lambda_max_batch agrees with lambda_max per column") {
    const auto g = gaussian_problem(40, 30, 2, 1.0, 3);
    Matrix R(40, 3);
    R.col(0) = g.y.values();
    R.col(1) = g.y.values().reverse();
    R.col(2) = -g.y.values();
    const Vector batch = lambda_max_batch(g.X, R, GlmFamily::gaussian());
    for (Index k = 0; k < 3; ++k) CHECK(std::abs(batch[k] - lambda_max(g.X, gaussian_y(R.col(k)))) < 1e-13);
}

TEST_CASE("lambda_max: single-class Binomial is fatal") {
    const DesignMatrix X = standardize(permsel::testing::gaussian_matrix(6, 2, 1));
    CHECK_THROWS_AS(lambda_max(X, ResponseVector(Vector::Ones(6), GlmFamily::binomial())), DataError);
}

TEST_CASE("orthonormal design: x1'y = 0.8, lambda = 0.3 gives 0.5") {
    Vector c(3);
    c << 0.8, 0.2, -0.5;
    const auto P = orthonormal_problem(25, c, 17);
    const LassoFit fit = fit_at_lambda(P.X, P.y, 0.3);
    CHECK(fit.converged);
    CHECK(fit.coefficients[0] == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(fit.coefficients[1] == 0.0);
    CHECK(fit.coefficients[2] == doctest::Approx(-0.2).epsilon(1e-9));
    CHECK(fit.active_set() == ActiveSet{0, 2});
    CHECK(fit.intercept == 0.0);
}

TEST_CASE("fits at or above lambda_max are empty") {
    const auto g = gaussian_problem(50, 80, 4, 1.0, 9);
    const double l0 = lambda_max(g.X, g.y);
    CHECK(fit_at_lambda(g.X, g.y, l0).df() == 0);
    CHECK(fit_at_lambda(g.X, g.y, 2.0 * l0).df() == 0);
    CHECK(fit_at_lambda(g.X, g.y, 0.99 * l0).df() >= 1);
    const auto b = binomial_problem(60, 40, 3, 1.0, 9);
    const LassoFit bf = fit_at_lambda(b.X, b.y, 1.0001 * lambda_max(b.X, b.y));
    CHECK(bf.df() == 0);
    const double ybar = b.y.mean();
    CHECK(bf.intercept == doctest::Approx(std::log(ybar / (1 - ybar))).epsilon(1e-6));
}

TEST_CASE("p = 3: objective matches a brute-force lattice minimizer") {
    for (std::uint64_t seed : {21u, 22u, 23u}) {
        const auto g = gaussian_problem(20, 3, 2, 1.0, seed);
        const double lambda = 0.5 * lambda_max(g.X, g.y);
        const LassoFit fit = fit_at_lambda(g.X, g.y, lambda);
        Vector arg;
        const double lat = lattice_min(g.X.values(), g.y.values(), lambda, arg);
        const double cd = permsel::testing::naive_gaussian_objective(g.X.values(), g.y.values(), fit.coefficients, lambda);
        CHECK(std::abs(cd - lat) < 1e-4);
        CHECK(cd <= lat + 1e-12);
        CHECK((fit.coefficients - arg).cwiseAbs().maxCoeff() < 1e-3);
    }
}

TEST_CASE("property: coordinate descent equals the exhaustive sign-pattern oracle") {
    Rng gen(777);
    std::uniform_int_distribution<int> pdist(1, 6), ndist(8, 30);
    std::uniform_real_distribution<double> frac(0.02, 0.95);
    for (int trial = 0; trial < 40; ++trial) {
        const Index p = pdist(gen), n = ndist(gen);
        const auto g = gaussian_problem(n, p, std::min<Index>(p, 2), 0.7, 1000 + trial);
        const double lambda = frac(gen) * lambda_max(g.X, g.y);
        const LassoFit fit = fit_at_lambda(g.X, g.y, lambda);
        const Vector exact = permsel::testing::enumerate_lasso(g.X.values(), g.y.values(), lambda);
        CAPTURE(trial);
        CHECK((fit.coefficients - exact).cwiseAbs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("fit_path grid is log-spaced from lambda_max") {
    const auto g = gaussian_problem(60, 30, 3, 1.0, 5);
    const LassoPath path = fit_path(g.X, g.y);
    const double l0 = lambda_max(g.X, g.y);
    REQUIRE(path.grid.size() == 100);
    for (int k = 0; k < 100; ++k)
        CHECK(path.grid[static_cast<std::size_t>(k)] == doctest::Approx(l0 * std::pow(1e-3, k / 99.0)).epsilon(1e-12));
    CHECK(path.fits.front().df() == 0);
    CHECK_THROWS_AS(lambda_grid(1.0, 1, 0.1), UsageError);
    CHECK_THROWS_AS(lambda_grid(1.0, 10, 1.0), UsageError);
}

TEST_CASE("orthonormal path: active set size never decreases") {
    Vector c(6);
    c << 0.9, -0.7, 0.5, 0.3, -0.2, 0.1;
    const auto P = orthonormal_problem(40, c, 31);
    const LassoPath path = fit_path(P.X, P.y);
    for (std::size_t k = 1; k < path.size(); ++k) CHECK(path.fits[k].df() >= path.fits[k - 1].df());
    for (const auto& f : path.fits)
        for (Index j = 0; j < 6; ++j) CHECK(std::abs(f.coefficients[j] - soft_threshold(c[j], f.lambda)) < 1e-9);
}

TEST_CASE("bottom of the path approaches least squares (n=200, p=50)") {
    const auto g = gaussian_problem(200, 50, 10, 1.0, 41);
    const LassoPath path = fit_path(g.X, g.y);
    REQUIRE(path.size() == 100);
    const Vector ls = g.X.values().colPivHouseholderQr().solve(g.y.values());
    const Vector& b = path.fits.back().coefficients;
    CHECK((b - ls).norm() / ls.norm() < 1e-2);
}

TEST_CASE("kkt_check: empty fit at lambda_max, converged path fits, perturbation") {
    const auto g = gaussian_problem(50, 100, 5, 0.8, 12);
    const double l0 = lambda_max(g.X, g.y);
    const LassoFit empty = fit_at_lambda(g.X, g.y, l0);
    CHECK(kkt_check(g.X, g.y, empty, 1e-8).max_inactive_violation <= 1e-8);

    const LassoPath path = fit_path(g.X, g.y);
    for (const auto& f : path.fits) CHECK(kkt_check(g.X, g.y, f, 1e-4).pass);

    LassoFit bad = path.fits[path.size() / 2];
    REQUIRE(bad.df() > 0);
    bad.coefficients[bad.active_set().front()] += 0.1;
    CHECK_FALSE(kkt_check(g.X, g.y, bad, 1e-4).pass);

    const auto b = binomial_problem(80, 40, 4, 1.0, 12);
    const LassoPath bp = fit_path(b.X, b.y);
    for (const auto& f : bp.fits) CHECK(kkt_check(b.X, b.y, f, 1e-4).pass);
}

TEST_CASE("log_likelihood: closed forms and naive summation") {
    Vector y(3);
    y << 0.5, -1.0, 2.0;
    CHECK(log_likelihood(GlmFamily::gaussian(), y, y) == 0.0);
    Vector yb(2), eta(2);
    yb << 1, 0;
    eta << 0, 0;
    CHECK(log_likelihood(GlmFamily::binomial(), yb, eta) == doctest::Approx(2.0 * std::log(0.5)).epsilon(1e-14));

    const Matrix R = permsel::testing::gaussian_matrix(40, 2, 8);
    Vector labels(40);
    for (Index i = 0; i < 40; ++i) labels[i] = R(i, 1) > 0 ? 1.0 : 0.0;
    double naive_b = 0.0, naive_g = 0.0;
    for (Index i = 0; i < 40; ++i) {
        naive_b += labels[i] * R(i, 0) - std::log(1.0 + std::exp(R(i, 0)));
        naive_g += -0.5 * (R(i, 1) - R(i, 0)) * (R(i, 1) - R(i, 0));
    }
    CHECK(std::abs(log_likelihood(GlmFamily::binomial(), labels, R.col(0)) - naive_b) < 1e-12);
    CHECK(std::abs(log_likelihood(GlmFamily::gaussian(), R.col(1), R.col(0)) - naive_g) < 1e-12);
}

TEST_CASE("logistic gradient matches central finite differences") {
    const auto b = binomial_problem(50, 8, 3, 1.0, 19);
    Rng rng(5);
    std::normal_distribution<double> z(0.0, 0.5);
    Vector beta(8);
    for (Index j = 0; j < 8; ++j) beta[j] = z(rng);
    const double b0 = 0.3;
    const Vector g = loglik_gradient(b.X, b.y, beta, b0);
    auto ll = [&](const Vector& bb) {
        const Vector eta = (b.X.values() * bb).array() + b0;
        return log_likelihood(GlmFamily::binomial(), b.y.values(), eta);
    };
    const double h = 1e-5;
    for (Index j = 0; j < 8; ++j) {
        Vector up = beta, dn = beta;
        up[j] += h;
        dn[j] -= h;
        const double fd = (ll(up) - ll(dn)) / (2 * h);
        CHECK(std::abs(fd - g[j]) <= 1e-6 * std::max(1.0, std::abs(g[j])));
    }
}

TEST_CASE("objective never increases across sweeps (checked mode)") {
    PathOptions opts;
    opts.solver.verify_descent = true;
    for (std::uint64_t seed = 50; seed < 55; ++seed) {
        const auto g = gaussian_problem(40, 60, 4, 1.0, seed);
        CHECK_NOTHROW(fit_path(g.X, g.y, opts));
    }
}

TEST_CASE("path continuity and closed-form start") {
    const auto g = gaussian_problem(80, 40, 5, 1.0, 61);
    const LassoPath path = fit_path(g.X, g.y);
    for (std::size_t k = 1; k < path.size(); ++k) {
        const auto a = path.fits[k - 1].df(), b = path.fits[k].df();
        CHECK(std::abs(static_cast<double>(b - a)) <= 20.0);
    }
    // A grid starting above lambda_max: the smallest empty-model λ is within one step of it.
    const double l0 = lambda_max(g.X, g.y);
    std::vector<double> grid;
    const double step = std::pow(1e-2, 1.0 / 99.0);
    for (int k = 0; k < 100; ++k) grid.push_back(3.0 * l0 * std::pow(step, k));
    const LassoPath up = fit_path_on_grid(g.X, g.y, grid);
    double smallest_empty = grid.front();
    for (const auto& f : up.fits)
        if (f.df() == 0) smallest_empty = f.lambda;
    CHECK(smallest_empty >= l0);
    CHECK(smallest_empty < l0 / step + 1e-12);
}

TEST_CASE("fits are deterministic and active sets equal the nonzero coefficients") {
    const auto b = binomial_problem(70, 30, 3, 1.2, 71);
    const double lam = 0.3 * lambda_max(b.X, b.y);
    const LassoFit f1 = fit_at_lambda(b.X, b.y, lam);
    const LassoFit f2 = fit_at_lambda(b.X, b.y, lam);
    CHECK(f1.coefficients == f2.coefficients);
    CHECK(f1.intercept == f2.intercept);
    ActiveSet nz;
    for (Index j = 0; j < f1.coefficients.size(); ++j)
        if (f1.coefficients[j] != 0.0) nz.push_back(j);
    CHECK(nz == f1.active_set());
    CHECK_THROWS_AS(fit_at_lambda(b.X, b.y, -1.0), UsageError);
}

TEST_CASE("non-convergence is reported on the fit") {
    const auto g = gaussian_problem(30, 60, 5, 1.0, 81);
    SolverOptions o;
    o.max_sweeps = 1;
    const LassoFit f = fit_at_lambda(g.X, g.y, 0.01 * lambda_max(g.X, g.y), nullptr, o);
    CHECK_FALSE(f.converged);
    CHECK_FALSE(f.diagnostic.empty());
}
