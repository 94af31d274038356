#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "permsel/errors.hpp"
#include "permsel/evaluation.hpp"
#include "test_support.hpp"

using namespace permsel;

namespace {

ActiveSet random_subset(Rng& rng, Index p, double prob) {
    std::bernoulli_distribution keep(prob);
    ActiveSet s;
    for (Index j = 0; j < p; ++j)
        if (keep(rng)) s.push_back(j);
    return s;
}

double naive_ks(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> pts = a;
    pts.insert(pts.end(), b.begin(), b.end());
    double d = 0.0;
    for (double t : pts) {
        const double fa = std::count_if(a.begin(), a.end(), [&](double x) { return x <= t; }) / double(a.size());
        const double fb = std::count_if(b.begin(), b.end(), [&](double x) { return x <= t; }) / double(b.size());
        d = std::max(d, std::abs(fa - fb));
    }
    return d;
}

}  // namespace

TEST_CASE("score_selection: counting examples") {
    const auto s = score_selection({1, 2, 3}, {1, 2, 4, 5});
    CHECK(*s.power == 0.5);
    CHECK(s.fdr == doctest::Approx(1.0 / 3.0));
    CHECK(s.model_size == 3);
    CHECK(s.true_positives == 2);
    CHECK(s.false_positives == 1);
    CHECK(s.false_negatives == 2);

    const auto e = score_selection({}, {1, 2});
    CHECK(*e.power == 0.0);
    CHECK(e.fdr == 0.0);

    const auto p = score_selection({0, 7}, {0, 7});
    CHECK(*p.power == 1.0);
    CHECK(p.fdr == 0.0);

    const auto null = score_selection({3}, {});
    CHECK_FALSE(null.power.has_value());
    CHECK(null.fdr == 1.0);
}

TEST_CASE("property: power plus miss rate is 1, FDR in [0,1], power monotone under nesting") {
    Rng rng(1);
    for (int trial = 0; trial < 300; ++trial) {
        const Index p = 1 + static_cast<Index>(trial % 40);
        const ActiveSet truth = random_subset(rng, p, 0.3);
        const ActiveSet sel = random_subset(rng, p, 0.4);
        const auto s = score_selection(sel, truth);
        CHECK(s.fdr >= 0.0);
        CHECK(s.fdr <= 1.0);
        if (truth.empty()) {
            CHECK_FALSE(s.power.has_value());
            continue;
        }
        CHECK(*s.power + double(s.false_negatives) / double(truth.size()) == doctest::Approx(1.0));
        ActiveSet bigger = sel;
        const ActiveSet extra = random_subset(rng, p, 0.3);
        bigger.insert(bigger.end(), extra.begin(), extra.end());
        std::sort(bigger.begin(), bigger.end());
        bigger.erase(std::unique(bigger.begin(), bigger.end()), bigger.end());
        CHECK(*score_selection(sel, truth).power <= *score_selection(bigger, truth).power);
    }
}

TEST_CASE("train_test_split: sizes, determinism, disjointness") {
    const Matrix raw = permsel::testing::gaussian_matrix(9, 3, 2);
    const ResponseVector y(permsel::testing::gaussian_matrix(9, 1, 3).col(0), GlmFamily::gaussian());
    Rng r1(5), r2(5);
    const auto a = train_test_split(raw, y, 2.0 / 3.0, r1);
    const auto b = train_test_split(raw, y, 2.0 / 3.0, r2);
    CHECK(a.train_rows.size() == 6);
    CHECK(a.test_rows.size() == 3);
    CHECK(a.train_rows == b.train_rows);
    std::set<Index> all(a.train_rows.begin(), a.train_rows.end());
    all.insert(a.test_rows.begin(), a.test_rows.end());
    CHECK(all.size() == 9);

    const Matrix big = permsel::testing::gaussian_matrix(300, 4, 4);
    const ResponseVector yb(big.col(0), GlmFamily::gaussian());
    Rng r3(6);
    const auto half = train_test_split(big, yb, 0.5, r3);
    CHECK(half.train_rows.size() == 150);
    CHECK(half.test_rows.size() == 150);
    CHECK_THROWS_AS(train_test_split(big, yb, 1.0, r3), UsageError);
}

TEST_CASE("train_test_split: test rows use the training standardization") {
    const Matrix raw = permsel::testing::gaussian_matrix(60, 5, 7).array() + 3.0;
    const ResponseVector y(raw.col(0) * 2.0, GlmFamily::gaussian());
    Rng rng(8);
    const auto s = train_test_split(raw, y, 2.0 / 3.0, rng);
    for (Index j = 0; j < 5; ++j) {
        CHECK(std::abs(s.train_X.values().col(j).mean()) < 1e-12);
        CHECK(s.train_X.values().col(j).squaredNorm() == doctest::Approx(1.0));
    }
    Matrix raw_test(static_cast<Index>(s.test_rows.size()), 5);
    for (std::size_t i = 0; i < s.test_rows.size(); ++i) raw_test.row(static_cast<Index>(i)) = raw.row(s.test_rows[i]);
    CHECK((s.test_X - s.train_X.record().apply(raw_test)).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(s.test_X.colwise().mean().cwiseAbs().maxCoeff() > 1e-6);
    CHECK(std::abs(s.train_y.mean()) < 1e-12);
    double mean_train = 0.0;
    for (Index r : s.train_rows) mean_train += y[r];
    CHECK(s.train_offset == doctest::Approx(mean_train / double(s.train_rows.size())));
    for (std::size_t i = 0; i < s.test_rows.size(); ++i) CHECK(s.test_y[static_cast<Index>(i)] == y[s.test_rows[i]]);
}

TEST_CASE("train_test_split: a binomial side without both classes is fatal after one redraw") {
    const Matrix raw = permsel::testing::gaussian_matrix(12, 2, 9);
    Vector v = Vector::Zero(12);
    v[3] = 1.0;
    Rng rng(1);
    CHECK_THROWS_AS(train_test_split(raw, ResponseVector(v, GlmFamily::binomial()), 2.0 / 3.0, rng), DataError);
    v.head(6).setOnes();
    const auto s = train_test_split(raw, ResponseVector(v, GlmFamily::binomial()), 2.0 / 3.0, rng);
    CHECK(s.train_y.has_both_classes());
    CHECK(s.test_y.has_both_classes());
}

TEST_CASE("misclassification and test MSE") {
    const Matrix X = permsel::testing::gaussian_matrix(10, 2, 11);
    LassoFit fit;
    fit.coefficients = Vector::Zero(2);
    fit.intercept = std::log(0.9 / 0.1);
    CHECK(misclassification(fit, X, ResponseVector(Vector::Ones(10), GlmFamily::binomial())) == 0.0);

    Vector balanced(10);
    balanced << 1, 0, 1, 0, 1, 0, 1, 0, 1, 0;
    fit.intercept = 0.1;
    CHECK(misclassification(fit, X, ResponseVector(balanced, GlmFamily::binomial())) == 50.0);
    fit.intercept = 0.0;  // every probability exactly 0.5
    CHECK(misclassification(fit, X, ResponseVector(balanced, GlmFamily::binomial())) == 100.0);
    CHECK_THROWS_AS(misclassification(fit, X, ResponseVector(balanced, GlmFamily::gaussian())), UsageError);

    LassoFit lin;
    lin.coefficients = Vector::Zero(2);
    lin.coefficients[0] = 2.0;
    const ResponseVector yt(Vector(X.col(0) * 2.0).array() + 1.5, GlmFamily::gaussian());
    CHECK(test_mse(lin, X, yt, 1.5) == doctest::Approx(0.0).scale(1.0));
    CHECK(test_mse(lin, X, yt, 0.5) == doctest::Approx(1.0));
}

TEST_CASE("mean_se: two-point, degenerate, NaN handling, naive oracle") {
    const MeanSe m = mean_se({4.0, 6.0});
    CHECK(m.mean == 5.0);
    CHECK(m.se == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(mean_se({3.0, 3.0, 3.0}).se == 0.0);
    CHECK(std::isnan(mean_se({2.0}).se));
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const MeanSe skip = mean_se({4.0, nan, 6.0});
    CHECK(skip.count == 2);
    CHECK(skip.mean == 5.0);

    Rng rng(12);
    std::normal_distribution<double> z(3.0, 2.0);
    std::vector<double> v(100);
    for (double& x : v) x = z(rng);
    double s = 0.0;
    for (double x : v) s += x;
    const double mean = s / 100.0;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const MeanSe got = mean_se(v);
    CHECK(std::abs(got.mean - mean) < 1e-12);
    CHECK(std::abs(got.se - std::sqrt(ss / 99.0) / 10.0) < 1e-12);
}

TEST_CASE("aggregate: grouping order, failures, naive recomputation") {
    Rng rng(13);
    std::uniform_int_distribution<int> size(0, 30);
    std::vector<ReplicateRecord> recs;
    for (std::size_t r = 0; r < 100; ++r)
        for (const char* m : {"perm", "cv"}) {
            ReplicateRecord rec;
            rec.scenario = "S";
            rec.replicate = r;
            rec.method = m;
            ActiveSet sel;
            for (int j = 0, k = size(rng); j < k; ++j) sel.push_back(j);
            rec.score = score_selection(sel, {0, 5, 40});
            rec.seconds = 0.01 * double(r);
            rec.ok = !(r == 17 && std::string(m) == "cv");
            recs.push_back(rec);
        }
    const auto out = aggregate(recs);
    REQUIRE(out.size() == 2);
    CHECK(out[0].method == "perm");
    CHECK(out[1].method == "cv");
    CHECK(out[0].replicates == 100);
    CHECK(out[1].replicates == 99);
    CHECK(out[1].failures == 1);

    for (const auto& summary : out) {
        std::vector<double> size_v, fdr_v;
        for (const auto& r : recs)
            if (r.method == summary.method && r.ok) {
                size_v.push_back(double(r.score.model_size));
                fdr_v.push_back(r.score.fdr);
            }
        double s = 0.0;
        for (double x : size_v) s += x;
        const double mean = s / double(size_v.size());
        double ss = 0.0;
        for (double x : size_v) ss += (x - mean) * (x - mean);
        CHECK(std::abs(summary.size.mean - mean) < 1e-12);
        CHECK(std::abs(summary.size.se - std::sqrt(ss / double(size_v.size() - 1) / double(size_v.size()))) < 1e-12);
        CHECK(std::abs(summary.fdr.mean - mean_se(fdr_v).mean) < 1e-12);
        CHECK(std::isnan(summary.misclass.mean));
    }
}

TEST_CASE("two-sample KS against a naive oracle; asymptotic p-values") {
    Rng rng(14);
    std::normal_distribution<double> z(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> a(30 + trial), b(45);
        for (double& x : a) x = z(rng);
        for (double& x : b) x = z(rng) + 0.3;
        if (trial % 4 == 0) b[0] = a[0];  // a tie across samples
        CHECK(std::abs(ks_two_sample(a, b) - naive_ks(a, b)) < 1e-15);
    }
    CHECK(ks_two_sample({1, 2, 3}, {1, 2, 3}) == 0.0);
    CHECK(ks_two_sample({1, 2}, {5, 6}) == 1.0);
    CHECK(ks_pvalue(0.0, 100) == 1.0);
    CHECK(ks_pvalue(1.0, 500) < 1e-12);
    // Kolmogorov tail Q(1.358) ≈ 0.05 and Q(1.628) ≈ 0.01 for large samples
    CHECK(ks_pvalue(1.358 / std::sqrt(1e6), 1e6) == doctest::Approx(0.05).epsilon(0.01));
    CHECK(ks_pvalue(1.628 / std::sqrt(1e6), 1e6) == doctest::Approx(0.01).epsilon(0.02));

    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> s(400);
    for (double& x : s) x = u(rng);
    const double d = ks_statistic(s, [](double x) { return x; });
    CHECK(d < 1.63 / std::sqrt(400.0));
    CHECK(ks_statistic({0.5}, [](double x) { return x; }) == 0.5);
}
