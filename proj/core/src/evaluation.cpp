#include "permsel/evaluation.hpp"

#include <cmath>
#include <map>

#include "permsel/errors.hpp"

namespace permsel {

SelectionScore score_selection(const ActiveSet& selected, const ActiveSet& truth) {
    SelectionScore s;
    s.model_size = static_cast<Index>(selected.size());
    std::size_t i = 0, j = 0;
    while (i < selected.size() && j < truth.size()) {
        if (selected[i] == truth[j]) {
            ++s.true_positives;
            ++i;
            ++j;
        } else if (selected[i] < truth[j]) {
            ++i;
        } else {
            ++j;
        }
    }
    s.false_positives = s.model_size - s.true_positives;
    s.false_negatives = static_cast<Index>(truth.size()) - s.true_positives;
    if (!truth.empty()) s.power = static_cast<double>(s.true_positives) / static_cast<double>(truth.size());
    s.fdr = s.model_size > 0 ? static_cast<double>(s.false_positives) / static_cast<double>(s.model_size) : 0.0;
    return s;
}

TrainTestSplit train_test_split(const Matrix& raw_X, const ResponseVector& y, double fraction, Rng& rng) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw UsageError("split fraction must lie in (0, 1)");
    const Index n = raw_X.rows();
    if (y.size() != n) throw DataError("response length does not match predictor rows");
    const auto n_train = static_cast<Index>(std::llround(fraction * static_cast<double>(n)));
    if (n_train < 2 || n - n_train < 1) throw UsageError("split leaves too few rows on one side");

    for (int attempt = 0; attempt < 2; ++attempt) {
        const Permutation pi = sample_permutation(n, rng);
        TrainTestSplit s;
        for (Index i = 0; i < n; ++i) (i < n_train ? s.train_rows : s.test_rows).push_back(pi[i]);
        std::sort(s.train_rows.begin(), s.train_rows.end());
        std::sort(s.test_rows.begin(), s.test_rows.end());

        auto gather = [&](const std::vector<Index>& rows, Matrix& Xo, Vector& yo) {
            Xo.resize(static_cast<Index>(rows.size()), raw_X.cols());
            yo.resize(static_cast<Index>(rows.size()));
            for (std::size_t k = 0; k < rows.size(); ++k) {
                Xo.row(static_cast<Index>(k)) = raw_X.row(rows[k]);
                yo[static_cast<Index>(k)] = y[rows[k]];
            }
        };
        Matrix Xtr, Xte;
        Vector ytr, yte;
        gather(s.train_rows, Xtr, ytr);
        gather(s.test_rows, Xte, yte);
        ResponseVector train_y(std::move(ytr), y.family());
        ResponseVector test_y(std::move(yte), y.family());
        if (y.family().is_binomial() && (!train_y.has_both_classes() || !test_y.has_both_classes())) continue;

        s.train_X = standardize(Xtr);
        s.test_X = s.train_X.record().apply(Xte);
        s.train_offset = y.family().is_gaussian() ? train_y.mean() : 0.0;
        s.train_y = prepare_response(train_y);
        s.test_y = std::move(test_y);
        return s;
    }
    throw DataError("train/test split: a side lacks one of the two classes after reshuffling");
}

double misclassification(const LassoFit& fit, const Matrix& test_X, const ResponseVector& test_y) {
    if (!test_y.family().is_binomial()) throw UsageError("misclassification needs a binomial response");
    if (test_y.size() == 0) return 0.0;
    const Vector eta = linear_predictor(test_X, fit);
    Index errors = 0;
    for (Index i = 0; i < eta.size(); ++i) {
        const double prob = 1.0 / (1.0 + std::exp(-eta[i]));
        const bool predicted_case = prob > 0.5;
        if (prob == 0.5 || (predicted_case ? 1.0 : 0.0) != test_y[i]) ++errors;
    }
    return 100.0 * static_cast<double>(errors) / static_cast<double>(test_y.size());
}

double test_mse(const LassoFit& fit, const Matrix& test_X, const ResponseVector& test_y, double offset) {
    const Vector eta = linear_predictor(test_X, fit).array() + offset;
    return (test_y.values() - eta).squaredNorm() / static_cast<double>(std::max<Index>(1, test_y.size()));
}

MeanSe mean_se(const std::vector<double>& values) {
    MeanSe r;
    double sum = 0.0;
    for (double v : values)
        if (!std::isnan(v)) {
            sum += v;
            ++r.count;
        }
    if (r.count == 0) {
        r.mean = r.se = std::numeric_limits<double>::quiet_NaN();
        return r;
    }
    r.mean = sum / static_cast<double>(r.count);
    if (r.count < 2) {
        r.se = std::numeric_limits<double>::quiet_NaN();
        return r;
    }
    double ss = 0.0;
    for (double v : values)
        if (!std::isnan(v)) ss += (v - r.mean) * (v - r.mean);
    r.se = std::sqrt(ss / static_cast<double>(r.count - 1)) / std::sqrt(static_cast<double>(r.count));
    return r;
}

std::vector<MethodSummary> aggregate(const std::vector<ReplicateRecord>& records) {
    std::vector<std::pair<std::string, std::string>> order;
    std::map<std::pair<std::string, std::string>, std::vector<const ReplicateRecord*>> groups;
    for (const auto& r : records) {
        auto key = std::make_pair(r.scenario, r.method);
        auto it = groups.find(key);
        if (it == groups.end()) {
            order.push_back(key);
            groups[key].push_back(&r);
        } else {
            it->second.push_back(&r);
        }
    }
    std::vector<MethodSummary> out;
    for (const auto& key : order) {
        MethodSummary m;
        m.scenario = key.first;
        m.method = key.second;
        std::vector<double> power, fdr, size, mis, secs;
        for (const auto* r : groups[key]) {
            if (!r->ok) {
                ++m.failures;
                continue;
            }
            ++m.replicates;
            power.push_back(r->score.power.value_or(std::numeric_limits<double>::quiet_NaN()));
            fdr.push_back(r->score.fdr);
            size.push_back(static_cast<double>(r->score.model_size));
            mis.push_back(r->misclass);
            secs.push_back(r->seconds);
        }
        m.power = mean_se(power);
        m.fdr = mean_se(fdr);
        m.size = mean_se(size);
        m.misclass = mean_se(mis);
        m.seconds = mean_se(secs);
        out.push_back(std::move(m));
    }
    return out;
}

double ks_two_sample(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw UsageError("ks_two_sample: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

double ks_pvalue(double d, double ne) {
    const double sn = std::sqrt(ne);
    const double t = (sn + 0.12 + 0.11 / sn) * d;
    if (t < 1e-3) return 1.0;
    double sum = 0.0;
    double sign = 1.0;
    for (int k = 1; k <= 200; ++k) {
        const double term = sign * std::exp(-2.0 * k * k * t * t);
        sum += term;
        if (std::abs(term) < 1e-16) break;
        sign = -sign;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

}  // namespace permsel
