#pragma once

#include <algorithm>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "permsel/data.hpp"
#include "permsel/rng.hpp"
#include "permsel/solver.hpp"

namespace permsel {

struct SelectionScore {
    std::optional<double> power;   // absent when the truth is empty
    double fdr = 0.0;              // 0 for the empty model
    Index model_size = 0;
    Index true_positives = 0;
    Index false_positives = 0;
    Index false_negatives = 0;
};

/// power = |S ∩ T| / |T|, FDR = |S \ T| / |S| (0/0 → 0). Both sets sorted.
SelectionScore score_selection(const ActiveSet& selected, const ActiveSet& truth);

struct TrainTestSplit {
    DesignMatrix train_X;          // standardized on the training rows
    ResponseVector train_y;        // centered when Gaussian
    double train_offset = 0.0;     // mean removed from a Gaussian training response
    Matrix test_X;                 // test rows under the training standardization
    ResponseVector test_y;         // untransformed
    std::vector<Index> train_rows;
    std::vector<Index> test_rows;
};

/// Uniform split without replacement; train size is round(fraction·n).
/// A Binomial split missing a class on either side is redrawn once.
TrainTestSplit train_test_split(const Matrix& raw_X, const ResponseVector& y, double fraction, Rng& rng);

/// Percent of test rows misclassified with the rule "case iff fitted
/// probability > 0.5"; probabilities of exactly 0.5 count as errors.
double misclassification(const LassoFit& fit, const Matrix& test_X, const ResponseVector& test_y);

/// Mean squared prediction error on test rows (Gaussian).
double test_mse(const LassoFit& fit, const Matrix& test_X, const ResponseVector& test_y, double offset);

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;               // sample sd / √count; NaN with fewer than 2 values
    std::size_t count = 0;
};

/// NaN entries are skipped.
MeanSe mean_se(const std::vector<double>& values);

struct MethodSummary {
    std::string scenario;
    std::string method;
    MeanSe power, fdr, size, misclass, seconds;
    std::size_t replicates = 0;
    std::size_t failures = 0;
};

/// Per-replicate outcome of one method on one dataset.
struct ReplicateRecord {
    std::string scenario;
    std::size_t replicate = 0;
    std::string method;
    bool ok = true;
    std::string error;
    double lambda = std::numeric_limits<double>::quiet_NaN();
    SelectionScore score{};
    double misclass = std::numeric_limits<double>::quiet_NaN();
    double seconds = std::numeric_limits<double>::quiet_NaN();
    bool truncated = false;
};

/// Groups by (scenario, method) in first-appearance order.
std::vector<MethodSummary> aggregate(const std::vector<ReplicateRecord>& records);

// -------------------------------------------------------------- statistics

/// One-sample Kolmogorov–Smirnov distance to a continuous CDF.
template <class Cdf>
double ks_statistic(std::vector<double> sample, Cdf&& cdf) {
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double f = cdf(sample[i]);
        d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
    }
    return d;
}

/// Two-sample Kolmogorov–Smirnov distance.
double ks_two_sample(std::vector<double> a, std::vector<double> b);

/// Asymptotic p-value of a KS distance d with effective sample size ne.
double ks_pvalue(double d, double ne);

}  // namespace permsel
