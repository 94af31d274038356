#include "permsel/data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <spdlog/spdlog.h>

#include "permsel/errors.hpp"

namespace permsel {

double GlmFamily::mean(double eta) const {
    if (is_gaussian()) return eta;
    return 1.0 / (1.0 + std::exp(-eta));
}

double GlmFamily::link(double mu) const {
    if (is_gaussian()) return mu;
    return std::log(mu / (1.0 - mu));
}

std::string_view to_string(Family f) {
    return f == Family::Gaussian ? "gaussian" : "binomial";
}

Family parse_family(std::string_view name) {
    if (name == "gaussian") return Family::Gaussian;
    if (name == "binomial" || name == "logistic") return Family::Binomial;
    throw UsageError("unknown family '" + std::string(name) + "' (expected gaussian or binomial)");
}

Matrix Standardization::apply(const Matrix& raw) const {
    if (raw.cols() != cols()) throw DataError("column count does not match standardization record");
    Matrix out(raw.rows(), raw.cols());
    for (Index j = 0; j < raw.cols(); ++j) {
        if (zero_variance[static_cast<std::size_t>(j)]) {
            out.col(j).setZero();
        } else {
            out.col(j) = (raw.col(j).array() - means[j]) / scales[j];
        }
    }
    return out;
}

Vector Standardization::to_original_scale(const Vector& beta) const {
    Vector out = Vector::Zero(beta.size());
    for (Index j = 0; j < beta.size(); ++j) {
        if (!zero_variance[static_cast<std::size_t>(j)]) out[j] = beta[j] / scales[j];
    }
    return out;
}

Index DesignMatrix::zero_variance_count() const {
    return std::count(record_.zero_variance.begin(), record_.zero_variance.end(), true);
}

void DesignMatrix::set_names(std::vector<std::string> names) {
    if (!names.empty() && static_cast<Index>(names.size()) != p())
        throw DataError("column name count does not match predictor count");
    names_ = std::move(names);
}

std::string DesignMatrix::name(Index j) const {
    if (names_.empty()) return "x" + std::to_string(j);
    return names_[static_cast<std::size_t>(j)];
}

DesignMatrix DesignMatrix::subset_rows(std::span<const Index> rows) const {
    Matrix sub(static_cast<Index>(rows.size()), p());
    for (std::size_t i = 0; i < rows.size(); ++i) sub.row(static_cast<Index>(i)) = values_.row(rows[i]);
    DesignMatrix out = standardize(sub);
    out.names_ = names_;
    return out;
}

DesignMatrix standardize(const Matrix& raw) {
    const Index n = raw.rows();
    const Index p = raw.cols();
    if (n < 2) throw DataError("standardize: need at least 2 rows");
    if (p < 1) throw DataError("standardize: need at least 1 column");
    if (!raw.allFinite()) throw DataError("standardize: non-finite value in predictors");

    DesignMatrix X;
    X.values_.resize(n, p);
    X.record_.means.resize(p);
    X.record_.scales.resize(p);
    X.record_.zero_variance.assign(static_cast<std::size_t>(p), false);

    Index flagged = 0;
    for (Index j = 0; j < p; ++j) {
        const double mean = raw.col(j).mean();
        Vector centered = raw.col(j).array() - mean;
        // Re-center once more: removes the rounding left by the first pass.
        centered.array() -= centered.mean();
        const double norm = centered.norm();
        X.record_.means[j] = mean;
        const bool constant = !(norm > 1e-12 * std::max(1.0, raw.col(j).cwiseAbs().maxCoeff()) * std::sqrt(double(n)));
        if (constant) {
            X.record_.scales[j] = 0.0;
            X.record_.zero_variance[static_cast<std::size_t>(j)] = true;
            X.values_.col(j).setZero();
            ++flagged;
        } else {
            X.record_.scales[j] = norm;
            X.values_.col(j) = centered / norm;
        }
    }
    if (flagged > 0) {
        spdlog::warn("standardize: {} zero-variance column(s) kept as zero columns; their coefficients are fixed at 0",
                     flagged);
    }
    return X;
}

ResponseVector::ResponseVector(Vector values, GlmFamily family)
    : values_(std::move(values)), family_(family) {
    if (!values_.allFinite()) throw DataError("response contains non-finite values");
    if (family_.is_binomial()) {
        for (Index i = 0; i < values_.size(); ++i) {
            if (values_[i] != 0.0 && values_[i] != 1.0)
                throw DataError("binomial response values must be 0 or 1");
        }
    }
}

bool ResponseVector::has_both_classes() const {
    bool zero = false, one = false;
    for (Index i = 0; i < values_.size(); ++i) (values_[i] == 0.0 ? zero : one) = true;
    return zero && one;
}

ResponseVector prepare_response(const ResponseVector& y) {
    if (y.family().is_binomial()) return y;
    Vector v = y.values().array() - y.mean();
    return ResponseVector(std::move(v), y.family());
}

void check_pair(const DesignMatrix& X, const ResponseVector& y) {
    if (X.n() != y.size())
        throw DataError("response length " + std::to_string(y.size()) + " does not match " +
                        std::to_string(X.n()) + " design rows");
}

Permutation::Permutation(std::vector<Index> mapping) : mapping_(std::move(mapping)) {
    std::vector<bool> seen(mapping_.size(), false);
    for (Index v : mapping_) {
        if (v < 0 || v >= static_cast<Index>(mapping_.size()) || seen[static_cast<std::size_t>(v)])
            throw UsageError("permutation mapping is not a bijection");
        seen[static_cast<std::size_t>(v)] = true;
    }
}

Permutation Permutation::identity(Index n) {
    std::vector<Index> m(static_cast<std::size_t>(n));
    std::iota(m.begin(), m.end(), Index{0});
    return Permutation(std::move(m));
}

Permutation Permutation::inverse() const {
    std::vector<Index> inv(mapping_.size());
    for (std::size_t i = 0; i < mapping_.size(); ++i) inv[static_cast<std::size_t>(mapping_[i])] = static_cast<Index>(i);
    return Permutation(std::move(inv));
}

Permutation sample_permutation(Index n, Rng& rng) {
    if (n < 1) throw UsageError("sample_permutation: n must be at least 1");
    std::vector<Index> m(static_cast<std::size_t>(n));
    std::iota(m.begin(), m.end(), Index{0});
    for (Index i = n - 1; i > 0; --i) {
        std::uniform_int_distribution<Index> pick(0, i);
        std::swap(m[static_cast<std::size_t>(i)], m[static_cast<std::size_t>(pick(rng))]);
    }
    return Permutation(std::move(m));
}

ResponseVector permute_response(const ResponseVector& y, const Permutation& pi) {
    if (pi.size() != y.size())
        throw DataError("permute_response: permutation length " + std::to_string(pi.size()) +
                        " does not match response length " + std::to_string(y.size()));
    Vector out(y.size());
    for (Index i = 0; i < y.size(); ++i) out[i] = y[pi[i]];
    return ResponseVector(std::move(out), y.family());
}

}  // namespace permsel
