#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "permsel/rng.hpp"

namespace permsel {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

enum class Family { Gaussian, Binomial };

/// GLM family with its canonical link (identity for Gaussian, logit for Binomial).
struct GlmFamily {
    Family tag = Family::Gaussian;

    static constexpr GlmFamily gaussian() { return {Family::Gaussian}; }
    static constexpr GlmFamily binomial() { return {Family::Binomial}; }

    constexpr bool is_gaussian() const { return tag == Family::Gaussian; }
    constexpr bool is_binomial() const { return tag == Family::Binomial; }

    /// Inverse link: mean response for a linear predictor value.
    double mean(double eta) const;
    /// Link: linear predictor for a mean response.
    double link(double mu) const;

    friend constexpr bool operator==(GlmFamily, GlmFamily) = default;
};

std::string_view to_string(Family f);
Family parse_family(std::string_view name);

/// Centering/scaling applied to each raw column; kept so coefficients can be
/// mapped back to the original units and so held-out rows can be transformed
/// with the training record.
struct Standardization {
    Vector means;
    Vector scales;               // centered column norms
    std::vector<bool> zero_variance;

    Index cols() const { return means.size(); }
    /// Apply this record to raw rows (held-out data is not re-centered).
    Matrix apply(const Matrix& raw) const;
    /// Coefficients on the original column scale.
    Vector to_original_scale(const Vector& beta) const;
};

/// n×p predictor matrix whose columns are centered with unit total sum of
/// squares. All-constant columns are kept as zero columns and flagged.
class DesignMatrix {
public:
    DesignMatrix() = default;

    const Matrix& values() const { return values_; }
    Index n() const { return values_.rows(); }
    Index p() const { return values_.cols(); }
    const Standardization& record() const { return record_; }
    const Vector& column_means() const { return record_.means; }
    const Vector& column_scales() const { return record_.scales; }
    bool zero_variance(Index j) const { return record_.zero_variance[static_cast<std::size_t>(j)]; }
    Index zero_variance_count() const;

    const std::vector<std::string>& names() const { return names_; }
    void set_names(std::vector<std::string> names);
    std::string name(Index j) const;

    auto col(Index j) const { return values_.col(j); }

    /// Rows subset, re-standardized on those rows only.
    DesignMatrix subset_rows(std::span<const Index> rows) const;

private:
    friend DesignMatrix standardize(const Matrix& raw);

    Matrix values_;
    Standardization record_;
    std::vector<std::string> names_;
};

/// Center every column to mean 0 and scale to unit total sum of squares.
/// Constant columns become zero columns with a warning.
DesignMatrix standardize(const Matrix& raw);

/// Response vector tagged with its family.
class ResponseVector {
public:
    ResponseVector() = default;
    ResponseVector(Vector values, GlmFamily family);

    const Vector& values() const { return values_; }
    GlmFamily family() const { return family_; }
    Index size() const { return values_.size(); }
    double operator[](Index i) const { return values_[i]; }

    double mean() const { return values_.size() ? values_.mean() : 0.0; }
    /// True when a Binomial response contains both classes.
    bool has_both_classes() const;

private:
    Vector values_;
    GlmFamily family_{};
};

/// Gaussian responses are centered before fitting; Binomial ones are returned unchanged.
ResponseVector prepare_response(const ResponseVector& y);

/// Throws DataError unless y pairs with X (length) and y is valid for its family.
void check_pair(const DesignMatrix& X, const ResponseVector& y);

/// A bijection of {0,...,n-1}; mapping[i] is the source index for position i.
class Permutation {
public:
    Permutation() = default;
    explicit Permutation(std::vector<Index> mapping);

    static Permutation identity(Index n);

    Index size() const { return static_cast<Index>(mapping_.size()); }
    Index operator[](Index i) const { return mapping_[static_cast<std::size_t>(i)]; }
    const std::vector<Index>& mapping() const { return mapping_; }
    Permutation inverse() const;

private:
    std::vector<Index> mapping_;
};

Permutation sample_permutation(Index n, Rng& rng);

/// Output position i holds y[π(i)].
ResponseVector permute_response(const ResponseVector& y, const Permutation& pi);

}  // namespace permsel
