#pragma once
#include <Eigen/Core>
#include <cmath>
#include <limits>
#include <string>
#include <vector>
#include <les/errors.hpp>

namespace les {

using Index = Eigen::Index;

template <class Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <class Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/**
 * Disjoint partition of the columns {0, ..., p-1} into K ordered groups.
 *
 * Group members keep the order in which they were supplied. Construction
 * validates that every column appears in exactly one group.
 */
class GroupPartition
{
public:
    GroupPartition() = default;

    GroupPartition(std::vector<std::vector<Index>> groups, Index p)
        : groups_(std::move(groups)),
          group_of_(static_cast<std::size_t>(p), -1)
    {
        if (p < 1) throw ConfigError("group partition needs at least one column");
        if (groups_.empty()) throw ConfigError("group partition needs at least one group");
        for (std::size_t k = 0; k < groups_.size(); ++k) {
            if (groups_[k].empty()) {
                throw ConfigError("group " + std::to_string(k) + " is empty");
            }
            for (Index j : groups_[k]) {
                if (j < 0 || j >= p) {
                    throw ConfigError("column index " + std::to_string(j) + " out of range");
                }
                auto& owner = group_of_[static_cast<std::size_t>(j)];
                if (owner != -1) {
                    throw ConfigError("column " + std::to_string(j) + " assigned to two groups");
                }
                owner = static_cast<Index>(k);
            }
        }
        for (std::size_t j = 0; j < group_of_.size(); ++j) {
            if (group_of_[j] == -1) {
                throw ConfigError("column " + std::to_string(j) + " is not assigned to a group");
            }
        }
    }

    /// Consecutive groups of the given sizes: {0..s0-1}, {s0..s0+s1-1}, ...
    static GroupPartition contiguous(const std::vector<Index>& sizes)
    {
        std::vector<std::vector<Index>> groups;
        Index next = 0;
        for (Index s : sizes) {
            if (s < 1) throw ConfigError("group sizes must be positive");
            std::vector<Index> g(static_cast<std::size_t>(s));
            for (auto& j : g) j = next++;
            groups.push_back(std::move(g));
        }
        return GroupPartition(std::move(groups), next);
    }

    /// Every column in its own group.
    static GroupPartition singletons(Index p)
    {
        return contiguous(std::vector<Index>(static_cast<std::size_t>(p), 1));
    }

    Index n_groups() const { return static_cast<Index>(groups_.size()); }
    Index n_columns() const { return static_cast<Index>(group_of_.size()); }
    Index size(Index k) const { return static_cast<Index>(groups_[static_cast<std::size_t>(k)].size()); }
    const std::vector<Index>& members(Index k) const { return groups_[static_cast<std::size_t>(k)]; }
    Index group_of(Index j) const { return group_of_[static_cast<std::size_t>(j)]; }
    const std::vector<std::vector<Index>>& groups() const { return groups_; }

private:
    std::vector<std::vector<Index>> groups_;
    std::vector<Index> group_of_;
};

/**
 * Standardized design: every column has mean zero and sum of squares n,
 * so diag(X^T X / n) = 1. Means and scales map back to the raw columns.
 */
template <class Scalar>
struct GroupedDesign
{
    Mat<Scalar> X;
    GroupPartition groups;
    Vec<Scalar> column_means;
    Vec<Scalar> column_scales;

    Index n() const { return X.rows(); }
    Index p() const { return X.cols(); }

    /// Maps standardized-scale coefficients onto the raw covariate scale.
    Vec<Scalar> to_original_scale(const Vec<Scalar>& beta) const
    {
        return beta.cwiseQuotient(column_scales);
    }

    /// Standardizes raw rows with this design's transform.
    Mat<Scalar> transform(const Mat<Scalar>& X_raw) const
    {
        return (X_raw.rowwise() - column_means.transpose()).array().rowwise()
               / column_scales.transpose().array();
    }
};

/// Centered response.
template <class Scalar>
struct Response
{
    Vec<Scalar> y;
    Scalar original_mean = 0;

    Index n() const { return y.size(); }
};

enum class WeightScheme
{
    size_over_total,  ///< w_k = p_k / p
    size,             ///< w_k = p_k
};

/**
 * Tuning parameters of the LES penalty. Weights are per group and must be
 * strictly positive.
 */
template <class Scalar>
struct PenaltyConfig
{
    Scalar lambda = 0;
    Scalar alpha = 1;
    Vec<Scalar> weights;

    static PenaltyConfig make(const GroupPartition& groups, Scalar lambda, Scalar alpha,
                              WeightScheme scheme = WeightScheme::size_over_total)
    {
        PenaltyConfig c;
        c.lambda = lambda;
        c.alpha = alpha;
        c.weights = default_weights(groups, scheme);
        c.validate(groups);
        return c;
    }

    static Vec<Scalar> default_weights(const GroupPartition& groups, WeightScheme scheme)
    {
        const Index K = groups.n_groups();
        const Scalar p = static_cast<Scalar>(groups.n_columns());
        Vec<Scalar> w(K);
        for (Index k = 0; k < K; ++k) {
            const Scalar pk = static_cast<Scalar>(groups.size(k));
            w(k) = scheme == WeightScheme::size ? pk : pk / p;
        }
        return w;
    }

    void validate(const GroupPartition& groups) const
    {
        if (!(lambda >= 0) || !std::isfinite(static_cast<double>(lambda))) {
            throw ConfigError("lambda must be finite and non-negative");
        }
        if (!(alpha > 0) || !std::isfinite(static_cast<double>(alpha))) {
            throw ConfigError("alpha must be finite and positive");
        }
        if (weights.size() != groups.n_groups()) {
            throw ConfigError("weights length must equal the number of groups");
        }
        for (Index k = 0; k < weights.size(); ++k) {
            if (!(weights(k) > 0)) throw ConfigError("group weights must be positive");
        }
    }
};

/// Coefficients with magnitude at or below this are treated as unselected.
inline constexpr double selection_tolerance = 1e-8;

template <class Scalar>
struct FitResult
{
    Vec<Scalar> beta;
    Scalar objective = 0;
    int sweeps = 0;
    bool converged = false;
    Scalar kkt_residual = 0;
    /// subproblem solves that hit the inner iteration cap
    int inner_failures = 0;
    std::vector<Index> active_groups;
    std::vector<Index> active_variables;
    /// objective before the first sweep followed by the value after each sweep
    std::vector<Scalar> objective_trace;
};

/// Selected variables and groups under `tol`.
template <class Scalar>
void fill_active_sets(FitResult<Scalar>& fit, const GroupPartition& groups,
                      Scalar tol = Scalar(selection_tolerance))
{
    fit.active_variables.clear();
    fit.active_groups.clear();
    for (Index j = 0; j < fit.beta.size(); ++j) {
        if (std::abs(fit.beta(j)) > tol) fit.active_variables.push_back(j);
    }
    for (Index k = 0; k < groups.n_groups(); ++k) {
        for (Index j : groups.members(k)) {
            if (std::abs(fit.beta(j)) > tol) {
                fit.active_groups.push_back(k);
                break;
            }
        }
    }
}

/**
 * Centers the response and standardizes each column to mean zero and
 * unit 1/n-variance.
 *
 * Throws DataError on non-finite entries or a constant column (the
 * message names the column index).
 */
template <class Scalar>
std::pair<GroupedDesign<Scalar>, Response<Scalar>>
standardize(const Mat<Scalar>& X_raw, const Vec<Scalar>& y_raw, GroupPartition groups)
{
    const Index n = X_raw.rows();
    const Index p = X_raw.cols();
    if (n < 2) throw DataError("need at least two observations");
    if (y_raw.size() != n) throw std::invalid_argument("response length does not match design rows");
    if (groups.n_columns() != p) throw std::invalid_argument("group partition does not match design columns");
    if (!X_raw.allFinite()) throw DataError("design contains NaN or Inf entries");
    if (!y_raw.allFinite()) throw DataError("response contains NaN or Inf entries");

    GroupedDesign<Scalar> design;
    design.groups = std::move(groups);
    design.column_means = X_raw.colwise().mean().transpose();
    design.column_scales.resize(p);
    design.X.resize(n, p);
    for (Index j = 0; j < p; ++j) {
        auto centered = (X_raw.col(j).array() - design.column_means(j)).matrix();
        const Scalar scale = std::sqrt(centered.squaredNorm() / static_cast<Scalar>(n));
        const Scalar magnitude = X_raw.col(j).cwiseAbs().maxCoeff();
        if (!(scale > Scalar(64) * std::numeric_limits<Scalar>::epsilon() * magnitude)) {
            throw DataError("constant column at index " + std::to_string(j));
        }
        design.column_scales(j) = scale;
        design.X.col(j) = centered / scale;
    }

    Response<Scalar> response;
    response.original_mean = y_raw.mean();
    response.y = y_raw.array() - response.original_mean;
    return {std::move(design), std::move(response)};
}

} // namespace les
