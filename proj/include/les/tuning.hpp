#pragma once
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>
#include <les/model.hpp>
#include <les/solver.hpp>

namespace les {

using Vector = Vec<double>;
using Matrix = Mat<double>;
using Design = GroupedDesign<double>;
using Centered = Response<double>;
using Penalty = PenaltyConfig<double>;
using Fit = FitResult<double>;
using Options = SolverOptions<double>;

/// Raw (unstandardized) observations with their column grouping.
struct Dataset
{
    Matrix X;
    Vector y;
    GroupPartition groups;
};

enum class Method
{
    les,
    lasso,
};

/**
 * Randomized-trace settings. `rho` is the perturbation standard deviation;
 * when unset it defaults to 0.05 times the (1/n) standard deviation of y.
 */
struct DfConfig
{
    int R = 5;
    std::optional<double> rho;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Maps a response vector to fitted values on a fixed design.
using Fitter = std::function<Vector(const Vector&)>;

/**
 * R-fold randomized trace estimate of the degrees of freedom of `fitter`
 * at `y`: the mean over r of delta_r^T (f(y + delta_r) - f(y)) / (delta_r^T delta_r / n)
 * with delta_r ~ N(0, rho^2 I). Perturbation r draws from its own stream
 * seeded by (seed, r).
 */
double randomized_trace_df(const Fitter& fitter, const Vector& y, const DfConfig& cfg);

/// log(RSS / n) + log(n) df / n. Throws DataError when RSS is zero.
double bic_score(const Vector& y, const Vector& y_hat, double df);

enum class Criterion
{
    validation,
    kfold_cv,
    bic,
};

/**
 * Grid of tuning parameters. When `lambdas` is empty each alpha gets its
 * own path of `path_length` log-spaced values from lambda_max(alpha) down to
 * `min_ratio * lambda_max(alpha)`. For the lasso method the alphas are
 * ignored and the path runs over gamma.
 */
struct TuningGrid
{
    std::vector<double> lambdas;
    std::vector<double> alphas{0.25, 0.5, 1.0, 2.0, 4.0, 8.0};
    int path_length = 50;
    double min_ratio = 1e-3;
    Criterion criterion = Criterion::validation;
    int folds = 10;
    WeightScheme weights = WeightScheme::size_over_total;

    void validate() const;
};

/// Descending log-spaced path from `top` to `top * min_ratio`.
std::vector<double> log_path(double top, double min_ratio, int length);

struct TuningEntry
{
    double lambda = 0;
    double alpha = 0;
    double criterion = 0;
    std::optional<double> df;
    Index nnz = 0;
    bool converged = false;
    double kkt_residual = 0;
};

struct TuningResult
{
    std::vector<TuningEntry> entries;
    std::size_t selected = 0;
    /// the training design and the fit at the selected point
    Design design;
    Centered response;
    Fit fit;
    /// worst KKT residual over every fit made during the search
    double max_kkt_residual = 0;
    int nonconverged_fits = 0;

    const TuningEntry& best() const { return entries[selected]; }
};

/**
 * Index of the smallest criterion value. Values within 1e-12 of the minimum
 * tie; ties go to the larger lambda, then the larger alpha.
 */
std::size_t select_best(const std::vector<TuningEntry>& entries);

/**
 * Mean squared prediction error of k-fold cross-validation. Rows are
 * shuffled by `seed` and cut into k near-equal folds; each training split is
 * re-standardized and its transform applied to the held-out rows.
 */
double kfold_cv(const Dataset& data, const Penalty& config, int k, std::uint64_t seed,
                const Options& opts, Method method = Method::les);

/// Fits one point: LES at `config`, or the lasso at gamma = config.lambda.
Fit fit_method(const Design& design, const Centered& response, const Penalty& config,
               const Options& opts, Method method,
               const std::optional<Vector>& warm_start = std::nullopt);

/**
 * Fits every grid point with warm starts down each lambda path and scores it
 * by validation MSE, k-fold CV MSE or BIC. For BIC the LES df comes from
 * randomized_trace_df with cold refits; the lasso uses the number of
 * nonzero coefficients.
 */
TuningResult grid_search(const Dataset& train, const TuningGrid& grid,
                         const std::optional<Dataset>& validation, const DfConfig& dfcfg,
                         const Options& opts, Method method = Method::les);

/// Mean squared error of predictions from a fit on `design` over raw data.
double prediction_mse(const Design& design, const Centered& response, const Vector& beta,
                      const Dataset& data);

} // namespace les
