#pragma once
#include <cstdint>
#include <string>
#include <vector>
#include <les/simulation.hpp>
#include <les/tuning.hpp>

namespace les {

struct CaseRecord
{
    std::string label;
    double margin = 0;
    bool pass = false;
};

/**
 * Outcome of one oracle check. `worst_margin` is the largest error measure
 * seen across cases and `pass` holds iff it is within `tolerance` (and the
 * check was conclusive).
 */
struct OracleReport
{
    std::string claim;
    bool pass = false;
    bool inconclusive = false;
    double worst_margin = 0;
    double tolerance = 0;
    std::vector<CaseRecord> details;
    /// worst KKT residual over the fits the check made itself
    double max_kkt_residual = 0;

    void add(std::string label, double margin);
    void finish();
};

/// Conjunction of passes and maximum of margins.
OracleReport merge_reports(std::string claim, const std::vector<OracleReport>& reports);

/// 1.5 ||beta_ols||_inf, the default search box for brute_force_fit.
double ols_box_half_width(const Design& design, const Centered& response);

/**
 * Exhaustive minimization of the LES objective for p <= 3: a full grid of
 * `grid_points` per axis on [-h, h]^p, repeated zoomed grids around the best
 * point down to 1e-9 spacing, then cyclic coordinate bisection. Only the
 * public objective is evaluated.
 *
 * Throws DataError when the coarse optimum sits on the box boundary.
 */
Vector brute_force_fit(const Design& design, const Centered& response, const Penalty& config,
                       double box_half_width, int grid_points);

/**
 * Distance ||beta_les(lambda = gamma p / alpha, alpha) - beta_lasso(gamma)||_inf
 * along a decreasing alpha sequence with weights p_k / p. Passes when the
 * distance never grows by more than 10% and ends at most `final_tol`.
 */
OracleReport check_lasso_limit(const Design& design, const Centered& response, double gamma,
                               const std::vector<double>& alphas, const Options& opts,
                               double final_tol = 1e-3);

/**
 * Builds an orthonormal design (X^T X / n = I) from `seed`, fits LES and
 * checks the per-coordinate thresholding fixed point and, for every group
 * with all coefficients nonzero, sum_j |b_kj| = sum_j |b_ols_kj| - lambda alpha w_k.
 */
OracleReport check_orthonormal_identities(std::uint64_t seed, double tolerance = 1e-6);

/// Random split objective with a positive semidefinite Gram block.
SplitObjective<double> random_split_objective(Index group_size, std::uint64_t seed,
                                              double penalty_scale, double alpha);

/**
 * Central finite differences against the analytic gradient at `n_samples`
 * random interior points. Error is |fd - grad|_inf / max(|grad|_inf, 1e-10).
 */
OracleReport check_gradient(const SplitObjective<double>& F, int n_samples, double h,
                            std::uint64_t seed, double tolerance = 1e-6);

/// Forward differences at z = 0, the corner of the feasible set.
OracleReport check_gradient_boundary(const SplitObjective<double>& F, double h,
                                     double tolerance = 1e-5);

/**
 * Checks |b_ki - b_kj| <= bound for every same-group pair with b_ki b_kj > 0,
 * where bound is the grouping-effect bound
 *
 *      exp-sum bound * residual bound * ||X_ki - X_kj||_2 / (n lambda alpha^2 w_k),
 *
 * evaluated in log space. With unit-norm columns ||X_ki - X_kj||_2 is
 * sqrt(2(1 - rho)). The margin is the largest |b_ki - b_kj| - bound.
 */
OracleReport check_grouping_bound(const Fit& fit, const Design& design, const Centered& response,
                               const Penalty& config, double abs_tol = 1e-8);

/// log of the constant C in the grouping-effect bound for group k.
double grouping_log_constant(const Design& design, const Centered& response, const Penalty& config,
                          Index k);

/// Options tight enough for oracle comparisons at 1e-6.
Options precise_options();

/**
 * Battery of tiny random problems (n = 20, p in {2, 3}, K in {1, 2}) comparing
 * fit_les against brute_force_fit. Margin is objective(fit) - objective(brute).
 */
OracleReport check_brute_force_battery(std::uint64_t seed, int instances, double tolerance = 1e-6);

/// Fit at 1.01 lambda_max must be exactly zero (|b| <= 1e-10).
OracleReport check_lambda_max_zero(std::uint64_t seed);

/// Every oracle above on seeded instances.
std::vector<OracleReport> run_verification_battery(std::uint64_t seed, unsigned threads = 0);

} // namespace les
