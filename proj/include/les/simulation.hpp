#pragma once
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>
#include <les/tuning.hpp>

namespace les {

/**
 * How the noise level follows from the signal-to-noise ratio.
 * variance:   beta^T Sigma beta / sigma^2 = snr
 * amplitude:  sqrt(beta^T Sigma beta) / sigma = snr
 */
enum class SnrConvention
{
    variance,
    amplitude,
};

/**
 * One simulation design: rows x_i ~ N(0, sigma_cov) and
 * y = X beta_star + eps with eps ~ N(0, sigma_noise^2).
 */
struct SimulationScenario
{
    int example_id = 0;
    Index n = 100;
    std::vector<Index> group_sizes;
    Vector beta_star;
    Matrix sigma_cov;
    double snr = 3.0;
    SnrConvention snr_convention = SnrConvention::variance;
    double sigma_noise = 0;

    GroupPartition groups() const { return GroupPartition::contiguous(group_sizes); }
    void validate() const;
};

/**
 * Noise standard deviation for a target SNR: sqrt(beta^T Sigma beta / snr)
 * under the variance convention, sqrt(beta^T Sigma beta) / snr under the
 * amplitude one. Throws ConfigError when the signal is zero.
 */
double sigma_for_snr(const Vector& beta_star, const Matrix& sigma_cov, double snr,
                     SnrConvention convention = SnrConvention::variance);

/// Example designs 1-4 at n = 100 and SNR 3.
SimulationScenario build_scenario(int example_id,
                                  SnrConvention convention = SnrConvention::variance);

/// The 5x5 covariance blocks used by examples 2-4.
Matrix block_p();
Matrix block_q();

/// Draws (X, y) deterministically from `seed`. Throws DataError if Sigma is not positive definite.
Dataset sample_dataset(const SimulationScenario& scenario, std::uint64_t seed);

struct SelectionMetrics
{
    double sens = 0;
    double spec = 0;
    double model_error = 0;
    std::optional<double> test_mse;
};

/**
 * Sensitivity, specificity and model error (b - b*)^T Sigma (b - b*) of
 * `beta_hat`, which must be on the original covariate scale. Sensitivity
 * throws when beta_star has no nonzero entry; specificity is 1 when every
 * variable is important.
 */
SelectionMetrics selection_metrics(const Vector& beta_hat, const SimulationScenario& scenario,
                                   double zero_tol = selection_tolerance);

enum class TuningMode
{
    tuning_set,
    bic,
};

struct MeanSe
{
    double mean = 0;
    double se = 0;
};

MeanSe mean_and_se(const std::vector<double>& values);

struct ReplicateOptions
{
    int n_reps = 200;
    Method method = Method::les;
    TuningMode tuning = TuningMode::tuning_set;
    std::uint64_t base_seed = 0;
    unsigned threads = 0;
    TuningGrid grid;
    DfConfig df;
    Options solver;
};

struct ReplicateOutcome
{
    SelectionMetrics metrics;
    double l2_error = 0;
    bool group_support_recovered = false;
    bool converged = true;
    double max_kkt_residual = 0;
    double lambda = 0;
    double alpha = 0;
};

struct ReplicateSummary
{
    MeanSe sens;
    MeanSe spec;
    MeanSe model_error;
    MeanSe l2_error;
    double group_recovery_rate = 0;
    int used = 0;
    int failures = 0;
    double max_kkt_residual = 0;
    std::vector<ReplicateOutcome> outcomes;
};

/// Runs one replicate with seed base_seed + r.
ReplicateOutcome run_replicate(const SimulationScenario& scenario, const ReplicateOptions& opts, int r);

/**
 * Repeats draw / tune / evaluate `n_reps` times and aggregates means and
 * standard errors (sd / sqrt(reps)). Replicates whose selected fit did not
 * converge are excluded and counted; more than 5% failures throws
 * ConvergenceError.
 */
ReplicateSummary run_replicates(const SimulationScenario& scenario, const ReplicateOptions& opts);

} // namespace les
