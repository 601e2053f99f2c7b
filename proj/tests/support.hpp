#pragma once
#include <doctest.h>

#include <random>

#include <Eigen/Dense>

#include <les/penalty.hpp>
#include <les/tuning.hpp>

namespace les::test {

inline std::mt19937_64 rng(std::uint64_t seed) { return std::mt19937_64(seed * 7919 + 17); }

inline Matrix gaussian(Index rows, Index cols, std::mt19937_64& gen)
{
    std::normal_distribution<double> normal;
    Matrix M(rows, cols);
    for (Index j = 0; j < cols; ++j) {
        for (Index i = 0; i < rows; ++i) M(i, j) = normal(gen);
    }
    return M;
}

/// Standardized random regression problem with a sparse signal in the first group.
inline std::pair<Design, Centered> random_problem(Index n, const std::vector<Index>& sizes, std::uint64_t seed,
                                                  double noise = 1.0)
{
    auto gen = rng(seed);
    Index p = 0;
    for (Index s : sizes) p += s;
    const Matrix X = gaussian(n, p, gen);
    Vector beta = Vector::Zero(p);
    for (Index j = 0; j < std::min<Index>(3, p); ++j) beta(j) = 1.5 - j;
    const Vector y = X * beta + noise * gaussian(n, 1, gen).col(0);
    return standardize(X, y, GroupPartition::contiguous(sizes));
}

/// Checks every fit contract: KKT <= 1e-4 when converged, non-increasing sweeps, objective consistency.
inline void require_valid_fit(const Fit& fit, const Design& design, const Centered& response, const Penalty& config)
{
    REQUIRE(fit.converged);
    CHECK(fit.kkt_residual <= 1e-4);
    CHECK(kkt_residual(design, response, fit.beta, config) == doctest::Approx(fit.kkt_residual).epsilon(1e-9).scale(1));
    for (std::size_t s = 1; s < fit.objective_trace.size(); ++s) {
        CHECK(fit.objective_trace[s] <= fit.objective_trace[s - 1] + 1e-12);
    }
    const double recomputed = objective(design, response, fit.beta, config);
    CHECK(std::abs(fit.objective - recomputed) <= 1e-10 * std::max(1.0, std::abs(recomputed)));
}

/// Ordinary least squares on a standardized design.
inline Vector ols(const Design& design, const Centered& response)
{
    return (design.X.transpose() * design.X).ldlt().solve(design.X.transpose() * response.y);
}

} // namespace les::test
