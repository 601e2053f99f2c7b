#include "support.hpp"

#include <les/simulation.hpp>
#include <les/verification.hpp>

using namespace les;
using les::test::gaussian;
using les::test::random_problem;
using les::test::require_valid_fit;
using les::test::rng;

namespace {

Options tight()
{
    Options o;
    o.outer_tol = 1e-10;
    o.inner_tol = 1e-11;
    o.max_sweeps = 5000;
    o.inner_max_iter = 20000;
    return o;
}

/// Wraps raw arrays in a design without standardizing, for subproblem oracles.
Design raw_design(const Matrix& A)
{
    Design d;
    d.X = A;
    d.groups = GroupPartition::contiguous({A.cols()});
    d.column_means = Vector::Zero(A.cols());
    d.column_scales = Vector::Ones(A.cols());
    return d;
}

} // namespace

TEST_CASE("soft_threshold")
{
    CHECK(soft_threshold(3.0, 1.0) == 2.0);
    CHECK(soft_threshold(-3.0, 1.0) == -2.0);
    CHECK(soft_threshold(0.5, 1.0) == 0.0);
}

TEST_CASE("fit_les without penalty is least squares")
{
    const auto [design, response] = random_problem(50, {2, 3}, 21);
    const Penalty config = Penalty::make(design.groups, 0.0, 1.0);
    const Fit fit = fit_les(design, response, config, Options{});
    require_valid_fit(fit, design, response, config);
    CHECK((fit.beta - les::test::ols(design, response)).cwiseAbs().maxCoeff() <= 1e-5);
}

TEST_CASE("fit_les at or above lambda_max is exactly zero")
{
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto [design, response] = random_problem(40, {3, 2, 4}, seed);
        Penalty config = Penalty::make(design.groups, 0.0, 0.5 + seed);
        config.lambda = lambda_max(design, response, config);
        for (double factor : {1.0, 1.01, 10.0}) {
            Penalty c = config;
            c.lambda *= factor;
            const Fit fit = fit_les(design, response, c, Options{});
            require_valid_fit(fit, design, response, c);
            CHECK(fit.beta.cwiseAbs().maxCoeff() <= 1e-10);
            CHECK(kkt_residual(design, response, Vector(Vector::Zero(9)), c) == doctest::Approx(0).scale(1));
        }
        Penalty below = config;
        below.lambda *= 0.95;
        CHECK(fit_les(design, response, below, Options{}).active_variables.size() > 0);
    }
}

TEST_CASE("fit_les matches a 2001 x 2001 grid oracle")
{
    const auto [design, response] = random_problem(20, {2}, 4);
    const Penalty config{0.1, 1.0, Vector::Ones(1)};
    const Fit fit = fit_les(design, response, config, Options{});
    require_valid_fit(fit, design, response, config);
    const Vector grid = brute_force_fit(design, response, config, 3.0, 2001);
    CHECK(fit.objective <= objective(design, response, grid, config) + 1e-6);
}

TEST_CASE("solve_group_subproblem examples")
{
    auto gen = rng(9);
    const Options opts = tight();

    SUBCASE("zero partial residual gives zero")
    {
        const SubproblemData<double> sub{gaussian(15, 3, gen), Vector::Zero(15)};
        const auto sol = solve_group_subproblem(sub, 0.3, 1.0, 1.0, Vector(gaussian(3, 1, gen).col(0)), opts);
        CHECK(sol.converged);
        CHECK(sol.beta.cwiseAbs().maxCoeff() <= 1e-10);
    }
    SUBCASE("single column reduces to soft thresholding")
    {
        Vector a = gaussian(30, 1, gen).col(0);
        a *= std::sqrt(30.0) / a.norm();
        const Vector c = 2.0 * a + gaussian(30, 1, gen).col(0);
        const SubproblemData<double> sub{a, c};
        for (double lambda : {0.01, 0.5, 1.5, 5.0}) {
            const auto sol = solve_group_subproblem(sub, lambda, 0.7, 1.3, Vector(Vector::Zero(1)), opts);
            CHECK(sol.beta(0) == doctest::Approx(soft_threshold(a.dot(c) / 30, lambda * 0.7 * 1.3)).epsilon(1e-6).scale(1));
        }
    }
    SUBCASE("random 20 x 3 subproblem against the grid oracle")
    {
        for (std::uint64_t s = 0; s < 5; ++s) {
            auto g = rng(100 + s);
            const Matrix A = gaussian(20, 3, g);
            const Vector c = A * Vector::LinSpaced(3, -1, 1.5) + gaussian(20, 1, g).col(0);
            const double lambda = 0.05 + 0.1 * s, alpha = 1.5, w = 1.0;
            const auto sol = solve_group_subproblem(SubproblemData<double>{A, c}, lambda, alpha, w,
                                                    Vector(Vector::Zero(3)), Options{});
            const Design d = raw_design(A);
            const Centered r{c, 0.0};
            const Penalty config{lambda, alpha, Vector::Constant(1, w)};
            double box = 1.5 * A.colPivHouseholderQr().solve(c).cwiseAbs().maxCoeff();
            Vector oracle;
            for (;; box *= 2) {
                try {
                    oracle = brute_force_fit(d, r, config, box, 101);
                    break;
                } catch (const DataError&) {
                }
            }
            CHECK(objective(d, r, sol.beta, config) <= objective(d, r, oracle, config) + 1e-6);
        }
    }
}

TEST_CASE("bb_gradient_projection examples")
{
    SUBCASE("optimal start is a fixed point")
    {
        const auto F = random_split_objective(4, 3, 0.2, 1.0);
        const auto first = bb_gradient_projection(F, Vector(Vector::Zero(8)), tight());
        REQUIRE(first.converged);
        const auto again = bb_gradient_projection(F, first.z, tight());
        CHECK(again.converged);
        CHECK(again.iterations <= 2);
        CHECK((again.z - first.z).norm() <= 1e-10);
    }
    SUBCASE("gradient matches finite differences")
    {
        const auto F = random_split_objective(5, 8, 0.4, 2.0);
        CHECK(check_gradient(F, 100, 1e-6, 8).pass);
        CHECK(check_gradient_boundary(F, 1e-7).pass);
        const auto Q = random_split_objective(5, 9, 0.0, 2.0);
        CHECK(check_gradient(Q, 50, 1e-4, 9, 1e-10).pass);
        CHECK_THROWS_AS(check_gradient(F, 5, 1e-2, 1), ConfigError);
    }
    SUBCASE("penalty-free instance converges to least squares")
    {
        const auto F = random_split_objective(4, 12, 0.0, 1.0);
        const Vector b_star = F.gram().ldlt().solve(F.linear());
        const auto state = bb_gradient_projection(F, Vector(Vector::Ones(8)), tight());
        CHECK(state.converged);
        CHECK((state.beta() - b_star).cwiseAbs().maxCoeff() <= 1e-6);
    }
    SUBCASE("sufficient-decrease variant reaches the same point")
    {
        const auto F = random_split_objective(4, 5, 0.3, 1.0);
        Options margin = tight();
        margin.armijo_margin = 1e-4;
        const auto a = bb_gradient_projection(F, Vector(Vector::Zero(8)), tight());
        const auto b = bb_gradient_projection(F, Vector(Vector::Zero(8)), margin);
        CHECK(std::abs(a.value - b.value) <= 1e-10);
    }
    SUBCASE("rejects infeasible starts")
    {
        const auto F = random_split_objective(2, 1, 0.3, 1.0);
        CHECK_THROWS_AS(bb_gradient_projection(F, Vector(Vector::Constant(4, -1.0)), Options{}), std::invalid_argument);
    }
}

TEST_CASE("solver options validation")
{
    Options o;
    o.backtrack_rho = 1.0;
    CHECK_THROWS_AS(o.validate(), ConfigError);
    o = Options{};
    o.bb_phi_min = 2.0;
    CHECK_THROWS_AS(o.validate(), ConfigError);
    o = Options{};
    o.outer_tol = 0;
    CHECK_THROWS_AS(o.validate(), ConfigError);
}

TEST_CASE("kkt_residual examples")
{
    const auto [design, response] = random_problem(30, {2, 2}, 14);
    const Penalty off = Penalty::make(design.groups, 0.0, 1.0);
    CHECK(kkt_residual(design, response, les::test::ols(design, response), off) <= 1e-10);
    const Penalty on = Penalty::make(design.groups, 0.1, 1.0);
    CHECK(kkt_residual(design, response, Vector(Vector::Ones(4)), on) > 1e-3);
}

TEST_CASE("non-convergence is reported, not thrown")
{
    const auto [design, response] = random_problem(40, {3, 3}, 2);
    const Penalty config = Penalty::make(design.groups, 0.01, 1.0);
    Options o;
    o.max_sweeps = 1;
    o.outer_tol = 1e-14;
    const Fit fit = fit_les(design, response, config, o);
    CHECK_FALSE(fit.converged);
    CHECK(fit.sweeps == 1);
}

TEST_CASE("fit_lasso examples")
{
    const auto [design, response] = random_problem(50, {5}, 31);
    SUBCASE("gamma = 0 is least squares")
    {
        const Fit fit = fit_lasso(design, response, 0.0, Options{});
        CHECK(fit.converged);
        CHECK((fit.beta - les::test::ols(design, response)).cwiseAbs().maxCoeff() <= 1e-6);
    }
    SUBCASE("gamma at lambda_max is zero")
    {
        const Fit fit = fit_lasso(design, response, lasso_lambda_max(design, response), Options{});
        CHECK(fit.beta.cwiseAbs().maxCoeff() <= 1e-12);
    }
    SUBCASE("kkt within 1e-6")
    {
        for (double gamma : {0.01, 0.1, 0.3}) {
            const Fit fit = fit_lasso(design, response, gamma, Options{});
            CHECK(fit.converged);
            CHECK(lasso_kkt_residual(design, response, fit.beta, gamma) <= 1e-6);
        }
    }
    SUBCASE("orthonormal design gives soft thresholding")
    {
        auto gen = rng(4);
        Matrix G = gaussian(40, 4, gen);
        G.rowwise() -= G.colwise().mean();
        const Matrix Q = Eigen::HouseholderQR<Matrix>(G).householderQ() * Matrix::Identity(40, 4);
        const auto [d, r] = standardize(Matrix(std::sqrt(40.0) * Q),
                                        Vector(Q * Vector::LinSpaced(4, -3, 3) * 6 + gaussian(40, 1, gen).col(0)),
                                        GroupPartition::singletons(4));
        const Vector score = d.X.transpose() * r.y / 40;
        const Fit fit = fit_lasso(d, r, 0.2, Options{});
        for (Index j = 0; j < 4; ++j) CHECK(fit.beta(j) == doctest::Approx(soft_threshold(score(j), 0.2)).epsilon(1e-9).scale(1));
    }
}

TEST_CASE("fit invariants")
{
    SUBCASE("warm start from a perturbed solution reaches the same optimum")
    {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const auto [design, response] = random_problem(60, {4, 3, 5}, 40 + seed);
            Penalty config = Penalty::make(design.groups, 0.0, 0.5 + 0.5 * seed);
            config.lambda = 0.1 * lambda_max(design, response, config);
            const Fit cold = fit_les(design, response, config, tight());
            require_valid_fit(cold, design, response, config);
            auto gen = rng(seed);
            const Vector start = cold.beta + 0.5 * gaussian(12, 1, gen).col(0);
            const Fit warm = fit_les(design, response, config, tight(), std::optional<Vector>(start));
            require_valid_fit(warm, design, response, config);
            CHECK(std::abs(cold.objective - warm.objective) <= 1e-8);
        }
    }
    SUBCASE("permuting columns within a group permutes the estimate")
    {
        auto gen = rng(77);
        const Matrix X = gaussian(50, 7, gen);
        const Vector y = X.leftCols(4) * Vector::LinSpaced(4, 2, -1) + gaussian(50, 1, gen).col(0);
        const auto groups = GroupPartition::contiguous({4, 3});
        const auto [d1, r1] = standardize(X, y, groups);
        Matrix Xp = X;
        Xp.col(0).swap(Xp.col(3));
        Xp.col(1).swap(Xp.col(2));
        const auto [d2, r2] = standardize(Xp, y, groups);
        Penalty config = Penalty::make(groups, 0.0, 2.0);
        config.lambda = 0.05 * lambda_max(d1, r1, config);
        const Fit a = fit_les(d1, r1, config, tight());
        const Fit b = fit_les(d2, r2, config, tight());
        require_valid_fit(a, d1, r1, config);
        require_valid_fit(b, d2, r2, config);
        Vector back = b.beta;
        std::swap(back(0), back(3));
        std::swap(back(1), back(2));
        CHECK((back - a.beta).cwiseAbs().maxCoeff() <= 1e-8);
    }
    SUBCASE("grouping-effect bound on example 2 fits")
    {
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            const Dataset data = sample_dataset(build_scenario(2), seed);
            const auto [design, response] = standardize(data.X, data.y, data.groups);
            for (double alpha : {0.5, 1.0, 4.0}) {
                Penalty config = Penalty::make(design.groups, 0.0, alpha);
                for (double ratio : {0.5, 0.1, 0.02}) {
                    config.lambda = ratio * lambda_max(design, response, config);
                    const Fit fit = fit_les(design, response, config, Options{});
                    require_valid_fit(fit, design, response, config);
                    const auto report = check_grouping_bound(fit, design, response, config);
                    CHECK(report.pass);
                }
            }
        }
    }
    SUBCASE("duplicated column in a group gets equal coefficients")
    {
        auto gen = rng(5);
        Matrix X = gaussian(60, 4, gen);
        X.col(1) = X.col(0) + 1e-7 * gaussian(60, 1, gen).col(0);
        const Vector y = 2 * X.col(0) - X.col(3) + gaussian(60, 1, gen).col(0);
        const auto [design, response] = standardize(X, y, GroupPartition::contiguous({2, 2}));
        const double corr = design.X.col(0).dot(design.X.col(1)) / 60;
        CHECK(1 - corr <= 1e-12);
        Penalty config = Penalty::make(design.groups, 0.0, 1.0);
        config.lambda = 0.05 * lambda_max(design, response, config);
        const Fit fit = fit_les(design, response, config, tight());
        require_valid_fit(fit, design, response, config);
        CHECK(std::abs(fit.beta(0) - fit.beta(1)) <= 1e-5);
        CHECK(check_grouping_bound(fit, design, response, config).pass);
    }
}
