// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <unistd.h>

#include <Eigen/Dense>

#include <les/io.hpp>
#include <les/penalty.hpp>
#include <les/simulation.hpp>
#include <les/verification.hpp>

using namespace les;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// Worst KKT residual and sweep-monotonicity violation seen by any fit in this run.
struct FitLedger
{
    double worst_kkt = 0;
    double worst_increase = 0;
    long fits = 0;

    void note(double kkt, long count = 1)
    {
        worst_kkt = std::max(worst_kkt, kkt);
        fits += count;
    }

    void note(const Fit& fit)
    {
        note(fit.kkt_residual);
        for (std::size_t s = 1; s < fit.objective_trace.size(); ++s) {
            worst_increase = std::max(worst_increase, fit.objective_trace[s] - fit.objective_trace[s - 1]);
        }
    }
};

FitLedger ledger;

struct Outcome
{
    bool pass = false;
    std::string detail;
};

std::string num(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

Outcome oracle_equivalence()
{
    const auto t0 = Clock::now();
    const auto report = check_brute_force_battery(2024, 50);
    const double elapsed = seconds_since(t0);
    ledger.note(report.max_kkt_residual, 50);
    return {report.pass && report.details.size() == 50 && elapsed <= 120,
            "50 instances, worst objective gap " + num(report.worst_margin) + " (tol 1e-6), " + num(elapsed) + " s"};
}

Outcome lasso_limit()
{
    const Dataset data = sample_dataset(build_scenario(1), 101);
    const auto [design, response] = standardize(data.X, data.y, data.groups);
    const auto report = check_lasso_limit(design, response, 0.1, {1e-1, 1e-2, 1e-3}, precise_options());
    ledger.note(report.max_kkt_residual, 4);
    std::string d;
    for (const auto& c : report.details) d += c.label + " " + num(c.margin) + "; ";
    return {report.pass, d + "final tol 1e-3"};
}

Outcome orthonormal()
{
    std::vector<OracleReport> parts;
    for (std::uint64_t s = 0; s < 10; ++s) parts.push_back(check_orthonormal_identities(1000 + s));
    const auto merged = merge_reports("orthonormal", parts);
    ledger.note(merged.max_kkt_residual, 10);
    return {merged.pass && !merged.inconclusive,
            "10 instances, worst residual " + num(merged.worst_margin) + " (tol 1e-6)"};
}

ReplicateSummary replicates(int example, Method method, TuningMode tuning, int reps, Index n, std::uint64_t seed)
{
    SimulationScenario s = build_scenario(example);
    s.n = n;
    ReplicateOptions opts;
    opts.n_reps = reps;
    opts.method = method;
    opts.tuning = tuning;
    opts.base_seed = seed;
    const auto summary = run_replicates(s, opts);
    ledger.note(summary.max_kkt_residual, reps);
    return summary;
}

Outcome simulation_example1()
{
    const auto t0 = Clock::now();
    const auto s = replicates(1, Method::les, TuningMode::tuning_set, 200, 100, 7);
    const double elapsed = seconds_since(t0);
    return {s.model_error.mean >= 0.49 && s.model_error.mean <= 0.60 && s.sens.mean >= 0.999 && elapsed <= 600,
            "ME " + num(s.model_error.mean) + " (se " + num(s.model_error.se) + ", band [0.49, 0.60]), Sens "
                + num(s.sens.mean) + ", Spec " + num(s.spec.mean) + ", " + num(elapsed) + " s"};
}

Outcome simulation_example3()
{
    const auto les_run = replicates(3, Method::les, TuningMode::tuning_set, 200, 100, 7);
    const auto lasso_run = replicates(3, Method::lasso, TuningMode::tuning_set, 200, 100, 7);
    const double joint = std::sqrt(les_run.model_error.se * les_run.model_error.se
                                   + lasso_run.model_error.se * lasso_run.model_error.se);
    const double gap = lasso_run.model_error.mean - les_run.model_error.mean;
    return {gap >= 2 * joint,
            "ME LES " + num(les_run.model_error.mean) + " vs LASSO " + num(lasso_run.model_error.mean)
                + ", separation " + num(gap / joint) + " joint SE (need 2)"};
}

Outcome df_sanity()
{
    std::mt19937_64 gen(99);
    std::normal_distribution<double> normal;
    auto gaussian = [&](Index r, Index c) {
        Matrix M(r, c);
        for (Index j = 0; j < c; ++j)
            for (Index i = 0; i < r; ++i) M(i, j) = normal(gen);
        return M;
    };

    const Vector y0 = gaussian(100, 1).col(0);
    DfConfig cfg;
    const double identity = randomized_trace_df([](const Vector& v) { return v; }, y0, cfg);

    double ols_total = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const Matrix X = gaussian(100, 5);
        const Vector y = X * Vector::Ones(5) + gaussian(100, 1).col(0);
        const auto qr = X.colPivHouseholderQr();
        cfg.seed = seed;
        ols_total += randomized_trace_df([&](const Vector& v) -> Vector { return X * qr.solve(v); }, y, cfg);
    }
    const double ols_mean = ols_total / 50;

    double gap = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Matrix X = gaussian(100, 10);
        Vector beta = Vector::Zero(10);
        beta.head(4) << 1.5, -1, 0.8, 0.5;
        const auto [design, response] = standardize(X, Vector(X * beta + gaussian(100, 1).col(0)),
                                                    GroupPartition::singletons(10));
        const double gamma = 0.05 * lasso_lambda_max(design, response);
        const Fit fit = fit_lasso(design, response, gamma, Options{});
        cfg.seed = seed;
        const double df = randomized_trace_df(
            [&](const Vector& v) -> Vector { return design.X * fit_lasso(design, Centered{v, 0.0}, gamma, Options{}).beta; },
            response.y, cfg);
        gap += std::abs(df - double(fit.active_variables.size()));
    }
    gap /= 20;
    return {std::abs(identity - 100) <= 1e-10 && std::abs(ols_mean - 5) <= 0.5 && gap <= 1.5,
            "identity " + num(identity) + ", OLS mean " + num(ols_mean) + " (|.-5| <= 0.5), LASSO mean |df-nnz| "
                + num(gap) + " (<= 1.5)"};
}

Outcome property_suites()
{
    std::mt19937_64 gen(5);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unit(0, 1);
    const auto groups = GroupPartition::contiguous({4, 1, 3, 5});
    const Penalty config = Penalty::make(groups, 1.0, 1.3);
    auto J = [&](const Vector& b) { return les_penalty(b, config, groups); };
    auto draw = [&] {
        Vector b(13);
        for (Index j = 0; j < 13; ++j) b(j) = 2 * normal(gen);
        return b;
    };

    double convexity = -1e300;
    for (int i = 0; i < 1000; ++i) {
        const Vector a = draw(), b = draw();
        const double t = unit(gen);
        convexity = std::max(convexity, J(t * a + (1 - t) * b) - t * J(a) - (1 - t) * J(b));
    }
    bool bounds = true;
    const double floor = J(Vector::Zero(13));
    for (int i = 0; i < 1000; ++i) {
        const Vector b = draw();
        for (Index k = 0; k < groups.n_groups(); ++k) {
            const Vector bk = b(groups.members(k));
            const double m = config.alpha * bk.cwiseAbs().maxCoeff();
            const double term = log_sum_exp_abs(bk, config.alpha);
            bounds = bounds && m <= term + 1e-12 && term <= m + std::log(double(bk.size())) + 1e-12;
        }
        bounds = bounds && J(b) > floor;
    }
    bounds = bounds && std::abs(floor - (config.weights(0) * std::log(4.0) + config.weights(2) * std::log(3.0)
                                         + config.weights(3) * std::log(5.0)))
                           <= 1e-12;

    const auto F = random_split_objective(5, 3, 0.4, 1.5);
    const auto grad = check_gradient(F, 100, 1e-6, 3);

    bool grouping = true, zero = true;
    double grouping_margin = -1e300;
    int ex2_fits = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Dataset data = sample_dataset(build_scenario(2), 300 + seed);
        const auto [design, response] = standardize(data.X, data.y, data.groups);
        for (double alpha : {0.25, 1.0, 4.0}) {
            Penalty c = Penalty::make(design.groups, 0.0, alpha);
            const double top = lambda_max(design, response, c);
            for (double ratio : {0.5, 0.1, 0.02}) {
                c.lambda = ratio * top;
                const Fit fit = fit_les(design, response, c, Options{});
                ledger.note(fit);
                const auto r = check_grouping_bound(fit, design, response, c);
                grouping = grouping && r.pass && fit.converged;
                grouping_margin = std::max(grouping_margin, r.worst_margin);
                ++ex2_fits;
            }
            c.lambda = 1.01 * top;
            const Fit at_top = fit_les(design, response, c, Options{});
            ledger.note(at_top);
            zero = zero && at_top.beta.cwiseAbs().maxCoeff() <= 1e-10;
        }
    }
    const bool monotone = ledger.worst_increase <= 1e-12;
    return {convexity <= 1e-10 && bounds && grad.pass && grouping && zero && monotone,
            "convexity slack " + num(convexity) + ", bounds/floor " + (bounds ? "ok" : "violated") + ", gradient "
                + num(grad.worst_margin) + ", bound on " + std::to_string(ex2_fits) + " Ex2 fits (worst slack "
                + num(grouping_margin) + "), zero above lambda_max " + (zero ? "ok" : "violated")
                + ", worst sweep increase " + num(ledger.worst_increase)};
}

Outcome consistency_trend()
{
    const auto small = replicates(1, Method::les, TuningMode::bic, 100, 100, 11);
    const auto large = replicates(1, Method::les, TuningMode::bic, 100, 400, 11);
    return {large.l2_error.mean < small.l2_error.mean && large.group_recovery_rate >= small.group_recovery_rate,
            "L2 error " + num(small.l2_error.mean) + " -> " + num(large.l2_error.mean) + ", group recovery "
                + num(small.group_recovery_rate) + " -> " + num(large.group_recovery_rate)};
}

std::string slurp(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome determinism()
{
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / ("les_accept_" + std::to_string(::getpid()));
    fs::create_directories(dir);

    const Dataset data = sample_dataset(build_scenario(2), 5);
    std::ofstream csv(dir / "data.csv");
    for (Index j = 0; j < data.X.cols(); ++j) csv << "x" << j + 1 << ",";
    csv << "y\n";
    for (Index i = 0; i < data.X.rows(); ++i) {
        for (Index j = 0; j < data.X.cols(); ++j) csv << format_number(data.X(i, j)) << ",";
        csv << format_number(data.y(i)) << "\n";
    }
    csv.close();
    std::ofstream groups(dir / "groups.csv");
    for (Index j = 0; j < data.X.cols(); ++j) groups << "x" << j + 1 << ",G" << j / 5 + 1 << "\n";
    groups.close();

    const std::string in = " --input " + (dir / "data.csv").string() + " --groups " + (dir / "groups.csv").string();
    const std::vector<std::string> commands{
        "fit" + in + " --lambda 0.1 --alpha 2",
        "tune" + in + " --criterion cv:5 --seed 3",
        "tune" + in + " --criterion bic --grid-alphas 0.5,2 --seed 4",
        "df" + in + " --lambda 0.1 --seed 9",
        "simulate --example 1 --reps 6 --seed 2",
        "simulate --example 1 --reps 4 --tuning bic --method lasso --seed 2 --format structured-text",
        "verify --all --seed 1",
    };
    int identical = 0;
    std::string failed;
    for (std::size_t c = 0; c < commands.size(); ++c) {
        std::string outputs[2];
        int codes[2];
        for (int rep = 0; rep < 2; ++rep) {
            const std::string out = (dir / ("out" + std::to_string(c) + "_" + std::to_string(rep))).string();
            const std::string cmd = std::string(LES_CLI) + " " + commands[c] + " --out " + out + " 2>/dev/null";
            codes[rep] = std::system(cmd.c_str());
            outputs[rep] = slurp(out);
        }
        if (codes[0] == 0 && codes[1] == 0 && !outputs[0].empty() && outputs[0] == outputs[1]) ++identical;
        else failed += " [" + commands[c] + "]";
    }
    fs::remove_all(dir);
    return {identical == static_cast<int>(commands.size()),
            std::to_string(identical) + "/" + std::to_string(commands.size()) + " commands byte-identical" + failed};
}

} // namespace

int main()
{
    struct Criterion
    {
        int id;
        const char* name;
        std::function<Outcome()> run;
    };
    // criterion 2 is evaluated last over every fit the others produced
    const std::vector<Criterion> criteria{
        {1, "oracle equivalence", oracle_equivalence},
        {3, "lasso limit as alpha -> 0", lasso_limit},
        {4, "orthonormal identities", orthonormal},
        {5, "example 1 reproduction", simulation_example1},
        {6, "example 3 ordering", simulation_example3},
        {7, "df estimator sanity", df_sanity},
        {8, "property suites", property_suites},
        {9, "consistency trend", consistency_trend},
        {10, "determinism", determinism},
    };

    std::vector<std::pair<int, std::string>> lines;
    bool all = true;
    auto record = [&](int id, const char* name, const Outcome& o) {
        all = all && o.pass;
        char head[96];
        std::snprintf(head, sizeof head, "%s [%d] %s: ", o.pass ? "PASS" : "FAIL", id, name);
        lines.emplace_back(id, head + o.detail);
        std::cout << lines.back().second << std::endl;
    };
    for (const auto& c : criteria) {
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        record(c.id, c.name, o);
    }
    record(2, "KKT optimality",
           {ledger.worst_kkt <= 1e-4, "worst residual " + num(ledger.worst_kkt) + " over " + std::to_string(ledger.fits)
                                          + " fit batches (tol 1e-4)"});

    std::sort(lines.begin(), lines.end());
    std::cout << "\nsummary\n";
    for (const auto& l : lines) std::cout << l.second << '\n';
    return all ? 0 : 1;
}
