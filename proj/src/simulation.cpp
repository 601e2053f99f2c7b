#include <les/simulation.hpp>

#include <Eigen/Cholesky>
#include <cmath>
#include <random>
#include <string>

#include <les/parallel.hpp>

namespace les {

namespace {

// Stream for the independent tuning set of a replicate.
constexpr std::uint64_t tuning_stream = 0x9E3779B97F4A7C15ull;

Matrix block_diagonal(const std::vector<Matrix>& blocks)
{
    Index size = 0;
    for (const auto& b : blocks) size += b.rows();
    Matrix out = Matrix::Zero(size, size);
    Index at = 0;
    for (const auto& b : blocks) {
        out.block(at, at, b.rows(), b.cols()) = b;
        at += b.rows();
    }
    return out;
}

Vector from_list(std::initializer_list<double> values)
{
    Vector v(static_cast<Index>(values.size()));
    Index i = 0;
    for (double x : values) v(i++) = x;
    return v;
}

} // namespace

Matrix block_p()
{
    Matrix P(5, 5);
    P << 1, .7, .7, .1, .1,
        .7, 1, .7, .1, .1,
        .7, .7, 1, .1, .1,
        .1, .1, .1, 1, .7,
        .1, .1, .1, .7, 1;
    return P;
}

Matrix block_q()
{
    Matrix Q = Matrix::Constant(5, 5, 0.7);
    Q.diagonal().setOnes();
    return Q;
}

double sigma_for_snr(const Vector& beta_star, const Matrix& sigma_cov, double snr,
                     SnrConvention convention)
{
    if (!(snr > 0)) throw ConfigError("snr must be positive");
    if (beta_star.size() != sigma_cov.rows()) throw std::invalid_argument("snr: dimension mismatch");
    const double signal = beta_star.dot(sigma_cov * beta_star);
    if (!(signal > 0)) throw ConfigError("snr is undefined for a zero signal");
    if (convention == SnrConvention::amplitude) return std::sqrt(signal) / snr;
    return std::sqrt(signal / snr);
}

void SimulationScenario::validate() const
{
    Index p = 0;
    for (Index s : group_sizes) p += s;
    if (p != beta_star.size() || sigma_cov.rows() != p || sigma_cov.cols() != p) {
        throw ConfigError("scenario dimensions are inconsistent");
    }
    if (n < 2) throw ConfigError("scenario needs n >= 2");
    if (!(sigma_noise >= 0)) throw ConfigError("noise level must be non-negative");
}

SimulationScenario build_scenario(int example_id, SnrConvention convention)
{
    SimulationScenario s;
    s.example_id = example_id;
    s.snr_convention = convention;
    s.n = 100;
    s.snr = 3.0;
    const Matrix P = block_p();
    const Matrix Q = block_q();
    switch (example_id) {
    case 1:
        s.group_sizes = {5, 5, 5, 5, 5};
        s.sigma_cov = Matrix::Identity(25, 25);
        s.beta_star = Vector::Zero(25);
        s.beta_star.head(5) = from_list({2, 2, 2, -2, -2});
        break;
    case 2:
        s.group_sizes = {5, 5, 5, 5, 5};
        s.sigma_cov = block_diagonal({P, P, Q, Q, Q});
        s.beta_star = Vector::Zero(25);
        s.beta_star.head(10) = from_list({2, 2, 2, 0, 0, 2, 2, 2, 0, 0});
        break;
    case 3:
        s.group_sizes = {5, 5, 5, 5, 5};
        s.sigma_cov = block_diagonal({P, P, Q, Q, Q});
        s.beta_star = Vector::Zero(25);
        s.beta_star.head(20) = from_list({0, 0, 0, 2, 2, 0, 0, 0, 2, 2, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1});
        break;
    case 4: {
        s.group_sizes = {10, 10, 5, 10, 10, 5};
        const Matrix sigma = block_diagonal({P, P, Q, Q, Q});
        s.sigma_cov = block_diagonal({sigma, sigma});
        s.beta_star = Vector::Zero(50);
        s.beta_star.head(25) = from_list({0, 0, 0, 2, 2, 0, 0, 0, 2, 2,
                                          1, 1, 1, 1, 1, 0, 0, 0, 0, 0,
                                          1, 1, 1, 1, 1});
        break;
    }
    default:
        throw ConfigError("unknown example id " + std::to_string(example_id));
    }
    s.sigma_noise = sigma_for_snr(s.beta_star, s.sigma_cov, s.snr, convention);
    return s;
}

Dataset sample_dataset(const SimulationScenario& scenario, std::uint64_t seed)
{
    scenario.validate();
    const Eigen::LLT<Matrix> llt(scenario.sigma_cov);
    if (llt.info() != Eigen::Success) throw DataError("scenario covariance is not positive definite");
    const Matrix L = llt.matrixL();

    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    std::mt19937_64 gen(seq);
    std::normal_distribution<double> normal;

    const Index n = scenario.n;
    const Index p = scenario.beta_star.size();
    Matrix Z(n, p);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < p; ++j) Z(i, j) = normal(gen);
    }
    Dataset data;
    data.X = Z * L.transpose();
    data.y = data.X * scenario.beta_star;
    if (scenario.sigma_noise > 0) {
        for (Index i = 0; i < n; ++i) data.y(i) += scenario.sigma_noise * normal(gen);
    }
    data.groups = scenario.groups();
    return data;
}

SelectionMetrics selection_metrics(const Vector& beta_hat, const SimulationScenario& scenario,
                                   double zero_tol)
{
    const Vector& truth = scenario.beta_star;
    if (beta_hat.size() != truth.size()) throw std::invalid_argument("metrics: dimension mismatch");
    Index important = 0, selected_important = 0, unimportant = 0, removed_unimportant = 0;
    for (Index j = 0; j < truth.size(); ++j) {
        const bool selected = std::abs(beta_hat(j)) > zero_tol;
        if (truth(j) != 0) {
            ++important;
            if (selected) ++selected_important;
        } else {
            ++unimportant;
            if (!selected) ++removed_unimportant;
        }
    }
    if (important == 0) throw ConfigError("sensitivity is undefined without important variables");
    SelectionMetrics m;
    m.sens = double(selected_important) / double(important);
    m.spec = unimportant == 0 ? 1.0 : double(removed_unimportant) / double(unimportant);
    const Vector diff = beta_hat - truth;
    m.model_error = std::max(0.0, diff.dot(scenario.sigma_cov * diff));
    return m;
}

MeanSe mean_and_se(const std::vector<double>& values)
{
    MeanSe out;
    if (values.empty()) return out;
    const auto count = static_cast<double>(values.size());
    double sum = 0;
    for (double v : values) sum += v;
    out.mean = sum / count;
    if (values.size() > 1) {
        double ss = 0;
        for (double v : values) ss += (v - out.mean) * (v - out.mean);
        out.se = std::sqrt(ss / (count - 1)) / std::sqrt(count);
    }
    return out;
}

ReplicateOutcome run_replicate(const SimulationScenario& scenario, const ReplicateOptions& opts, int r)
{
    const std::uint64_t seed = opts.base_seed + static_cast<std::uint64_t>(r);
    const Dataset train = sample_dataset(scenario, seed);

    TuningGrid grid = opts.grid;
    std::optional<Dataset> tuning_set;
    DfConfig df = opts.df;
    df.seed = seed;
    if (opts.tuning == TuningMode::tuning_set) {
        grid.criterion = Criterion::validation;
        tuning_set = sample_dataset(scenario, seed ^ tuning_stream);
    } else {
        grid.criterion = Criterion::bic;
    }

    const TuningResult tuned = grid_search(train, grid, tuning_set, df, opts.solver, opts.method);
    const Vector beta = tuned.design.to_original_scale(tuned.fit.beta);

    ReplicateOutcome out;
    out.metrics = selection_metrics(beta, scenario);
    out.l2_error = (beta - scenario.beta_star).norm();
    out.converged = tuned.fit.converged;
    out.max_kkt_residual = tuned.max_kkt_residual;
    out.lambda = tuned.best().lambda;
    out.alpha = tuned.best().alpha;

    const GroupPartition groups = scenario.groups();
    out.group_support_recovered = true;
    for (Index k = 0; k < groups.n_groups(); ++k) {
        bool truly_active = false, fitted_active = false;
        for (Index j : groups.members(k)) {
            truly_active = truly_active || scenario.beta_star(j) != 0;
            fitted_active = fitted_active || std::abs(beta(j)) > selection_tolerance;
        }
        if (truly_active != fitted_active) out.group_support_recovered = false;
    }
    return out;
}

ReplicateSummary run_replicates(const SimulationScenario& scenario, const ReplicateOptions& opts)
{
    if (opts.n_reps < 2) throw ConfigError("need at least 2 replicates");
    scenario.validate();

    ReplicateSummary summary;
    summary.outcomes.resize(static_cast<std::size_t>(opts.n_reps));
    parallel_for(summary.outcomes.size(), opts.threads, [&](std::size_t r) {
        summary.outcomes[r] = run_replicate(scenario, opts, static_cast<int>(r));
    });

    std::vector<double> sens, spec, me, l2;
    int recovered = 0;
    for (const auto& o : summary.outcomes) {
        summary.max_kkt_residual = std::max(summary.max_kkt_residual, o.max_kkt_residual);
        if (!o.converged) {
            ++summary.failures;
            continue;
        }
        sens.push_back(o.metrics.sens);
        spec.push_back(o.metrics.spec);
        me.push_back(o.metrics.model_error);
        l2.push_back(o.l2_error);
        if (o.group_support_recovered) ++recovered;
    }
    if (summary.failures * 20 > opts.n_reps) {
        throw ConvergenceError(std::to_string(summary.failures) + " of " + std::to_string(opts.n_reps)
                               + " replicates failed to converge");
    }
    summary.used = static_cast<int>(sens.size());
    summary.sens = mean_and_se(sens);
    summary.spec = mean_and_se(spec);
    summary.model_error = mean_and_se(me);
    summary.l2_error = mean_and_se(l2);
    summary.group_recovery_rate = summary.used > 0 ? double(recovered) / summary.used : 0.0;
    return summary;
}

} // namespace les
