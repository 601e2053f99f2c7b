#include <les/verification.hpp>

#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <les/parallel.hpp>
#include <les/penalty.hpp>

namespace les {

namespace {

std::mt19937_64 make_rng(std::uint64_t seed, std::uint32_t stream)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
    return std::mt19937_64(seq);
}

Matrix gaussian_matrix(Index rows, Index cols, std::mt19937_64& gen)
{
    std::normal_distribution<double> normal;
    Matrix M(rows, cols);
    for (Index j = 0; j < cols; ++j) {
        for (Index i = 0; i < rows; ++i) M(i, j) = normal(gen);
    }
    return M;
}

std::string fmt(double v)
{
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

/// Quadratic-form evaluation of the public objective for repeated use.
class ObjectiveOracle
{
public:
    ObjectiveOracle(const Design& design, const Centered& response, const Penalty& config)
        : config_(config), groups_(design.groups)
    {
        const double n = static_cast<double>(design.n());
        gram_ = design.X.transpose() * design.X / n;
        linear_ = design.X.transpose() * response.y / n;
        constant_ = response.y.squaredNorm() / (2 * n);
    }

    double operator()(const Vector& b) const
    {
        double v = 0.5 * b.dot(gram_ * b) - linear_.dot(b) + constant_;
        if (config_.lambda != 0) v += config_.lambda * les_penalty(b, config_, groups_);
        return v;
    }

private:
    Penalty config_;
    GroupPartition groups_;
    Matrix gram_;
    Vector linear_;
    double constant_ = 0;
};

/// Best point of a uniform grid with `m` points per axis on center +- half.
std::pair<Vector, double> grid_minimum(const ObjectiveOracle& f, const Vector& center, double half, int m)
{
    const Index p = center.size();
    std::vector<int> digit(static_cast<std::size_t>(p), 0);
    const double step = m > 1 ? 2 * half / (m - 1) : 0.0;
    Vector b(p);
    Vector best = center;
    double best_value = std::numeric_limits<double>::infinity();
    while (true) {
        for (Index j = 0; j < p; ++j) b(j) = center(j) - half + step * digit[static_cast<std::size_t>(j)];
        const double v = f(b);
        if (v < best_value) {
            best_value = v;
            best = b;
        }
        Index j = 0;
        while (j < p && ++digit[static_cast<std::size_t>(j)] == m) {
            digit[static_cast<std::size_t>(j)] = 0;
            ++j;
        }
        if (j == p) break;
    }
    return {best, best_value};
}

} // namespace

void OracleReport::add(std::string label, double margin)
{
    details.push_back({std::move(label), margin, margin <= tolerance});
}

void OracleReport::finish()
{
    worst_margin = -std::numeric_limits<double>::infinity();
    for (const auto& d : details) worst_margin = std::max(worst_margin, d.margin);
    if (details.empty()) worst_margin = 0;
    pass = !inconclusive && worst_margin <= tolerance;
}

OracleReport merge_reports(std::string claim, const std::vector<OracleReport>& reports)
{
    OracleReport out;
    out.claim = std::move(claim);
    out.pass = true;
    out.worst_margin = -std::numeric_limits<double>::infinity();
    for (const auto& r : reports) {
        out.pass = out.pass && r.pass;
        out.inconclusive = out.inconclusive || r.inconclusive;
        out.worst_margin = std::max(out.worst_margin, r.worst_margin);
        out.tolerance = std::max(out.tolerance, r.tolerance);
        out.max_kkt_residual = std::max(out.max_kkt_residual, r.max_kkt_residual);
        for (const auto& d : r.details) out.details.push_back({r.claim + ": " + d.label, d.margin, d.pass});
    }
    if (reports.empty()) out.worst_margin = 0;
    return out;
}

Options precise_options()
{
    Options o;
    o.outer_tol = 1e-11;
    o.inner_tol = 1e-12;
    o.max_sweeps = 20000;
    o.inner_max_iter = 100000;
    return o;
}

double ols_box_half_width(const Design& design, const Centered& response)
{
    const Vector ols = design.X.colPivHouseholderQr().solve(response.y);
    return 1.5 * ols.cwiseAbs().maxCoeff();
}

Vector brute_force_fit(const Design& design, const Centered& response, const Penalty& config,
                       double box_half_width, int grid_points)
{
    const Index p = design.p();
    if (p > 3) throw ConfigError("brute force search supports at most 3 coefficients");
    if (!(box_half_width > 0)) throw ConfigError("box half-width must be positive");
    if (grid_points < 3) throw ConfigError("need at least 3 grid points per axis");
    config.validate(design.groups);

    const ObjectiveOracle f(design, response, config);
    auto [best, best_value] = grid_minimum(f, Vector::Zero(p), box_half_width, grid_points);
    double step = 2 * box_half_width / (grid_points - 1);
    for (Index j = 0; j < p; ++j) {
        if (std::abs(best(j)) >= box_half_width - 0.5 * step) {
            throw DataError("brute force optimum lies on the box boundary; enlarge the box");
        }
    }

    constexpr int zoom_points = 21;
    while (step > 1e-9) {
        const double half = 4 * step;
        std::tie(best, best_value) = grid_minimum(f, best, half, zoom_points);
        step = 2 * half / (zoom_points - 1);
    }

    // cyclic golden-section polish on each coordinate
    const double phi = (std::sqrt(5.0) - 1) / 2;
    for (int cycle = 0; cycle < 10; ++cycle) {
        for (Index j = 0; j < p; ++j) {
            double lo = best(j) - 2 * step, hi = best(j) + 2 * step;
            Vector b = best;
            auto at = [&](double x) {
                b(j) = x;
                return f(b);
            };
            while (hi - lo > 1e-13) {
                const double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
                if (at(x1) <= at(x2)) hi = x2; else lo = x1;
            }
            const double candidate = 0.5 * (lo + hi);
            for (double x : {candidate, 0.0}) {
                const double v = at(x);
                if (v < best_value) {
                    best_value = v;
                    best(j) = x;
                }
            }
        }
    }
    return best;
}

OracleReport check_lasso_limit(const Design& design, const Centered& response, double gamma,
                               const std::vector<double>& alphas, const Options& opts,
                               double final_tol)
{
    OracleReport report;
    report.claim = "lasso limit of LES as alpha -> 0";
    report.tolerance = final_tol;
    if (alphas.empty()) throw ConfigError("lasso limit: empty alpha sequence");

    const Fit lasso = fit_lasso(design, response, gamma, opts, std::optional<Vector>{}, 1e-11);
    report.max_kkt_residual = lasso_kkt_residual(design, response, lasso.beta, gamma);
    const double p = static_cast<double>(design.p());
    std::vector<double> distance;
    for (double alpha : alphas) {
        const Penalty config = Penalty::make(design.groups, gamma * p / alpha, alpha,
                                             WeightScheme::size_over_total);
        const Fit les = fit_les(design, response, config, opts);
        report.max_kkt_residual = std::max(report.max_kkt_residual, les.kkt_residual);
        if (!les.converged) {
            report.inconclusive = true;
            report.details.push_back({"alpha=" + fmt(alpha) + " did not converge", 0, false});
            continue;
        }
        distance.push_back((les.beta - lasso.beta).cwiseAbs().maxCoeff());
        report.details.push_back({"alpha=" + fmt(alpha) + " distance", distance.back(), true});
    }
    bool monotone = true;
    for (std::size_t i = 1; i < distance.size(); ++i) {
        // 10% relative slack plus a floor at solver precision
        if (distance[i] > 1.1 * distance[i - 1] + 1e-8) monotone = false;
    }
    report.worst_margin = distance.empty() ? std::numeric_limits<double>::infinity() : distance.back();
    report.pass = !report.inconclusive && monotone && report.worst_margin <= final_tol;
    for (auto& d : report.details) d.pass = d.pass && (monotone || &d != &report.details.back());
    if (!monotone) report.details.push_back({"distance increased along the alpha sequence", 1, false});
    return report;
}

OracleReport check_orthonormal_identities(std::uint64_t seed, double tolerance)
{
    OracleReport report;
    report.claim = "orthonormal-design thresholding identities (seed " + std::to_string(seed) + ")";
    report.tolerance = tolerance;

    auto gen = make_rng(seed, 11);
    const std::vector<Index> sizes{4, 3, 1, 2};
    const Index n = 60;
    Index p = 0;
    for (Index s : sizes) p += s;

    Matrix G = gaussian_matrix(n, p, gen);
    G.rowwise() -= G.colwise().mean();
    const Eigen::HouseholderQR<Matrix> qr(G);
    const Matrix Q = qr.householderQ() * Matrix::Identity(n, p);
    const Matrix X_raw = std::sqrt(double(n)) * Q;

    Vector beta_true(p);
    beta_true << 3, 2.5, -2, 1.5, 2, -1, 0.2, 1.8, 0, 0.1;
    std::normal_distribution<double> normal;
    Vector y_raw = X_raw * beta_true;
    for (Index i = 0; i < n; ++i) y_raw(i) += 0.3 * normal(gen);

    const auto [design, response] = standardize(X_raw, y_raw, GroupPartition::contiguous(sizes));
    const Vector ols = design.X.transpose() * response.y / double(n);

    Penalty config = Penalty::make(design.groups, 0.0, 1.0);
    const double top = lambda_max(design, response, config);
    config.lambda = 0.2 * top;
    const Options opts = precise_options();

    for (int attempt = 0; attempt < 5; ++attempt, config.lambda *= 0.3) {
        const Fit fit = fit_les(design, response, config, opts);
        report.max_kkt_residual = std::max(report.max_kkt_residual, fit.kkt_residual);
        std::vector<Index> full_groups;
        for (Index k = 0; k < design.groups.n_groups(); ++k) {
            bool all = true;
            for (Index j : design.groups.members(k)) all = all && fit.beta(j) != 0;
            if (all && design.groups.size(k) > 1) full_groups.push_back(k);
        }
        if (full_groups.empty()) continue;

        double fixed_point = 0;
        for (Index k = 0; k < design.groups.n_groups(); ++k) {
            const auto& idx = design.groups.members(k);
            const Vector sigma = group_softmax(Vector(fit.beta(idx)), config.alpha);
            const double scale = config.lambda * config.alpha * config.weights(k);
            for (std::size_t i = 0; i < idx.size(); ++i) {
                const double o = ols(idx[i]);
                const double target = soft_threshold(o, scale * sigma(static_cast<Index>(i)));
                fixed_point = std::max(fixed_point, std::abs(fit.beta(idx[i]) - target));
            }
        }
        report.add("fixed-point residual at lambda=" + fmt(config.lambda), fixed_point);

        for (Index k : full_groups) {
            const auto& idx = design.groups.members(k);
            const double lhs = fit.beta(idx).cwiseAbs().sum();
            const double rhs = ols(idx).cwiseAbs().sum() - config.lambda * config.alpha * config.weights(k);
            report.add("group " + std::to_string(k) + " L1 threshold identity", std::abs(lhs - rhs));
        }
        report.finish();
        return report;
    }
    report.inconclusive = true;
    report.details.push_back({"no group fully nonzero after 5 lambda reductions", 0, false});
    report.finish();
    return report;
}

SplitObjective<double> random_split_objective(Index group_size, std::uint64_t seed,
                                              double penalty_scale, double alpha)
{
    auto gen = make_rng(seed, 23);
    const Index n = 3 * group_size + 2;
    const Matrix A = gaussian_matrix(n, group_size, gen);
    const Vector c = gaussian_matrix(n, 1, gen).col(0);
    const double nd = static_cast<double>(n);
    return SplitObjective<double>(A.transpose() * A / nd, A.transpose() * c / nd,
                                  c.squaredNorm() / (2 * nd), penalty_scale, alpha);
}

OracleReport check_gradient(const SplitObjective<double>& F, int n_samples, double h,
                            std::uint64_t seed, double tolerance)
{
    if (!(h >= 1e-8 && h <= 1e-4)) throw ConfigError("finite-difference step must lie in [1e-8, 1e-4]");
    OracleReport report;
    report.claim = "split-objective gradient vs central differences";
    report.tolerance = tolerance;
    auto gen = make_rng(seed, 31);
    std::uniform_real_distribution<double> uniform(10 * h, 2.0);
    for (int s = 0; s < n_samples; ++s) {
        Vector z(F.dim());
        for (Index i = 0; i < z.size(); ++i) z(i) = uniform(gen);
        const Vector g = F.gradient(z);
        Vector fd(z.size());
        for (Index i = 0; i < z.size(); ++i) {
            Vector up = z, down = z;
            up(i) += h;
            down(i) -= h;
            fd(i) = (F.value(up) - F.value(down)) / (2 * h);
        }
        const double err = (fd - g).cwiseAbs().maxCoeff() / std::max(g.cwiseAbs().maxCoeff(), 1e-10);
        report.add("sample " + std::to_string(s), err);
    }
    report.finish();
    return report;
}

OracleReport check_gradient_boundary(const SplitObjective<double>& F, double h, double tolerance)
{
    if (!(h >= 1e-8 && h <= 1e-4)) throw ConfigError("finite-difference step must lie in [1e-8, 1e-4]");
    OracleReport report;
    report.claim = "split-objective gradient vs one-sided differences at z = 0";
    report.tolerance = tolerance;
    const Vector z = Vector::Zero(F.dim());
    const Vector g = F.gradient(z);
    const double base = F.value(z);
    Vector fd(z.size());
    for (Index i = 0; i < z.size(); ++i) {
        Vector up = z;
        up(i) += h;
        fd(i) = (F.value(up) - base) / h;
    }
    report.add("z = 0", (fd - g).cwiseAbs().maxCoeff() / std::max(g.cwiseAbs().maxCoeff(), 1e-10));
    report.finish();
    return report;
}

double grouping_log_constant(const Design& design, const Centered& response, const Penalty& config,
                          Index k)
{
    const double n = static_cast<double>(design.n());
    const double lambda = config.lambda;
    const double alpha = config.alpha;
    const double wk = config.weights(k);
    const double yy = response.y.squaredNorm();
    double weighted_log_sizes = 0;
    for (Index l = 0; l < design.groups.n_groups(); ++l) {
        weighted_log_sizes += config.weights(l) * std::log(double(design.groups.size(l)));
    }
    return -std::log(n * lambda * alpha * alpha * wk)
           + 0.5 * std::log(yy + 2 * n * lambda * weighted_log_sizes)
           + yy / (2 * n * lambda * wk) + weighted_log_sizes / wk;
}

OracleReport check_grouping_bound(const Fit& fit, const Design& design, const Centered& response,
                               const Penalty& config, double abs_tol)
{
    OracleReport report;
    report.claim = "grouping-effect bound for same-signed coefficients";
    report.tolerance = abs_tol;
    if (!(config.lambda > 0)) throw ConfigError("grouping bound needs lambda > 0");
    report.max_kkt_residual = fit.kkt_residual;
    for (Index k = 0; k < design.groups.n_groups(); ++k) {
        const auto& idx = design.groups.members(k);
        if (idx.size() < 2) continue;
        const double log_c = grouping_log_constant(design, response, config, k);
        for (std::size_t a = 0; a < idx.size(); ++a) {
            for (std::size_t b = a + 1; b < idx.size(); ++b) {
                const double bi = fit.beta(idx[a]), bj = fit.beta(idx[b]);
                if (!(bi * bj > 0)) continue;
                const double gap = (design.X.col(idx[a]) - design.X.col(idx[b])).norm();
                const double bound = gap == 0 ? 0.0 : std::exp(log_c + std::log(gap));
                report.add("group " + std::to_string(k) + " pair (" + std::to_string(idx[a]) + ","
                               + std::to_string(idx[b]) + ")",
                           std::abs(bi - bj) - bound);
            }
        }
    }
    report.finish();
    if (report.details.empty()) report.worst_margin = -std::numeric_limits<double>::infinity();
    return report;
}

OracleReport check_brute_force_battery(std::uint64_t seed, int instances, double tolerance)
{
    OracleReport report;
    report.claim = "fit_les matches brute-force minimum";
    report.tolerance = tolerance;

    const double ratios[] = {0.01, 0.1, 1.0};
    const double alphas[] = {0.5, 2.0};
    std::vector<CaseRecord> cases(static_cast<std::size_t>(instances));
    std::vector<double> kkt(cases.size(), 0.0);
    parallel_for(cases.size(), 0, [&](std::size_t i) {
        auto gen = make_rng(seed + i, 41);
        const Index p = (i % 2 == 0) ? 2 : 3;
        const bool two_groups = (i / 2) % 2 == 1;
        const GroupPartition groups = two_groups
            ? GroupPartition::contiguous(p == 2 ? std::vector<Index>{1, 1} : std::vector<Index>{2, 1})
            : GroupPartition::contiguous({p});
        const double ratio = ratios[(i / 4) % 3];
        const double alpha = alphas[(i / 12) % 2];

        const Index n = 20;
        const Matrix X = gaussian_matrix(n, p, gen);
        const Vector signal = gaussian_matrix(p, 1, gen).col(0);
        const Vector noise = gaussian_matrix(n, 1, gen).col(0);
        const auto [design, response] = standardize(Matrix(X), Vector(X * signal + noise), groups);

        Penalty config = Penalty::make(design.groups, 0.0, alpha);
        config.lambda = ratio * lambda_max(design, response, config);

        const Fit fit = fit_les(design, response, config, Options{});
        kkt[i] = fit.kkt_residual;
        double box = std::max(ols_box_half_width(design, response), 1e-3);
        Vector oracle;
        for (int attempt = 0;; ++attempt) {
            try {
                oracle = brute_force_fit(design, response, config, box, p == 2 ? 401 : 101);
                break;
            } catch (const DataError&) {
                if (attempt == 4) throw;
                box *= 2;
            }
        }
        const double gap = fit.objective - objective(design, response, oracle, config);
        cases[i] = {"instance " + std::to_string(i) + " p=" + std::to_string(p) + " K="
                        + std::to_string(groups.n_groups()) + " lambda/lambda_max=" + fmt(ratio)
                        + " alpha=" + fmt(alpha),
                    gap, gap <= tolerance};
    });
    for (auto& c : cases) report.add(c.label, c.margin);
    for (double v : kkt) report.max_kkt_residual = std::max(report.max_kkt_residual, v);
    report.finish();
    return report;
}

OracleReport check_lambda_max_zero(std::uint64_t seed)
{
    OracleReport report;
    report.claim = "fit at 1.01 lambda_max is identically zero";
    report.tolerance = 1e-10;
    auto gen = make_rng(seed, 53);
    const Matrix X = gaussian_matrix(50, 12, gen);
    const Vector y = X.leftCols(3).rowwise().sum() + gaussian_matrix(50, 1, gen).col(0);
    const auto [design, response] = standardize(X, y, GroupPartition::contiguous({4, 3, 5}));
    for (double alpha : {0.25, 1.0, 4.0}) {
        Penalty config = Penalty::make(design.groups, 0.0, alpha);
        config.lambda = 1.01 * lambda_max(design, response, config);
        const Fit fit = fit_les(design, response, config, Options{});
        report.max_kkt_residual = std::max(report.max_kkt_residual, fit.kkt_residual);
        report.add("alpha=" + fmt(alpha), fit.beta.cwiseAbs().maxCoeff());
    }
    report.finish();
    return report;
}

std::vector<OracleReport> run_verification_battery(std::uint64_t seed, unsigned threads)
{
    std::vector<OracleReport> reports(7);
    parallel_for(reports.size(), threads, [&](std::size_t task) {
        switch (task) {
        case 0: {
            std::vector<OracleReport> parts;
            for (std::uint64_t s = 0; s < 10; ++s) parts.push_back(check_orthonormal_identities(seed + s));
            reports[0] = merge_reports("orthonormal-design identities", parts);
            break;
        }
        case 1: {
            const auto F = random_split_objective(4, seed, 0.3, 1.5);
            reports[1] = merge_reports("split-objective gradient",
                                       {check_gradient(F, 100, 1e-6, seed), check_gradient_boundary(F, 1e-7)});
            break;
        }
        case 2: {
            const auto data = sample_dataset(build_scenario(1), seed);
            const auto [design, response] = standardize(data.X, data.y, data.groups);
            reports[2] = check_lasso_limit(design, response, 0.1, {1e-1, 1e-2, 1e-3}, precise_options());
            break;
        }
        case 3: {
            const auto data = sample_dataset(build_scenario(1), seed);
            const auto [design, response] = standardize(data.X, data.y, GroupPartition::singletons(25));
            auto r = check_lasso_limit(design, response, 0.1, {1e-1, 1e-2, 1e-3}, precise_options(), 1e-6);
            for (const auto& d : r.details) {
                if (d.margin > 1e-6) r.pass = false;
            }
            r.claim = "singleton groups reduce LES to the lasso";
            reports[3] = r;
            break;
        }
        case 4: {
            const auto data = sample_dataset(build_scenario(2), seed);
            const auto [design, response] = standardize(data.X, data.y, data.groups);
            std::vector<OracleReport> parts;
            for (double alpha : {0.5, 2.0}) {
                for (double ratio : {0.3, 0.1, 0.03}) {
                    Penalty config = Penalty::make(design.groups, 0.0, alpha);
                    config.lambda = ratio * lambda_max(design, response, config);
                    const Fit fit = fit_les(design, response, config, Options{});
                    parts.push_back(check_grouping_bound(fit, design, response, config));
                }
            }
            reports[4] = merge_reports("grouping-effect bound on example 2 fits", parts);
            break;
        }
        case 5:
            reports[5] = check_brute_force_battery(seed, 12);
            break;
        case 6:
            reports[6] = check_lambda_max_zero(seed);
            break;
        }
    });
    return reports;
}

} // namespace les
