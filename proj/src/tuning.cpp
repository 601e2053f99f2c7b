#include <les/tuning.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include <les/penalty.hpp>

namespace les {

void DfConfig::validate() const
{
    if (R < 1) throw ConfigError("df: R must be at least 1");
    if (rho && !(*rho > 0)) throw ConfigError("df: rho must be positive");
}

void TuningGrid::validate() const
{
    if (alphas.empty()) throw ConfigError("tuning grid has no alpha values");
    for (double a : alphas) {
        if (!(a > 0)) throw ConfigError("alpha grid values must be positive");
    }
    if (lambdas.empty()) {
        if (path_length < 1) throw ConfigError("lambda path length must be positive");
        if (!(min_ratio > 0 && min_ratio <= 1)) throw ConfigError("lambda min ratio must lie in (0, 1]");
    } else {
        for (std::size_t i = 0; i < lambdas.size(); ++i) {
            if (!(lambdas[i] > 0)) throw ConfigError("lambda grid values must be positive");
            if (i > 0 && !(lambdas[i] < lambdas[i - 1])) {
                throw ConfigError("lambda grid must be strictly descending");
            }
        }
    }
    if (criterion == Criterion::kfold_cv && folds < 2) throw ConfigError("cv needs at least 2 folds");
}

std::vector<double> log_path(double top, double min_ratio, int length)
{
    std::vector<double> path(static_cast<std::size_t>(length));
    if (length == 1) {
        path[0] = top;
        return path;
    }
    for (int i = 0; i < length; ++i) {
        path[static_cast<std::size_t>(i)] = top * std::pow(min_ratio, double(i) / (length - 1));
    }
    return path;
}

double randomized_trace_df(const Fitter& fitter, const Vector& y, const DfConfig& cfg)
{
    cfg.validate();
    const auto n = static_cast<double>(y.size());
    double rho;
    if (cfg.rho) {
        rho = *cfg.rho;
    } else {
        const double sd = std::sqrt((y.array() - y.mean()).square().sum() / n);
        rho = 0.05 * sd;
        if (!(rho > 0)) throw ConfigError("df: response has zero spread; set rho explicitly");
    }

    const Vector base = fitter(y);
    double total = 0;
    for (int r = 0; r < cfg.R; ++r) {
        std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                          static_cast<std::uint32_t>(r)};
        std::mt19937_64 gen(seq);
        std::normal_distribution<double> normal(0.0, rho);
        Vector delta(y.size());
        for (Index i = 0; i < delta.size(); ++i) delta(i) = normal(gen);

        Vector perturbed;
        try {
            perturbed = fitter(y + delta);
        } catch (const std::exception& e) {
            throw DataError("df: refit on perturbation " + std::to_string(r) + " failed: " + e.what());
        }
        total += delta.dot(perturbed - base) / (delta.squaredNorm() / n);
    }
    return total / cfg.R;
}

double bic_score(const Vector& y, const Vector& y_hat, double df)
{
    if (y.size() < 1 || y.size() != y_hat.size()) throw std::invalid_argument("bic: dimension mismatch");
    const auto n = static_cast<double>(y.size());
    const double rss = (y - y_hat).squaredNorm();
    if (!(rss > 0)) throw DataError("bic: residual sum of squares is zero");
    return std::log(rss / n) + std::log(n) * df / n;
}

std::size_t select_best(const std::vector<TuningEntry>& entries)
{
    if (entries.empty()) throw ConfigError("cannot select from an empty grid");
    double lowest = entries.front().criterion;
    for (const auto& e : entries) lowest = std::min(lowest, e.criterion);
    std::size_t best = entries.size();
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (!(entries[i].criterion <= lowest + 1e-12)) continue;
        if (best == entries.size()) {
            best = i;
            continue;
        }
        const auto& a = entries[i];
        const auto& b = entries[best];
        if (a.lambda > b.lambda || (a.lambda == b.lambda && a.alpha > b.alpha)) best = i;
    }
    return best;
}

double prediction_mse(const Design& design, const Centered& response, const Vector& beta,
                      const Dataset& data)
{
    if (data.X.cols() != design.p() || data.X.rows() != data.y.size()) {
        throw std::invalid_argument("prediction: dimension mismatch");
    }
    const Vector predicted = design.transform(data.X) * beta;
    return ((data.y.array() - response.original_mean) - predicted.array()).square().mean();
}

Fit fit_method(const Design& design, const Centered& response, const Penalty& config,
               const Options& opts, Method method, const std::optional<Vector>& warm_start)
{
    if (method == Method::lasso) return fit_lasso(design, response, config.lambda, opts, warm_start);
    return fit_les(design, response, config, opts, warm_start);
}

namespace {

struct CvOutcome
{
    double mse = 0;
    double max_kkt = 0;
    int nonconverged = 0;
};

Dataset take_rows(const Dataset& data, const std::vector<Index>& rows)
{
    return {data.X(rows, Eigen::all), data.y(rows), data.groups};
}

CvOutcome cross_validate(const Dataset& data, const Penalty& config, int k, std::uint64_t seed,
                         const Options& opts, Method method)
{
    const Index n = data.X.rows();
    if (k < 2 || k > n) throw ConfigError("cv: fold count must satisfy 2 <= k <= n");

    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index(0));
    std::mt19937_64 gen(seed);
    std::shuffle(order.begin(), order.end(), gen);

    CvOutcome out;
    double sse = 0;
    for (int f = 0; f < k; ++f) {
        const auto begin = static_cast<std::size_t>(Index(f) * n / k);
        const auto end = static_cast<std::size_t>(Index(f + 1) * n / k);
        std::vector<Index> held(order.begin() + begin, order.begin() + end);
        std::vector<Index> kept(order.begin(), order.begin() + begin);
        kept.insert(kept.end(), order.begin() + end, order.end());
        if (kept.size() < 2) throw DataError("cv: training split has fewer than 2 rows");

        const Dataset train = take_rows(data, kept);
        const Dataset test = take_rows(data, held);
        auto [design, response] = standardize(train.X, train.y, train.groups);
        const Fit fit = fit_method(design, response, config, opts, method);
        out.max_kkt = std::max(out.max_kkt, fit.kkt_residual);
        if (!fit.converged) ++out.nonconverged;
        sse += prediction_mse(design, response, fit.beta, test) * static_cast<double>(held.size());
    }
    out.mse = sse / static_cast<double>(n);
    return out;
}

} // namespace

double kfold_cv(const Dataset& data, const Penalty& config, int k, std::uint64_t seed,
                const Options& opts, Method method)
{
    return cross_validate(data, config, k, seed, opts, method).mse;
}

TuningResult grid_search(const Dataset& train, const TuningGrid& grid,
                         const std::optional<Dataset>& validation, const DfConfig& dfcfg,
                         const Options& opts, Method method)
{
    grid.validate();
    if (grid.criterion == Criterion::validation && !validation) {
        throw ConfigError("validation criterion needs a validation set");
    }
    if (grid.criterion == Criterion::bic) dfcfg.validate();

    TuningResult result;
    std::tie(result.design, result.response) = standardize(train.X, train.y, train.groups);
    const Design& design = result.design;
    const Centered& response = result.response;

    const std::vector<double> alphas = method == Method::lasso ? std::vector<double>{1.0} : grid.alphas;
    std::vector<Fit> fits;

    for (double alpha : alphas) {
        Penalty config = Penalty::make(design.groups, 0.0, alpha, grid.weights);
        std::vector<double> lambdas = grid.lambdas;
        if (lambdas.empty()) {
            const double top = method == Method::lasso ? lasso_lambda_max(design, response)
                                                       : lambda_max(design, response, config);
            lambdas = log_path(top > 0 ? top : 1.0, grid.min_ratio, grid.path_length);
        }

        std::optional<Vector> warm;
        for (double lambda : lambdas) {
            config.lambda = lambda;
            Fit fit = fit_method(design, response, config, opts, method, warm);
            warm = fit.beta;
            result.max_kkt_residual = std::max(result.max_kkt_residual, fit.kkt_residual);
            if (!fit.converged) ++result.nonconverged_fits;

            TuningEntry entry;
            entry.lambda = lambda;
            entry.alpha = method == Method::lasso ? 0.0 : alpha;
            entry.nnz = static_cast<Index>(fit.active_variables.size());
            entry.converged = fit.converged;
            entry.kkt_residual = fit.kkt_residual;

            switch (grid.criterion) {
            case Criterion::validation:
                entry.criterion = prediction_mse(design, response, fit.beta, *validation);
                break;
            case Criterion::kfold_cv: {
                const auto cv = cross_validate(train, config, grid.folds, dfcfg.seed, opts, method);
                entry.criterion = cv.mse;
                result.max_kkt_residual = std::max(result.max_kkt_residual, cv.max_kkt);
                result.nonconverged_fits += cv.nonconverged;
                break;
            }
            case Criterion::bic: {
                double df;
                if (method == Method::lasso) {
                    df = static_cast<double>(entry.nnz);
                } else {
                    Fitter fitter = [&](const Vector& y) -> Vector {
                        const Centered perturbed{y, response.original_mean};
                        const Fit refit = fit_les(design, perturbed, config, opts);
                        result.max_kkt_residual = std::max(result.max_kkt_residual, refit.kkt_residual);
                        if (!refit.converged) ++result.nonconverged_fits;
                        return design.X * refit.beta;
                    };
                    df = randomized_trace_df(fitter, response.y, dfcfg);
                }
                entry.df = df;
                entry.criterion = bic_score(response.y, design.X * fit.beta, df);
                break;
            }
            }
            result.entries.push_back(entry);
            fits.push_back(std::move(fit));
        }
    }

    result.selected = select_best(result.entries);
    result.fit = std::move(fits[result.selected]);
    return result;
}

} // namespace les
