// les: fit, tune, simulate, verify and df workflows for LES-penalized regression.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include <les/io.hpp>
#include <les/penalty.hpp>
#include <les/simulation.hpp>
#include <les/verification.hpp>

namespace {

using namespace les;

enum Exit
{
    exit_ok = 0,
    exit_usage = 1,
    exit_data = 2,
    exit_convergence = 3,
    exit_verification = 4,
};

struct RunConfig
{
    std::string input;
    std::string response = "y";
    std::string groups;
    std::optional<double> lambda;
    double alpha = 1.0;
    std::string weights = "pk_over_p";
    std::string grid_lambdas;
    std::string grid_alphas;
    std::string criterion = "validation";
    std::string validation_input;
    int df_R = 5;
    std::optional<double> df_rho;
    int reps = 200;
    int example = 1;
    Index n = 100;
    std::string snr = "variance";
    std::string method = "les";
    std::string tuning = "tuning-set";
    std::uint64_t seed = 0;
    unsigned threads = 0;
    std::string out;
    std::string format = "csv";
    bool standardized = false;
    bool all = true;
    double outer_tol = 1e-5;
    int max_sweeps = 200;
};

struct Loaded
{
    Dataset data;
    std::vector<std::string> names;
    std::vector<std::string> labels;
};

Loaded load(const RunConfig& cfg, const std::string& path)
{
    if (path.empty()) throw ConfigError("--input is required");
    CsvTable table = ingest_csv(path, cfg.response);
    Loaded out;
    out.names = table.names;
    if (cfg.groups.empty()) {
        out.data.groups = GroupPartition::singletons(static_cast<Index>(table.names.size()));
        out.labels = table.names;
    } else {
        GroupMap map = ingest_group_map(cfg.groups, table.names);
        out.data.groups = std::move(map.groups);
        out.labels = std::move(map.labels);
    }
    out.data.X = std::move(table.X);
    out.data.y = std::move(table.y);
    return out;
}

Method parse_method(const std::string& m)
{
    if (m == "les") return Method::les;
    if (m == "lasso") return Method::lasso;
    throw ConfigError("--method must be les or lasso");
}

Options solver_options(const RunConfig& cfg)
{
    Options o;
    o.outer_tol = cfg.outer_tol;
    o.max_sweeps = cfg.max_sweeps;
    o.validate();
    return o;
}

/// Weights for `groups`; custom files are keyed by group label.
Vector make_weights(const RunConfig& cfg, const GroupPartition& groups, const std::vector<std::string>& labels)
{
    if (cfg.weights == "pk_over_p") return Penalty::default_weights(groups, WeightScheme::size_over_total);
    if (cfg.weights == "pk") return Penalty::default_weights(groups, WeightScheme::size);
    if (cfg.weights.rfind("custom:", 0) == 0) return ingest_weights(cfg.weights.substr(7), labels);
    throw ConfigError("--weights must be pk_over_p, pk or custom:<path>");
}

std::string yes_no(bool b) { return b ? "true" : "false"; }

Section coefficient_section(const Loaded& in, const Design& design, const Vector& beta, bool standardized)
{
    const Vector shown = standardized ? beta : design.to_original_scale(beta);
    Section s{"coefficients", {"name", "group", "estimate", "selected"}, {}};
    for (Index j = 0; j < beta.size(); ++j) {
        s.rows.push_back({in.names[static_cast<std::size_t>(j)],
                          in.labels[static_cast<std::size_t>(design.groups.group_of(j))],
                          format_number(shown(j)), yes_no(std::abs(beta(j)) > selection_tolerance)});
    }
    return s;
}

Section diagnostics_section(const Fit& fit, std::vector<std::vector<std::string>> extra)
{
    Section s{"diagnostics", {"key", "value"}, std::move(extra)};
    s.rows.push_back({"objective", format_number(fit.objective)});
    s.rows.push_back({"sweeps", std::to_string(fit.sweeps)});
    s.rows.push_back({"converged", yes_no(fit.converged)});
    s.rows.push_back({"kkt_residual", format_number(fit.kkt_residual)});
    return s;
}

void emit(const RunConfig& cfg, const std::vector<Section>& sections)
{
    OutputFormat format;
    if (cfg.format == "csv") format = OutputFormat::csv;
    else if (cfg.format == "structured-text") format = OutputFormat::structured_text;
    else throw ConfigError("--format must be csv or structured-text");
    const std::string text = render(sections, format);
    if (cfg.out.empty()) std::cout << text;
    else write_atomic(cfg.out, text);
}

int run_fit(const RunConfig& cfg)
{
    if (!cfg.lambda) throw ConfigError("--lambda is required");
    const Method method = parse_method(cfg.method);
    const Loaded in = load(cfg, cfg.input);
    const auto [design, response] = standardize(in.data.X, in.data.y, in.data.groups);
    Penalty config{*cfg.lambda, cfg.alpha, make_weights(cfg, design.groups, in.labels)};
    config.validate(design.groups);
    const Fit fit = fit_method(design, response, config, solver_options(cfg), method);
    if (!fit.converged) throw ConvergenceError("fit did not converge within " + std::to_string(cfg.max_sweeps) + " sweeps");

    const double top = method == Method::lasso ? lasso_lambda_max(design, response) : lambda_max(design, response, config);
    emit(cfg, {diagnostics_section(fit, {{"method", cfg.method},
                                         {"lambda", format_number(config.lambda)},
                                         {"alpha", method == Method::lasso ? "NA" : format_number(config.alpha)},
                                         {"lambda_max", format_number(top)}}),
               coefficient_section(in, design, fit.beta, cfg.standardized)});
    return exit_ok;
}

TuningGrid make_grid(const RunConfig& cfg)
{
    TuningGrid grid;
    if (!cfg.grid_lambdas.empty()) grid.lambdas = parse_real_list(cfg.grid_lambdas);
    if (!cfg.grid_alphas.empty()) grid.alphas = parse_real_list(cfg.grid_alphas);
    if (cfg.weights == "pk") grid.weights = WeightScheme::size;
    else if (cfg.weights != "pk_over_p") throw ConfigError("tune and simulate support --weights pk_over_p or pk");
    if (cfg.criterion == "validation") {
        grid.criterion = Criterion::validation;
    } else if (cfg.criterion == "bic") {
        grid.criterion = Criterion::bic;
    } else if (cfg.criterion.rfind("cv:", 0) == 0) {
        grid.criterion = Criterion::kfold_cv;
        try {
            std::size_t used = 0;
            grid.folds = std::stoi(cfg.criterion.substr(3), &used);
            if (used != cfg.criterion.size() - 3) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw ConfigError("--criterion cv:<k> needs an integer k");
        }
    } else {
        throw ConfigError("--criterion must be validation, cv:<k> or bic");
    }
    grid.validate();
    return grid;
}

DfConfig make_df(const RunConfig& cfg)
{
    DfConfig df;
    df.R = cfg.df_R;
    df.rho = cfg.df_rho;
    df.seed = cfg.seed;
    df.validate();
    return df;
}

int run_tune(const RunConfig& cfg)
{
    const Method method = parse_method(cfg.method);
    const TuningGrid grid = make_grid(cfg);
    const Loaded in = load(cfg, cfg.input);
    std::optional<Dataset> validation;
    if (grid.criterion == Criterion::validation) {
        if (cfg.validation_input.empty()) throw ConfigError("--criterion validation needs --validation-input");
        Loaded v = load(cfg, cfg.validation_input);
        if (v.names != in.names) throw DataError("validation file columns differ from the training file");
        validation = std::move(v.data);
    }
    const TuningResult result = grid_search(in.data, grid, validation, make_df(cfg), solver_options(cfg), method);
    if (!result.fit.converged) throw ConvergenceError("selected fit did not converge");

    Section table{"grid", {"lambda", "alpha", "criterion", "df", "nnz", "converged", "kkt_residual"}, {}};
    for (const auto& e : result.entries) {
        table.rows.push_back({format_number(e.lambda), method == Method::lasso ? "NA" : format_number(e.alpha),
                              format_number(e.criterion), e.df ? format_number(*e.df) : "NA",
                              std::to_string(e.nnz), yes_no(e.converged), format_number(e.kkt_residual)});
    }
    const TuningEntry& best = result.best();
    Section selected{"selected", {"lambda", "alpha", "criterion"},
                     {{format_number(best.lambda), method == Method::lasso ? "NA" : format_number(best.alpha),
                       format_number(best.criterion)}}};
    emit(cfg, {diagnostics_section(result.fit, {{"method", cfg.method}, {"criterion", cfg.criterion}}),
               table, selected, coefficient_section(in, result.design, result.fit.beta, cfg.standardized)});
    return exit_ok;
}

int run_simulate(const RunConfig& cfg)
{
    SnrConvention convention;
    if (cfg.snr == "variance") convention = SnrConvention::variance;
    else if (cfg.snr == "amplitude") convention = SnrConvention::amplitude;
    else throw ConfigError("--snr must be variance or amplitude");

    SimulationScenario scenario = build_scenario(cfg.example, convention);
    scenario.n = cfg.n;
    ReplicateOptions opts;
    opts.n_reps = cfg.reps;
    opts.method = parse_method(cfg.method);
    if (cfg.tuning == "tuning-set") opts.tuning = TuningMode::tuning_set;
    else if (cfg.tuning == "bic") opts.tuning = TuningMode::bic;
    else throw ConfigError("--tuning must be tuning-set or bic");
    opts.base_seed = cfg.seed;
    opts.threads = cfg.threads;
    RunConfig grid_cfg = cfg;
    grid_cfg.criterion = "validation";
    opts.grid = make_grid(grid_cfg);
    opts.df = make_df(cfg);
    opts.solver = solver_options(cfg);

    const ReplicateSummary s = run_replicates(scenario, opts);
    Section summary{"summary",
                    {"example", "n", "method", "tuning", "reps", "used", "failures", "sens", "sens_se", "spec",
                     "spec_se", "me", "me_se", "l2_error", "l2_error_se", "group_recovery", "max_kkt_residual"},
                    {{std::to_string(cfg.example), std::to_string(cfg.n), cfg.method, cfg.tuning,
                      std::to_string(cfg.reps), std::to_string(s.used), std::to_string(s.failures),
                      format_number(s.sens.mean), format_number(s.sens.se), format_number(s.spec.mean),
                      format_number(s.spec.se), format_number(s.model_error.mean), format_number(s.model_error.se),
                      format_number(s.l2_error.mean), format_number(s.l2_error.se),
                      format_number(s.group_recovery_rate), format_number(s.max_kkt_residual)}}};
    emit(cfg, {summary});
    return exit_ok;
}

int run_verify(const RunConfig& cfg)
{
    const auto reports = run_verification_battery(cfg.seed, cfg.threads);
    Section summary{"summary", {"claim", "pass", "inconclusive", "worst_margin", "tolerance"}, {}};
    Section details{"details", {"claim", "case", "margin", "pass"}, {}};
    bool ok = true;
    for (const auto& r : reports) {
        ok = ok && r.pass;
        summary.rows.push_back({r.claim, yes_no(r.pass), yes_no(r.inconclusive), format_number(r.worst_margin),
                                format_number(r.tolerance)});
        for (const auto& d : r.details) details.rows.push_back({r.claim, d.label, format_number(d.margin), yes_no(d.pass)});
    }
    emit(cfg, {summary, details});
    if (!ok) std::cerr << "les: verification failed\n";
    return ok ? exit_ok : exit_verification;
}

int run_df(const RunConfig& cfg)
{
    if (!cfg.lambda) throw ConfigError("--lambda is required");
    const Method method = parse_method(cfg.method);
    const Loaded in = load(cfg, cfg.input);
    const auto [design, response] = standardize(in.data.X, in.data.y, in.data.groups);
    Penalty config{*cfg.lambda, cfg.alpha, make_weights(cfg, design.groups, in.labels)};
    config.validate(design.groups);
    const Options opts = solver_options(cfg);
    const DfConfig dfcfg = make_df(cfg);

    bool converged = true;
    const Fitter fitter = [&](const Vector& y) -> Vector {
        const Fit f = fit_method(design, Centered{y, response.original_mean}, config, opts, method);
        converged = converged && f.converged;
        return design.X * f.beta;
    };
    const double df = randomized_trace_df(fitter, response.y, dfcfg);
    if (!converged) throw ConvergenceError("a perturbed refit did not converge");
    const Fit fit = fit_method(design, response, config, opts, method);
    emit(cfg, {Section{"df",
                       {"method", "lambda", "alpha", "R", "df", "nnz"},
                       {{cfg.method, format_number(config.lambda),
                         method == Method::lasso ? "NA" : format_number(config.alpha), std::to_string(cfg.df_R),
                         format_number(df), std::to_string(fit.active_variables.size())}}}});
    return exit_ok;
}

void add_common(CLI::App* cmd, RunConfig& cfg)
{
    cmd->add_option("--seed", cfg.seed, "random seed")->capture_default_str();
    cmd->add_option("--threads", cfg.threads, "worker threads (0 = all cores)");
    cmd->add_option("--out", cfg.out, "output file (default standard output)");
    cmd->add_option("--format", cfg.format, "csv or structured-text")->capture_default_str();
    cmd->add_option("--outer-tol", cfg.outer_tol, "outer convergence tolerance")->capture_default_str();
    cmd->add_option("--max-sweeps", cfg.max_sweeps, "maximum coordinate sweeps")->capture_default_str();
}

void add_data(CLI::App* cmd, RunConfig& cfg)
{
    cmd->add_option("--input", cfg.input, "CSV with a header row");
    cmd->add_option("--response", cfg.response, "response column")->capture_default_str();
    cmd->add_option("--groups", cfg.groups, "variable,group map (default: one group per variable)");
    cmd->add_option("--weights", cfg.weights, "pk_over_p, pk or custom:<path>")->capture_default_str();
    cmd->add_option("--method", cfg.method, "les or lasso")->capture_default_str();
    cmd->add_flag("--standardized", cfg.standardized, "report coefficients on the standardized scale");
}

void add_grid(CLI::App* cmd, RunConfig& cfg)
{
    cmd->add_option("--grid-lambdas", cfg.grid_lambdas, "comma-separated lambdas (default: per-alpha path)");
    cmd->add_option("--grid-alphas", cfg.grid_alphas, "comma-separated alphas");
    cmd->add_option("--df-R", cfg.df_R, "perturbations for the df estimate")->capture_default_str();
    cmd->add_option("--df-rho", cfg.df_rho, "perturbation scale for the df estimate");
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Group variable selection with the log-exp-sum penalty"};
    app.set_config("--config", "", "INI file; [fit], [tune], ... sections set subcommand options");
    app.config_formatter(std::make_shared<CLI::ConfigINI>());
    app.require_subcommand(1);

    RunConfig cfg;
    auto* fit = app.add_subcommand("fit", "fit at one (lambda, alpha)");
    auto* tune = app.add_subcommand("tune", "select (lambda, alpha) over a grid");
    auto* simulate = app.add_subcommand("simulate", "simulation study replicates");
    auto* verify = app.add_subcommand("verify", "run the oracle battery");
    auto* df = app.add_subcommand("df", "randomized degrees-of-freedom estimate");

    for (auto* cmd : {fit, tune, simulate, verify, df}) add_common(cmd, cfg);
    for (auto* cmd : {fit, tune, df}) add_data(cmd, cfg);
    for (auto* cmd : {fit, df}) {
        cmd->add_option("--lambda", cfg.lambda, "penalty level");
        cmd->add_option("--alpha", cfg.alpha, "exp-sum curvature")->capture_default_str();
    }
    for (auto* cmd : {tune, simulate}) add_grid(cmd, cfg);
    df->add_option("--df-R", cfg.df_R, "perturbations")->capture_default_str();
    df->add_option("--df-rho", cfg.df_rho, "perturbation scale");
    tune->add_option("--criterion", cfg.criterion, "validation, cv:<k> or bic")->capture_default_str();
    tune->add_option("--validation-input", cfg.validation_input, "CSV for the validation criterion");
    simulate->add_option("--example", cfg.example, "1, 2, 3 or 4")->capture_default_str();
    simulate->add_option("--reps", cfg.reps, "replicates")->capture_default_str();
    simulate->add_option("--method", cfg.method, "les or lasso")->capture_default_str();
    simulate->add_option("--tuning", cfg.tuning, "tuning-set or bic")->capture_default_str();
    simulate->add_option("--n", cfg.n, "training sample size")->capture_default_str();
    simulate->add_option("--snr", cfg.snr, "variance or amplitude SNR convention")->capture_default_str();
    simulate->add_option("--weights", cfg.weights, "pk_over_p or pk")->capture_default_str();
    verify->add_flag("--all", cfg.all, "run every oracle (the default)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_usage;
    }

    try {
        if (*fit) return run_fit(cfg);
        if (*tune) return run_tune(cfg);
        if (*simulate) return run_simulate(cfg);
        if (*verify) return run_verify(cfg);
        return run_df(cfg);
    } catch (const DataError& e) {
        std::cerr << "les: data error: " << e.what() << '\n';
        return exit_data;
    } catch (const ConvergenceError& e) {
        std::cerr << "les: " << e.what() << '\n';
        return exit_convergence;
    } catch (const std::invalid_argument& e) {
        std::cerr << "les: configuration error: " << e.what() << '\n';
        return exit_usage;
    } catch (const std::exception& e) {
        std::cerr << "les: " << e.what() << '\n';
        return exit_data;
    }
}
