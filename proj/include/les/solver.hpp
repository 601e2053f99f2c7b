#pragma once
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>
#include <Eigen/Core>
#include <les/model.hpp>
#include <les/penalty.hpp>

namespace les {

/**
 * Options for the group-level coordinate descent and its inner
 * Barzilai-Borwein gradient-projection solver.
 *
 * @param   outer_tol       stop when a full sweep changes no coefficient by more than this.
 * @param   max_sweeps      cap on full sweeps over all groups.
 * @param   inner_tol       stop the inner solver when ||z_next - z||_2 falls to this.
 * @param   inner_max_iter  cap on inner iterations per group subproblem.
 * @param   bb_phi_min      lower clamp of the BB step length.
 * @param   bb_phi_max      upper clamp of the BB step length.
 * @param   bb_phi_init     first step length and fallback after a non-positive curvature pair.
 * @param   backtrack_rho   step shrink factor of the backtracking line search.
 * @param   armijo_margin   sufficient-decrease factor; 0 accepts any non-increase.
 * @param   max_backtracks  line search gives up after this many shrinks.
 */
template <class Scalar>
struct SolverOptions
{
    Scalar outer_tol = 1e-5;
    int max_sweeps = 200;
    Scalar inner_tol = 1e-6;
    int inner_max_iter = 1000;
    Scalar bb_phi_min = 1e-10;
    Scalar bb_phi_max = 1e10;
    Scalar bb_phi_init = 1.0;
    Scalar backtrack_rho = 0.5;
    Scalar armijo_margin = 0;
    int max_backtracks = 80;

    void validate() const
    {
        if (!(bb_phi_min > 0 && bb_phi_min <= bb_phi_init && bb_phi_init <= bb_phi_max)) {
            throw ConfigError("step lengths must satisfy 0 < phi_min <= phi_init <= phi_max");
        }
        if (!(backtrack_rho > 0 && backtrack_rho < 1)) {
            throw ConfigError("backtrack_rho must lie in (0, 1)");
        }
        if (!(outer_tol > 0 && inner_tol > 0)) throw ConfigError("tolerances must be positive");
        if (max_sweeps < 1 || inner_max_iter < 1 || max_backtracks < 1) {
            throw ConfigError("iteration limits must be positive");
        }
        if (!(armijo_margin >= 0 && armijo_margin < 1)) {
            throw ConfigError("armijo_margin must lie in [0, 1)");
        }
    }
};

/// sign(a) * max(|a| - t, 0)
template <class Scalar>
constexpr Scalar soft_threshold(Scalar a, Scalar t)
{
    if (a > t) return a - t;
    if (a < -t) return a + t;
    return Scalar(0);
}

/**
 * Smooth objective of the non-negative split of one group subproblem,
 *
 *      F(z) = 1/2 b^T G b - h^T b + c0 + s log sum_j exp(alpha (u_j + v_j)),
 *
 * with z = [u; v], b = u - v, G = A^T A / n, h = A^T c / n,
 * c0 = ||c||^2 / (2n) and s = lambda * w_k. On the set u_j v_j = 0 it equals
 * (1/2n)||c - A b||^2 + lambda w_k log sum_j exp(alpha |b_j|).
 */
template <class Scalar>
class SplitObjective
{
public:
    SplitObjective(Mat<Scalar> gram, Vec<Scalar> linear, Scalar constant,
                   Scalar penalty_scale, Scalar alpha)
        : gram_(std::move(gram)),
          linear_(std::move(linear)),
          constant_(constant),
          penalty_scale_(penalty_scale),
          alpha_(alpha)
    {}

    Index group_size() const { return linear_.size(); }
    Index dim() const { return 2 * linear_.size(); }
    const Mat<Scalar>& gram() const { return gram_; }
    const Vec<Scalar>& linear() const { return linear_; }
    Scalar penalty_scale() const { return penalty_scale_; }
    Scalar alpha() const { return alpha_; }

    Scalar value(const Vec<Scalar>& z) const
    {
        const Index m = group_size();
        const Vec<Scalar> b = z.head(m) - z.tail(m);
        Scalar v = Scalar(0.5) * b.dot(gram_ * b) - linear_.dot(b) + constant_;
        if (penalty_scale_ != 0) {
            v += penalty_scale_ * log_sum_exp_abs(z.head(m) + z.tail(m), alpha_);
        }
        return v;
    }

    void gradient(const Vec<Scalar>& z, Vec<Scalar>& out) const
    {
        const Index m = group_size();
        const Vec<Scalar> b = z.head(m) - z.tail(m);
        const Vec<Scalar> g = gram_ * b - linear_;
        out.resize(2 * m);
        out.head(m) = g;
        out.tail(m) = -g;
        if (penalty_scale_ != 0) {
            const Vec<Scalar> sigma = group_softmax(z.head(m) + z.tail(m), alpha_);
            out.head(m) += (penalty_scale_ * alpha_) * sigma;
            out.tail(m) += (penalty_scale_ * alpha_) * sigma;
        }
    }

    Vec<Scalar> gradient(const Vec<Scalar>& z) const
    {
        Vec<Scalar> out;
        gradient(z, out);
        return out;
    }

private:
    Mat<Scalar> gram_;
    Vec<Scalar> linear_;
    Scalar constant_;
    Scalar penalty_scale_;
    Scalar alpha_;
};

/// Iterate of the split problem with its cached gradient.
template <class Scalar>
struct SplitState
{
    Vec<Scalar> z;
    Vec<Scalar> gradient;
    Scalar value = 0;
    int iterations = 0;
    bool converged = false;

    Vec<Scalar> beta() const
    {
        const Index m = z.size() / 2;
        return z.head(m) - z.tail(m);
    }
};

/// [max(b, 0); max(-b, 0)]
template <class Scalar>
Vec<Scalar> split_coefficients(const Vec<Scalar>& b)
{
    Vec<Scalar> z(2 * b.size());
    z.head(b.size()) = b.cwiseMax(Scalar(0));
    z.tail(b.size()) = (-b).cwiseMax(Scalar(0));
    return z;
}

/**
 * Barzilai-Borwein gradient projection on z >= 0.
 *
 * Each iteration backtracks phi over {phi, rho phi, rho^2 phi, ...} until
 * F((z - phi grad)_+) <= F(z) (plus an optional sufficient-decrease term),
 * moves there, then resets phi to median{phi_min, ||dz||^2 / (dg^T dz), phi_max}.
 * A non-positive or non-finite curvature pair resets phi to phi_init.
 * Stops once ||dz||_2 <= inner_tol.
 */
template <class Scalar>
SplitState<Scalar> bb_gradient_projection(const SplitObjective<Scalar>& F,
                                          const Vec<Scalar>& z_init,
                                          const SolverOptions<Scalar>& opts)
{
    if (z_init.size() != F.dim()) throw std::invalid_argument("bb: starting point has wrong length");
    if ((z_init.array() < 0).any()) throw std::invalid_argument("bb: starting point must be non-negative");

    SplitState<Scalar> state;
    state.z = z_init;
    F.gradient(state.z, state.gradient);
    state.value = F.value(state.z);

    Scalar phi = opts.bb_phi_init;
    Vec<Scalar> trial(F.dim());
    Vec<Scalar> trial_grad(F.dim());

    for (int t = 0; t < opts.inner_max_iter; ++t) {
        state.iterations = t + 1;

        Scalar step = phi;
        Scalar trial_value = std::numeric_limits<Scalar>::infinity();
        bool accepted = false;
        for (int b = 0; b < opts.max_backtracks; ++b) {
            trial = (state.z - step * state.gradient).cwiseMax(Scalar(0));
            trial_value = F.value(trial);
            Scalar bound = state.value;
            if (opts.armijo_margin > 0) {
                bound += opts.armijo_margin * state.gradient.dot(trial - state.z);
            }
            if (trial_value <= bound) {
                accepted = true;
                break;
            }
            step *= opts.backtrack_rho;
        }
        if (!accepted) {
            // no decrease even at a vanishing step: numerically stationary
            state.converged = true;
            return state;
        }

        const Vec<Scalar> delta = trial - state.z;
        F.gradient(trial, trial_grad);
        const Vec<Scalar> gamma = trial_grad - state.gradient;

        state.z = trial;
        state.gradient = trial_grad;
        state.value = trial_value;

        const Scalar move = delta.norm();
        if (move <= opts.inner_tol) {
            state.converged = true;
            return state;
        }

        const Scalar curvature = gamma.dot(delta);
        const Scalar bb = delta.squaredNorm() / curvature;
        if (curvature > 0 && std::isfinite(bb)) {
            phi = std::clamp(bb, opts.bb_phi_min, opts.bb_phi_max);
        } else {
            phi = opts.bb_phi_init;
        }
    }
    return state;
}

/// Columns of group k (A) and the partial residual c with group k added back.
template <class Scalar>
struct SubproblemData
{
    Mat<Scalar> A;
    Vec<Scalar> c;
};

template <class Scalar>
struct GroupSolution
{
    Vec<Scalar> beta;
    int iterations = 0;
    bool converged = false;
};

namespace detail {

template <class Scalar>
GroupSolution<Scalar> solve_split(const SplitObjective<Scalar>& F, const Vec<Scalar>& beta_init,
                                  const SolverOptions<Scalar>& opts)
{
    const auto state = bb_gradient_projection(F, split_coefficients(beta_init), opts);
    return {state.beta(), state.iterations, state.converged};
}

} // namespace detail

/**
 * Minimizes (1/2n)||c - A b||^2 + lambda w_k log sum_j exp(alpha |b_j|)
 * over the coefficients b of one group, starting from `beta_init`.
 * `n` is the row count used in the loss normalization.
 */
template <class Scalar>
GroupSolution<Scalar> solve_group_subproblem(const SubproblemData<Scalar>& sub, Scalar lambda,
                                             Scalar alpha, Scalar weight,
                                             const Vec<Scalar>& beta_init,
                                             const SolverOptions<Scalar>& opts)
{
    if (sub.A.rows() != sub.c.size() || beta_init.size() != sub.A.cols()) {
        throw std::invalid_argument("subproblem: dimension mismatch");
    }
    const Scalar n = static_cast<Scalar>(sub.A.rows());
    SplitObjective<Scalar> F((sub.A.transpose() * sub.A) / n,
                             (sub.A.transpose() * sub.c) / n,
                             sub.c.squaredNorm() / (2 * n),
                             lambda * weight, alpha);
    return detail::solve_split(F, beta_init, opts);
}

/**
 * Maximum violation of the LES optimality conditions. With
 * g = X^T (y - X beta) / n and sigma_kj the within-group softmax of alpha|beta|:
 *
 *      beta_kj != 0:   |g_kj - lambda alpha w_k sigma_kj sign(beta_kj)|
 *      beta_kj == 0:   max(|g_kj| - lambda alpha w_k sigma_kj, 0)
 */
template <class Scalar>
Scalar kkt_residual(const GroupedDesign<Scalar>& design, const Response<Scalar>& response,
                    const Vec<Scalar>& beta, const PenaltyConfig<Scalar>& config)
{
    if (beta.size() != design.p() || response.n() != design.n()) {
        throw std::invalid_argument("kkt_residual: dimension mismatch");
    }
    const Scalar n = static_cast<Scalar>(design.n());
    const Vec<Scalar> g = design.X.transpose() * (response.y - design.X * beta) / n;
    Scalar worst = 0;
    for (Index k = 0; k < design.groups.n_groups(); ++k) {
        const auto& idx = design.groups.members(k);
        const Vec<Scalar> bk = beta(idx);
        const Vec<Scalar> sigma = group_softmax(bk, config.alpha);
        const Scalar scale = config.lambda * config.alpha * config.weights(k);
        for (Index i = 0; i < bk.size(); ++i) {
            const Scalar gi = g(idx[static_cast<std::size_t>(i)]);
            Scalar v;
            if (bk(i) != 0) {
                v = std::abs(gi - scale * sigma(i) * (bk(i) > 0 ? 1 : -1));
            } else {
                v = std::max(std::abs(gi) - scale * sigma(i), Scalar(0));
            }
            worst = std::max(worst, v);
        }
    }
    return worst;
}

/**
 * Fits the LES-penalized least squares by cycling over groups k = 0..K-1
 * and solving each group subproblem with bb_gradient_projection, warm
 * started at the current group coefficients.
 *
 * Never throws on non-convergence; `converged` reports whether a sweep
 * moved every coefficient by at most `outer_tol` within `max_sweeps`.
 */
template <class Scalar>
FitResult<Scalar> fit_les(const GroupedDesign<Scalar>& design, const Response<Scalar>& response,
                          const PenaltyConfig<Scalar>& config, const SolverOptions<Scalar>& opts,
                          const std::optional<Vec<Scalar>>& warm_start = std::nullopt)
{
    if (response.n() != design.n()) throw std::invalid_argument("fit_les: response length mismatch");
    config.validate(design.groups);
    opts.validate();

    const auto& groups = design.groups;
    const Index K = groups.n_groups();
    const Scalar n = static_cast<Scalar>(design.n());

    FitResult<Scalar> fit;
    fit.beta = warm_start ? *warm_start : Vec<Scalar>::Zero(design.p());
    if (fit.beta.size() != design.p()) throw std::invalid_argument("fit_les: warm start length mismatch");

    std::vector<Mat<Scalar>> blocks(static_cast<std::size_t>(K));
    std::vector<Mat<Scalar>> grams(static_cast<std::size_t>(K));
    for (Index k = 0; k < K; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        blocks[ku] = design.X(Eigen::all, groups.members(k));
        grams[ku] = blocks[ku].transpose() * blocks[ku] / n;
    }

    Vec<Scalar> residual = response.y - design.X * fit.beta;
    auto current_objective = [&] {
        Scalar v = residual.squaredNorm() / (2 * n);
        if (config.lambda != 0) v += config.lambda * les_penalty(fit.beta, config, groups);
        return v;
    };
    fit.objective_trace.push_back(current_objective());

    for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
        Scalar max_change = 0;
        for (Index k = 0; k < K; ++k) {
            const auto ku = static_cast<std::size_t>(k);
            const auto& idx = groups.members(k);
            const Vec<Scalar> old = fit.beta(idx);
            // A^T c / n with c = residual + A beta_k
            Vec<Scalar> linear = blocks[ku].transpose() * residual / n + grams[ku] * old;
            SplitObjective<Scalar> F(grams[ku], std::move(linear), Scalar(0),
                                     config.lambda * config.weights(k), config.alpha);
            const auto sol = detail::solve_split(F, old, opts);
            if (!sol.converged) ++fit.inner_failures;
            const Vec<Scalar> change = sol.beta - old;
            if (change.size() > 0) {
                max_change = std::max(max_change, change.cwiseAbs().maxCoeff());
            }
            residual.noalias() -= blocks[ku] * change;
            fit.beta(idx) = sol.beta;
        }
        fit.sweeps = sweep + 1;
        fit.objective_trace.push_back(current_objective());
        if (max_change <= opts.outer_tol) {
            fit.converged = true;
            break;
        }
    }

    fit.objective = objective(design, response, fit.beta, config);
    fit.kkt_residual = kkt_residual(design, response, fit.beta, config);
    fill_active_sets(fit, groups);
    return fit;
}

/// (1/2n)||y - X beta||^2 + gamma ||beta||_1
template <class Scalar>
Scalar lasso_objective(const GroupedDesign<Scalar>& design, const Response<Scalar>& response,
                       const Vec<Scalar>& beta, Scalar gamma)
{
    const Scalar n = static_cast<Scalar>(design.n());
    return (response.y - design.X * beta).squaredNorm() / (2 * n) + gamma * beta.template lpNorm<1>();
}

/// Maximum violation of the LASSO subgradient conditions.
template <class Scalar>
Scalar lasso_kkt_residual(const GroupedDesign<Scalar>& design, const Response<Scalar>& response,
                          const Vec<Scalar>& beta, Scalar gamma)
{
    const Scalar n = static_cast<Scalar>(design.n());
    const Vec<Scalar> g = design.X.transpose() * (response.y - design.X * beta) / n;
    Scalar worst = 0;
    for (Index j = 0; j < beta.size(); ++j) {
        const Scalar v = beta(j) != 0 ? std::abs(g(j) - gamma * (beta(j) > 0 ? 1 : -1))
                                      : std::max(std::abs(g(j)) - gamma, Scalar(0));
        worst = std::max(worst, v);
    }
    return worst;
}

/**
 * LASSO by cyclic coordinate descent with exact soft-threshold updates.
 * Sweeps until the coefficient change is within `outer_tol` and the
 * subgradient residual is at most `kkt_tol`.
 */
template <class Scalar>
FitResult<Scalar> fit_lasso(const GroupedDesign<Scalar>& design, const Response<Scalar>& response,
                            Scalar gamma, const SolverOptions<Scalar>& opts,
                            const std::optional<Vec<Scalar>>& warm_start = std::nullopt,
                            Scalar kkt_tol = Scalar(1e-7))
{
    if (response.n() != design.n()) throw std::invalid_argument("fit_lasso: response length mismatch");
    if (!(gamma >= 0)) throw ConfigError("gamma must be non-negative");
    opts.validate();

    const Index p = design.p();
    const Scalar n = static_cast<Scalar>(design.n());
    FitResult<Scalar> fit;
    fit.beta = warm_start ? *warm_start : Vec<Scalar>::Zero(p);
    if (fit.beta.size() != p) throw std::invalid_argument("fit_lasso: warm start length mismatch");

    const Vec<Scalar> col_sq = design.X.colwise().squaredNorm().transpose() / n;
    Vec<Scalar> residual = response.y - design.X * fit.beta;
    auto current_objective = [&] {
        return residual.squaredNorm() / (2 * n) + gamma * fit.beta.template lpNorm<1>();
    };
    fit.objective_trace.push_back(current_objective());

    for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
        Scalar max_change = 0;
        for (Index j = 0; j < p; ++j) {
            const Scalar old = fit.beta(j);
            const Scalar z = design.X.col(j).dot(residual) / n + col_sq(j) * old;
            const Scalar updated = soft_threshold(z, gamma) / col_sq(j);
            const Scalar change = updated - old;
            if (change != 0) {
                residual.noalias() -= change * design.X.col(j);
                fit.beta(j) = updated;
                max_change = std::max(max_change, std::abs(change));
            }
        }
        fit.sweeps = sweep + 1;
        fit.objective_trace.push_back(current_objective());
        if (max_change <= opts.outer_tol
            && lasso_kkt_residual(design, response, fit.beta, gamma) <= kkt_tol) {
            fit.converged = true;
            break;
        }
    }

    fit.objective = lasso_objective(design, response, fit.beta, gamma);
    fit.kkt_residual = lasso_kkt_residual(design, response, fit.beta, gamma);
    fill_active_sets(fit, design.groups);
    return fit;
}

} // namespace les
