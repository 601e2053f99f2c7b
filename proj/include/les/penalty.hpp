#pragma once
#include <algorithm>
#include <cmath>
#include <les/model.hpp>

namespace les {

/**
 * Stable log(sum_j exp(alpha * |x_j|)) for a single group.
 * The group maximum is pulled out before exponentiating.
 */
template <class Derived>
typename Derived::Scalar
log_sum_exp_abs(const Eigen::MatrixBase<Derived>& x, typename Derived::Scalar alpha)
{
    using Scalar = typename Derived::Scalar;
    const Scalar m = alpha * x.cwiseAbs().maxCoeff();
    Scalar s = 0;
    for (Index j = 0; j < x.size(); ++j) {
        s += std::exp(alpha * std::abs(x(j)) - m);
    }
    return m + std::log(s);
}

/// Softmax weights exp(alpha|x_j|) / sum_l exp(alpha|x_l|).
template <class Derived>
Vec<typename Derived::Scalar>
group_softmax(const Eigen::MatrixBase<Derived>& x, typename Derived::Scalar alpha)
{
    using Scalar = typename Derived::Scalar;
    const Scalar m = alpha * x.cwiseAbs().maxCoeff();
    Vec<Scalar> s = (alpha * x.cwiseAbs().array() - m).exp().matrix();
    return s / s.sum();
}

/**
 * LES penalty sum_k w_k log(sum_j exp(alpha |beta_kj|)).
 * Finite for any finite beta.
 */
template <class Scalar>
Scalar les_penalty(const Vec<Scalar>& beta, const PenaltyConfig<Scalar>& config,
                   const GroupPartition& groups)
{
    if (beta.size() != groups.n_columns()) {
        throw std::invalid_argument("coefficient length does not match group partition");
    }
    if (config.weights.size() != groups.n_groups()) {
        throw std::invalid_argument("weights length does not match group partition");
    }
    Scalar total = 0;
    for (Index k = 0; k < groups.n_groups(); ++k) {
        total += config.weights(k) * log_sum_exp_abs(beta(groups.members(k)), config.alpha);
    }
    return total;
}

/// (1/2n)||y - X beta||^2 + lambda * les_penalty(beta).
template <class Scalar>
Scalar objective(const GroupedDesign<Scalar>& design, const Response<Scalar>& response,
                 const Vec<Scalar>& beta, const PenaltyConfig<Scalar>& config)
{
    if (response.n() != design.n() || beta.size() != design.p()) {
        throw std::invalid_argument("objective: dimension mismatch");
    }
    const Scalar n = static_cast<Scalar>(design.n());
    const Scalar loss = (response.y - design.X * beta).squaredNorm() / (2 * n);
    if (config.lambda == 0) return loss;
    return loss + config.lambda * les_penalty(beta, config, design.groups);
}

/**
 * Smallest lambda at which beta = 0 satisfies the optimality conditions:
 * max over (k,j) of p_k |X_kj^T y| / (n alpha w_k). The lambda field of
 * `config` is ignored.
 */
template <class Scalar>
Scalar lambda_max(const GroupedDesign<Scalar>& design, const Response<Scalar>& response,
                  const PenaltyConfig<Scalar>& config)
{
    if (response.n() != design.n()) throw std::invalid_argument("lambda_max: dimension mismatch");
    const Scalar n = static_cast<Scalar>(design.n());
    const Vec<Scalar> score = (design.X.transpose() * response.y).cwiseAbs();
    Scalar best = 0;
    for (Index k = 0; k < design.groups.n_groups(); ++k) {
        const Scalar pk = static_cast<Scalar>(design.groups.size(k));
        const Scalar top = score(design.groups.members(k)).maxCoeff();
        best = std::max(best, pk * top / (n * config.alpha * config.weights(k)));
    }
    return best;
}

/// Classic LASSO lambda_max: max_j |X_j^T y| / n.
template <class Scalar>
Scalar lasso_lambda_max(const GroupedDesign<Scalar>& design, const Response<Scalar>& response)
{
    return (design.X.transpose() * response.y).cwiseAbs().maxCoeff()
           / static_cast<Scalar>(design.n());
}

} // namespace les
