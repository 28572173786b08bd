#pragma once

#include "tailrisk/loss.hpp"
#include "tailrisk/types.hpp"

namespace tailrisk {

/// Tail level and mean-CVaR mixing weight. lambda = 0 is pure CVaR.
struct RiskSpec {
    Real beta = 0.05;
    Real lambda = 0.0;

    void validate() const;
};

/// Batch of points Z_i with per-point log likelihood ratios log L_i and a
/// per-point tag identifying the sampling law that generated it. SAA batches
/// carry all-zero log-weights. Estimators accept heterogeneous batches
/// (points from different epochs/laws mixed together).
struct WeightedSampleBatch {
    Mat points;                // n x d
    Vec log_weights;           // n, entries finite or -inf
    Eigen::VectorXi source;    // n, generating-law tag

    Index n() const { return points.rows(); }
    Index dim() const { return points.cols(); }

    static WeightedSampleBatch saa(Mat pts, int tag = 0);
    void append(const WeightedSampleBatch& other);
    void validate() const;
};

/// F(x; u, theta) = u + (l(x,theta) - u)^+ / beta.
Real excess_objective(const LossModel& model, const Eigen::Ref<const Vec>& x, Real u,
                      const Eigen::Ref<const Vec>& theta, Real beta);

/// Weighted objective estimate u + (n beta)^{-1} sum_i (l(Z_i,theta) - u)^+ L_i.
/// Points with log-weight -inf contribute zero.
Real is_objective(const WeightedSampleBatch& batch, const LossModel& model, Real u,
                  const Eigen::Ref<const Vec>& theta, Real beta);

/// Unweighted special case of is_objective.
Real saa_objective(const Mat& points, const LossModel& model, Real u,
                   const Eigen::Ref<const Vec>& theta, Real beta);

struct VarCvarEstimate {
    Real var;  // v-hat: smallest minimizer of u -> is_objective(...)
    Real cvar; // c-hat: is_objective at v-hat
};

/// Empirical VaR/CVaR from a weighted batch. The objective is piecewise
/// linear in u with kinks only at sample losses, so candidate minimizers are
/// the observed losses; ties break to the smallest.
/// Throws DegenerateBatchError if the effective mass sum(L_i) <= n beta
/// (the infimum over u is then unbounded below).
VarCvarEstimate empirical_var_cvar(const WeightedSampleBatch& batch, const LossModel& model,
                                   const Eigen::Ref<const Vec>& theta, Real beta);

/// Same, given precomputed losses and log-weights.
VarCvarEstimate empirical_var_cvar(const Vec& losses, const Vec& log_weights, Real beta);

/// lambda * (weighted mean loss) + (1 - lambda) * is_objective.
Real mean_cvar_objective(const WeightedSampleBatch& batch, const LossModel& model, Real u,
                         const Eigen::Ref<const Vec>& theta, const RiskSpec& spec);

/// Subgradient of F(x; ., .) at (u, theta), length 1 + p:
///   dF/du     = 1 - 1{l(x,theta) >= u} / beta
///   dF/dtheta = loss_subgrad_theta(x, theta) 1{l(x,theta) >= u} / beta
/// The indicator uses >= with exact comparison.
Vec subgrad_G(const LossModel& model, const Eigen::Ref<const Vec>& x, Real u,
              const Eigen::Ref<const Vec>& theta, Real beta);

} // namespace tailrisk
