#pragma once

#include <string>
#include <vector>

#include "tailrisk/dist.hpp"
#include "tailrisk/loss.hpp"
#include "tailrisk/risk.hpp"

namespace tailrisk {

/// Per-piece minimizers of the rate function over the excess-loss sub-regions
/// R_i = { x : theta'A_i x >= u } of a max-affine loss under a gaussian base.
///
/// For a rare region (u > theta'A_i m) the single-constraint quadratic program
/// argmin { Lambda*(x) : theta'A_i x >= u } has the closed-form KKT solution
///   a_i = m + Sigma A_i' theta (u - theta'A_i m) / (theta'A_i Sigma A_i' theta).
/// Regions whose mean already satisfies the constraint are flagged non-rare
/// (a_i = m); regions with a degenerate direction (zero variance along
/// A_i' theta) are flagged and skipped.
struct DominatingPoints {
    Mat points;                    // M x d, row i = a_i
    std::vector<bool> rare;        // u > theta'A_i m
    std::vector<bool> degenerate;  // theta'A_i Sigma A_i'theta == 0

    bool any_usable() const;
};

DominatingPoints dominating_points(const DistributionModel& dist, const LossModel& loss, Real u,
                                   const Eigen::Ref<const Vec>& theta);

/// Roots of grad Lambda(b_i) = a_i; gaussian closed form b_i = Sigma^{-1}(a_i - m).
std::vector<Vec> tilt_parameters(const DistributionModel& dist, const Mat& points);

/// Mixture weights over the rare, non-degenerate regions:
/// p_i proportional to exp(-Lambda*(a_i)), floored at 1e-3 / M, renormalized.
Vec mixture_weights(const DistributionModel& dist, const DominatingPoints& dp);

/// Mixture of exponentially tilted copies of the base, one per retained
/// dominating point. Immutable after construction.
class TiltMixture {
public:
    TiltMixture(DistributionModel base, Mat dominating, std::vector<Vec> tilts, Vec weights);

    /// Untilted base as a single-component mixture (identity change of measure).
    static TiltMixture identity(const DistributionModel& base);

    const DistributionModel& base() const { return base_; }
    Index components() const { return weights_.size(); }
    const Mat& dominating() const { return dominating_; }
    const std::vector<Vec>& tilts() const { return tilts_; }
    const Vec& weights() const { return weights_; }
    const Vec& cumulative_weights() const { return cumulative_; }
    const DistributionModel& component(Index i) const { return tilted_[static_cast<std::size_t>(i)]; }
    bool is_identity() const;

    /// log of the mixture density sum_i p_i g_i at z.
    Real log_mixture_density(const Eigen::Ref<const Vec>& z) const;

    /// log likelihood ratio log f_X(z) - log f_Z(z); computed via log-sum-exp
    /// of the tilt exponents, so the base density cancels exactly.
    Real log_weight(const Eigen::Ref<const Vec>& z) const;

    std::string summary() const;

private:
    DistributionModel base_;
    Mat dominating_;
    std::vector<Vec> tilts_;
    Vec weights_;
    Vec cumulative_;
    Vec log_mgf_at_tilt_;
    std::vector<DistributionModel> tilted_;
};

/// Draws component ~ p then Z ~ tilt(base, b_i); single-component mixtures
/// skip the component draw so the identity mixture consumes the stream
/// exactly like plain SAA sampling.
WeightedSampleBatch sample_tilt_mixture(const TiltMixture& mix, RngStream& rng, Index n, int tag = 0);

/// Oracle b(u, theta): dominating points -> tilt roots -> mixture weights.
/// If any region is non-rare the excess-loss event itself is not rare and the
/// untilted base is returned. Requires a gaussian base and an affine-piece
/// loss (linear_portfolio is treated as the single piece A = -I).
TiltMixture oracle_exptilt(Real u, const Eigen::Ref<const Vec>& theta, const DistributionModel& dist,
                           const LossModel& loss);

} // namespace tailrisk
