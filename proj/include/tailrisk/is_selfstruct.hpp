#pragma once

#include <string>
#include <vector>

#include "tailrisk/dist.hpp"
#include "tailrisk/loss.hpp"
#include "tailrisk/risk.hpp"

namespace tailrisk {

/// Parameters of the self-structuring stretch T_h. Immutable: the derived
/// stretch s = h * max{log log(1/beta), 1} is computed at construction, so it
/// can never fall out of sync with (h, beta).
struct SelfStructParams {
    Real h;
    Real beta;
    Real rho;
    Real s;

    static SelfStructParams make(Real h, Real beta, Real rho);
};

/// Stretch factor s_h = h * max{log log(1/beta), 1}. For beta >= 1/e the
/// inner log log is <= 0 (or -inf as beta -> 1); the max clamps it to 1.
Real stretch_factor(Real h, Real beta);

/// The h making s_h = 1 (identity transform) at this beta.
inline Real identity_stretch_h(Real beta) { return 1.0 / stretch_factor(1.0, beta); }

/// Componentwise exponent kappa_i(x) = log(1+|x_i|) / (rho log(1+|x|_inf)).
/// At x = 0 every component is 1/rho by convention (immaterial: T_h(0) = 0).
Vec kappa(const Eigen::Ref<const Vec>& x, Real rho);

/// T_h(x) = x .* s^{kappa(x)} componentwise; preserves signs and zeros.
Vec transform(const Eigen::Ref<const Vec>& x, const SelfStructParams& params);

/// Jacobian J_h(x) = [prod_i Jt_i] * s^{sum_i kappa_i} / max_i Jt_i with
///   Jt_i = 1 + (log(s) / (rho log(1+|x|_inf))) * |x_i| / (1+|x_i|).
/// This product form equals |det DT_h| for s >= 1. Throws
/// DegeneratePointError when |x|_inf <= 1e-12 (callers resample).
Real jacobian(const Eigen::Ref<const Vec>& x, const SelfStructParams& params);

/// log J_h(x), with nonpositive product factors (possible only when s < 1,
/// outside the product form's validity) mapped to -inf (zero mass).
Real log_jacobian(const Eigen::Ref<const Vec>& x, const SelfStructParams& params);

/// Draws X ~ dist and emits Z = T_h(X) with
///   log L = log f_X(Z) + log J_h(X) - log f_X(X);
/// Z outside the support of dist gets log-weight -inf. Degenerate draws
/// X = 0 are resampled (at most 10 retries). With s = 1 the batch is
/// bit-identical to an SAA batch drawn from the same stream.
WeightedSampleBatch sample_selfstruct(const DistributionModel& dist, const SelfStructParams& params,
                                      RngStream& rng, Index n, int tag = 0);

/// Oracle objective for the stretch search: with common base points X_i,
///   M2(h) = m^{-1} sum_i [(l(T_h(X_i), theta) - u)^+]^2 * L_{h,i}.
/// `squared_weight` instead applies L_{h,i}^2, which estimates the second
/// moment of the IS estimator term and is exposed as an alternative oracle.
Real second_moment(Real h, Real u, const Eigen::Ref<const Vec>& theta, const Mat& base_points,
                   const DistributionModel& dist, const LossModel& loss, Real beta, Real rho,
                   bool squared_weight = false);

struct HSelection {
    Real h = 1.0;
    bool no_signal = false;      // no grid point produced any excess-loss mass
    std::vector<Real> objective; // M2 per (sorted) grid value, for diagnostics
};

/// argmin of second_moment over the grid, reusing the same base points for
/// every h (common random numbers). Grid entries with zero objective carry no
/// signal (no excess-loss point was observed under that stretch) and cannot
/// be selected; ties break to the smallest h. If every entry is zero the grid
/// midpoint is returned with the no-signal flag set.
HSelection select_h(Real u, const Eigen::Ref<const Vec>& theta, const Mat& base_points,
                    const DistributionModel& dist, const LossModel& loss, Real beta, Real rho,
                    std::vector<Real> grid, bool squared_weight = false);

/// Default search grid: 8 log-spaced points in [0.25, 4].
std::vector<Real> default_h_grid();

} // namespace tailrisk
