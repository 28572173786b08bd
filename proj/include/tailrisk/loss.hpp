#pragma once

#include <limits>
#include <optional>
#include <vector>

#include "tailrisk/rng.hpp"
#include "tailrisk/types.hpp"

namespace tailrisk {

/// Loss models l(x, theta) with theta-subgradients and the asymptotic growth
/// rate rho of l(n x, theta) / n^rho.
///
/// Kinds:
///   linear_portfolio  l = -theta'x                         (rho = 1)
///   max_affine        l = max_i theta'A_i x, A_i p-by-d    (rho = 1)
///   quadratic         l = theta_1 (x'Qx + q'x), theta in R (rho = 2)
class LossModel {
public:
    enum class Kind { LinearPortfolio, MaxAffine, Quadratic };

    static LossModel linear_portfolio();
    static LossModel max_affine(std::vector<Mat> pieces);
    static LossModel quadratic(Mat Q, Vec q);

    Kind kind() const { return kind_; }
    const std::vector<Mat>& pieces() const { return pieces_; }
    const Mat& quad_Q() const { return Q_; }
    const Vec& quad_q() const { return q_; }

    /// Decision dimension p for uncertainty dimension d.
    Index theta_dim(Index x_dim) const;

    /// x-dimension the model requires, or nullopt if any d is accepted.
    std::optional<Index> x_dim() const;

    std::string describe() const;

private:
    LossModel(Kind k, Real rho) : kind_(k), rho_(rho) {}

    Kind kind_;
    Real rho_;
    std::vector<Mat> pieces_; // max_affine
    Mat Q_;                   // quadratic
    Vec q_;

    friend Real growth_rate(const LossModel&);
};

Real loss(const LossModel& model, const Eigen::Ref<const Vec>& x, const Eigen::Ref<const Vec>& theta);

/// Losses of all rows of `points` at the same theta.
Vec loss_batch(const LossModel& model, const Mat& points, const Eigen::Ref<const Vec>& theta);

/// A subgradient of l(x, .) at theta. For max_affine the piece attaining the
/// max is used, lowest index on ties.
Vec loss_subgrad_theta(const LossModel& model, const Eigen::Ref<const Vec>& x,
                       const Eigen::Ref<const Vec>& theta);

inline Real growth_rate(const LossModel& model) { return model.rho_; }

/// If l(x, theta) is the linear form c'x for this theta (linear_portfolio, or
/// max_affine with a single piece), returns c; otherwise nullopt. Used by the
/// analytic gaussian references.
std::optional<Vec> linear_coefficient(const LossModel& model, const Eigen::Ref<const Vec>& theta,
                                      Index x_dim);

struct MonotoneReport {
    long violations = 0;
    long checked = 0; // pairs that actually landed in the excess-loss set
};

/// Randomized witness for orthogonal monotonicity of {x : l(x,theta) >= u}:
/// samples pairs x <= x1 with l(x,theta) >= u and counts cases l(x1,theta) < u.
/// Zero violations is necessary, not sufficient, evidence.
MonotoneReport validate_orthogonal_monotone(const LossModel& model, const Eigen::Ref<const Vec>& theta,
                                            Real u, long trials, RngStream& rng);

/// Decision set Theta = { theta : theta >= 0, 1'theta = 1, mu'theta >= t },
/// with the pieces individually optional.
struct DecisionConstraint {
    bool nonneg = true;
    bool sum_to_one = true;
    Vec mu;                                                  // asset means, empty if no return constraint
    Real target_return = -std::numeric_limits<Real>::infinity();

    bool has_return() const { return mu.size() > 0 && std::isfinite(target_return); }

    static DecisionConstraint simplex() { return DecisionConstraint{}; }

    static DecisionConstraint simplex_with_return(Vec mu, Real t);

    /// Throws FeasibilityError if the set is provably empty.
    void validate(Index theta_dim) const;
};

} // namespace tailrisk
