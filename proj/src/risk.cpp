#include "tailrisk/risk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "tailrisk/errors.hpp"

namespace tailrisk {

namespace {
constexpr Real kInf = std::numeric_limits<Real>::infinity();
}

void RiskSpec::validate() const {
    if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("risk: beta must lie in (0,1)");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("risk: lambda must lie in [0,1]");
}

WeightedSampleBatch WeightedSampleBatch::saa(Mat pts, int tag) {
    WeightedSampleBatch b;
    b.log_weights = Vec::Zero(pts.rows());
    b.source = Eigen::VectorXi::Constant(pts.rows(), tag);
    b.points = std::move(pts);
    return b;
}

void WeightedSampleBatch::append(const WeightedSampleBatch& other) {
    if (n() == 0) {
        *this = other;
        return;
    }
    if (other.dim() != dim()) throw std::invalid_argument("batch append: dimension mismatch");
    const Index n0 = n();
    const Index n1 = other.n();
    points.conservativeResize(n0 + n1, Eigen::NoChange);
    log_weights.conservativeResize(n0 + n1);
    source.conservativeResize(n0 + n1);
    points.bottomRows(n1) = other.points;
    log_weights.tail(n1) = other.log_weights;
    source.tail(n1) = other.source;
}

void WeightedSampleBatch::validate() const {
    if (n() < 1) throw std::invalid_argument("batch: must contain at least one point");
    if (log_weights.size() != n() || source.size() != n())
        throw std::invalid_argument("batch: field lengths disagree");
    for (Index i = 0; i < n(); ++i) {
        const Real lw = log_weights[i];
        if (std::isnan(lw) || lw == kInf)
            throw std::invalid_argument("batch: log-weights must be finite or -inf");
    }
}

Real excess_objective(const LossModel& model, const Eigen::Ref<const Vec>& x, Real u,
                      const Eigen::Ref<const Vec>& theta, Real beta) {
    if (!(beta > 0.0 && beta <= 1.0)) throw std::invalid_argument("excess_objective: beta must lie in (0,1]");
    return u + std::max(loss(model, x, theta) - u, 0.0) / beta;
}

namespace {

Real weighted_excess_mean(const Vec& losses, const Vec& log_weights, Real u) {
    Vec terms(losses.size());
    for (Index i = 0; i < losses.size(); ++i) {
        const Real w = std::exp(log_weights[i]);
        terms[i] = w > 0.0 ? std::max(losses[i] - u, 0.0) * w : 0.0;
    }
    return pairwise_sum(terms) / static_cast<Real>(losses.size());
}

} // namespace

Real is_objective(const WeightedSampleBatch& batch, const LossModel& model, Real u,
                  const Eigen::Ref<const Vec>& theta, Real beta) {
    batch.validate();
    const Vec losses = loss_batch(model, batch.points, theta);
    return u + weighted_excess_mean(losses, batch.log_weights, u) / beta;
}

Real saa_objective(const Mat& points, const LossModel& model, Real u,
                   const Eigen::Ref<const Vec>& theta, Real beta) {
    return is_objective(WeightedSampleBatch::saa(points), model, u, theta, beta);
}

VarCvarEstimate empirical_var_cvar(const Vec& losses, const Vec& log_weights, Real beta) {
    const Index n = losses.size();
    if (n < 1) throw std::invalid_argument("empirical_var_cvar: empty batch");
    if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("empirical_var_cvar: beta must lie in (0,1)");

    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::sort(order.begin(), order.end(), [&](Index a, Index b) { return losses[a] < losses[b]; });

    // Suffix sums over the ascending order: mass and weighted loss above each
    // candidate. The objective at candidate u = l_(k) is
    //   u + (sum_{l_j > u} w_j (l_j - u)) / (n beta).
    Vec w(n);
    for (Index i = 0; i < n; ++i) w[i] = std::exp(log_weights[order[static_cast<std::size_t>(i)]]);
    Vec sorted(n);
    for (Index i = 0; i < n; ++i) sorted[i] = losses[order[static_cast<std::size_t>(i)]];

    const Real total_mass = pairwise_sum(w);
    const Real nbeta = static_cast<Real>(n) * beta;
    if (!(total_mass > 0.0)) throw DegenerateBatchError("empirical_var_cvar: batch carries zero weight");
    if (total_mass <= nbeta)
        throw DegenerateBatchError(
            "empirical_var_cvar: effective mass <= n*beta, the infimum over u is unbounded below");

    Real best_obj = kInf;
    Real best_u = sorted[n - 1];
    Real suffix_mass = 0.0;     // sum of w_j with l_j strictly above the candidate
    Real suffix_weighted = 0.0; // sum of w_j l_j over the same points
    // Walk candidates from the largest loss down so suffix sums grow one
    // plateau at a time; <= keeps the smallest minimizer on ties.
    Index i = n - 1;
    while (i >= 0) {
        Index j = i;
        while (j > 0 && sorted[j - 1] == sorted[i]) --j; // plateau [j..i]
        const Real u = sorted[i];
        const Real obj = u + (suffix_weighted - suffix_mass * u) / nbeta;
        if (obj <= best_obj) {
            best_obj = obj;
            best_u = u;
        }
        for (Index k = j; k <= i; ++k) {
            suffix_mass += w[k];
            suffix_weighted += w[k] * sorted[k];
        }
        i = j - 1;
    }
    return VarCvarEstimate{best_u, best_obj};
}

VarCvarEstimate empirical_var_cvar(const WeightedSampleBatch& batch, const LossModel& model,
                                   const Eigen::Ref<const Vec>& theta, Real beta) {
    batch.validate();
    const Vec losses = loss_batch(model, batch.points, theta);
    return empirical_var_cvar(losses, batch.log_weights, beta);
}

Real mean_cvar_objective(const WeightedSampleBatch& batch, const LossModel& model, Real u,
                         const Eigen::Ref<const Vec>& theta, const RiskSpec& spec) {
    spec.validate();
    batch.validate();
    const Vec losses = loss_batch(model, batch.points, theta);
    Vec terms(losses.size());
    for (Index i = 0; i < losses.size(); ++i) {
        const Real w = std::exp(batch.log_weights[i]);
        terms[i] = w > 0.0 ? losses[i] * w : 0.0;
    }
    const Real mean_loss = pairwise_sum(terms) / static_cast<Real>(losses.size());
    const Real cvar_part = u + weighted_excess_mean(losses, batch.log_weights, u) / spec.beta;
    return spec.lambda * mean_loss + (1.0 - spec.lambda) * cvar_part;
}

Vec subgrad_G(const LossModel& model, const Eigen::Ref<const Vec>& x, Real u,
              const Eigen::Ref<const Vec>& theta, Real beta) {
    if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("subgrad_G: beta must lie in (0,1)");
    const Index p = theta.size();
    Vec g = Vec::Zero(1 + p);
    if (loss(model, x, theta) >= u) {
        g[0] = 1.0 - 1.0 / beta;
        g.tail(p) = loss_subgrad_theta(model, x, theta) / beta;
    } else {
        g[0] = 1.0;
    }
    return g;
}

} // namespace tailrisk
