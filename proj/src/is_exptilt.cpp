#include "tailrisk/is_exptilt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "tailrisk/errors.hpp"

namespace tailrisk {

namespace {

constexpr Real kRootTol = 1e-8;

std::vector<Mat> affine_pieces(const LossModel& loss, Index d) {
    switch (loss.kind()) {
        case LossModel::Kind::LinearPortfolio:
            return {Mat(-Mat::Identity(d, d))};
        case LossModel::Kind::MaxAffine:
            return loss.pieces();
        case LossModel::Kind::Quadratic:
            throw NotImplementedError("exponential tilting supports affine-piece losses only");
    }
    return {};
}

void require_gaussian(const DistributionModel& dist) {
    if (!dist.is_gaussian())
        throw NotImplementedError(
            "exponential tilting requires a light-tailed base distribution with a finite "
            "moment generating function; " +
            dist.describe() + " has none for any nonzero tilt");
}

} // namespace

bool DominatingPoints::any_usable() const {
    for (std::size_t i = 0; i < rare.size(); ++i)
        if (rare[i] && !degenerate[i]) return true;
    return false;
}

DominatingPoints dominating_points(const DistributionModel& dist, const LossModel& loss, Real u,
                                   const Eigen::Ref<const Vec>& theta) {
    require_gaussian(dist);
    const Index d = dist.dim();
    const auto pieces = affine_pieces(loss, d);
    const Vec& m = dist.gaussian_mean();
    const Mat& cov = dist.gaussian_cov();

    DominatingPoints dp;
    dp.points.resize(static_cast<Index>(pieces.size()), d);
    dp.rare.assign(pieces.size(), false);
    dp.degenerate.assign(pieces.size(), false);

    for (std::size_t i = 0; i < pieces.size(); ++i) {
        const Vec c = pieces[i].transpose() * theta; // region: c'x >= u
        const Real mean_value = c.dot(m);
        const Index row = static_cast<Index>(i);
        if (u <= mean_value) {
            dp.points.row(row) = m.transpose();
            continue;
        }
        dp.rare[i] = true;
        const Vec cov_c = cov * c;
        const Real denom = c.dot(cov_c);
        if (denom <= 0.0) {
            dp.degenerate[i] = true;
            dp.points.row(row) = m.transpose();
            continue;
        }
        dp.points.row(row) = (m + cov_c * ((u - mean_value) / denom)).transpose();
    }
    return dp;
}

std::vector<Vec> tilt_parameters(const DistributionModel& dist, const Mat& points) {
    require_gaussian(dist);
    const Vec& m = dist.gaussian_mean();
    const Mat& L = dist.gaussian_chol_lower();
    std::vector<Vec> tilts;
    tilts.reserve(static_cast<std::size_t>(points.rows()));
    for (Index i = 0; i < points.rows(); ++i) {
        const Vec diff = points.row(i).transpose() - m;
        // Sigma^{-1} diff via the cached factor.
        Vec y = L.triangularView<Eigen::Lower>().solve(diff);
        tilts.push_back(L.transpose().triangularView<Eigen::Upper>().solve(y));
    }
    return tilts;
}

Vec mixture_weights(const DistributionModel& dist, const DominatingPoints& dp) {
    require_gaussian(dist);
    std::vector<Real> neg_rate;
    for (std::size_t i = 0; i < dp.rare.size(); ++i) {
        if (!dp.rare[i] || dp.degenerate[i]) continue;
        neg_rate.push_back(-rate_conjugate(dist, dp.points.row(static_cast<Index>(i)).transpose()));
    }
    if (neg_rate.empty())
        throw std::invalid_argument("mixture_weights: no rare, non-degenerate region to weight");

    const Index m = static_cast<Index>(neg_rate.size());
    const Real top = *std::max_element(neg_rate.begin(), neg_rate.end());
    Vec p(m);
    for (Index i = 0; i < m; ++i) p[i] = std::exp(neg_rate[static_cast<std::size_t>(i)] - top);
    p /= p.sum();

    const Real floor = 1e-3 / static_cast<Real>(m);
    p = p.cwiseMax(floor);
    p /= p.sum();
    return p;
}

TiltMixture::TiltMixture(DistributionModel base, Mat dominating, std::vector<Vec> tilts, Vec weights)
    : base_(std::move(base)),
      dominating_(std::move(dominating)),
      tilts_(std::move(tilts)),
      weights_(std::move(weights)) {
    const Index m = weights_.size();
    if (m < 1 || static_cast<Index>(tilts_.size()) != m || dominating_.rows() != m)
        throw std::invalid_argument("TiltMixture: component counts disagree");
    if (weights_.minCoeff() <= 0.0 || std::abs(weights_.sum() - 1.0) > 1e-12)
        throw std::invalid_argument("TiltMixture: weights must be positive and sum to 1");

    cumulative_.resize(m);
    log_mgf_at_tilt_.resize(m);
    Real acc = 0.0;
    for (Index i = 0; i < m; ++i) {
        acc += weights_[i];
        cumulative_[i] = acc;
        log_mgf_at_tilt_[i] = log_mgf(base_, tilts_[static_cast<std::size_t>(i)]);
        tilted_.push_back(tilt(base_, TiltParams{tilts_[static_cast<std::size_t>(i)]}));

        const Vec root_gap = grad_log_mgf(base_, tilts_[static_cast<std::size_t>(i)]) -
                             dominating_.row(i).transpose();
        if (root_gap.cwiseAbs().maxCoeff() > kRootTol)
            throw std::invalid_argument("TiltMixture: tilt root residual exceeds tolerance");
    }
}

TiltMixture TiltMixture::identity(const DistributionModel& base) {
    Mat a(1, base.dim());
    a.row(0) = base.mean_vector().transpose();
    return TiltMixture(base, a, {Vec::Zero(base.dim())}, Vec::Ones(1));
}

bool TiltMixture::is_identity() const {
    return components() == 1 && tilts_.front().isZero(0.0);
}

Real TiltMixture::log_weight(const Eigen::Ref<const Vec>& z) const {
    // f_Z = sum_i p_i exp(b_i'z - Lambda(b_i)) f_X, so the ratio f_X/f_Z is
    // -logsumexp_i(log p_i + b_i'z - Lambda(b_i)); f_X cancels exactly.
    const Index m = components();
    if (m == 1) return log_mgf_at_tilt_[0] - tilts_[0].dot(z);
    Vec e(m);
    for (Index i = 0; i < m; ++i)
        e[i] = std::log(weights_[i]) + tilts_[static_cast<std::size_t>(i)].dot(z) - log_mgf_at_tilt_[i];
    const Real top = e.maxCoeff();
    return -(top + std::log((e.array() - top).exp().sum()));
}

Real TiltMixture::log_mixture_density(const Eigen::Ref<const Vec>& z) const {
    const Real base_log = log_density(base_, z);
    if (base_log == -std::numeric_limits<Real>::infinity()) return base_log;
    return base_log - log_weight(z);
}

std::string TiltMixture::summary() const {
    std::ostringstream os;
    if (is_identity()) {
        os << "exptilt(identity)";
        return os.str();
    }
    os << "exptilt(M=" << components() << ", |b|=[";
    for (Index i = 0; i < components(); ++i) {
        if (i) os << ",";
        os << tilts_[static_cast<std::size_t>(i)].norm();
    }
    os << "])";
    return os.str();
}

WeightedSampleBatch sample_tilt_mixture(const TiltMixture& mix, RngStream& rng, Index n, int tag) {
    if (n < 1) throw std::invalid_argument("sample_tilt_mixture: n must be >= 1");
    WeightedSampleBatch batch;
    batch.points.resize(n, mix.base().dim());
    batch.log_weights.resize(n);
    batch.source = Eigen::VectorXi::Constant(n, tag);
    const bool single = mix.components() == 1;
    for (Index i = 0; i < n; ++i) {
        const Index comp = single ? 0 : rng.categorical(mix.cumulative_weights());
        const Vec z = sample_one(mix.component(comp), rng);
        batch.points.row(i) = z.transpose();
        batch.log_weights[i] = mix.log_weight(z);
    }
    return batch;
}

TiltMixture oracle_exptilt(Real u, const Eigen::Ref<const Vec>& theta, const DistributionModel& dist,
                           const LossModel& loss) {
    require_gaussian(dist);
    const DominatingPoints dp = dominating_points(dist, loss, u, theta);

    // Any non-rare region means the excess-loss event itself is frequent;
    // tilting would only inflate variance.
    const bool all_rare = std::all_of(dp.rare.begin(), dp.rare.end(), [](bool r) { return r; });
    if (!all_rare || !dp.any_usable()) return TiltMixture::identity(dist);

    std::vector<Index> keep;
    for (std::size_t i = 0; i < dp.rare.size(); ++i)
        if (dp.rare[i] && !dp.degenerate[i]) keep.push_back(static_cast<Index>(i));

    Mat a(static_cast<Index>(keep.size()), dist.dim());
    for (std::size_t k = 0; k < keep.size(); ++k) a.row(static_cast<Index>(k)) = dp.points.row(keep[k]);

    const Vec p = mixture_weights(dist, dp);
    return TiltMixture(dist, a, tilt_parameters(dist, a), p);
}

} // namespace tailrisk
