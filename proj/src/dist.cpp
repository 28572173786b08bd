#include "tailrisk/dist.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace tailrisk {

namespace {
constexpr Real kNegInf = -std::numeric_limits<Real>::infinity();
}

DistributionModel DistributionModel::gaussian(Vec mean, Mat cov) {
    const Index d = mean.size();
    if (d < 1) throw std::invalid_argument("gaussian: dimension must be >= 1");
    if (cov.rows() != d || cov.cols() != d)
        throw std::invalid_argument("gaussian: covariance shape does not match mean");
    if (!cov.isApprox(cov.transpose(), 1e-12))
        throw std::invalid_argument("gaussian: covariance must be symmetric");

    Eigen::LLT<Mat> llt(cov);
    if (llt.info() != Eigen::Success)
        throw std::invalid_argument("gaussian: covariance must be positive-definite (Cholesky failed)");

    Gaussian g;
    g.mean = std::move(mean);
    g.cov = std::move(cov);
    g.chol_lower = llt.matrixL();
    g.log_norm_const = -0.5 * static_cast<Real>(d) * std::log(2.0 * std::numbers::pi) -
                       g.chol_lower.diagonal().array().log().sum();

    DistributionModel m(Kind::Gaussian, d);
    m.model_ = std::move(g);
    return m;
}

DistributionModel DistributionModel::weibull_iid(Real shape, Real scale, Index dim) {
    if (!(shape > 0.0) || !std::isfinite(shape))
        throw std::invalid_argument("weibull_iid: shape must be in (0, inf)");
    if (!(scale > 0.0) || !std::isfinite(scale))
        throw std::invalid_argument("weibull_iid: scale must be in (0, inf)");
    if (dim < 1) throw std::invalid_argument("weibull_iid: dim must be >= 1");

    DistributionModel m(Kind::WeibullIid, dim);
    m.model_ = WeibullIid{shape, scale};
    return m;
}

const DistributionModel::Gaussian& DistributionModel::gauss() const {
    if (kind_ != Kind::Gaussian) throw std::logic_error("model is not gaussian");
    return std::get<Gaussian>(model_);
}

const DistributionModel::WeibullIid& DistributionModel::weib() const {
    if (kind_ != Kind::WeibullIid) throw std::logic_error("model is not weibull_iid");
    return std::get<WeibullIid>(model_);
}

const Vec& DistributionModel::gaussian_mean() const { return gauss().mean; }
const Mat& DistributionModel::gaussian_cov() const { return gauss().cov; }
const Mat& DistributionModel::gaussian_chol_lower() const { return gauss().chol_lower; }
Real DistributionModel::weibull_shape() const { return weib().shape; }
Real DistributionModel::weibull_scale() const { return weib().scale; }

Vec DistributionModel::mean_vector() const {
    if (kind_ == Kind::Gaussian) return gauss().mean;
    const auto& w = weib();
    return Vec::Constant(dim_, w.scale * std::tgamma(1.0 + 1.0 / w.shape));
}

std::string DistributionModel::describe() const {
    std::ostringstream os;
    if (kind_ == Kind::Gaussian) {
        os << "gaussian(d=" << dim_ << ")";
    } else {
        const auto& w = weib();
        os << "weibull_iid(c=" << w.shape << ",scale=" << w.scale << ",d=" << dim_ << ")";
    }
    return os.str();
}

Vec sample_one(const DistributionModel& dist, RngStream& rng) {
    const Index d = dist.dim();
    if (dist.kind() == DistributionModel::Kind::Gaussian) {
        const auto& g = dist.gauss();
        return g.mean + g.chol_lower * rng.normals(d);
    }
    const auto& w = dist.weib();
    Vec x(d);
    const Real inv_c = 1.0 / w.shape;
    for (Index j = 0; j < d; ++j)
        x[j] = w.scale * std::pow(-std::log(rng.uniform01()), inv_c);
    return x;
}

Mat sample(const DistributionModel& dist, RngStream& rng, Index n) {
    if (n < 1) throw std::invalid_argument("sample: n must be >= 1");
    Mat out(n, dist.dim());
    for (Index i = 0; i < n; ++i) out.row(i) = sample_one(dist, rng).transpose();
    return out;
}

Real log_density(const DistributionModel& dist, const Eigen::Ref<const Vec>& x) {
    if (x.size() != dist.dim()) throw std::invalid_argument("log_density: dimension mismatch");
    if (dist.kind() == DistributionModel::Kind::Gaussian) {
        const auto& g = dist.gauss();
        // Solve L y = x - m; quadratic form is |y|^2.
        const Vec y = g.chol_lower.triangularView<Eigen::Lower>().solve(x - g.mean);
        return g.log_norm_const - 0.5 * y.squaredNorm();
    }
    const auto& w = dist.weib();
    const Real log_c = std::log(w.shape);
    const Real log_scale = std::log(w.scale);
    Real acc = 0.0;
    for (Index j = 0; j < x.size(); ++j) {
        if (!(x[j] > 0.0)) return kNegInf;
        const Real t = x[j] / w.scale;
        acc += log_c - log_scale + (w.shape - 1.0) * std::log(t) - std::pow(t, w.shape);
    }
    return acc;
}

Real log_mgf(const DistributionModel& dist, const Eigen::Ref<const Vec>& r) {
    if (r.size() != dist.dim()) throw std::invalid_argument("log_mgf: dimension mismatch");
    if (dist.kind() == DistributionModel::Kind::Gaussian)
        return dist.gaussian_mean().dot(r) + 0.5 * r.dot(dist.gaussian_cov() * r);
    if (r.isZero(0.0)) return 0.0;
    throw std::domain_error("log_mgf: weibull_iid has no moment generating function away from r = 0");
}

Vec grad_log_mgf(const DistributionModel& dist, const Eigen::Ref<const Vec>& r) {
    if (r.size() != dist.dim()) throw std::invalid_argument("grad_log_mgf: dimension mismatch");
    if (dist.kind() == DistributionModel::Kind::Gaussian)
        return dist.gaussian_mean() + dist.gaussian_cov() * r;
    if (r.isZero(0.0)) return dist.mean_vector();
    throw std::domain_error("grad_log_mgf: weibull_iid has no moment generating function away from r = 0");
}

Real rate_conjugate(const DistributionModel& dist, const Eigen::Ref<const Vec>& x) {
    if (x.size() != dist.dim()) throw std::invalid_argument("rate_conjugate: dimension mismatch");
    if (dist.kind() != DistributionModel::Kind::Gaussian)
        throw NotImplementedError("rate_conjugate: closed form available for gaussian models only");
    const auto& g = dist.gauss();
    const Vec y = g.chol_lower.triangularView<Eigen::Lower>().solve(x - g.mean);
    return 0.5 * y.squaredNorm();
}

DistributionModel tilt(const DistributionModel& dist, const TiltParams& params) {
    if (params.b.size() != dist.dim()) throw std::invalid_argument("tilt: dimension mismatch");
    if (!params.b.allFinite()) throw std::domain_error("tilt: tilt vector must be finite");
    if (dist.kind() == DistributionModel::Kind::Gaussian) {
        const Mat& cov = dist.gaussian_cov();
        return DistributionModel::gaussian(dist.gaussian_mean() + cov * params.b, cov);
    }
    if (params.b.isZero(0.0)) return dist;
    throw std::domain_error(
        "tilt: weibull_iid admits no nonzero exponential tilt (moment generating function is infinite)");
}

} // namespace tailrisk
