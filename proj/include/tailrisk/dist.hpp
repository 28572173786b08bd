#pragma once

#include <variant>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "tailrisk/errors.hpp"
#include "tailrisk/rng.hpp"
#include "tailrisk/types.hpp"

namespace tailrisk {

/// Exponential tilt factor b. For a gaussian base any finite b is admissible;
/// heavy-tailed bases admit only b = 0.
struct TiltParams {
    Vec b;
};

/// Distribution model for the uncertainty vector X: sampling, log-density and
/// the large-deviations machinery (log-MGF, its gradient and convex conjugate).
///
/// Models are immutable after construction and safe to share across workers;
/// the gaussian Cholesky factor is computed once here because sampling and
/// density evaluation dominate inner loops.
class DistributionModel {
public:
    enum class Kind { Gaussian, WeibullIid };

    /// Multivariate normal with mean m and SPD covariance sigma.
    static DistributionModel gaussian(Vec mean, Mat cov);

    /// d i.i.d. Weibull marginals with density (c/sc)(x/sc)^{c-1} exp(-(x/sc)^c)
    /// on x > 0. The scale defaults to 1.
    static DistributionModel weibull_iid(Real shape, Real scale, Index dim);

    Kind kind() const { return kind_; }
    Index dim() const { return dim_; }
    bool is_gaussian() const { return kind_ == Kind::Gaussian; }

    const Vec& gaussian_mean() const;
    const Mat& gaussian_cov() const;
    const Mat& gaussian_chol_lower() const;
    Real weibull_shape() const;
    Real weibull_scale() const;

    /// E[X] (closed form for both kinds).
    Vec mean_vector() const;

    std::string describe() const;

private:
    struct Gaussian {
        Vec mean;
        Mat cov;
        Mat chol_lower;      // L with cov = L L^T
        Real log_norm_const; // -d/2 log(2 pi) - sum log L_ii
    };
    struct WeibullIid {
        Real shape;
        Real scale;
    };

    DistributionModel(Kind k, Index d) : kind_(k), dim_(d) {}

    Kind kind_;
    Index dim_;
    std::variant<Gaussian, WeibullIid> model_;

    const Gaussian& gauss() const;
    const WeibullIid& weib() const;

    friend Mat sample(const DistributionModel&, RngStream&, Index);
    friend Vec sample_one(const DistributionModel&, RngStream&);
    friend Real log_density(const DistributionModel&, const Eigen::Ref<const Vec>&);
    friend Real rate_conjugate(const DistributionModel&, const Eigen::Ref<const Vec>&);
};

/// n i.i.d. draws, one per row; deterministic given the stream state.
Mat sample(const DistributionModel& dist, RngStream& rng, Index n);
Vec sample_one(const DistributionModel& dist, RngStream& rng);

/// log f_X(x). Points outside the support yield -infinity rather than an
/// error so estimator code can treat them as zero mass.
Real log_density(const DistributionModel& dist, const Eigen::Ref<const Vec>& x);

/// Log-moment generating function Lambda(r) = log E exp(r'X).
/// Gaussian: m'r + r'Sigma r / 2. Weibull marginals have no MGF away from 0.
Real log_mgf(const DistributionModel& dist, const Eigen::Ref<const Vec>& r);

/// grad Lambda(r); equals the mean of the r-tilted law.
Vec grad_log_mgf(const DistributionModel& dist, const Eigen::Ref<const Vec>& r);

/// Convex conjugate Lambda*(x) = sup_r { r'x - Lambda(r) }; gaussian only.
Real rate_conjugate(const DistributionModel& dist, const Eigen::Ref<const Vec>& x);

/// Exponentially tilted model: density proportional to exp(b'x) f_X(x).
/// For gaussian(m, Sigma) this is gaussian(m + Sigma b, Sigma).
DistributionModel tilt(const DistributionModel& dist, const TiltParams& params);

} // namespace tailrisk
