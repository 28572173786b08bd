#include "tailrisk/is_selfstruct.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tailrisk/errors.hpp"

namespace tailrisk {

namespace {
constexpr Real kZeroEps = 1e-12;
constexpr Real kNegInf = -std::numeric_limits<Real>::infinity();
} // namespace

Real stretch_factor(Real h, Real beta) {
    if (!(h > 0.0)) throw std::invalid_argument("stretch_factor: h must be > 0");
    if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("stretch_factor: beta must lie in (0,1)");
    const Real inner = std::log(1.0 / beta); // > 0 on (0,1)
    const Real loglog = inner > 0.0 ? std::log(inner) : kNegInf;
    return h * std::max(loglog, 1.0);
}

SelfStructParams SelfStructParams::make(Real h, Real beta, Real rho) {
    if (!(rho > 0.0)) throw std::invalid_argument("SelfStructParams: rho must be > 0");
    return SelfStructParams{h, beta, rho, stretch_factor(h, beta)};
}

Vec kappa(const Eigen::Ref<const Vec>& x, Real rho) {
    if (!(rho > 0.0)) throw std::invalid_argument("kappa: rho must be > 0");
    const Real linf = x.cwiseAbs().maxCoeff();
    if (linf == 0.0) return Vec::Constant(x.size(), 1.0 / rho);
    const Real denom = rho * std::log1p(linf);
    Vec k(x.size());
    for (Index i = 0; i < x.size(); ++i) k[i] = std::log1p(std::abs(x[i])) / denom;
    return k;
}

Vec transform(const Eigen::Ref<const Vec>& x, const SelfStructParams& params) {
    if (params.s == 1.0) return x;
    const Vec k = kappa(x, params.rho);
    Vec z(x.size());
    for (Index i = 0; i < x.size(); ++i) z[i] = x[i] * std::pow(params.s, k[i]);
    return z;
}

namespace {

// Product factors and their running pieces; shared by jacobian/log_jacobian.
struct JacobianParts {
    Real log_prod = 0.0;  // sum log Jt_i
    Real log_max = kNegInf;
    Real kappa_sum = 0.0;
    bool positive = true; // all Jt_i > 0
};

JacobianParts jacobian_parts(const Eigen::Ref<const Vec>& x, const SelfStructParams& params) {
    const Real linf = x.cwiseAbs().maxCoeff();
    if (linf <= kZeroEps)
        throw DegeneratePointError("jacobian: |x|_inf is (numerically) zero");
    const Real coef = std::log(params.s) / (params.rho * std::log1p(linf));
    JacobianParts parts;
    for (Index i = 0; i < x.size(); ++i) {
        const Real a = std::abs(x[i]);
        const Real jt = 1.0 + coef * a / (1.0 + a);
        if (jt <= 0.0) {
            parts.positive = false;
            return parts;
        }
        const Real l = std::log(jt);
        parts.log_prod += l;
        parts.log_max = std::max(parts.log_max, l);
        parts.kappa_sum += std::log1p(a);
    }
    parts.kappa_sum /= params.rho * std::log1p(linf);
    return parts;
}

} // namespace

Real jacobian(const Eigen::Ref<const Vec>& x, const SelfStructParams& params) {
    const JacobianParts parts = jacobian_parts(x, params);
    if (!parts.positive) return 0.0;
    return std::exp(parts.log_prod - parts.log_max + parts.kappa_sum * std::log(params.s));
}

Real log_jacobian(const Eigen::Ref<const Vec>& x, const SelfStructParams& params) {
    const JacobianParts parts = jacobian_parts(x, params);
    if (!parts.positive) return kNegInf;
    return parts.log_prod - parts.log_max + parts.kappa_sum * std::log(params.s);
}

WeightedSampleBatch sample_selfstruct(const DistributionModel& dist, const SelfStructParams& params,
                                      RngStream& rng, Index n, int tag) {
    if (n < 1) throw std::invalid_argument("sample_selfstruct: n must be >= 1");
    WeightedSampleBatch batch;
    batch.points.resize(n, dist.dim());
    batch.log_weights.resize(n);
    batch.source = Eigen::VectorXi::Constant(n, tag);

    if (params.s == 1.0) {
        // Identity: draw exactly as SAA would, weights exactly zero.
        batch.points = sample(dist, rng, n);
        batch.log_weights.setZero();
        return batch;
    }

    for (Index i = 0; i < n; ++i) {
        Vec x = sample_one(dist, rng);
        int retries = 0;
        while (x.cwiseAbs().maxCoeff() <= kZeroEps && retries < 10) {
            x = sample_one(dist, rng);
            ++retries;
        }
        if (x.cwiseAbs().maxCoeff() <= kZeroEps)
            throw std::runtime_error("sample_selfstruct: persistent degenerate draw at x = 0");
        const Vec z = transform(x, params);
        batch.points.row(i) = z.transpose();
        const Real lj = log_jacobian(x, params);
        batch.log_weights[i] =
            lj == kNegInf ? kNegInf : log_density(dist, z) + lj - log_density(dist, x);
    }
    return batch;
}

Real second_moment(Real h, Real u, const Eigen::Ref<const Vec>& theta, const Mat& base_points,
                   const DistributionModel& dist, const LossModel& loss_model, Real beta, Real rho,
                   bool squared_weight) {
    const Index m = base_points.rows();
    if (m < 1) throw std::invalid_argument("second_moment: empty base batch");
    const SelfStructParams params = SelfStructParams::make(h, beta, rho);

    Vec terms = Vec::Zero(m);
    for (Index i = 0; i < m; ++i) {
        const Vec x = base_points.row(i).transpose();
        if (params.s != 1.0 && x.cwiseAbs().maxCoeff() <= kZeroEps) continue;
        const Vec z = transform(x, params);
        const Real excess = std::max(loss(loss_model, z, theta) - u, 0.0);
        if (excess == 0.0) continue;
        Real lw = 0.0;
        if (params.s != 1.0) {
            const Real lj = log_jacobian(x, params);
            if (lj == kNegInf) continue;
            lw = log_density(dist, z) + lj - log_density(dist, x);
            if (lw == kNegInf) continue;
        }
        terms[i] = excess * excess * std::exp(squared_weight ? 2.0 * lw : lw);
    }
    return pairwise_sum(terms) / static_cast<Real>(m);
}

HSelection select_h(Real u, const Eigen::Ref<const Vec>& theta, const Mat& base_points,
                    const DistributionModel& dist, const LossModel& loss_model, Real beta, Real rho,
                    std::vector<Real> grid, bool squared_weight) {
    if (grid.empty()) throw std::invalid_argument("select_h: grid must be nonempty");
    std::sort(grid.begin(), grid.end());

    HSelection sel;
    sel.objective.reserve(grid.size());
    Real best = std::numeric_limits<Real>::infinity();
    bool found = false;
    for (Real h : grid) {
        const Real m2 = second_moment(h, u, theta, base_points, dist, loss_model, beta, rho, squared_weight);
        sel.objective.push_back(m2);
        if (m2 > 0.0 && m2 < best) { // strict <: first (smallest) h wins ties
            best = m2;
            sel.h = h;
            found = true;
        }
    }
    if (!found) {
        sel.h = grid[grid.size() / 2];
        sel.no_signal = true;
    }
    return sel;
}

std::vector<Real> default_h_grid() {
    std::vector<Real> grid;
    const Real lo = 0.25, hi = 4.0;
    const int n = 8;
    for (int i = 0; i < n; ++i)
        grid.push_back(lo * std::pow(hi / lo, static_cast<Real>(i) / (n - 1)));
    return grid;
}

} // namespace tailrisk
