#include "tailrisk/loss.hpp"

#include <cmath>
#include <sstream>

#include "tailrisk/errors.hpp"

namespace tailrisk {

LossModel LossModel::linear_portfolio() { return LossModel(Kind::LinearPortfolio, 1.0); }

LossModel LossModel::max_affine(std::vector<Mat> pieces) {
    if (pieces.empty()) throw std::invalid_argument("max_affine: needs at least one piece");
    const Index p = pieces.front().rows();
    const Index d = pieces.front().cols();
    for (const Mat& A : pieces) {
        if (A.rows() != p || A.cols() != d)
            throw std::invalid_argument("max_affine: all pieces must share dimensions");
    }
    LossModel m(Kind::MaxAffine, 1.0);
    m.pieces_ = std::move(pieces);
    return m;
}

LossModel LossModel::quadratic(Mat Q, Vec q) {
    const Index d = Q.rows();
    if (Q.cols() != d) throw std::invalid_argument("quadratic: Q must be square");
    if (!Q.isApprox(Q.transpose(), 1e-12))
        throw std::invalid_argument("quadratic: Q must be symmetric");
    if (q.size() != d) throw std::invalid_argument("quadratic: q length must match Q");
    LossModel m(Kind::Quadratic, 2.0);
    m.Q_ = std::move(Q);
    m.q_ = std::move(q);
    return m;
}

Index LossModel::theta_dim(Index x_dim) const {
    switch (kind_) {
        case Kind::LinearPortfolio: return x_dim;
        case Kind::MaxAffine: return pieces_.front().rows();
        case Kind::Quadratic: return 1;
    }
    return 0;
}

std::optional<Index> LossModel::x_dim() const {
    switch (kind_) {
        case Kind::LinearPortfolio: return std::nullopt;
        case Kind::MaxAffine: return pieces_.front().cols();
        case Kind::Quadratic: return Q_.rows();
    }
    return std::nullopt;
}

std::string LossModel::describe() const {
    std::ostringstream os;
    switch (kind_) {
        case Kind::LinearPortfolio: os << "linear_portfolio"; break;
        case Kind::MaxAffine: os << "max_affine(M=" << pieces_.size() << ")"; break;
        case Kind::Quadratic: os << "quadratic(d=" << Q_.rows() << ")"; break;
    }
    return os.str();
}

namespace {

void check_dims(const LossModel& model, Index x_size, Index theta_size, const char* who) {
    if (auto d = model.x_dim(); d && *d != x_size)
        throw std::invalid_argument(std::string(who) + ": x dimension mismatch");
    if (model.theta_dim(x_size) != theta_size)
        throw std::invalid_argument(std::string(who) + ": theta dimension mismatch");
}

} // namespace

Real loss(const LossModel& model, const Eigen::Ref<const Vec>& x, const Eigen::Ref<const Vec>& theta) {
    check_dims(model, x.size(), theta.size(), "loss");
    switch (model.kind()) {
        case LossModel::Kind::LinearPortfolio:
            return -theta.dot(x);
        case LossModel::Kind::MaxAffine: {
            Real best = -std::numeric_limits<Real>::infinity();
            for (const Mat& A : model.pieces()) best = std::max(best, theta.dot(A * x));
            return best;
        }
        case LossModel::Kind::Quadratic:
            return theta[0] * (x.dot(model.quad_Q() * x) + model.quad_q().dot(x));
    }
    return 0.0;
}

Vec loss_batch(const LossModel& model, const Mat& points, const Eigen::Ref<const Vec>& theta) {
    check_dims(model, points.cols(), theta.size(), "loss_batch");
    switch (model.kind()) {
        case LossModel::Kind::LinearPortfolio:
            return -(points * theta);
        case LossModel::Kind::MaxAffine: {
            Vec best = points * (model.pieces().front().transpose() * theta);
            for (std::size_t j = 1; j < model.pieces().size(); ++j)
                best = best.cwiseMax(points * (model.pieces()[j].transpose() * theta));
            return best;
        }
        case LossModel::Kind::Quadratic: {
            Vec s(points.rows());
            for (Index i = 0; i < points.rows(); ++i) {
                const Vec x = points.row(i).transpose();
                s[i] = x.dot(model.quad_Q() * x) + model.quad_q().dot(x);
            }
            return theta[0] * s;
        }
    }
    return Vec();
}

Vec loss_subgrad_theta(const LossModel& model, const Eigen::Ref<const Vec>& x,
                       const Eigen::Ref<const Vec>& theta) {
    check_dims(model, x.size(), theta.size(), "loss_subgrad_theta");
    switch (model.kind()) {
        case LossModel::Kind::LinearPortfolio:
            return -x;
        case LossModel::Kind::MaxAffine: {
            std::size_t best_idx = 0;
            Real best = -std::numeric_limits<Real>::infinity();
            for (std::size_t j = 0; j < model.pieces().size(); ++j) {
                const Real v = theta.dot(model.pieces()[j] * x);
                if (v > best) { // strict: lowest index wins ties
                    best = v;
                    best_idx = j;
                }
            }
            return model.pieces()[best_idx] * x;
        }
        case LossModel::Kind::Quadratic: {
            Vec g(1);
            g[0] = x.dot(model.quad_Q() * x) + model.quad_q().dot(x);
            return g;
        }
    }
    return Vec();
}

std::optional<Vec> linear_coefficient(const LossModel& model, const Eigen::Ref<const Vec>& theta,
                                      Index x_dim) {
    switch (model.kind()) {
        case LossModel::Kind::LinearPortfolio:
            if (theta.size() != x_dim) return std::nullopt;
            return Vec(-theta);
        case LossModel::Kind::MaxAffine:
            if (model.pieces().size() != 1) return std::nullopt;
            return Vec(model.pieces().front().transpose() * theta);
        case LossModel::Kind::Quadratic:
            return std::nullopt;
    }
    return std::nullopt;
}

MonotoneReport validate_orthogonal_monotone(const LossModel& model, const Eigen::Ref<const Vec>& theta,
                                            Real u, long trials, RngStream& rng) {
    if (trials < 1) throw std::invalid_argument("validate_orthogonal_monotone: trials must be >= 1");
    const Index d = model.x_dim().value_or(theta.size());
    MonotoneReport report;
    for (long t = 0; t < trials; ++t) {
        Vec x = 2.0 * rng.normals(d);
        if (loss(model, x, theta) < u) continue;
        Vec x1 = x;
        for (Index j = 0; j < d; ++j) x1[j] += 2.0 * rng.uniform01();
        ++report.checked;
        if (loss(model, x1, theta) < u) ++report.violations;
    }
    return report;
}

DecisionConstraint DecisionConstraint::simplex_with_return(Vec mu, Real t) {
    DecisionConstraint c;
    c.mu = std::move(mu);
    c.target_return = t;
    return c;
}

void DecisionConstraint::validate(Index theta_dim) const {
    if (has_return()) {
        if (mu.size() != theta_dim)
            throw std::invalid_argument("constraint: mean vector length must match theta");
        if (nonneg && sum_to_one && mu.maxCoeff() < target_return)
            throw FeasibilityError("constraint: no simplex point attains the target return");
    }
}

} // namespace tailrisk
