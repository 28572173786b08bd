#include "tailrisk/solve.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "tailrisk/errors.hpp"

namespace tailrisk {

namespace {

constexpr Real kProjTol = 1e-10;
constexpr long kProjMaxRounds = 10000;

Vec project_simplex_part(const Vec& v, const DecisionConstraint& c) {
    if (c.sum_to_one && c.nonneg) {
        // Sort-based projection onto { x >= 0, 1'x = 1 }.
        const Index d = v.size();
        std::vector<Real> u(v.data(), v.data() + d);
        std::sort(u.begin(), u.end(), std::greater<Real>());
        Real css = 0.0;
        Real tau = 0.0;
        for (Index j = 0; j < d; ++j) {
            css += u[static_cast<std::size_t>(j)];
            const Real t = (css - 1.0) / static_cast<Real>(j + 1);
            if (u[static_cast<std::size_t>(j)] - t > 0.0) tau = t;
        }
        return (v.array() - tau).cwiseMax(0.0).matrix();
    }
    if (c.nonneg) return v.cwiseMax(0.0);
    if (c.sum_to_one) return v.array() - (v.sum() - 1.0) / static_cast<Real>(v.size());
    return v;
}

Vec project_halfspace_part(const Vec& v, const DecisionConstraint& c) {
    if (!c.has_return()) return v;
    const Real slack = c.target_return - c.mu.dot(v);
    if (slack <= 0.0) return v;
    return v + c.mu * (slack / c.mu.squaredNorm());
}

} // namespace

Vec project_theta(const Eigen::Ref<const Vec>& theta, const DecisionConstraint& constraint) {
    constraint.validate(theta.size());
    if (!constraint.has_return()) return project_simplex_part(theta, constraint);

    // Dykstra between the simplex part and the return halfspace.
    Vec x = theta;
    Vec p = Vec::Zero(theta.size());
    Vec q = Vec::Zero(theta.size());
    for (long round = 0; round < kProjMaxRounds; ++round) {
        const Vec y = project_simplex_part(x + p, constraint);
        p = x + p - y;
        const Vec x_next = project_halfspace_part(y + q, constraint);
        q = y + q - x_next;
        const Real move = (x_next - x).cwiseAbs().maxCoeff();
        x = x_next;
        if (move < kProjTol) break;
    }
    return x;
}

Real feasibility_gap(const Eigen::Ref<const Vec>& theta, const DecisionConstraint& constraint) {
    Real gap = 0.0;
    if (constraint.nonneg) gap = std::max(gap, -theta.minCoeff());
    if (constraint.sum_to_one) gap = std::max(gap, std::abs(theta.sum() - 1.0));
    if (constraint.has_return()) gap = std::max(gap, constraint.target_return - constraint.mu.dot(theta));
    return std::max(gap, 0.0);
}

// ---------------------------------------------------------------------------
// Subproblem solver
// ---------------------------------------------------------------------------

namespace {

/// Per-batch caches so each subgradient iteration is a handful of GEMVs.
class BatchEvaluator {
public:
    BatchEvaluator(const WeightedSampleBatch& batch, const LossModel& loss)
        : loss_(loss), n_(batch.n()) {
        weights_ = batch.log_weights.array().exp(); // -inf -> 0
        switch (loss.kind()) {
            case LossModel::Kind::LinearPortfolio:
                linear_ = -batch.points;
                break;
            case LossModel::Kind::MaxAffine:
                for (const Mat& A : loss.pieces()) piece_values_.push_back(batch.points * A.transpose());
                argmax_.resize(n_);
                break;
            case LossModel::Kind::Quadratic: {
                quad_.resize(n_);
                for (Index i = 0; i < n_; ++i) {
                    const Vec x = batch.points.row(i).transpose();
                    quad_[i] = x.dot(loss.quad_Q() * x) + loss.quad_q().dot(x);
                }
                break;
            }
        }
    }

    void at(const Vec& theta) {
        switch (loss_.kind()) {
            case LossModel::Kind::LinearPortfolio:
                losses_ = linear_ * theta;
                break;
            case LossModel::Kind::MaxAffine: {
                losses_ = piece_values_.front() * theta;
                argmax_.setZero();
                for (std::size_t j = 1; j < piece_values_.size(); ++j) {
                    const Vec vj = piece_values_[j] * theta;
                    for (Index i = 0; i < n_; ++i) {
                        if (vj[i] > losses_[i]) {
                            losses_[i] = vj[i];
                            argmax_[i] = static_cast<int>(j);
                        }
                    }
                }
                break;
            }
            case LossModel::Kind::Quadratic:
                losses_ = theta[0] * quad_;
                break;
        }
    }

    Real objective(Real u, Real beta, Real lambda) const {
        const Real inv_n = 1.0 / static_cast<Real>(n_);
        const Real excess =
            (weights_.array() * (losses_.array() - u).cwiseMax(0.0)).sum() * inv_n / beta;
        Real obj = (1.0 - lambda) * (u + excess);
        if (lambda > 0.0) obj += lambda * (weights_.array() * losses_.array()).sum() * inv_n;
        return obj;
    }

    void gradient(Real u, Real beta, Real lambda, Real& gu, Vec& gtheta) const {
        const Real inv_n = 1.0 / static_cast<Real>(n_);
        Vec coef(n_);
        Real tail_mass = 0.0;
        for (Index i = 0; i < n_; ++i) {
            const Real wi = weights_[i];
            const bool ind = losses_[i] >= u;
            if (ind) tail_mass += wi;
            coef[i] = lambda * wi * inv_n + (ind ? (1.0 - lambda) * wi * inv_n / beta : 0.0);
        }
        gu = (1.0 - lambda) * (1.0 - tail_mass * inv_n / beta);
        gtheta = theta_grad(coef);
    }

private:
    Vec theta_grad(const Vec& coef) const {
        switch (loss_.kind()) {
            case LossModel::Kind::LinearPortfolio:
                return linear_.transpose() * coef;
            case LossModel::Kind::MaxAffine: {
                Vec g = Vec::Zero(piece_values_.front().cols());
                for (std::size_t j = 0; j < piece_values_.size(); ++j) {
                    Vec masked = Vec::Zero(n_);
                    bool any = false;
                    for (Index i = 0; i < n_; ++i) {
                        if (argmax_[i] == static_cast<int>(j) && coef[i] != 0.0) {
                            masked[i] = coef[i];
                            any = true;
                        }
                    }
                    if (any) g += piece_values_[j].transpose() * masked;
                }
                return g;
            }
            case LossModel::Kind::Quadratic: {
                Vec g(1);
                g[0] = quad_.dot(coef);
                return g;
            }
        }
        return Vec();
    }

    const LossModel& loss_;
    Index n_;
    Vec weights_;
    Mat linear_;
    std::vector<Mat> piece_values_;
    Eigen::VectorXi argmax_;
    Vec quad_;
    Vec losses_;
};

} // namespace

SubproblemResult solve_subproblem(const WeightedSampleBatch& batch, const LossModel& loss,
                                  const RiskSpec& risk, const DecisionConstraint& constraint,
                                  Real u0, Vec theta0, Real eps, long max_iters) {
    batch.validate();
    risk.validate();
    if (!(eps > 0.0)) throw std::invalid_argument("solve_subproblem: eps must be > 0");
    constraint.validate(theta0.size());

    BatchEvaluator ev(batch, loss);
    Vec theta = project_theta(theta0, constraint);
    Real u = u0;
    ev.at(theta);

    SubproblemResult best;
    best.u = u;
    best.theta = theta;
    best.objective = ev.objective(u, risk.beta, risk.lambda);

    Real gu;
    Vec gtheta;
    ev.gradient(u, risk.beta, risk.lambda, gu, gtheta);
    const Real g1_norm = std::sqrt(gu * gu + gtheta.squaredNorm());
    const Real a0 = 1.0 / (1.0 + g1_norm);

    Real mark = best.objective; // best at the last eps-improvement
    int stall = 0;
    long t = 0;
    for (t = 1; t <= max_iters; ++t) {
        const Real step = a0 / std::sqrt(static_cast<Real>(t));
        u -= step * gu;
        theta = project_theta(theta - step * gtheta, constraint);
        ev.at(theta);
        const Real obj = ev.objective(u, risk.beta, risk.lambda);
        if (obj < best.objective) {
            best.objective = obj;
            best.u = u;
            best.theta = theta;
        }
        if (best.objective <= mark - eps) {
            mark = best.objective;
            stall = 0;
        } else if (++stall >= 50) {
            break;
        }
        ev.gradient(u, risk.beta, risk.lambda, gu, gtheta);
    }
    best.iterations = std::min(t, max_iters);
    best.hit_iteration_cap = t > max_iters;
    return best;
}

// ---------------------------------------------------------------------------
// Schedules
// ---------------------------------------------------------------------------

void RASchedule::validate() const {
    if (!(growth > 1.0)) throw std::invalid_argument("schedule: growth must be > 1");
    if (n1 < 1) throw std::invalid_argument("schedule: n1 must be >= 1");
    if (!(k_tol > 0.0)) throw std::invalid_argument("schedule: k_tol must be > 0");
    if (max_epochs < 1) throw std::invalid_argument("schedule: max_epochs must be >= 1");
}

EpochPlan ra_schedule_next(const RASchedule& sched, int k) {
    sched.validate();
    if (k < 1) throw std::invalid_argument("ra_schedule_next: k must be >= 1");

    std::vector<Real> n(1, static_cast<Real>(sched.n1));
    for (int j = 2; j <= k; ++j) {
        const Real prev = n.back();
        const Real next = sched.mode == RASchedule::Mode::LinearGrowth
                              ? std::ceil(sched.growth * prev)
                              : std::ceil(std::pow(prev, sched.growth));
        if (next > 1e9) throw std::overflow_error("ra_schedule_next: sample size exceeds supported range");
        n.push_back(next);
    }

    // Sanity ratios: the tolerance sequence must not outrun the sampling error
    // and retained work must stay a bounded multiple of the last epoch.
    Real total = 0.0;
    for (int j = 1; j <= k; ++j) {
        const Real nj = n[static_cast<std::size_t>(j - 1)];
        total += nj;
        if (j >= 2) {
            const Real eps_prev = sched.k_tol / std::sqrt(n[static_cast<std::size_t>(j - 2)]);
            const Real lower = sched.mode == RASchedule::Mode::LinearGrowth
                                   ? sched.k_tol / std::sqrt(sched.growth)
                                   : sched.k_tol;
            if (eps_prev * std::sqrt(nj) < lower * (1.0 - 1e-12))
                throw std::logic_error("ra_schedule_next: tolerance/sample-size ratio fell below bound");
        }
        const Real sum_bound = sched.mode == RASchedule::Mode::LinearGrowth
                                   ? sched.growth / (sched.growth - 1.0) + 1.0
                                   : 1.0 + static_cast<Real>(j);
        if (total / nj > sum_bound)
            throw std::logic_error("ra_schedule_next: retained-work ratio exceeds bound");
    }

    const long nk = static_cast<long>(n.back());
    return EpochPlan{nk, sched.k_tol / std::sqrt(static_cast<Real>(nk))};
}

// ---------------------------------------------------------------------------
// Strategies
// ---------------------------------------------------------------------------

ExpTiltStrategy::ExpTiltStrategy(DistributionModel dist, LossModel loss, Real u0, Vec theta0)
    : dist_(std::move(dist)),
      loss_(std::move(loss)),
      mixture_(oracle_exptilt(u0, theta0, dist_, loss_)) {}

SelfStructStrategy::SelfStructStrategy(DistributionModel dist, LossModel loss, Real beta, Real h)
    : dist_(std::move(dist)),
      loss_(std::move(loss)),
      auto_h_(false),
      params_(SelfStructParams::make(h, beta, growth_rate(loss_))) {}

SelfStructStrategy::SelfStructStrategy(DistributionModel dist, LossModel loss, Real beta,
                                       std::vector<Real> grid, Index pilot_m, bool squared_weight)
    : dist_(std::move(dist)),
      loss_(std::move(loss)),
      auto_h_(true),
      grid_(std::move(grid)),
      pilot_m_(pilot_m),
      squared_weight_(squared_weight),
      params_(SelfStructParams::make(identity_stretch_h(beta), beta, growth_rate(loss_))) {
    if (grid_.empty()) grid_ = default_h_grid();
    if (pilot_m_ < 1) throw std::invalid_argument("selfstruct: pilot size must be >= 1");
}

std::string SelfStructStrategy::summary() const {
    std::ostringstream os;
    os << "selfstruct(h=" << params_.h << ", s=" << params_.s;
    if (auto_h_) os << (no_signal_ ? ", auto:no-signal" : ", auto");
    os << ")";
    return os.str();
}

void SelfStructStrategy::update(Real u, const Eigen::Ref<const Vec>& theta, RngStream& pilot_rng) {
    if (!auto_h_) return;
    const Mat pilot = sample(dist_, pilot_rng, pilot_m_);
    const HSelection sel = select_h(u, theta, pilot, dist_, loss_, params_.beta,
                                    growth_rate(loss_), grid_, squared_weight_);
    no_signal_ = sel.no_signal;
    if (!sel.no_signal) params_ = SelfStructParams::make(sel.h, params_.beta, growth_rate(loss_));
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

std::string SolveReport::to_json() const {
    nlohmann::json j;
    j["solver"] = solver;
    j["strategy"] = strategy;
    j["u_final"] = u_final;
    j["theta_final"] = std::vector<Real>(theta_final.data(), theta_final.data() + theta_final.size());
    j["objective_final"] = objective_final;
    j["total_samples"] = total_samples;
    j["wall_time_s"] = wall_time_s;
    j["diverged"] = diverged;
    j["warnings"] = warnings;
    j["epochs"] = nlohmann::json::array();
    for (const Epoch& e : epochs) {
        nlohmann::json je;
        je["k"] = e.k;
        je["n"] = e.n;
        je["eps"] = e.eps;
        je["objective"] = e.objective;
        je["u"] = e.u;
        je["theta"] = std::vector<Real>(e.theta.data(), e.theta.data() + e.theta.size());
        je["is_summary"] = e.is_summary;
        je["iterations"] = e.iterations;
        je["oracle_warning"] = e.oracle_warning;
        j["epochs"].push_back(je);
    }
    return j.dump(2);
}

// ---------------------------------------------------------------------------
// Retrospective approximation driver
// ---------------------------------------------------------------------------

namespace {

void progress_line(std::ostream* os, const SolveReport::Epoch& e, const std::string& strategy) {
    if (!os) return;
    (*os) << "epoch=" << e.k << " n=" << e.n << " eps=" << e.eps << " objective=" << e.objective
          << " u=" << e.u << " strategy=" << strategy << " is=" << e.is_summary << "\n";
}

void check_feasible(const Vec& theta, const DecisionConstraint& constraint) {
    if (feasibility_gap(theta, constraint) > 1e-8)
        throw std::logic_error("solver produced an infeasible iterate");
}

} // namespace

SolveReport run_ra([[maybe_unused]] const DistributionModel& dist, const LossModel& loss,
                   const RiskSpec& risk, const DecisionConstraint& constraint, ISStrategy& strategy,
                   const RASchedule& sched, Real u0, Vec theta0, std::uint64_t seed,
                   std::ostream* progress) {
    risk.validate();
    sched.validate();
    const auto t_start = std::chrono::steady_clock::now();

    SolveReport report;
    report.solver = "ra";
    report.strategy = strategy.name();

    Vec theta = project_theta(theta0, constraint);
    Real u = u0;
    WeightedSampleBatch batch;
    long prev_n = 0;

    for (int k = 1; k <= sched.max_epochs; ++k) {
        const EpochPlan plan = ra_schedule_next(sched, k);
        const long fresh = plan.n - prev_n;
        prev_n = plan.n;
        RngStream draw_rng({seed, 0x7261ULL, static_cast<std::uint64_t>(k)});
        batch.append(strategy.draw(draw_rng, fresh, k));
        report.total_samples += fresh;

        const SubproblemResult res =
            solve_subproblem(batch, loss, risk, constraint, u, theta, plan.eps);
        u = res.u;
        theta = res.theta;
        check_feasible(theta, constraint);

        SolveReport::Epoch e;
        e.k = k;
        e.n = plan.n;
        e.eps = plan.eps;
        e.objective = res.objective;
        e.u = u;
        e.theta = theta;
        e.iterations = res.iterations;

        RngStream pilot_rng({seed, 0x70696CULL, static_cast<std::uint64_t>(k)});
        try {
            strategy.update(u, theta, pilot_rng);
            report.total_samples += strategy.pilot_cost();
        } catch (const std::exception& ex) {
            e.oracle_warning = true;
            report.warnings.push_back("epoch " + std::to_string(k) +
                                      ": oracle update failed, keeping previous parameters (" +
                                      ex.what() + ")");
        }
        e.is_summary = strategy.summary();
        report.epochs.push_back(e);
        progress_line(progress, e, strategy.name());
    }

    report.u_final = u;
    report.theta_final = theta;
    report.objective_final = report.epochs.back().objective;
    report.wall_time_s =
        std::chrono::duration<Real>(std::chrono::steady_clock::now() - t_start).count();
    return report;
}

// ---------------------------------------------------------------------------
// Adaptive stochastic approximation driver
// ---------------------------------------------------------------------------

void SAParams::validate() const {
    if (steps < 1) throw std::invalid_argument("sa: steps must be >= 1");
    if (!(c > 0.0)) throw std::invalid_argument("sa: c must be > 0");
    if (!(gamma > 0.5 && gamma < 1.0)) throw std::invalid_argument("sa: gamma must lie in (1/2, 1)");
    if (oracle_period < 1) throw std::invalid_argument("sa: oracle_period must be >= 1");
    if (record_period < 1) throw std::invalid_argument("sa: record_period must be >= 1");
}

SolveReport run_sa(const DistributionModel& dist, const LossModel& loss_model, const RiskSpec& risk,
                   const DecisionConstraint& constraint, ISStrategy& strategy, const SAParams& params,
                   Real u0, Vec theta0, std::uint64_t seed, std::ostream* progress) {
    risk.validate();
    params.validate();
    const auto t_start = std::chrono::steady_clock::now();

    SolveReport report;
    report.solver = "sa";
    report.strategy = strategy.name();

    Vec theta = project_theta(theta0, constraint);
    Real u = u0;
    Vec avg_theta = theta; // running means; overwritten exactly at n = 1
    Real avg_u = u;

    Real loss_lo = std::numeric_limits<Real>::infinity();
    Real loss_hi = -std::numeric_limits<Real>::infinity();

    RngStream draw_rng({seed, 0x7361ULL, 1});
    RngStream pilot_rng({seed, 0x7361ULL, 2});
    RngStream eval_rng({seed, 0x7361ULL, 3});

    // Fixed evaluation batch reused by every checkpoint so the trajectory is
    // comparable across steps.
    const Index eval_n = 20000;
    const WeightedSampleBatch eval_batch = WeightedSampleBatch::saa(sample(dist, eval_rng, eval_n));
    report.total_samples += eval_n;

    const Real lambda = risk.lambda;
    int oracle_version = 0;
    bool oracle_warned = false;

    for (long n = 1; n <= params.steps; ++n) {
        const WeightedSampleBatch one = strategy.draw(draw_rng, 1, oracle_version);
        ++report.total_samples;
        const Vec z = one.points.row(0).transpose();
        const Real lw = one.log_weights[0];
        const Real weight = std::exp(lw);

        const Real step = sa_step_size(params.c, params.gamma, n);
        const Real loss_value = loss(loss_model, z, theta);
        const bool exceed = loss_value >= u;

        if (weight > 0.0) {
            Real gu = (1.0 - lambda) * (exceed ? 1.0 - 1.0 / risk.beta : 1.0);
            Vec gtheta = Vec::Zero(theta.size());
            if (exceed || lambda > 0.0) {
                const Vec dl = loss_subgrad_theta(loss_model, z, theta);
                if (exceed) gtheta += (1.0 - lambda) / risk.beta * dl;
                if (lambda > 0.0) gtheta += lambda * dl;
            }
            u -= step * weight * gu;
            theta = project_theta(theta - step * weight * gtheta, constraint);
        }

        if (std::isfinite(loss_value)) {
            loss_lo = std::min(loss_lo, loss_value);
            loss_hi = std::max(loss_hi, loss_value);
            const Real margin = 0.1 * (loss_hi - loss_lo) + 1.0;
            u = std::clamp(u, loss_lo - margin, loss_hi + margin);
        }

        if (!std::isfinite(u) || !theta.allFinite()) {
            report.diverged = true;
            report.warnings.push_back("iterate diverged at step " + std::to_string(n));
            break;
        }

        const Real inv_n = 1.0 / static_cast<Real>(n);
        avg_u += (u - avg_u) * inv_n;
        avg_theta += (theta - avg_theta) * inv_n;

        if (n % params.oracle_period == 0) {
            try {
                strategy.update(u, theta, pilot_rng);
                report.total_samples += strategy.pilot_cost();
                ++oracle_version;
            } catch (const std::exception& ex) {
                if (!oracle_warned) {
                    report.warnings.push_back("oracle update failed at step " + std::to_string(n) +
                                              ", keeping previous parameters (" + ex.what() + ")");
                    oracle_warned = true;
                }
            }
        }

        if (n % params.record_period == 0 || n == params.steps) {
            SolveReport::Epoch e;
            e.k = static_cast<int>(report.epochs.size()) + 1;
            e.n = n;
            e.eps = step;
            e.u = u;
            e.theta = theta;
            e.objective = mean_cvar_objective(eval_batch, loss_model, u, theta, risk);
            e.is_summary = strategy.summary();
            report.epochs.push_back(e);
            progress_line(progress, e, strategy.name());
        }
    }

    check_feasible(avg_theta, constraint);
    report.u_final = avg_u;
    report.theta_final = avg_theta;
    report.objective_final = mean_cvar_objective(eval_batch, loss_model, avg_u, avg_theta, risk);
    report.wall_time_s =
        std::chrono::duration<Real>(std::chrono::steady_clock::now() - t_start).count();
    return report;
}

} // namespace tailrisk
