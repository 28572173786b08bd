#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "tailrisk/dist.hpp"
#include "tailrisk/is_exptilt.hpp"
#include "tailrisk/is_selfstruct.hpp"
#include "tailrisk/loss.hpp"
#include "tailrisk/risk.hpp"

namespace tailrisk {

/// Euclidean projection onto Theta via Dykstra's alternating projections
/// between the simplex part and the return halfspace. Stops when successive
/// iterates move less than 1e-10 (capped at 1e4 rounds).
Vec project_theta(const Eigen::Ref<const Vec>& theta, const DecisionConstraint& constraint);

/// Max constraint violation of theta (nonnegativity, sum-to-one, return).
Real feasibility_gap(const Eigen::Ref<const Vec>& theta, const DecisionConstraint& constraint);

struct SubproblemResult {
    Real u = 0.0;
    Vec theta;
    Real objective = 0.0;
    long iterations = 0;
    bool hit_iteration_cap = false;
};

/// Projected subgradient descent on the deterministic weighted objective over
/// (u, theta), diminishing steps a_0 / sqrt(t) with a_0 = 1 / (1 + |g_1|).
/// Returns the best-objective iterate; stops once the best objective fails to
/// improve by eps over 50 consecutive iterations (or after max_iters).
SubproblemResult solve_subproblem(const WeightedSampleBatch& batch, const LossModel& loss,
                                  const RiskSpec& risk, const DecisionConstraint& constraint,
                                  Real u0, Vec theta0, Real eps, long max_iters = 100000);

/// Epoch schedules for retrospective approximation. Tolerances are
/// eps_k = k_tol / sqrt(n_k); sample sizes grow linearly
/// (n_k = ceil(growth * n_{k-1})) or polynomially (n_k = ceil(n_{k-1}^growth)).
struct RASchedule {
    enum class Mode { LinearGrowth, PolynomialGrowth };
    Mode mode = Mode::LinearGrowth;
    Real growth = 2.0;
    long n1 = 500;
    Real k_tol = 1.0;
    int max_epochs = 6;

    void validate() const;
};

struct EpochPlan {
    long n;
    Real eps;
};

/// Sample size and tolerance for epoch k >= 1. Also asserts the schedule
/// sanity ratios (eps_{k-1} sqrt(n_k) bounded below; bounded partial-sum
/// ratio) at runtime for every produced epoch.
EpochPlan ra_schedule_next(const RASchedule& sched, int k);

/// Sampling strategies pluggable into the solvers. A strategy owns the
/// current IS parameter and re-derives it from the iterate when the solver
/// invokes update() (the oracle step).
class ISStrategy {
public:
    virtual ~ISStrategy() = default;
    virtual std::string name() const = 0;
    virtual std::string summary() const = 0;
    virtual WeightedSampleBatch draw(RngStream& rng, Index n, int tag) = 0;
    /// Oracle step; may throw, in which case the caller keeps the previous
    /// parameters and records a warning.
    virtual void update(Real u, const Eigen::Ref<const Vec>& theta, RngStream& pilot_rng) = 0;
    /// Samples consumed per oracle update (pilot batches), for work accounting.
    virtual Index pilot_cost() const { return 0; }
};

class SaaStrategy final : public ISStrategy {
public:
    explicit SaaStrategy(DistributionModel dist) : dist_(std::move(dist)) {}
    std::string name() const override { return "saa"; }
    std::string summary() const override { return "saa"; }
    WeightedSampleBatch draw(RngStream& rng, Index n, int tag) override {
        return WeightedSampleBatch::saa(sample(dist_, rng, n), tag);
    }
    void update(Real, const Eigen::Ref<const Vec>&, RngStream&) override {}

private:
    DistributionModel dist_;
};

class ExpTiltStrategy final : public ISStrategy {
public:
    ExpTiltStrategy(DistributionModel dist, LossModel loss, Real u0, Vec theta0);
    std::string name() const override { return "exptilt"; }
    std::string summary() const override { return mixture_.summary(); }
    WeightedSampleBatch draw(RngStream& rng, Index n, int tag) override {
        return sample_tilt_mixture(mixture_, rng, n, tag);
    }
    void update(Real u, const Eigen::Ref<const Vec>& theta, RngStream&) override {
        mixture_ = oracle_exptilt(u, theta, dist_, loss_);
    }
    const TiltMixture& mixture() const { return mixture_; }

private:
    DistributionModel dist_;
    LossModel loss_;
    TiltMixture mixture_;
};

class SelfStructStrategy final : public ISStrategy {
public:
    /// Fixed stretch hyperparameter h.
    SelfStructStrategy(DistributionModel dist, LossModel loss, Real beta, Real h);
    /// Auto mode: h re-selected by the pilot-batch grid search at each oracle
    /// step; starts at the identity stretch.
    SelfStructStrategy(DistributionModel dist, LossModel loss, Real beta, std::vector<Real> grid,
                       Index pilot_m, bool squared_weight);

    std::string name() const override { return "selfstruct"; }
    std::string summary() const override;
    WeightedSampleBatch draw(RngStream& rng, Index n, int tag) override {
        return sample_selfstruct(dist_, params_, rng, n, tag);
    }
    void update(Real u, const Eigen::Ref<const Vec>& theta, RngStream& pilot_rng) override;
    Index pilot_cost() const override { return auto_h_ ? pilot_m_ : 0; }
    const SelfStructParams& params() const { return params_; }

private:
    DistributionModel dist_;
    LossModel loss_;
    bool auto_h_;
    std::vector<Real> grid_;
    Index pilot_m_ = 2000;
    bool squared_weight_ = false;
    bool no_signal_ = false;
    SelfStructParams params_;
};

struct SolveReport {
    struct Epoch {
        int k = 0;
        long n = 0;
        Real eps = 0.0;
        Real objective = 0.0;
        Real u = 0.0;
        Vec theta;
        std::string is_summary;
        long iterations = 0;
        bool oracle_warning = false;
    };

    std::string solver;   // "ra" | "sa"
    std::string strategy;
    Real u_final = 0.0;
    Vec theta_final;
    Real objective_final = 0.0;
    std::vector<Epoch> epochs;
    long total_samples = 0;
    Real wall_time_s = 0.0;
    bool diverged = false;
    std::vector<std::string> warnings;

    std::string to_json() const;
};

/// Retrospective approximation: epoch k draws n_k - n_{k-1} fresh points from
/// the current IS law (each point keeps the log-weight of the law that
/// generated it), solves the weighted subproblem over all retained points to
/// tolerance eps_k warm-started at the previous iterate, then re-invokes the
/// strategy oracle at the new iterate.
SolveReport run_ra(const DistributionModel& dist, const LossModel& loss, const RiskSpec& risk,
                   const DecisionConstraint& constraint, ISStrategy& strategy,
                   const RASchedule& sched, Real u0, Vec theta0, std::uint64_t seed,
                   std::ostream* progress = nullptr);

inline Real sa_step_size(Real c, Real gamma, long n) {
    return c * std::pow(static_cast<Real>(n), -gamma);
}

struct SAParams {
    long steps = 100000;
    Real c = 1.0;
    Real gamma = 0.75;     // in (1/2, 1)
    long oracle_period = 100;
    long record_period = 1000;

    void validate() const;
};

/// Robbins-Monro iteration on the root condition E G(Z; u, theta) L = 0 with
/// steps c n^{-gamma}, theta projected onto Theta each step and u clamped to
/// the running range of observed losses (plus margin). Returns the averaged
/// iterate. The oracle is re-invoked lazily every oracle_period steps.
SolveReport run_sa(const DistributionModel& dist, const LossModel& loss, const RiskSpec& risk,
                   const DecisionConstraint& constraint, ISStrategy& strategy, const SAParams& params,
                   Real u0, Vec theta0, std::uint64_t seed, std::ostream* progress = nullptr);

} // namespace tailrisk
