#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tailrisk/dist.hpp"
#include "tailrisk/loss.hpp"
#include "tailrisk/risk.hpp"
#include "tailrisk/solve.hpp"

namespace tailrisk {

/// Strategy selection as it appears in config files.
struct StrategySpec {
    std::string kind = "saa";             // saa | exptilt | selfstruct
    std::optional<Real> h;                // selfstruct fixed stretch
    bool auto_h = false;                  // selfstruct "h": "auto"
    bool squared_weight = false;          // alternative stretch-search objective
    Index pilot_m = 2000;
    std::vector<Real> h_grid;             // empty -> default grid

    std::string label() const;
};

struct SolverSpec {
    std::string kind = "ra"; // ra | sa
    RASchedule schedule;
    bool k_tol_given = false;
    SAParams sa;
};

struct EstimateSpec {
    long n = 100000;
    long replications = 1;
    std::optional<Real> at_u; // fixed level; empty means estimate at (v-hat, theta)
};

struct CompareSpec {
    std::vector<Real> betas;
    std::vector<Real> eps_rels{0.01};
    Real confidence = 0.95;
    long replications = 100;
    long max_n = 1L << 22;
    long reference_n = 10000000; // SAA reference size when no closed form exists
    std::vector<StrategySpec> strategies;
};

/// Parsed and validated experiment configuration. Unknown keys anywhere in
/// the document are rejected.
struct ExperimentConfig {
    DistributionModel dist;
    LossModel loss;
    DecisionConstraint constraint;
    RiskSpec risk;
    StrategySpec strategy;
    SolverSpec solver;
    EstimateSpec estimate;
    CompareSpec compare;
    Vec theta;       // fixed decision for estimate/compare
    Real init_u = 0.0;
    Vec init_theta;  // empty -> uniform simplex point
    std::uint64_t seed = 1;
    std::string out = ".";

    Index theta_dim() const { return loss.theta_dim(dist.dim()); }
};

/// Parse from a JSON document / file. Throws ConfigError with location
/// diagnostics on malformed input.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

/// Strategy factory; throws on invalid combinations (e.g. exptilt on a
/// heavy-tailed base).
std::unique_ptr<ISStrategy> make_strategy(const StrategySpec& spec, const DistributionModel& dist,
                                          const LossModel& loss, const RiskSpec& risk, Real u0,
                                          const Vec& theta0);

} // namespace tailrisk
