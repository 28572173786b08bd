#pragma once

#include <optional>
#include <string>

#include "tailrisk/config.hpp"

namespace tailrisk {

/// Closed-form references for gaussian bases with effectively linear losses
/// (linear_portfolio or single-piece max_affine); nullopt otherwise.
std::optional<Real> analytic_cvar(const DistributionModel& dist, const LossModel& loss,
                                  const Eigen::Ref<const Vec>& theta, Real beta);
std::optional<Real> analytic_var(const DistributionModel& dist, const LossModel& loss,
                                 const Eigen::Ref<const Vec>& theta, Real beta);
/// f(u, theta) = u + E(l - u)^+ / beta in closed form, when available.
std::optional<Real> analytic_objective(const DistributionModel& dist, const LossModel& loss,
                                       const Eigen::Ref<const Vec>& theta, Real u, Real beta);

/// Experiment drivers behind the CLI subcommands. Each writes its outputs
/// under out_dir and returns the process exit code (0 ok, 3 budget-only).
int run_estimate(const ExperimentConfig& cfg, const std::string& out_dir, bool verbose);
int run_optimize(const ExperimentConfig& cfg, const std::string& out_dir, bool verbose);
int run_compare(const ExperimentConfig& cfg, const std::string& out_dir, bool verbose);

} // namespace tailrisk
