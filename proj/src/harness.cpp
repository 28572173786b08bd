#include "tailrisk/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "tailrisk/csv.hpp"
#include "tailrisk/errors.hpp"
#include "tailrisk/normal.hpp"

namespace tailrisk {

namespace {

namespace fs = std::filesystem;

struct LinearLaw {
    Real mu;
    Real sigma;
};

std::optional<LinearLaw> gaussian_linear_law(const DistributionModel& dist, const LossModel& loss,
                                             const Eigen::Ref<const Vec>& theta) {
    if (!dist.is_gaussian()) return std::nullopt;
    const auto coef = linear_coefficient(loss, theta, dist.dim());
    if (!coef) return std::nullopt;
    const Real mu = coef->dot(dist.gaussian_mean());
    const Real var = coef->dot(dist.gaussian_cov() * (*coef));
    return LinearLaw{mu, std::sqrt(std::max(var, 0.0))};
}

std::string out_path(const std::string& dir, const std::string& file) {
    fs::create_directories(dir);
    return (fs::path(dir) / file).string();
}

Real sample_mean(const Vec& v) { return pairwise_sum(v) / static_cast<Real>(v.size()); }

Real sample_std_error(const Vec& v) {
    if (v.size() < 2) return 0.0;
    const Real m = sample_mean(v);
    const Real ss = (v.array() - m).square().sum() / static_cast<Real>(v.size() - 1);
    return std::sqrt(ss / static_cast<Real>(v.size()));
}

Vec default_theta(const ExperimentConfig& cfg) {
    const Index p = cfg.theta_dim();
    return project_theta(Vec::Constant(p, 1.0 / static_cast<Real>(p)), cfg.constraint);
}

/// Level at which the IS oracle is pinned for fixed-decision estimation:
/// the analytic VaR when available, otherwise an SAA pilot quantile.
Real oracle_level(const ExperimentConfig& cfg, const Vec& theta, Real beta, std::uint64_t seed) {
    if (cfg.estimate.at_u) return *cfg.estimate.at_u;
    if (auto v = analytic_var(cfg.dist, cfg.loss, theta, beta)) return *v;
    const long pilot_n = std::min<long>(2000000, std::max<long>(200000, static_cast<long>(50.0 / beta)));
    RngStream rng({seed, 0xA11CE, 0});
    const Mat pts = sample(cfg.dist, rng, pilot_n);
    const Vec losses = loss_batch(cfg.loss, pts, theta);
    return empirical_var_cvar(losses, Vec::Zero(pilot_n), beta).var;
}

} // namespace

std::optional<Real> analytic_cvar(const DistributionModel& dist, const LossModel& loss,
                                  const Eigen::Ref<const Vec>& theta, Real beta) {
    const auto law = gaussian_linear_law(dist, loss, theta);
    if (!law) return std::nullopt;
    return gaussian_cvar(law->mu, law->sigma, beta);
}

std::optional<Real> analytic_var(const DistributionModel& dist, const LossModel& loss,
                                 const Eigen::Ref<const Vec>& theta, Real beta) {
    const auto law = gaussian_linear_law(dist, loss, theta);
    if (!law) return std::nullopt;
    return gaussian_var(law->mu, law->sigma, beta);
}

std::optional<Real> analytic_objective(const DistributionModel& dist, const LossModel& loss,
                                       const Eigen::Ref<const Vec>& theta, Real u, Real beta) {
    const auto law = gaussian_linear_law(dist, loss, theta);
    if (!law) return std::nullopt;
    return u + gaussian_expected_excess(law->mu, law->sigma, u) / beta;
}

// ---------------------------------------------------------------------------
// estimate
// ---------------------------------------------------------------------------

int run_estimate(const ExperimentConfig& cfg, const std::string& out_dir, bool verbose) {
    const Vec theta = cfg.theta.size() > 0 ? cfg.theta : default_theta(cfg);
    const Real beta = cfg.risk.beta;
    const Real u_oracle = oracle_level(cfg, theta, beta, cfg.seed);
    auto strategy = make_strategy(cfg.strategy, cfg.dist, cfg.loss, cfg.risk, u_oracle, theta);
    {
        RngStream pilot({cfg.seed, 0xE57, 0});
        strategy->update(u_oracle, theta, pilot);
    }

    const long R = cfg.estimate.replications;
    Vec values(R);
    for (long r = 0; r < R; ++r) {
        RngStream rng({cfg.seed, 0xE57, 1, static_cast<std::uint64_t>(r)});
        const WeightedSampleBatch batch = strategy->draw(rng, cfg.estimate.n, 0);
        if (cfg.estimate.at_u) {
            values[r] = mean_cvar_objective(batch, cfg.loss, *cfg.estimate.at_u, theta, cfg.risk);
        } else {
            const auto est = empirical_var_cvar(batch, cfg.loss, theta, beta);
            values[r] = cfg.risk.lambda == 0.0
                            ? est.cvar
                            : mean_cvar_objective(batch, cfg.loss, est.var, theta, cfg.risk);
        }
        if (verbose)
            std::cerr << "replication=" << r << " estimator=" << strategy->name()
                      << " value=" << values[r] << "\n";
    }

    std::optional<Real> analytic;
    if (cfg.risk.lambda == 0.0) {
        analytic = cfg.estimate.at_u
                       ? analytic_objective(cfg.dist, cfg.loss, theta, *cfg.estimate.at_u, beta)
                       : analytic_cvar(cfg.dist, cfg.loss, theta, beta);
    }

    CsvWriter csv({"estimator", "n", "replications", "mean", "std_error", "analytic"});
    csv.row({cfg.strategy.label(), format_number(cfg.estimate.n), format_number(R),
             format_number(sample_mean(values)),
             R > 1 ? format_number(sample_std_error(values)) : std::string(),
             analytic ? format_number(*analytic) : std::string()});
    csv.write(out_path(out_dir, "estimate.csv"));
    return 0;
}

// ---------------------------------------------------------------------------
// optimize
// ---------------------------------------------------------------------------

int run_optimize(const ExperimentConfig& cfg, const std::string& out_dir, bool verbose) {
    const Index p = cfg.theta_dim();
    Vec theta0 = cfg.init_theta.size() > 0 ? cfg.init_theta : default_theta(cfg);
    if (theta0.size() != p) throw ConfigError("init.theta has the wrong length");

    auto strategy =
        make_strategy(cfg.strategy, cfg.dist, cfg.loss, cfg.risk, cfg.init_u, theta0);
    std::ostream* progress = verbose ? &std::cerr : nullptr;

    SolveReport report;
    if (cfg.solver.kind == "ra") {
        RASchedule sched = cfg.solver.schedule;
        if (!cfg.solver.k_tol_given) {
            // Default tolerance rule: eps_1 around 5% of the initial objective size.
            RngStream rng({cfg.seed, 0x0b, 0});
            const Mat pts = sample(cfg.dist, rng, std::min<long>(sched.n1, 4000));
            const Real f0 = saa_objective(pts, cfg.loss, cfg.init_u, theta0, cfg.risk.beta);
            sched.k_tol = std::max(0.05 * std::abs(f0), 1e-6) * std::sqrt(static_cast<Real>(sched.n1));
        }
        report = run_ra(cfg.dist, cfg.loss, cfg.risk, cfg.constraint, *strategy, sched, cfg.init_u,
                        theta0, cfg.seed, progress);
    } else {
        report = run_sa(cfg.dist, cfg.loss, cfg.risk, cfg.constraint, *strategy, cfg.solver.sa,
                        cfg.init_u, theta0, cfg.seed, progress);
    }

    std::vector<std::string> header;
    if (cfg.solver.kind == "ra") header = {"epoch", "n", "eps", "objective", "u"};
    else header = {"step", "step_size", "objective", "u"};
    for (Index j = 0; j < p; ++j) header.push_back("theta_" + std::to_string(j));

    CsvWriter csv(header);
    for (const auto& e : report.epochs) {
        std::vector<std::string> row;
        if (cfg.solver.kind == "ra") {
            row = {format_number(e.k), format_number(e.n), format_number(e.eps),
                   format_number(e.objective), format_number(e.u)};
        } else {
            row = {format_number(e.n), format_number(e.eps), format_number(e.objective),
                   format_number(e.u)};
        }
        for (Index j = 0; j < p; ++j) row.push_back(format_number(e.theta[j]));
        csv.row(row);
    }
    csv.write(out_path(out_dir, "trajectory.csv"));

    std::ofstream js(out_path(out_dir, "report.json"), std::ios::binary);
    js << report.to_json() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

namespace {

struct ProbeContext {
    const ExperimentConfig* cfg;
    ISStrategy* strategy;
    Real reference;
    Real beta;
    std::uint64_t beta_idx;
    std::uint64_t strat_idx;
    const Vec* theta;
};

/// (1-alpha) empirical quantile (nearest rank) of the relative estimation
/// error over R replications at batch size n. Cached per (beta, strategy).
Real error_quantile(const ProbeContext& ctx, long n, std::map<long, Real>& cache) {
    if (auto it = cache.find(n); it != cache.end()) return it->second;
    const long R = ctx.cfg->compare.replications;
    std::vector<Real> errors;
    errors.reserve(static_cast<std::size_t>(R));
    for (long r = 0; r < R; ++r) {
        RngStream rng({ctx.cfg->seed, 0xC0117A6E, ctx.beta_idx, ctx.strat_idx,
                       static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(r)});
        Real err = std::numeric_limits<Real>::infinity();
        try {
            const WeightedSampleBatch batch = ctx.strategy->draw(rng, n, 0);
            const auto est = empirical_var_cvar(batch, ctx.cfg->loss, *ctx.theta, ctx.beta);
            err = std::abs(est.cvar - ctx.reference) / std::abs(ctx.reference);
        } catch (const DegenerateBatchError&) {
            // batch too light for this beta; counts as a failed replication
        }
        errors.push_back(err);
    }
    std::sort(errors.begin(), errors.end());
    const long rank = static_cast<long>(std::ceil(ctx.cfg->compare.confidence * static_cast<Real>(R)));
    const Real q = errors[static_cast<std::size_t>(std::min(R - 1, std::max(0L, rank - 1)))];
    cache.emplace(n, q);
    return q;
}

struct SearchResult {
    long n_required = 0;
    std::string flag;
};

SearchResult find_n_required(const ProbeContext& ctx, Real eps_rel, std::map<long, Real>& cache) {
    const long max_n = ctx.cfg->compare.max_n;
    long n = 1;
    while (n <= max_n && error_quantile(ctx, n, cache) > eps_rel) n *= 2;
    if (n > max_n) return SearchResult{max_n, "budget"};
    if (n == 1) return SearchResult{1, "direct"};
    long lo = n / 2; // fails
    long hi = n;     // passes
    while (hi - lo > 1) {
        const long mid = lo + (hi - lo) / 2;
        if (error_quantile(ctx, mid, cache) <= eps_rel) hi = mid;
        else lo = mid;
    }
    return SearchResult{hi, "bisect"};
}

} // namespace

int run_compare(const ExperimentConfig& cfg, const std::string& out_dir, bool verbose) {
    if (cfg.compare.betas.empty()) throw ConfigError("compare: empty beta grid");
    const Vec theta = cfg.theta.size() > 0 ? cfg.theta : default_theta(cfg);

    CsvWriter csv({"beta", "strategy", "eps_rel", "confidence", "n_required", "replications",
                   "flag", "reference"});
    bool any_ok = false;
    bool any_row = false;

    for (std::size_t bi = 0; bi < cfg.compare.betas.size(); ++bi) {
        const Real beta = cfg.compare.betas[bi];
        RiskSpec risk{beta, 0.0};

        Real reference;
        Real var_level;
        if (auto c = analytic_cvar(cfg.dist, cfg.loss, theta, beta)) {
            reference = *c;
            var_level = *analytic_var(cfg.dist, cfg.loss, theta, beta);
        } else {
            RngStream rng({cfg.seed, 0x5EF, static_cast<std::uint64_t>(bi)});
            Vec losses(cfg.compare.reference_n);
            const long chunk = 100000;
            long done = 0;
            while (done < cfg.compare.reference_n) {
                const long m = std::min(chunk, cfg.compare.reference_n - done);
                losses.segment(done, m) = loss_batch(cfg.loss, sample(cfg.dist, rng, m), theta);
                done += m;
            }
            const auto est = empirical_var_cvar(losses, Vec::Zero(losses.size()), beta);
            reference = est.cvar;
            var_level = est.var;
        }

        for (std::size_t si = 0; si < cfg.compare.strategies.size(); ++si) {
            const StrategySpec& sspec = cfg.compare.strategies[si];
            auto strategy = make_strategy(sspec, cfg.dist, cfg.loss, risk, var_level, theta);
            RngStream pilot({cfg.seed, 0xC0117A6E, static_cast<std::uint64_t>(bi),
                             static_cast<std::uint64_t>(si), 0, 0xFFFF});
            strategy->update(var_level, theta, pilot);

            ProbeContext ctx{&cfg,  strategy.get(),
                             reference, beta,
                             static_cast<std::uint64_t>(bi), static_cast<std::uint64_t>(si),
                             &theta};
            std::map<long, Real> cache;
            long prev_required = 0;

            std::vector<Real> eps_sorted = cfg.compare.eps_rels;
            std::sort(eps_sorted.begin(), eps_sorted.end(), std::greater<Real>());
            for (Real eps : eps_sorted) {
                const SearchResult res = find_n_required(ctx, eps, cache);
                any_row = true;
                if (res.flag != "budget") any_ok = true;
                if (res.n_required < prev_required && res.flag != "budget")
                    throw std::logic_error("compare: n_required not monotone in 1/eps_rel");
                prev_required = res.flag == "budget" ? prev_required : res.n_required;
                csv.row({format_number(beta), sspec.label(), format_number(eps),
                         format_number(cfg.compare.confidence), format_number(res.n_required),
                         format_number(cfg.compare.replications), res.flag,
                         format_number(reference)});
                if (verbose)
                    std::cerr << "beta=" << beta << " strategy=" << sspec.label() << " eps=" << eps
                              << " n_required=" << res.n_required << " flag=" << res.flag << "\n";
            }
        }
    }

    csv.write(out_path(out_dir, "compare.csv"));
    return (any_row && !any_ok) ? 3 : 0;
}

} // namespace tailrisk
