#include "tailrisk/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tailrisk/errors.hpp"

namespace tailrisk {

using nlohmann::json;

namespace {

void expect_keys(const json& obj, const std::string& context, std::set<std::string> allowed) {
    if (!obj.is_object()) throw ConfigError(context + ": expected an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!allowed.count(it.key()))
            throw ConfigError(context + ": unknown key \"" + it.key() + "\"");
    }
}

Vec parse_vec(const json& j, const std::string& context) {
    if (!j.is_array()) throw ConfigError(context + ": expected an array of numbers");
    Vec v(static_cast<Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw ConfigError(context + ": expected numbers");
        v[static_cast<Index>(i)] = j[i].get<Real>();
    }
    return v;
}

Mat parse_mat(const json& j, const std::string& context) {
    if (!j.is_array() || j.empty()) throw ConfigError(context + ": expected a nonempty 2-d array");
    const Index rows = static_cast<Index>(j.size());
    Vec first = parse_vec(j[0], context);
    Mat m(rows, first.size());
    m.row(0) = first.transpose();
    for (Index i = 1; i < rows; ++i) {
        Vec row = parse_vec(j[static_cast<std::size_t>(i)], context);
        if (row.size() != m.cols()) throw ConfigError(context + ": ragged rows");
        m.row(i) = row.transpose();
    }
    return m;
}

DistributionModel parse_distribution(const json& j) {
    expect_keys(j, "distribution", {"kind", "mean", "cov", "shape", "scale", "dim"});
    const std::string kind = j.value("kind", "");
    if (kind == "gaussian") {
        if (!j.contains("mean") || !j.contains("cov"))
            throw ConfigError("distribution: gaussian needs \"mean\" and \"cov\"");
        return DistributionModel::gaussian(parse_vec(j["mean"], "distribution.mean"),
                                           parse_mat(j["cov"], "distribution.cov"));
    }
    if (kind == "weibull_iid") {
        if (!j.contains("shape") || !j.contains("dim"))
            throw ConfigError("distribution: weibull_iid needs \"shape\" and \"dim\"");
        return DistributionModel::weibull_iid(j["shape"].get<Real>(), j.value("scale", 1.0),
                                              j["dim"].get<Index>());
    }
    throw ConfigError("distribution: unknown kind \"" + kind + "\"");
}

LossModel parse_loss(const json& j) {
    expect_keys(j, "loss", {"kind", "A", "Q", "q"});
    const std::string kind = j.value("kind", "");
    if (kind == "linear_portfolio") return LossModel::linear_portfolio();
    if (kind == "max_affine") {
        if (!j.contains("A") || !j["A"].is_array() || j["A"].empty())
            throw ConfigError("loss: max_affine needs a nonempty list \"A\" of matrices");
        std::vector<Mat> pieces;
        for (std::size_t i = 0; i < j["A"].size(); ++i)
            pieces.push_back(parse_mat(j["A"][i], "loss.A[" + std::to_string(i) + "]"));
        return LossModel::max_affine(std::move(pieces));
    }
    if (kind == "quadratic") {
        if (!j.contains("Q")) throw ConfigError("loss: quadratic needs \"Q\"");
        Mat Q = parse_mat(j["Q"], "loss.Q");
        Vec q = j.contains("q") ? parse_vec(j["q"], "loss.q") : Vec(Vec::Zero(Q.rows()));
        return LossModel::quadratic(std::move(Q), std::move(q));
    }
    throw ConfigError("loss: unknown kind \"" + kind + "\"");
}

DecisionConstraint parse_constraint(const json& j) {
    expect_keys(j, "constraint", {"nonneg", "sum_to_one", "mean", "target_return"});
    DecisionConstraint c;
    c.nonneg = j.value("nonneg", true);
    c.sum_to_one = j.value("sum_to_one", true);
    if (j.contains("target_return") && !j["target_return"].is_null()) {
        if (!j.contains("mean"))
            throw ConfigError("constraint: target_return needs the asset \"mean\" vector");
        c.mu = parse_vec(j["mean"], "constraint.mean");
        c.target_return = j["target_return"].get<Real>();
    }
    return c;
}

StrategySpec parse_strategy(const json& j) {
    expect_keys(j, "strategy", {"kind", "h", "h_grid", "pilot_m", "squared_weight"});
    StrategySpec s;
    s.kind = j.value("kind", "");
    if (s.kind != "saa" && s.kind != "exptilt" && s.kind != "selfstruct")
        throw ConfigError("strategy: unknown kind \"" + s.kind + "\"");
    if (j.contains("h")) {
        if (s.kind != "selfstruct") throw ConfigError("strategy: \"h\" applies to selfstruct only");
        if (j["h"].is_string()) {
            if (j["h"].get<std::string>() != "auto")
                throw ConfigError("strategy: \"h\" must be a number or \"auto\"");
            s.auto_h = true;
        } else if (j["h"].is_number()) {
            s.h = j["h"].get<Real>();
            if (!(*s.h > 0.0)) throw ConfigError("strategy: \"h\" must be > 0");
        } else {
            throw ConfigError("strategy: \"h\" must be a number or \"auto\"");
        }
    } else if (s.kind == "selfstruct") {
        s.auto_h = true;
    }
    if (j.contains("h_grid")) {
        const Vec g = parse_vec(j["h_grid"], "strategy.h_grid");
        s.h_grid.assign(g.data(), g.data() + g.size());
    }
    s.pilot_m = j.value("pilot_m", Index{2000});
    s.squared_weight = j.value("squared_weight", false);
    return s;
}

SolverSpec parse_solver(const json& j) {
    expect_keys(j, "solver",
                {"kind", "schedule", "steps", "c", "gamma", "oracle_period", "record_period"});
    SolverSpec s;
    s.kind = j.value("kind", "ra");
    if (s.kind == "ra") {
        if (j.contains("schedule")) {
            const json& sj = j["schedule"];
            expect_keys(sj, "solver.schedule", {"mode", "n1", "growth", "k_tol", "max_epochs"});
            const std::string mode = sj.value("mode", "linear");
            if (mode == "linear") s.schedule.mode = RASchedule::Mode::LinearGrowth;
            else if (mode == "polynomial") s.schedule.mode = RASchedule::Mode::PolynomialGrowth;
            else throw ConfigError("solver.schedule: unknown mode \"" + mode + "\"");
            s.schedule.n1 = sj.value("n1", 500L);
            s.schedule.growth = sj.value("growth", s.schedule.mode == RASchedule::Mode::LinearGrowth ? 2.0 : 1.5);
            s.schedule.max_epochs = sj.value("max_epochs", 6);
            if (sj.contains("k_tol")) {
                s.schedule.k_tol = sj["k_tol"].get<Real>();
                s.k_tol_given = true;
            }
        }
        return s;
    }
    if (s.kind == "sa") {
        s.sa.steps = j.value("steps", 100000L);
        s.sa.c = j.value("c", 1.0);
        s.sa.gamma = j.value("gamma", 0.75);
        s.sa.oracle_period = j.value("oracle_period", 100L);
        s.sa.record_period = j.value("record_period", 1000L);
        return s;
    }
    throw ConfigError("solver: unknown kind \"" + s.kind + "\"");
}

EstimateSpec parse_estimate(const json& j) {
    expect_keys(j, "estimate", {"n", "replications", "at"});
    EstimateSpec e;
    e.n = j.value("n", 100000L);
    e.replications = j.value("replications", 1L);
    if (j.contains("at") && !j["at"].is_null()) {
        if (j["at"].is_string()) {
            if (j["at"].get<std::string>() != "var")
                throw ConfigError("estimate: \"at\" must be a number or \"var\"");
        } else if (j["at"].is_number()) {
            e.at_u = j["at"].get<Real>();
        } else {
            throw ConfigError("estimate: \"at\" must be a number or \"var\"");
        }
    }
    if (e.n < 1 || e.replications < 1) throw ConfigError("estimate: n and replications must be >= 1");
    return e;
}

CompareSpec parse_compare(const json& j) {
    expect_keys(j, "compare",
                {"betas", "eps_rel", "eps_rels", "confidence", "replications", "max_n",
                 "reference_n", "strategies"});
    CompareSpec c;
    if (!j.contains("betas")) throw ConfigError("compare: needs a \"betas\" grid");
    const Vec betas = parse_vec(j["betas"], "compare.betas");
    c.betas.assign(betas.data(), betas.data() + betas.size());
    if (j.contains("eps_rel")) c.eps_rels = {j["eps_rel"].get<Real>()};
    if (j.contains("eps_rels")) {
        const Vec e = parse_vec(j["eps_rels"], "compare.eps_rels");
        c.eps_rels.assign(e.data(), e.data() + e.size());
    }
    c.confidence = j.value("confidence", 0.95);
    c.replications = j.value("replications", 100L);
    c.max_n = j.value("max_n", 1L << 22);
    c.reference_n = j.value("reference_n", 10000000L);
    if (!j.contains("strategies") || !j["strategies"].is_array() || j["strategies"].empty())
        throw ConfigError("compare: needs a nonempty \"strategies\" list");
    for (const auto& sj : j["strategies"]) c.strategies.push_back(parse_strategy(sj));
    if (!(c.confidence > 0.0 && c.confidence < 1.0))
        throw ConfigError("compare: confidence must lie in (0,1)");
    for (Real b : c.betas)
        if (!(b > 0.0 && b < 1.0)) throw ConfigError("compare: betas must lie in (0,1)");
    for (Real e : c.eps_rels)
        if (!(e > 0.0)) throw ConfigError("compare: eps_rel must be > 0");
    return c;
}

} // namespace

std::string StrategySpec::label() const {
    if (kind != "selfstruct") return kind;
    std::ostringstream os;
    os << "selfstruct";
    if (auto_h) os << "_auto";
    else if (h) os << "_h" << *h;
    return os.str();
}

ExperimentConfig parse_config(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    expect_keys(doc, "config",
                {"distribution", "loss", "constraint", "risk", "strategy", "solver", "estimate",
                 "compare", "theta", "init", "seed", "out", "replications"});

    if (!doc.contains("distribution")) throw ConfigError("config: missing \"distribution\"");
    if (!doc.contains("loss")) throw ConfigError("config: missing \"loss\"");
    if (!doc.contains("risk")) throw ConfigError("config: missing \"risk\"");

    ExperimentConfig cfg{parse_distribution(doc["distribution"]), parse_loss(doc["loss"]),
                         DecisionConstraint{}, RiskSpec{}, StrategySpec{}, SolverSpec{},
                         EstimateSpec{}, CompareSpec{}, Vec(), 0.0, Vec(), 1, "."};

    const json& rj = doc["risk"];
    expect_keys(rj, "risk", {"beta", "lambda"});
    if (!rj.contains("beta")) throw ConfigError("risk: needs \"beta\"");
    cfg.risk.beta = rj["beta"].get<Real>();
    cfg.risk.lambda = rj.value("lambda", 0.0);
    cfg.risk.validate();

    if (doc.contains("constraint")) cfg.constraint = parse_constraint(doc["constraint"]);
    if (doc.contains("strategy")) cfg.strategy = parse_strategy(doc["strategy"]);
    if (doc.contains("solver")) cfg.solver = parse_solver(doc["solver"]);
    if (doc.contains("estimate")) cfg.estimate = parse_estimate(doc["estimate"]);
    if (doc.contains("compare")) cfg.compare = parse_compare(doc["compare"]);
    if (doc.contains("replications")) {
        cfg.estimate.replications = doc["replications"].get<long>();
        if (cfg.estimate.replications < 1) throw ConfigError("replications must be >= 1");
    }

    const Index p = cfg.theta_dim();
    if (doc.contains("theta")) {
        cfg.theta = parse_vec(doc["theta"], "theta");
        if (cfg.theta.size() != p) throw ConfigError("theta: length must match the decision dimension");
    }
    if (doc.contains("init")) {
        const json& ij = doc["init"];
        expect_keys(ij, "init", {"u", "theta"});
        cfg.init_u = ij.value("u", 0.0);
        if (ij.contains("theta")) {
            cfg.init_theta = parse_vec(ij["theta"], "init.theta");
            if (cfg.init_theta.size() != p)
                throw ConfigError("init.theta: length must match the decision dimension");
        }
    }
    if (doc.contains("seed")) cfg.seed = doc["seed"].get<std::uint64_t>();
    if (doc.contains("out")) cfg.out = doc["out"].get<std::string>();

    if (auto d = cfg.loss.x_dim(); d && *d != cfg.dist.dim())
        throw ConfigError("loss: x-dimension does not match the distribution");
    cfg.constraint.validate(p);
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("config: cannot open " + path);
    std::stringstream buf;
    buf << is.rdbuf();
    return parse_config(buf.str());
}

std::unique_ptr<ISStrategy> make_strategy(const StrategySpec& spec, const DistributionModel& dist,
                                          const LossModel& loss, const RiskSpec& risk, Real u0,
                                          const Vec& theta0) {
    if (spec.kind == "saa") return std::make_unique<SaaStrategy>(dist);
    if (spec.kind == "exptilt") return std::make_unique<ExpTiltStrategy>(dist, loss, u0, theta0);
    if (spec.kind == "selfstruct") {
        if (spec.auto_h)
            return std::make_unique<SelfStructStrategy>(dist, loss, risk.beta, spec.h_grid,
                                                        spec.pilot_m, spec.squared_weight);
        if (!spec.h) throw ConfigError("selfstruct: needs \"h\" (number or \"auto\")");
        return std::make_unique<SelfStructStrategy>(dist, loss, risk.beta, *spec.h);
    }
    throw ConfigError("strategy: unknown kind \"" + spec.kind + "\"");
}

} // namespace tailrisk
