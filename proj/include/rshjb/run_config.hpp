#pragma once

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

#include <json.hpp>

#include "rshjb/elliptic.hpp"
#include "rshjb/errors.hpp"
#include "rshjb/model.hpp"
#include "rshjb/simulate.hpp"

namespace rshjb {

using nlohmann::json;

/// Requested policy, resolved to a concrete PolicySpec at run time once the
/// value-function source (explicit solution or PDE solve) is known.
struct PolicyConfig {
    enum class Kind { optimal_auto, optimal_closed_form, optimal_numeric, zero, scaled };
    Kind kind = Kind::zero;
    double factor = 1.0;
};

struct SolverConfig {
    bool present = false;
    std::vector<double> radii{8.0};
    double h = 1.0 / 128.0;
    double tol = 1e-10;
    int max_iters = 20000;
    SweepStart direction = SweepStart::from_sub;
};

struct SimulateConfig {
    bool present = false;
    double dt = 1e-3;
    double horizon = 20.0;
    long paths = 10000;
    std::uint64_t seed = 0;
    std::vector<double> x0;
    int regime0 = 1;
    DiscountMode discount_mode = DiscountMode::as_written;
    std::vector<PolicyConfig> policies;
    std::vector<double> martingale_times{0.5, 1.0, 2.0};
    std::vector<double> moment_times{1.0, 2.0, 5.0, 10.0, 15.0};
    int threads = 0;
};

struct OutputConfig {
    std::string directory;
    std::vector<std::string> formats{"csv", "json"};
};

struct RunConfig {
    ModelParams model;
    bool lambda_special = false;
    SolverConfig solver;
    SimulateConfig sim;
    OutputConfig output;
};

namespace detail {

inline void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                       const std::string& where) {
    if (!obj.is_object()) {
        throw ValidationError(where + " must be a JSON object");
    }
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const char* k : allowed) {
            if (item.key() == k) {
                known = true;
                break;
            }
        }
        if (!known) {
            throw ValidationError("unknown key \"" + item.key() + "\" in " + where);
        }
    }
}

inline std::pair<double, double> parse_pair(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 2) {
        throw ValidationError(where + " must be an array of two numbers");
    }
    return {j[0].get<double>(), j[1].get<double>()};
}

inline CostCoeffs parse_cost(const json& j, const std::string& where) {
    check_keys(j, {"p", "s", "q"}, where);
    CostCoeffs c;
    c.p = j.value("p", 0.0);
    c.s = j.value("s", 0.0);
    c.q = j.value("q", 0.0);
    return c;
}

inline PolicyConfig parse_policy(const json& j, const std::string& where) {
    PolicyConfig p;
    std::string kind;
    if (j.is_string()) {
        kind = j.get<std::string>();
    } else {
        check_keys(j, {"kind", "factor"}, where);
        kind = j.at("kind").get<std::string>();
        p.factor = j.value("factor", 1.0);
    }
    if (kind == "optimal") {
        p.kind = PolicyConfig::Kind::optimal_auto;
    } else if (kind == "optimal_closed_form") {
        p.kind = PolicyConfig::Kind::optimal_closed_form;
    } else if (kind == "optimal_numeric") {
        p.kind = PolicyConfig::Kind::optimal_numeric;
    } else if (kind == "zero") {
        p.kind = PolicyConfig::Kind::zero;
    } else if (kind == "scaled") {
        p.kind = PolicyConfig::Kind::scaled;
    } else {
        throw ValidationError("unknown policy kind \"" + kind + "\" in " + where);
    }
    return p;
}

}  // namespace detail

/// Parses and validates the run configuration document. Unknown keys are
/// rejected everywhere; the model constraints are enforced before returning.
inline RunConfig parse_run_config(const json& doc) {
    detail::check_keys(doc, {"model", "solver", "simulate", "output"}, "config");
    if (!doc.contains("model")) {
        throw ValidationError("config requires a \"model\" section");
    }

    RunConfig cfg;
    const json& jm = doc.at("model");
    detail::check_keys(jm, {"dim", "k", "a", "lambda", "cost"}, "model");
    cfg.model.dim = jm.value("dim", 1);
    std::tie(cfg.model.k1, cfg.model.k2) = detail::parse_pair(jm.at("k"), "model.k");
    std::tie(cfg.model.a1, cfg.model.a2) = detail::parse_pair(jm.at("a"), "model.a");

    const json& jcost = jm.at("cost");
    if (!jcost.is_array() || jcost.size() != 2) {
        throw ValidationError("model.cost must hold two coefficient objects");
    }
    cfg.model.cost1 = detail::parse_cost(jcost[0], "model.cost[0]");
    cfg.model.cost2 = detail::parse_cost(jcost[1], "model.cost[1]");

    const json& jlam = jm.at("lambda");
    if (jlam.is_string() && jlam.get<std::string>() == "special") {
        cfg.lambda_special = true;
        const LambdaPair lam = special_lambda(cfg.model.dim, cfg.model.k1, cfg.model.k2,
                                              cfg.model.a1, cfg.model.a2);
        cfg.model.lambda1 = lam.lambda1;
        cfg.model.lambda2 = lam.lambda2;
    } else {
        std::tie(cfg.model.lambda1, cfg.model.lambda2) =
            detail::parse_pair(jlam, "model.lambda");
    }
    validate_params(cfg.model);

    if (doc.contains("solver")) {
        const json& js = doc.at("solver");
        detail::check_keys(js, {"radii", "h", "tol", "max_iters", "direction"}, "solver");
        SolverConfig& s = cfg.solver;
        s.present = true;
        if (js.contains("radii")) {
            s.radii = js.at("radii").get<std::vector<double>>();
        }
        s.h = js.value("h", s.h);
        s.tol = js.value("tol", s.tol);
        s.max_iters = js.value("max_iters", s.max_iters);
        const std::string dir = js.value("direction", std::string("from_sub"));
        if (dir == "from_sub") {
            s.direction = SweepStart::from_sub;
        } else if (dir == "from_super") {
            s.direction = SweepStart::from_super;
        } else {
            throw ValidationError("solver.direction must be from_sub or from_super");
        }
        if (s.radii.empty()) throw ValidationError("solver.radii must be nonempty");
        for (double r : s.radii) {
            RadialGrid::with_spacing(r, s.h);  // validates divisibility
        }
        if (!(s.tol > 0.0)) throw ValidationError("solver.tol must be > 0");
        if (s.max_iters < 1) throw ValidationError("solver.max_iters must be >= 1");
    }

    if (doc.contains("simulate")) {
        const json& js = doc.at("simulate");
        detail::check_keys(js,
                           {"dt", "horizon", "paths", "seed", "x0", "regime0", "discount_mode",
                            "policies", "martingale_times", "moment_times", "threads"},
                           "simulate");
        SimulateConfig& s = cfg.sim;
        s.present = true;
        s.dt = js.value("dt", s.dt);
        s.horizon = js.value("horizon", s.horizon);
        s.paths = js.value("paths", s.paths);
        s.seed = js.value("seed", s.seed);
        s.regime0 = js.value("regime0", s.regime0);
        s.threads = js.value("threads", s.threads);
        if (js.contains("x0")) {
            s.x0 = js.at("x0").get<std::vector<double>>();
        }
        if (s.x0.empty()) s.x0.assign(cfg.model.dim, 0.0);
        const std::string mode = js.value("discount_mode", std::string("as_written"));
        if (mode == "as_written") {
            s.discount_mode = DiscountMode::as_written;
        } else if (mode == "integrated") {
            s.discount_mode = DiscountMode::integrated;
        } else {
            throw ValidationError("simulate.discount_mode must be as_written or integrated");
        }
        if (js.contains("policies")) {
            int i = 0;
            for (const json& jp : js.at("policies")) {
                s.policies.push_back(
                    detail::parse_policy(jp, "simulate.policies[" + std::to_string(i) + "]"));
                ++i;
            }
        }
        if (s.policies.empty()) {
            s.policies.push_back({PolicyConfig::Kind::optimal_auto, 1.0});
            s.policies.push_back({PolicyConfig::Kind::zero, 1.0});
        }
        if (js.contains("martingale_times")) {
            s.martingale_times = js.at("martingale_times").get<std::vector<double>>();
        }
        if (js.contains("moment_times")) {
            s.moment_times = js.at("moment_times").get<std::vector<double>>();
        }
        SimConfig probe;
        probe.dt = s.dt;
        probe.horizon = s.horizon;
        probe.n_paths = s.paths;
        probe.x0 = s.x0;
        probe.regime0 = s.regime0;
        detail::validate_sim_config(cfg.model, probe);
    }

    if (doc.contains("output")) {
        const json& jo = doc.at("output");
        detail::check_keys(jo, {"directory", "formats"}, "output");
        cfg.output.directory = jo.value("directory", std::string());
        if (jo.contains("formats")) {
            cfg.output.formats = jo.at("formats").get<std::vector<std::string>>();
            for (const std::string& f : cfg.output.formats) {
                if (f != "csv" && f != "json") {
                    throw ValidationError("output.formats entries must be csv or json");
                }
            }
        }
    }
    return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open config file: " + path);
    }
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config is not valid JSON: ") + e.what());
    }
    return parse_run_config(doc);
}

inline const char* policy_kind_name(PolicyConfig::Kind k) {
    switch (k) {
        case PolicyConfig::Kind::optimal_auto: return "optimal";
        case PolicyConfig::Kind::optimal_closed_form: return "optimal_closed_form";
        case PolicyConfig::Kind::optimal_numeric: return "optimal_numeric";
        case PolicyConfig::Kind::zero: return "zero";
        case PolicyConfig::Kind::scaled: return "scaled";
    }
    return "unknown";
}

/// Normalized configuration echoed into every report. Execution details
/// with no effect on the numbers (thread count) stay out so reports remain
/// byte-identical across machines and parallelism levels.
inline json resolved_config(const RunConfig& cfg) {
    json jm;
    jm["dim"] = cfg.model.dim;
    jm["k"] = {cfg.model.k1, cfg.model.k2};
    jm["a"] = {cfg.model.a1, cfg.model.a2};
    jm["lambda"] = {cfg.model.lambda1, cfg.model.lambda2};
    jm["lambda_mode"] = cfg.lambda_special ? "special" : "explicit";
    jm["cost"] = {{{"p", cfg.model.cost1.p}, {"s", cfg.model.cost1.s}, {"q", cfg.model.cost1.q}},
                  {{"p", cfg.model.cost2.p}, {"s", cfg.model.cost2.s}, {"q", cfg.model.cost2.q}}};
    json out;
    out["model"] = jm;
    if (cfg.solver.present) {
        json js;
        js["radii"] = cfg.solver.radii;
        js["h"] = cfg.solver.h;
        js["tol"] = cfg.solver.tol;
        js["max_iters"] = cfg.solver.max_iters;
        js["direction"] =
            cfg.solver.direction == SweepStart::from_sub ? "from_sub" : "from_super";
        out["solver"] = js;
    }
    if (cfg.sim.present) {
        json js;
        js["dt"] = cfg.sim.dt;
        js["horizon"] = cfg.sim.horizon;
        js["paths"] = cfg.sim.paths;
        js["seed"] = cfg.sim.seed;
        js["x0"] = cfg.sim.x0;
        js["regime0"] = cfg.sim.regime0;
        js["discount_mode"] =
            cfg.sim.discount_mode == DiscountMode::as_written ? "as_written" : "integrated";
        json jp = json::array();
        for (const PolicyConfig& p : cfg.sim.policies) {
            if (p.kind == PolicyConfig::Kind::scaled) {
                jp.push_back({{"kind", "scaled"}, {"factor", p.factor}});
            } else {
                jp.push_back(policy_kind_name(p.kind));
            }
        }
        js["policies"] = jp;
        js["martingale_times"] = cfg.sim.martingale_times;
        js["moment_times"] = cfg.sim.moment_times;
        out["simulate"] = js;
    }
    return out;
}

}  // namespace rshjb
