#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "rshjb/closed_form.hpp"
#include "rshjb/elliptic.hpp"
#include "rshjb/model.hpp"
#include "rshjb/run_config.hpp"
#include "rshjb/simulate.hpp"
#include "rshjb/subsuper.hpp"
#include "rshjb/version.hpp"

namespace rshjb {

/// Exit-code contract shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitSolver = 2;
inline constexpr int kExitVerification = 3;

struct CommandOptions {
    std::string config_path;
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    bool quiet = false;
};

namespace detail {

/// Shortest exactly-round-tripping decimal for CSV cells.
inline std::string fmt_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

inline std::string out_directory(const RunConfig& cfg, const CommandOptions& opts) {
    if (opts.out_dir) return *opts.out_dir;
    return cfg.output.directory;
}

inline bool wants_format(const RunConfig& cfg, const std::string& fmt) {
    for (const std::string& f : cfg.output.formats) {
        if (f == fmt) return true;
    }
    return false;
}

inline void write_text(const std::string& dir, const std::string& name,
                       const std::string& text) {
    std::filesystem::create_directories(dir);
    std::ofstream out(dir + "/" + name, std::ios::binary);
    if (!out) throw ValidationError("cannot write output file " + name + " in " + dir);
    out << text;
}

inline void emit_report(const json& report, const RunConfig& cfg, const CommandOptions& opts,
                        const std::string& filename, std::ostream& os) {
    const std::string text = report.dump(2) + "\n";
    if (!opts.quiet) os << text;
    const std::string dir = out_directory(cfg, opts);
    if (!dir.empty() && wants_format(cfg, "json")) {
        write_text(dir, filename, text);
    }
}

inline json estimate_json(const McEstimate& e) {
    return json{{"mean", e.mean}, {"std_err", e.std_err}, {"paths", e.n_paths}};
}

inline SimConfig sim_config(const RunConfig& cfg, const CommandOptions& opts) {
    SimConfig c;
    c.dt = cfg.sim.dt;
    c.horizon = cfg.sim.horizon;
    c.n_paths = cfg.sim.paths;
    c.master_seed = opts.seed.value_or(cfg.sim.seed);
    c.x0 = cfg.sim.x0;
    c.regime0 = cfg.sim.regime0;
    c.discount_mode = cfg.sim.discount_mode;
    c.n_threads = cfg.sim.threads;
    return c;
}

inline json resolved_with_seed(const RunConfig& cfg, const CommandOptions& opts) {
    json j = resolved_config(cfg);
    if (opts.seed && j.contains("simulate")) {
        j["simulate"]["seed"] = *opts.seed;
    }
    return j;
}

inline bool is_quadratic_cost(const CostCoeffs& c) {
    return c.p == 1.0 && c.s == 0.0 && c.q == 0.0;
}

/// The explicit solution applies when both costs are |x|^2 and the discount
/// rates equal the special values.
inline std::optional<ClosedForm> applicable_closed_form(const RunConfig& cfg) {
    if (!is_quadratic_cost(cfg.model.cost1) || !is_quadratic_cost(cfg.model.cost2)) {
        return std::nullopt;
    }
    ClosedForm cf = build_closed_form(cfg.model.dim, cfg.model.k1, cfg.model.k2, cfg.model.a1,
                                      cfg.model.a2);
    const double tol = 1e-12 * std::max({1.0, cf.lambda1, cf.lambda2});
    if (std::abs(cf.lambda1 - cfg.model.lambda1) > tol ||
        std::abs(cf.lambda2 - cfg.model.lambda2) > tol) {
        return std::nullopt;
    }
    return cf;
}

/// Value-function source shared by the simulate and verify commands: the
/// explicit solution when it applies, otherwise a PDE solve on the largest
/// configured ball.
struct ValueSource {
    std::optional<ClosedForm> cf;
    std::optional<ValueField> field;

    ValueFn value_fn() const {
        ValueFn v;
        if (cf) {
            v.cf = &*cf;
        } else {
            v.field = &*field;
        }
        return v;
    }
    PolicySpec optimal() const {
        return cf ? PolicySpec::optimal(*cf) : PolicySpec::optimal(*field);
    }
    bool numeric() const { return !cf.has_value(); }
};

inline ValueSource make_value_source(const RunConfig& cfg) {
    ValueSource src;
    src.cf = applicable_closed_form(cfg);
    if (src.cf) return src;
    if (!cfg.solver.present) {
        throw ValidationError(
            "model has no explicit solution; a solver section is required to build the "
            "optimal policy");
    }
    const GrowthBound m = growth_bound(cfg.model);
    const SubCoeffs coeffs = solve_coeffs(cfg.model, m);
    if (coeffs.degenerate) {
        throw ValidationError("zero cost model: the value function vanishes identically");
    }
    SolveOptions opts;
    opts.tol = cfg.solver.tol;
    opts.max_iters = cfg.solver.max_iters;
    opts.direction = cfg.solver.direction;
    const double radius = cfg.solver.radii.back();
    auto [fields, report] = solve_ball(cfg.model, coeffs,
                                       RadialGrid::with_spacing(radius, cfg.solver.h), opts);
    if (!report.converged) {
        throw SolveError("value-function solve did not converge at radius " +
                         std::to_string(radius));
    }
    src.field = extract_values(fields, cfg.model, coeffs);
    return src;
}

inline PolicySpec resolve_policy(const PolicyConfig& pc, const ValueSource& src) {
    switch (pc.kind) {
        case PolicyConfig::Kind::zero:
            return PolicySpec::zero_policy();
        case PolicyConfig::Kind::optimal_auto:
            return src.optimal();
        case PolicyConfig::Kind::optimal_closed_form:
            if (!src.cf) {
                throw ValidationError(
                    "optimal_closed_form policy requires the special discount rates and "
                    "quadratic costs");
            }
            return PolicySpec::optimal(*src.cf);
        case PolicyConfig::Kind::optimal_numeric:
            if (!src.field) {
                throw ValidationError("optimal_numeric policy requires a solver section");
            }
            return PolicySpec::optimal(*src.field);
        case PolicyConfig::Kind::scaled:
            return PolicySpec::scaled(src.optimal(), pc.factor);
    }
    throw ValidationError("unreachable policy kind");
}

inline std::vector<double> linspace(double lo, double hi, int count) {
    std::vector<double> xs(count);
    for (int i = 0; i < count; ++i) {
        xs[i] = lo + (hi - lo) * i / (count - 1);
    }
    return xs;
}

}  // namespace detail

/// `validate`: parse/validate only; echo the resolved configuration.
inline int cmd_validate(const RunConfig& cfg, const CommandOptions& opts, std::ostream& os) {
    json report;
    report["version"] = kToolVersion;
    report["config"] = detail::resolved_with_seed(cfg, opts);
    report["valid"] = true;
    detail::emit_report(report, cfg, opts, "validate.json", os);
    return kExitOk;
}

/// `coeffs`: bracket exponents for the configured model plus the residuals
/// of both coefficient systems.
inline int cmd_coeffs(const RunConfig& cfg, const CommandOptions& opts, std::ostream& os) {
    const GrowthBound m = growth_bound(cfg.model);
    const SubCoeffs c = solve_coeffs(cfg.model, m);
    const auto rq = quad_system_residual(cfg.model, m, c.b1, c.b2);
    const auto rc = const_system_residual(cfg.model, m, c);

    json report;
    report["version"] = kToolVersion;
    report["config"] = detail::resolved_with_seed(cfg, opts);
    report["B1"] = c.b1;
    report["B2"] = c.b2;
    report["D1"] = c.d1;
    report["D2"] = c.d2;
    report["degenerate"] = c.degenerate;
    report["growth_bound"] = {m.m1, m.m2};
    report["residual_quadratic"] = {rq[0], rq[1]};
    report["residual_linear"] = {rc[0], rc[1]};
    detail::emit_report(report, cfg, opts, "coeffs.json", os);
    return kExitOk;
}

/// `closed-form`: explicit-solution exponents, discount rates, and the
/// verification residual over a dense radius sweep.
inline int cmd_closed_form(const RunConfig& cfg, const CommandOptions& opts, std::ostream& os) {
    if (!detail::is_quadratic_cost(cfg.model.cost1) ||
        !detail::is_quadratic_cost(cfg.model.cost2)) {
        throw ValidationError("closed-form requires cost p=1, s=0, q=0 in both regimes");
    }
    const std::optional<ClosedForm> cf = detail::applicable_closed_form(cfg);
    if (!cf) {
        throw ValidationError("closed-form requires the special discount rates (lambda: "
                              "\"special\")");
    }
    const std::vector<double> radii = detail::linspace(0.0, 10.0, 1000);
    const double residual = verify_identity(*cf, cfg.model, radii);

    json report;
    report["version"] = kToolVersion;
    report["config"] = detail::resolved_with_seed(cfg, opts);
    report["m1"] = cf->m1;
    report["m2"] = cf->m2;
    report["lambda1"] = cf->lambda1;
    report["lambda2"] = cf->lambda2;
    report["max_residual"] = residual;
    report["radii_count"] = radii.size();
    detail::emit_report(report, cfg, opts, "closed_form.json", os);
    return kExitOk;
}

/// `solve`: PDE solves on every configured radius; one CSV per radius with
/// columns r,u,v,z1,z2,c1,c2 plus a JSON report with per-radius diagnostics
/// and the inner-window gaps between consecutive radii.
inline int cmd_solve(const RunConfig& cfg, const CommandOptions& opts, std::ostream& os) {
    if (!cfg.solver.present) {
        throw ValidationError("solve requires a solver section");
    }
    const GrowthBound m = growth_bound(cfg.model);
    const SubCoeffs coeffs = solve_coeffs(cfg.model, m);
    if (coeffs.degenerate) {
        throw ValidationError("zero cost model: bracket is degenerate, nothing to solve");
    }
    SolveOptions sopts;
    sopts.tol = cfg.solver.tol;
    sopts.max_iters = cfg.solver.max_iters;
    sopts.direction = cfg.solver.direction;

    const std::string dir = detail::out_directory(cfg, opts);
    json report;
    report["version"] = kToolVersion;
    report["config"] = detail::resolved_with_seed(cfg, opts);
    report["B"] = {coeffs.b1, coeffs.b2};
    report["D"] = {coeffs.d1, coeffs.d2};
    json jradii = json::array();

    std::vector<FieldPair> fields;
    bool all_ok = true;
    for (double radius : cfg.solver.radii) {
        auto [f, rep] = solve_ball(cfg.model, coeffs, RadialGrid::with_spacing(radius, cfg.solver.h),
                                   sopts);
        json jr;
        jr["radius"] = radius;
        jr["iterations"] = rep.iterations;
        jr["final_update_norm"] = rep.final_update_norm;
        jr["residual_inf"] = rep.residual_inf;
        jr["bracket_ok"] = rep.bracket_ok;
        jr["monotone_ok"] = rep.monotone_ok;
        jr["converged"] = rep.converged;
        all_ok = all_ok && rep.converged && rep.bracket_ok;

        if (rep.converged) {
            const ValueField values = extract_values(f, cfg.model, coeffs);
            jr["growth_K"] = {values.growth_k1, values.growth_k2};
            jr["gradient_slope"] = {values.slope1, values.slope2};
            if (!dir.empty() && detail::wants_format(cfg, "csv")) {
                std::string csv = "r,u,v,z1,z2,c1,c2\n";
                for (int j = 0; j <= f.grid.n; ++j) {
                    csv += detail::fmt_double(f.grid.node(j)) + "," +
                           detail::fmt_double(f.u[j]) + "," + detail::fmt_double(f.v[j]) + "," +
                           detail::fmt_double(values.z1[j]) + "," +
                           detail::fmt_double(values.z2[j]) + "," +
                           detail::fmt_double(values.c1[j]) + "," +
                           detail::fmt_double(values.c2[j]) + "\n";
                }
                char name[64];
                std::snprintf(name, sizeof(name), "fields_R%g.csv", radius);
                detail::write_text(dir, name, csv);
                jr["csv"] = name;
            }
        }
        jradii.push_back(jr);
        fields.push_back(std::move(f));
    }

    json jgaps = json::array();
    for (std::size_t i = 0; i + 1 < fields.size(); ++i) {
        const int window = fields[i].grid.n / 2;
        double gap = 0.0;
        for (int j = 0; j <= window; ++j) {
            gap = std::max(gap, std::abs(fields[i].u[j] - fields[i + 1].u[j]));
            gap = std::max(gap, std::abs(fields[i].v[j] - fields[i + 1].v[j]));
        }
        jgaps.push_back(gap);
    }
    report["radii"] = jradii;
    report["gaps"] = jgaps;
    report["all_converged"] = all_ok;
    detail::emit_report(report, cfg, opts, "solve_report.json", os);
    return all_ok ? kExitOk : kExitSolver;
}

/// `simulate`: discounted-cost estimates for the configured policies under
/// common random numbers; CSV plus JSON report.
inline int cmd_simulate(const RunConfig& cfg, const CommandOptions& opts, std::ostream& os) {
    if (!cfg.sim.present) {
        throw ValidationError("simulate requires a simulate section");
    }
    const detail::ValueSource src = detail::make_value_source(cfg);
    BatteryRequest req;
    for (const PolicyConfig& pc : cfg.sim.policies) {
        req.policies.push_back(detail::resolve_policy(pc, src));
    }
    const SimConfig sim = detail::sim_config(cfg, opts);
    const std::vector<PolicyRun> runs = run_battery(cfg.model, sim, req);

    double x0_norm = 0.0;
    for (double xi : sim.x0) x0_norm += xi * xi;
    x0_norm = std::sqrt(x0_norm);
    const char* mode =
        sim.discount_mode == DiscountMode::as_written ? "as_written" : "integrated";
    const double lam_min = std::min(cfg.model.lambda1, cfg.model.lambda2);

    std::string csv = "policy,regime0,x0_norm,J_mean,J_stderr,paths,discount_mode\n";
    json jrows = json::array();
    for (std::size_t i = 0; i < req.policies.size(); ++i) {
        const std::string name = policy_name(req.policies[i]);
        const McEstimate& cost = runs[i].cost;
        csv += name + "," + std::to_string(sim.regime0) + "," + detail::fmt_double(x0_norm) +
               "," + detail::fmt_double(cost.mean) + "," + detail::fmt_double(cost.std_err) +
               "," + std::to_string(cost.n_paths) + "," + mode + "\n";
        json row;
        row["policy"] = name;
        row["J"] = detail::estimate_json(cost);
        // Tail of the truncated cost integral: the discounted running-cost
        // rate at the horizon decays at least like e^{-lam_min (t - T)}.
        const double tail = runs[i].final_discounted_rate.mean / lam_min;
        row["tail_bound"] = tail;
        row["tail_fraction"] = std::abs(cost.mean) > 0.0 ? tail / std::abs(cost.mean) : 0.0;
        jrows.push_back(row);
    }

    json report;
    report["version"] = kToolVersion;
    report["config"] = detail::resolved_with_seed(cfg, opts);
    report["estimates"] = jrows;
    const std::string dir = detail::out_directory(cfg, opts);
    if (!dir.empty() && detail::wants_format(cfg, "csv")) {
        detail::write_text(dir, "simulate.csv", csv);
    }
    if (!opts.quiet) os << csv;
    detail::emit_report(report, cfg, opts, "simulate.json", os);
    return kExitOk;
}

/// `verify`: the full optimality battery. Every check carries a pass flag;
/// the command exits 3 if any fails.
inline int cmd_verify(const RunConfig& cfg, const CommandOptions& opts, std::ostream& os) {
    if (!cfg.sim.present) {
        throw ValidationError("verify requires a simulate section");
    }
    const detail::ValueSource src = detail::make_value_source(cfg);
    const ValueFn value = src.value_fn();
    const SimConfig sim = detail::sim_config(cfg, opts);

    double x0_norm = 0.0;
    for (double xi : sim.x0) x0_norm += xi * xi;
    x0_norm = std::sqrt(x0_norm);
    const double z0 = value.z(x0_norm, sim.regime0);
    const double u0 = -z0;

    json checks = json::array();
    bool all_pass = true;
    auto add_check = [&](const std::string& name, bool pass, json details) {
        details["name"] = name;
        details["pass"] = pass;
        checks.push_back(details);
        all_pass = all_pass && pass;
    };

    // Explicit-solution identity, when the model admits it.
    if (src.cf) {
        const std::vector<double> radii = detail::linspace(0.0, 10.0, 1000);
        const double residual = verify_identity(*src.cf, cfg.model, radii);
        add_check("closed_form_identity", residual <= 1e-10,
                  json{{"max_residual", residual}, {"tolerance", 1e-10}});
    }

    // Chain statistics: holding means 1/a_i, occupation a2/(a1+a2).
    {
        const ChainParams chain = ChainParams::from_model(cfg.model);
        const ChainStats st = chain_statistics(chain, sim.regime0, 100000, sim.master_seed);
        const bool hold1_ok = std::abs(st.hold_mean1 - 1.0 / chain.a1) <= 3.0 * st.hold_se1;
        const bool hold2_ok = std::abs(st.hold_mean2 - 1.0 / chain.a2) <= 3.0 * st.hold_se2;
        const double occ_expected = chain.a2 / (chain.a1 + chain.a2);
        const bool occ_ok = std::abs(st.occupation1 - occ_expected) <= 3.0 * st.occupation1_se;
        add_check("chain_statistics", hold1_ok && hold2_ok && occ_ok,
                  json{{"hold_mean", {st.hold_mean1, st.hold_mean2}},
                       {"hold_std_err", {st.hold_se1, st.hold_se2}},
                       {"occupation1", st.occupation1},
                       {"occupation1_std_err", st.occupation1_se},
                       {"occupation1_expected", occ_expected},
                       {"sojourns", st.n_sojourns}});
    }

    // Cost comparison under common random numbers; the optimal policy leads.
    std::vector<PolicySpec> policies{src.optimal()};
    std::vector<std::string> names{policy_name(policies[0])};
    for (const PolicyConfig& pc : cfg.sim.policies) {
        const PolicySpec p = detail::resolve_policy(pc, src);
        const std::string n = policy_name(p);
        if (n == names[0]) continue;
        policies.push_back(p);
        names.push_back(n);
    }
    const std::vector<McEstimate> costs = estimate_costs(policies, cfg.model, sim);
    {
        bool pass = true;
        json rows = json::array();
        for (std::size_t i = 0; i < policies.size(); ++i) {
            json row;
            row["policy"] = names[i];
            row["J"] = detail::estimate_json(costs[i]);
            if (i > 0) {
                const double gap = costs[i].mean - costs[0].mean;
                const double band = 3.0 * std::sqrt(costs[i].std_err * costs[i].std_err +
                                                    costs[0].std_err * costs[0].std_err);
                row["gap_vs_optimal"] = gap;
                row["band"] = band;
                row["suboptimal"] = gap > band;
                if (gap < -band) pass = false;
            }
            rows.push_back(row);
        }
        add_check("cost_comparison", pass, json{{"policies", rows}});
    }

    // Discounted cost of the optimal policy against the value function.
    {
        const double slack = src.numeric() ? 0.01 : 0.0;
        const double tol = 3.0 * costs[0].std_err + slack;
        const double diff = std::abs(costs[0].mean - z0);
        add_check("value_vs_cost", diff <= tol,
                  json{{"z", z0},
                       {"J", detail::estimate_json(costs[0])},
                       {"difference", diff},
                       {"tolerance", tol}});
    }

    // Martingale flatness under the optimal policy.
    {
        const std::vector<McEstimate> ms =
            martingale_test(policies[0], value, cfg.model, sim, cfg.sim.martingale_times);
        bool pass = true;
        json rows = json::array();
        for (std::size_t i = 0; i < ms.size(); ++i) {
            const bool ok = std::abs(ms[i].mean - u0) <= 3.0 * ms[i].std_err;
            pass = pass && ok;
            rows.push_back(json{{"t", cfg.sim.martingale_times[i]},
                                {"mean", ms[i].mean},
                                {"std_err", ms[i].std_err},
                                {"target", u0},
                                {"ok", ok}});
        }
        add_check("martingale_flatness", pass, json{{"checkpoints", rows}});
    }

    // Supermartingale direction under the zero policy.
    {
        const std::vector<McEstimate> ms = martingale_test(
            PolicySpec::zero_policy(), value, cfg.model, sim, cfg.sim.martingale_times);
        bool pass = true;
        json rows = json::array();
        for (std::size_t i = 0; i < ms.size(); ++i) {
            const bool ok = ms[i].mean <= u0 + 3.0 * ms[i].std_err;
            pass = pass && ok;
            rows.push_back(json{{"t", cfg.sim.martingale_times[i]},
                                {"mean", ms[i].mean},
                                {"std_err", ms[i].std_err},
                                {"bound", u0},
                                {"ok", ok}});
        }
        add_check("supermartingale_zero", pass, json{{"checkpoints", rows}});
    }

    // Second-moment envelope and discounted-moment decay.
    {
        const MomentFitReport fit =
            moment_bound_test(policies[0], cfg.model, sim, cfg.sim.moment_times);
        add_check("moment_envelope", fit.pass,
                  json{{"times", fit.times},
                       {"second_moments", fit.second_moments},
                       {"C1", fit.c1},
                       {"C2", fit.c2}});
        const TransversalityReport tr =
            transversality_test(policies[0], cfg.model, sim, cfg.sim.moment_times);
        add_check("transversality", tr.pass,
                  json{{"times", tr.times},
                       {"discounted_moments", tr.discounted_moments},
                       {"final_fraction", tr.final_fraction},
                       {"decreasing_tail", tr.decreasing_tail}});
    }

    json report;
    report["version"] = kToolVersion;
    report["config"] = detail::resolved_with_seed(cfg, opts);
    report["checks"] = checks;
    report["all_pass"] = all_pass;
    detail::emit_report(report, cfg, opts, "verify.json", os);
    return all_pass ? kExitOk : kExitVerification;
}

}  // namespace rshjb
