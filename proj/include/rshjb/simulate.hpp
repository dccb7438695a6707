#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "rshjb/closed_form.hpp"
#include "rshjb/elliptic.hpp"
#include "rshjb/errors.hpp"
#include "rshjb/model.hpp"
#include "rshjb/rng.hpp"

namespace rshjb {

/// Switching rates of the two-state chain; the rate matrix has rows
/// (-a1, a1) and (a2, -a2), each summing to zero.
struct ChainParams {
    double a1 = 1.0;
    double a2 = 1.0;

    std::array<std::array<double, 2>, 2> rate_matrix() const {
        return {{{-a1, a1}, {a2, -a2}}};
    }
    static ChainParams from_model(const ModelParams& p) { return {p.a1, p.a2}; }
};

/// Right-continuous chain path on [0, horizon]: exact jump times plus the
/// state entered at each jump.
struct JumpPath {
    int initial_state = 1;
    double horizon = 0.0;
    std::vector<double> jump_times;
    std::vector<int> states_after;

    int state_at(double t) const {
        const auto it = std::upper_bound(jump_times.begin(), jump_times.end(), t);
        const std::size_t idx = static_cast<std::size_t>(it - jump_times.begin());
        return idx == 0 ? initial_state : states_after[idx - 1];
    }
};

/// Exact chain sampling: the holding time in regime i is exponential with
/// rate a_i. Deterministic for a fixed generator state.
inline JumpPath simulate_chain(const ChainParams& chain, int regime0, double horizon,
                               std::mt19937_64& rng) {
    if (regime0 != 1 && regime0 != 2) throw ValidationError("regime0 must be 1 or 2");
    if (!(horizon > 0.0)) throw ValidationError("horizon must be > 0");
    JumpPath path;
    path.initial_state = regime0;
    path.horizon = horizon;
    int state = regime0;
    double t = 0.0;
    while (true) {
        const double rate = (state == 1) ? chain.a1 : chain.a2;
        std::exponential_distribution<double> hold(rate);
        t += hold(rng);
        if (t >= horizon) break;
        state = 3 - state;
        path.jump_times.push_back(t);
        path.states_after.push_back(state);
    }
    return path;
}

enum class DiscountMode { as_written, integrated };

/// One Monte Carlo run: stepping, horizon, path count, master seed, start
/// point and regime, and which discount convention to apply.
struct SimConfig {
    double dt = 1e-3;
    double horizon = 1.0;
    long n_paths = 1;
    std::uint64_t master_seed = 0;
    std::vector<double> x0;
    int regime0 = 1;
    DiscountMode discount_mode = DiscountMode::as_written;
    int n_threads = 0;  // 0: hardware concurrency
};

struct McEstimate {
    double mean = 0.0;
    double std_err = 0.0;
    long n_paths = 0;
};

/// Feedback control: the optimal one from the explicit solution or from a
/// numeric value field, the zero control, or a scaled optimal control. The
/// optimal kinds realize c_i(x) = -grad z_i(x), radially -z_i'(|x|) x/|x|.
struct PolicySpec {
    enum class Kind { optimal_closed_form, optimal_numeric, zero, scaled };
    Kind kind = Kind::zero;
    double factor = 1.0;
    const ClosedForm* cf = nullptr;
    const ValueField* field = nullptr;

    static PolicySpec optimal(const ClosedForm& closed_form) {
        PolicySpec p;
        p.kind = Kind::optimal_closed_form;
        p.cf = &closed_form;
        return p;
    }
    static PolicySpec optimal(const ValueField& value_field) {
        PolicySpec p;
        p.kind = Kind::optimal_numeric;
        p.field = &value_field;
        return p;
    }
    static PolicySpec zero_policy() { return PolicySpec{}; }
    static PolicySpec scaled(const PolicySpec& base, double factor) {
        PolicySpec p = base;
        p.kind = Kind::scaled;
        p.factor = base.factor * factor;
        return p;
    }

    /// Writes the drift at x (with r = |x| precomputed) into `out`.
    void drift(std::span<const double> x, double r, int regime, std::span<double> out) const {
        switch (kind) {
            case Kind::zero:
                std::fill(out.begin(), out.end(), 0.0);
                return;
            case Kind::optimal_closed_form:
            case Kind::optimal_numeric:
            case Kind::scaled: {
                double slope;  // drift = slope * x
                if (cf != nullptr) {
                    const double km = (regime == 1) ? cf->k1 * cf->m1 : cf->k2 * cf->m2;
                    slope = factor * 2.0 * km;
                } else if (field != nullptr) {
                    if (r <= 0.0) {
                        std::fill(out.begin(), out.end(), 0.0);
                        return;
                    }
                    const std::vector<double>& c = (regime == 1) ? field->c1 : field->c2;
                    slope = factor * interp_radial(c, field->grid, r) / r;
                } else {
                    throw ValidationError("scaled policy needs an optimal base");
                }
                for (std::size_t i = 0; i < x.size(); ++i) out[i] = slope * x[i];
                return;
            }
        }
    }

    static double interp_radial(const std::vector<double>& ys, const RadialGrid& g, double r) {
        if (r <= 0.0) return ys.front();
        const double s = r / g.h;
        if (s >= g.n) {  // beyond the mesh: extend the last interval linearly
            const double slope = (ys[g.n] - ys[g.n - 1]) / g.h;
            return ys[g.n] + slope * (r - g.radius);
        }
        const int j = static_cast<int>(s);
        const double w = s - j;
        return ys[j] * (1.0 - w) + ys[j + 1] * w;
    }
};

inline std::string policy_name(const PolicySpec& p) {
    switch (p.kind) {
        case PolicySpec::Kind::optimal_closed_form:
            return "optimal_closed_form";
        case PolicySpec::Kind::optimal_numeric:
            return "optimal_numeric";
        case PolicySpec::Kind::zero:
            return "zero";
        case PolicySpec::Kind::scaled: {
            char buf[40];
            std::snprintf(buf, sizeof(buf), "scaled_%g", p.factor);
            return buf;
        }
    }
    return "unknown";
}

/// Value function access for the martingale statistics, from either source.
struct ValueFn {
    const ClosedForm* cf = nullptr;
    const ValueField* field = nullptr;

    double z(double r, int regime) const {
        if (cf != nullptr) return (regime == 1) ? cf->z1(r) : cf->z2(r);
        if (field != nullptr) {
            const std::vector<double>& zs = (regime == 1) ? field->z1 : field->z2;
            return PolicySpec::interp_radial(zs, field->grid, r);
        }
        throw ValidationError("value function has no source");
    }
    double u(double r, int regime) const { return -z(r, regime); }
};

namespace detail {

inline long checked_steps(double horizon, double dt) {
    const long n = std::lround(horizon / dt);
    if (n < 1 || std::abs(n * dt - horizon) > 1e-9 * std::max(1.0, horizon)) {
        throw ValidationError("horizon must be an integer multiple of dt");
    }
    return n;
}

inline void validate_sim_config(const ModelParams& params, const SimConfig& c) {
    if (!(c.dt > 0.0)) throw ValidationError("dt must be > 0");
    if (!(c.horizon >= c.dt)) throw ValidationError("dt must not exceed the horizon");
    if (c.n_paths < 1) throw ValidationError("n_paths must be >= 1");
    if (c.regime0 != 1 && c.regime0 != 2) throw ValidationError("regime0 must be 1 or 2");
    if (c.x0.size() != static_cast<std::size_t>(params.dim)) {
        throw ValidationError("x0 must have dim components");
    }
    checked_steps(c.horizon, c.dt);
}

inline double kahan_total(std::span<const double> xs) {
    double sum = 0.0, comp = 0.0;
    for (double x : xs) {
        const double y = x - comp;
        const double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    return sum;
}

inline McEstimate reduce_samples(std::span<const double> xs) {
    McEstimate e;
    e.n_paths = static_cast<long>(xs.size());
    if (xs.empty()) return e;
    e.mean = kahan_total(xs) / static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0, comp = 0.0;
        for (double x : xs) {
            const double d = (x - e.mean) * (x - e.mean) - comp;
            const double t = ss + d;
            comp = (t - ss) - d;
            ss = t;
        }
        const double var = ss / static_cast<double>(xs.size() - 1);
        e.std_err = std::sqrt(std::max(var, 0.0) / static_cast<double>(xs.size()));
    }
    return e;
}

}  // namespace detail

/// Per-checkpoint statistics of one policy in a battery run.
struct CheckpointStats {
    McEstimate x_norm_sq;      // E |X(t)|^2
    McEstimate discounted_sq;  // E D(t) |X(t)|^2
    McEstimate martingale;     // E M(t), only when a value function is given
};

struct PolicyRun {
    McEstimate cost;
    /// Discounted running-cost rate at the horizon; divided by the smallest
    /// discount rate it bounds the truncated tail of the cost integral.
    McEstimate final_discounted_rate;
    std::vector<CheckpointStats> at;
};

struct BatteryRequest {
    std::vector<PolicySpec> policies;
    std::vector<double> checkpoints;     // multiples of dt, <= horizon
    const ValueFn* value = nullptr;      // enables the martingale statistic
};

/// Runs every policy through identical chain paths and noise (common random
/// numbers), accumulating the discounted cost and the requested checkpoint
/// statistics. Paths are independent; the result is a pure function of
/// (params, config, request) regardless of the worker-thread count.
inline std::vector<PolicyRun> run_battery(const ModelParams& params, const SimConfig& config,
                                          const BatteryRequest& req) {
    detail::validate_sim_config(params, config);
    const int n_pol = static_cast<int>(req.policies.size());
    if (n_pol == 0) throw ValidationError("battery needs at least one policy");

    const long n_steps = detail::checked_steps(config.horizon, config.dt);
    const int n_checks = static_cast<int>(req.checkpoints.size());
    std::vector<long> check_idx(n_checks);
    for (int m = 0; m < n_checks; ++m) {
        const long idx = std::lround(req.checkpoints[m] / config.dt);
        if (idx < 0 || idx > n_steps ||
            std::abs(idx * config.dt - req.checkpoints[m]) > 1e-9) {
            throw ValidationError("checkpoints must be grid times within the horizon");
        }
        check_idx[m] = idx;
    }

    const long n_paths = config.n_paths;
    const int dim = params.dim;
    const ChainParams chain = ChainParams::from_model(params);
    const double lam[2] = {params.lambda1, params.lambda2};
    const double vol[2] = {params.k1, params.k2};
    const CostCoeffs* costs[2] = {&params.cost1, &params.cost2};
    const bool integrated = config.discount_mode == DiscountMode::integrated;

    // Hoisted per-regime step constants for the jump-free fast path.
    const double disc_step[2] = {std::exp(-lam[0] * config.dt),
                                 std::exp(-lam[1] * config.dt)};
    const double root_step[2] = {std::sqrt(vol[0] * config.dt),
                                 std::sqrt(vol[1] * config.dt)};

    // Policies whose drift is a per-regime multiple of x (the explicit
    // solution, its scalings, and the zero control) take a branch-free path;
    // numeric value-field policies go through the interpolating evaluator.
    struct PolicyEval {
        bool linear = true;
        double slope[2] = {0.0, 0.0};
        const ValueField* field = nullptr;
        double factor = 1.0;
    };
    std::vector<PolicyEval> evals(n_pol);
    for (int q = 0; q < n_pol; ++q) {
        const PolicySpec& ps = req.policies[q];
        PolicyEval& ev = evals[q];
        if (ps.kind == PolicySpec::Kind::zero) {
            continue;
        }
        if (ps.cf != nullptr) {
            ev.slope[0] = ps.factor * 2.0 * ps.cf->k1 * ps.cf->m1;
            ev.slope[1] = ps.factor * 2.0 * ps.cf->k2 * ps.cf->m2;
        } else if (ps.field != nullptr) {
            ev.linear = false;
            ev.field = ps.field;
            ev.factor = ps.factor;
        } else {
            throw ValidationError("scaled policy needs an optimal base");
        }
    }

    // Per-path sample storage, indexed [policy (x checkpoint)][path].
    std::vector<std::vector<double>> cost_s(n_pol, std::vector<double>(n_paths));
    std::vector<std::vector<double>> rate_s(n_pol, std::vector<double>(n_paths));
    auto grid_store = [&](int count) {
        return std::vector<std::vector<double>>(static_cast<std::size_t>(n_pol) * count,
                                                std::vector<double>(n_paths));
    };
    std::vector<std::vector<double>> xsq_s = grid_store(n_checks);
    std::vector<std::vector<double>> dsq_s = grid_store(n_checks);
    std::vector<std::vector<double>> mart_s =
        req.value != nullptr ? grid_store(n_checks) : std::vector<std::vector<double>>{};

    auto run_range = [&](long begin, long end) {
        std::vector<double> x(static_cast<std::size_t>(n_pol) * dim);
        std::vector<double> z(dim);
        std::vector<double> cost_acc(n_pol);

        auto running_cost = [&](int ri, double nsq) {
            const CostCoeffs& c = *costs[ri];
            double f = c.p * nsq + c.q;
            if (c.s != 0.0) f += c.s * std::sqrt(nsq);
            return f;
        };

        for (long p = begin; p < end; ++p) {
            std::mt19937_64 chain_rng = make_path_rng(config.master_seed, p, kChainStream);
            std::mt19937_64 noise_rng = make_path_rng(config.master_seed, p, kNoiseStream);
            std::normal_distribution<double> normal(0.0, 1.0);
            const JumpPath jumps = simulate_chain(chain, config.regime0, config.horizon, chain_rng);

            for (int q = 0; q < n_pol; ++q) {
                for (int i = 0; i < dim; ++i) x[q * dim + i] = config.x0[i];
                cost_acc[q] = 0.0;
            }

            double t = 0.0;
            double disc = 1.0;  // e^{-lam_reg t} (as written) or e^{-Lambda(t)}
            std::size_t jump_cursor = 0;
            int regime = config.regime0;
            int next_check = 0;
            while (next_check < n_checks && check_idx[next_check] == 0) {
                // Checkpoint at t = 0: no dynamics yet.
                for (int q = 0; q < n_pol; ++q) {
                    double nsq = 0.0;
                    for (int i = 0; i < dim; ++i) nsq += x[q * dim + i] * x[q * dim + i];
                    const std::size_t slot = static_cast<std::size_t>(q) * n_checks + next_check;
                    xsq_s[slot][p] = nsq;
                    dsq_s[slot][p] = nsq;
                    if (req.value != nullptr) {
                        mart_s[slot][p] = req.value->u(std::sqrt(nsq), regime);
                    }
                }
                ++next_check;
            }

            auto slope_of = [&](int q, int ri, double nsq) {
                if (evals[q].linear) return evals[q].slope[ri];
                if (nsq <= 0.0) return 0.0;
                const double r = std::sqrt(nsq);
                const std::vector<double>& c =
                    (ri == 0) ? evals[q].field->c1 : evals[q].field->c2;
                return evals[q].factor *
                       PolicySpec::interp_radial(c, evals[q].field->grid, r) / r;
            };

            // Per-policy step of one substep of length delta; the blow-up
            // guard stays in one place.
            auto advance_policy = [&](int q, int ri, double delta, double root) {
                double* xq = &x[static_cast<std::size_t>(q) * dim];
                double nsq = 0.0;
                for (int i = 0; i < dim; ++i) nsq += xq[i] * xq[i];
                const double slope = slope_of(q, ri, nsq);
                cost_acc[q] +=
                    disc * (running_cost(ri, nsq) + 0.5 * slope * slope * nsq) * delta;
                const double growth = 1.0 + slope * delta;
                double new_nsq = 0.0;
                for (int i = 0; i < dim; ++i) {
                    xq[i] = xq[i] * growth + root * z[i];
                    new_nsq += xq[i] * xq[i];
                }
                if (!(new_nsq <= 1e16)) {
                    throw PolicyBlowUp("state norm exceeded 1e8 under policy " +
                                       policy_name(req.policies[q]));
                }
            };

            for (long step = 1; step <= n_steps; ++step) {
                const double t_target = step * config.dt;
                const bool jump_in_step = jump_cursor < jumps.jump_times.size() &&
                                          jumps.jump_times[jump_cursor] <= t_target;
                if (!jump_in_step) {
                    // Jump-free step: one substep with hoisted constants.
                    const int ri = regime - 1;
                    for (int i = 0; i < dim; ++i) z[i] = normal(noise_rng);
                    for (int q = 0; q < n_pol; ++q) {
                        advance_policy(q, ri, config.dt, root_step[ri]);
                    }
                    disc *= disc_step[ri];
                    t = t_target;
                } else {
                    while (t < t_target) {
                        double t_next = t_target;
                        bool at_jump = false;
                        if (jump_cursor < jumps.jump_times.size() &&
                            jumps.jump_times[jump_cursor] <= t_target) {
                            t_next = jumps.jump_times[jump_cursor];
                            at_jump = true;
                        }
                        const double delta = t_next - t;
                        const int ri = regime - 1;
                        if (delta > 0.0) {
                            for (int i = 0; i < dim; ++i) z[i] = normal(noise_rng);
                            // Noise with variance rate k, matching the (k/2)
                            // laplacian of the generator.
                            const double root = std::sqrt(vol[ri] * delta);
                            for (int q = 0; q < n_pol; ++q) {
                                advance_policy(q, ri, delta, root);
                            }
                            if (integrated) disc *= std::exp(-lam[ri] * delta);
                        }
                        t = t_next;
                        if (at_jump) {
                            regime = jumps.states_after[jump_cursor];
                            ++jump_cursor;
                        }
                        if (!integrated) disc = std::exp(-lam[regime - 1] * t);
                    }
                }
                if (next_check < n_checks && check_idx[next_check] == step) {
                    for (int q = 0; q < n_pol; ++q) {
                        const double* xq = &x[static_cast<std::size_t>(q) * dim];
                        double nsq = 0.0;
                        for (int i = 0; i < dim; ++i) nsq += xq[i] * xq[i];
                        const std::size_t slot =
                            static_cast<std::size_t>(q) * n_checks + next_check;
                        xsq_s[slot][p] = nsq;
                        dsq_s[slot][p] = disc * nsq;
                        if (req.value != nullptr) {
                            mart_s[slot][p] =
                                disc * req.value->u(std::sqrt(nsq), regime) - cost_acc[q];
                        }
                    }
                    ++next_check;
                }
            }
            for (int q = 0; q < n_pol; ++q) {
                cost_s[q][p] = cost_acc[q];
                const double* xq = &x[static_cast<std::size_t>(q) * dim];
                double nsq = 0.0;
                for (int i = 0; i < dim; ++i) nsq += xq[i] * xq[i];
                const double slope = slope_of(q, regime - 1, nsq);
                rate_s[q][p] =
                    disc * (running_cost(regime - 1, nsq) + 0.5 * slope * slope * nsq);
            }
        }
    };

    int n_threads = config.n_threads > 0
                        ? config.n_threads
                        : std::max(1u, std::thread::hardware_concurrency());
    n_threads = static_cast<int>(std::min<long>(n_threads, n_paths));
    if (n_threads <= 1) {
        run_range(0, n_paths);
    } else {
        std::vector<std::thread> workers;
        std::vector<std::exception_ptr> errors(n_threads);
        const long chunk = (n_paths + n_threads - 1) / n_threads;
        for (int w = 0; w < n_threads; ++w) {
            const long begin = w * chunk;
            const long end = std::min(n_paths, begin + chunk);
            workers.emplace_back([&, w, begin, end] {
                try {
                    run_range(begin, end);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        for (auto& th : workers) th.join();
        for (const auto& err : errors) {
            if (err) std::rethrow_exception(err);
        }
    }

    std::vector<PolicyRun> out(n_pol);
    for (int q = 0; q < n_pol; ++q) {
        out[q].cost = detail::reduce_samples(cost_s[q]);
        out[q].final_discounted_rate = detail::reduce_samples(rate_s[q]);
        out[q].at.resize(n_checks);
        for (int m = 0; m < n_checks; ++m) {
            const std::size_t slot = static_cast<std::size_t>(q) * n_checks + m;
            out[q].at[m].x_norm_sq = detail::reduce_samples(xsq_s[slot]);
            out[q].at[m].discounted_sq = detail::reduce_samples(dsq_s[slot]);
            if (req.value != nullptr) {
                out[q].at[m].martingale = detail::reduce_samples(mart_s[slot]);
            }
        }
    }
    return out;
}

/// Discounted-cost estimates for several policies under common random
/// numbers, in the order given.
inline std::vector<McEstimate> estimate_costs(const std::vector<PolicySpec>& policies,
                                              const ModelParams& params,
                                              const SimConfig& config) {
    BatteryRequest req;
    req.policies = policies;
    std::vector<McEstimate> out;
    for (const PolicyRun& run : run_battery(params, config, req)) {
        out.push_back(run.cost);
    }
    return out;
}

inline McEstimate estimate_cost(const PolicySpec& policy, const ModelParams& params,
                                const SimConfig& config) {
    return estimate_costs({policy}, params, config)[0];
}

/// One full trajectory of the modulated diffusion under a policy, sampled on
/// the uniform grid. Deterministic per (master_seed, path_index).
struct Trajectory {
    std::vector<double> times;
    std::vector<int> regimes;
    std::vector<std::vector<double>> positions;
};

inline Trajectory simulate_sde(const PolicySpec& policy, const JumpPath& jumps,
                               const ModelParams& params, const SimConfig& config,
                               long path_index) {
    detail::validate_sim_config(params, config);
    if (jumps.horizon + 1e-12 < config.horizon) {
        throw ValidationError("chain path is shorter than the simulation horizon");
    }
    const long n_steps = detail::checked_steps(config.horizon, config.dt);
    const int dim = params.dim;

    std::mt19937_64 noise_rng = make_path_rng(config.master_seed, path_index, kNoiseStream);
    std::normal_distribution<double> normal(0.0, 1.0);

    Trajectory traj;
    traj.times.reserve(n_steps + 1);
    traj.positions.reserve(n_steps + 1);
    std::vector<double> x = config.x0;
    std::vector<double> drift(dim);
    traj.times.push_back(0.0);
    traj.regimes.push_back(jumps.initial_state);
    traj.positions.push_back(x);

    double t = 0.0;
    std::size_t jump_cursor = 0;
    int regime = jumps.initial_state;
    for (long step = 1; step <= n_steps; ++step) {
        const double t_target = step * config.dt;
        while (t < t_target) {
            double t_next = t_target;
            bool at_jump = false;
            if (jump_cursor < jumps.jump_times.size() &&
                jumps.jump_times[jump_cursor] <= t_target) {
                t_next = jumps.jump_times[jump_cursor];
                at_jump = true;
            }
            const double delta = t_next - t;
            if (delta > 0.0) {
                double nsq = 0.0;
                for (int i = 0; i < dim; ++i) nsq += x[i] * x[i];
                policy.drift(x, std::sqrt(nsq), regime, drift);
                const double k = (regime == 1) ? params.k1 : params.k2;
                const double root = std::sqrt(k * delta);  // noise variance rate k
                double new_nsq = 0.0;
                for (int i = 0; i < dim; ++i) {
                    x[i] += drift[i] * delta + root * normal(noise_rng);
                    new_nsq += x[i] * x[i];
                }
                if (!(new_nsq <= 1e16)) {
                    throw PolicyBlowUp("state norm exceeded 1e8 under policy " +
                                       policy_name(policy));
                }
            }
            t = t_next;
            if (at_jump) {
                regime = jumps.states_after[jump_cursor];
                ++jump_cursor;
            }
        }
        traj.times.push_back(t_target);
        traj.regimes.push_back(regime);
        traj.positions.push_back(x);
    }
    return traj;
}

/// Means of the cost-adjusted value process M(t) = D(t) u(X(t), e(t)) -
/// integral of the discounted running cost up to t. Flat (within noise)
/// under the optimal policy; drifts downward under any other one.
inline std::vector<McEstimate> martingale_test(const PolicySpec& policy, const ValueFn& value,
                                               const ModelParams& params, SimConfig config,
                                               const std::vector<double>& checkpoints) {
    if (checkpoints.empty()) throw ValidationError("martingale test needs checkpoints");
    double horizon = config.dt;
    for (double c : checkpoints) horizon = std::max(horizon, c);
    config.horizon = horizon;

    BatteryRequest req;
    req.policies = {policy};
    req.checkpoints = checkpoints;
    req.value = &value;
    const std::vector<PolicyRun> runs = run_battery(params, config, req);
    std::vector<McEstimate> out;
    for (const CheckpointStats& s : runs[0].at) out.push_back(s.martingale);
    return out;
}

struct MomentFitReport {
    std::vector<double> times;
    std::vector<double> second_moments;
    std::vector<double> std_errs;
    double c1 = 0.0;  // envelope C1 e^{C2 t} dominating every sample
    double c2 = 0.0;
    bool pass = false;
};

/// Samples E|X(t)|^2 at the given times and fits a dominating exponential
/// envelope by log-linear regression (slope floored at zero).
inline MomentFitReport moment_bound_test(const PolicySpec& policy, const ModelParams& params,
                                         SimConfig config, const std::vector<double>& times) {
    if (times.empty()) throw ValidationError("moment test needs sample times");
    for (std::size_t i = 1; i < times.size(); ++i) {
        if (!(times[i] > times[i - 1])) throw ValidationError("times must be increasing");
    }
    config.horizon = std::max(config.dt, times.back());

    BatteryRequest req;
    req.policies = {policy};
    req.checkpoints = times;
    const std::vector<PolicyRun> runs = run_battery(params, config, req);

    MomentFitReport rep;
    rep.times = times;
    for (const CheckpointStats& s : runs[0].at) {
        rep.second_moments.push_back(s.x_norm_sq.mean);
        rep.std_errs.push_back(s.x_norm_sq.std_err);
    }

    // Least squares on log m(t); only strictly positive samples contribute.
    double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
    long count = 0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (rep.second_moments[i] > 0.0) {
            const double y = std::log(rep.second_moments[i]);
            st += times[i];
            sy += y;
            stt += times[i] * times[i];
            sty += times[i] * y;
            ++count;
        }
    }
    double slope = 0.0;
    if (count >= 2) {
        const double denom = count * stt - st * st;
        if (std::abs(denom) > 0.0) slope = (count * sty - st * sy) / denom;
    }
    rep.c2 = std::max(slope, 0.0);
    rep.c1 = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        rep.c1 = std::max(rep.c1, rep.second_moments[i] * std::exp(-rep.c2 * times[i]));
    }
    rep.pass = rep.c1 > 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (rep.second_moments[i] > rep.c1 * std::exp(rep.c2 * times[i]) * (1.0 + 1e-9)) {
            rep.pass = false;
        }
    }
    return rep;
}

struct TransversalityReport {
    std::vector<double> times;
    std::vector<double> discounted_moments;  // E D(t) |X(t)|^2
    std::vector<double> std_errs;
    double final_fraction = 0.0;  // last / first
    bool decreasing_tail = false;
    bool pass = false;
};

/// Discounted second moments along the given times; the sequence must fall
/// monotonically beyond the first entry and end below 1e-3 of its start.
inline TransversalityReport transversality_test(const PolicySpec& policy,
                                                const ModelParams& params, SimConfig config,
                                                const std::vector<double>& times) {
    if (times.size() < 2) throw ValidationError("transversality test needs >= 2 times");
    for (std::size_t i = 1; i < times.size(); ++i) {
        if (!(times[i] > times[i - 1])) throw ValidationError("times must be increasing");
    }
    const double lam_min = std::min(params.lambda1, params.lambda2);
    if (!(times.back() >= 10.0 / lam_min)) {
        throw ValidationError("last time must reach 10 / min(lambda)");
    }
    config.horizon = std::max(config.dt, times.back());

    BatteryRequest req;
    req.policies = {policy};
    req.checkpoints = times;
    const std::vector<PolicyRun> runs = run_battery(params, config, req);

    TransversalityReport rep;
    rep.times = times;
    for (const CheckpointStats& s : runs[0].at) {
        rep.discounted_moments.push_back(s.discounted_sq.mean);
        rep.std_errs.push_back(s.discounted_sq.std_err);
    }
    rep.decreasing_tail = true;
    for (std::size_t i = 2; i < rep.discounted_moments.size(); ++i) {
        if (rep.discounted_moments[i] > rep.discounted_moments[i - 1] * (1.0 + 1e-9)) {
            rep.decreasing_tail = false;
        }
    }
    const double first = rep.discounted_moments.front();
    rep.final_fraction = first > 0.0
                             ? rep.discounted_moments.back() / first
                             : std::numeric_limits<double>::infinity();
    rep.pass = rep.decreasing_tail && rep.final_fraction <= 1e-3;
    return rep;
}

struct ChainStats {
    double hold_mean1 = 0.0, hold_se1 = 0.0;
    double hold_mean2 = 0.0, hold_se2 = 0.0;
    double occupation1 = 0.0, occupation1_se = 0.0;
    long n_sojourns = 0;
};

/// Holding-time means per regime and long-run occupation of regime 1 over a
/// fixed number of sojourns; the occupation standard error comes from batch
/// means over 100 consecutive blocks.
inline ChainStats chain_statistics(const ChainParams& chain, int regime0, long n_sojourns,
                                   std::uint64_t seed) {
    if (n_sojourns < 200) throw ValidationError("need at least 200 sojourns");
    std::mt19937_64 rng = make_path_rng(seed, 0, kChainStream);
    std::vector<double> hold1, hold2;
    hold1.reserve(n_sojourns / 2 + 1);
    hold2.reserve(n_sojourns / 2 + 1);

    const long n_batches = 100;
    const long per_batch = n_sojourns / n_batches;
    std::vector<double> batch_occ;
    batch_occ.reserve(n_batches);
    double batch_t1 = 0.0, batch_total = 0.0;

    int state = regime0;
    for (long i = 0; i < n_sojourns; ++i) {
        const double rate = (state == 1) ? chain.a1 : chain.a2;
        std::exponential_distribution<double> hold(rate);
        const double h = hold(rng);
        if (state == 1) {
            hold1.push_back(h);
            batch_t1 += h;
        } else {
            hold2.push_back(h);
        }
        batch_total += h;
        if ((i + 1) % per_batch == 0 && static_cast<long>(batch_occ.size()) < n_batches) {
            batch_occ.push_back(batch_t1 / batch_total);
            batch_t1 = 0.0;
            batch_total = 0.0;
        }
        state = 3 - state;
    }

    ChainStats out;
    out.n_sojourns = n_sojourns;
    const McEstimate h1 = detail::reduce_samples(hold1);
    const McEstimate h2 = detail::reduce_samples(hold2);
    out.hold_mean1 = h1.mean;
    out.hold_se1 = h1.std_err;
    out.hold_mean2 = h2.mean;
    out.hold_se2 = h2.std_err;
    const McEstimate occ = detail::reduce_samples(batch_occ);
    out.occupation1 = occ.mean;
    out.occupation1_se = occ.std_err;
    return out;
}

}  // namespace rshjb
