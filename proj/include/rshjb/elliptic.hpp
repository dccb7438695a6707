#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rshjb/errors.hpp"
#include "rshjb/model.hpp"
#include "rshjb/subsuper.hpp"
#include "rshjb/transforms.hpp"
#include "rshjb/tridiagonal.hpp"

namespace rshjb {

/// Uniform radial mesh on [0, R]: nodes r_j = j h, j = 0..n, h = R/n.
struct RadialGrid {
    double radius = 0.0;
    int n = 0;
    double h = 0.0;

    double node(int j) const { return j * h; }

    static RadialGrid make(double radius, int n) {
        if (!(radius > 0.0) || n < 2) {
            throw ValidationError("grid needs radius > 0 and n >= 2");
        }
        RadialGrid g;
        g.n = n;
        g.h = radius / n;
        g.radius = g.h * n;
        return g;
    }

    /// Builds the grid from a target spacing; R must be a multiple of h.
    static RadialGrid with_spacing(double radius, double h) {
        if (!(h > 0.0)) throw ValidationError("grid spacing must be > 0");
        const long long n = std::llround(radius / h);
        if (n < 2 || std::abs(n * h - radius) > 1e-9 * std::max(1.0, radius)) {
            throw ValidationError("radius must be an integer multiple of the spacing");
        }
        return make(radius, static_cast<int>(n));
    }
};

/// Sampled pair of transformed fields on a grid, boundary nodes included.
struct FieldPair {
    std::vector<double> u;
    std::vector<double> v;
    RadialGrid grid;
};

struct SolveReport {
    int iterations = 0;
    double final_update_norm = 0.0;
    double residual_inf = 0.0;
    bool bracket_ok = false;
    bool monotone_ok = false;
    bool converged = false;
};

enum class SweepStart { from_sub, from_super };

struct SolveOptions {
    double tol = 1e-10;
    int max_iters = 20000;
    SweepStart direction = SweepStart::from_sub;
};

/// Value functions and feedback data recovered from a converged field pair.
/// The slope certificates are read on the inner half of the ball, where the
/// field approximates the entire-space solution; the imposed boundary data
/// creates a layer near r = R that belongs to the truncation, not to the
/// solution being certified.
struct ValueField {
    RadialGrid grid;
    std::vector<double> z1, z2;  // value functions, nonnegative
    std::vector<double> c1, c2;  // radial feedback component, -dz/dr
    double growth_k1 = 0.0, growth_k2 = 0.0;   // z_i <= K_i (1 + r^2)
    double slope1 = 0.0, slope2 = 0.0;         // max |dz/dr| / (1 + r), r <= R/2
};

/// Second-order discrete radial laplacian u'' + (N-1)/r u' at interior
/// node j; the symmetry limit 2N (u_1 - u_0)/h^2 is used at the origin.
inline double radial_laplacian(std::span<const double> field, const RadialGrid& g, int dim,
                               int j) {
    if (j < 0 || j >= g.n) {
        throw DomainError("laplacian index must be interior");
    }
    const double h2 = g.h * g.h;
    if (j == 0) {
        return 2.0 * dim * (field[1] - field[0]) / h2;
    }
    const double second = (field[j + 1] - 2.0 * field[j] + field[j - 1]) / h2;
    const double first = (field[j + 1] - field[j - 1]) / (2.0 * g.h);
    return second + (dim - 1) * first / g.node(j);
}

namespace detail {

struct SemilinearRhs {
    double inv_k_sq;      // 2 / k_i^2
    double lam_a_k;       // (lambda_i + a_i) k_i
    double cross_a_k;     // a_i k_j
    std::vector<double> f;  // running cost at the nodes

    // F(r_j, w, other) = w * inv_k_sq * (f_j + lam_a_k ln w - cross_a_k ln other)
    double operator()(int j, double w, double log_w, double log_other) const {
        return w * inv_k_sq * (f[j] + lam_a_k * log_w - cross_a_k * log_other);
    }
};

inline SemilinearRhs make_rhs(const ModelParams& p, const RadialGrid& g, int regime) {
    SemilinearRhs r;
    const double k = (regime == 1) ? p.k1 : p.k2;
    const double kj = (regime == 1) ? p.k2 : p.k1;
    const double a = (regime == 1) ? p.a1 : p.a2;
    const double lam = (regime == 1) ? p.lambda1 : p.lambda2;
    const CostCoeffs& cost = (regime == 1) ? p.cost1 : p.cost2;
    r.inv_k_sq = 2.0 / (k * k);
    r.lam_a_k = (lam + a) * k;
    r.cross_a_k = a * kj;
    r.f.resize(g.n + 1);
    for (int j = 0; j <= g.n; ++j) r.f[j] = eval_cost(cost, g.node(j));
    return r;
}

// Upper bound of dF/dw over the bracket [sub, 1] x [sub, 1]: the log of the
// own field is at most 0 and the log of the other field at least its
// bracket exponent, so the bound is attained at w = 1, other = sub.
inline double shift_bound(const SemilinearRhs& r, const RadialGrid& g, double b_other,
                          double d_other) {
    double worst = 0.0;
    for (int j = 0; j < g.n; ++j) {
        const double rr = g.node(j);
        const double lo_other = b_other * rr * rr + d_other;
        worst = std::max(worst, r.inv_k_sq * (r.f[j] - r.cross_a_k * lo_other));
    }
    return worst + r.inv_k_sq * r.lam_a_k;
}

// One linearized sweep: solve (K - lap_h) w_new = K w_old - F(w_old, other)
// with Dirichlet data at j = n already stored in `field`.
inline std::vector<double> sweep(std::vector<double>& field, const std::vector<double>& other,
                                 const SemilinearRhs& rhs_fn, const RadialGrid& g, int dim,
                                 double shift) {
    const int n = g.n;
    const double h2 = g.h * g.h;
    std::vector<double> lower(n), diag(n), upper(n), rhs(n);

    for (int j = 0; j < n; ++j) {
        const double w = field[j];
        const double log_w = std::log(w);
        const double log_other = std::log(other[j]);
        rhs[j] = shift * w - rhs_fn(j, w, log_w, log_other);
    }
    diag[0] = shift + 2.0 * dim / h2;
    upper[0] = -2.0 * dim / h2;
    lower[0] = 0.0;
    for (int j = 1; j < n; ++j) {
        const double ratio = (dim - 1) / (2.0 * g.h * g.node(j));
        lower[j] = -(1.0 / h2 - ratio);
        diag[j] = shift + 2.0 / h2;
        upper[j] = -(1.0 / h2 + ratio);
    }
    // Fold the boundary value into the last interior row.
    rhs[n - 1] -= upper[n - 1] * field[n];
    upper[n - 1] = 0.0;

    std::vector<double> out = solve_tridiagonal(lower, diag, upper, rhs);
    out.push_back(field[n]);
    return out;
}

}  // namespace detail

/// Max-norm defect of the semilinear system over the interior nodes.
inline double discrete_residual(const FieldPair& fields, const ModelParams& p) {
    const RadialGrid& g = fields.grid;
    const detail::SemilinearRhs f1 = detail::make_rhs(p, g, 1);
    const detail::SemilinearRhs f2 = detail::make_rhs(p, g, 2);
    double worst = 0.0;
    for (int j = 0; j < g.n; ++j) {
        const double lu = std::log(fields.u[j]);
        const double lv = std::log(fields.v[j]);
        const double r1 = radial_laplacian(fields.u, g, p.dim, j) - f1(j, fields.u[j], lu, lv);
        const double r2 = radial_laplacian(fields.v, g, p.dim, j) - f2(j, fields.v[j], lv, lu);
        worst = std::max({worst, std::abs(r1), std::abs(r2)});
    }
    return worst;
}

/// Solves the Dirichlet problem on the ball of the given grid by the shifted
/// monotone sweep, starting from the lower bracket or from the constant 1.
/// Boundary data comes from the lower bracket in both cases. Iterates must
/// stay inside [sub, 1] (1e-12 rounding guard) and move one way; violations
/// stop the run with the corresponding flag cleared instead of converging.
inline std::pair<FieldPair, SolveReport> solve_ball(const ModelParams& p,
                                                    const SubCoeffs& coeffs,
                                                    const RadialGrid& grid,
                                                    const SolveOptions& opts = {}) {
    FieldPair fields;
    fields.grid = grid;
    SolveReport report;

    const int n = grid.n;
    if (coeffs.degenerate) {
        // Bracket collapsed to {1}: the solution is the constant field.
        fields.u.assign(n + 1, 1.0);
        fields.v.assign(n + 1, 1.0);
        report.bracket_ok = true;
        report.monotone_ok = true;
        report.converged = true;
        report.residual_inf = discrete_residual(fields, p);
        return {std::move(fields), report};
    }

    std::vector<double> sub_u(n + 1), sub_v(n + 1);
    for (int j = 0; j <= n; ++j) {
        sub_u[j] = eval_sub(coeffs, grid.node(j), 1);
        sub_v[j] = eval_sub(coeffs, grid.node(j), 2);
    }

    if (opts.direction == SweepStart::from_sub) {
        fields.u = sub_u;
        fields.v = sub_v;
    } else {
        fields.u.assign(n + 1, 1.0);
        fields.v.assign(n + 1, 1.0);
        fields.u[n] = sub_u[n];
        fields.v[n] = sub_v[n];
    }

    const detail::SemilinearRhs rhs_u = detail::make_rhs(p, grid, 1);
    const detail::SemilinearRhs rhs_v = detail::make_rhs(p, grid, 2);
    const double shift_u = detail::shift_bound(rhs_u, grid, coeffs.b2, coeffs.d2);
    const double shift_v = detail::shift_bound(rhs_v, grid, coeffs.b1, coeffs.d1);

    const double guard = 1e-12;
    const bool increasing = opts.direction == SweepStart::from_sub;
    report.bracket_ok = true;
    report.monotone_ok = true;

    auto check_step = [&](const std::vector<double>& next, const std::vector<double>& prev,
                          const std::vector<double>& sub) {
        double update = 0.0;
        for (int j = 0; j <= n; ++j) {
            update = std::max(update, std::abs(next[j] - prev[j]));
            if (!(next[j] >= sub[j] - guard) || !(next[j] <= 1.0 + guard)) {
                report.bracket_ok = false;
            }
            const double step = next[j] - prev[j];
            if (increasing ? step < -guard : step > guard) {
                report.monotone_ok = false;
            }
        }
        return update;
    };

    for (int it = 0; it < opts.max_iters; ++it) {
        std::vector<double> u_new = detail::sweep(fields.u, fields.v, rhs_u, grid, p.dim, shift_u);
        const double du = check_step(u_new, fields.u, sub_u);
        fields.u = std::move(u_new);

        std::vector<double> v_new = detail::sweep(fields.v, fields.u, rhs_v, grid, p.dim, shift_v);
        const double dv = check_step(v_new, fields.v, sub_v);
        fields.v = std::move(v_new);

        report.iterations = it + 1;
        report.final_update_norm = std::max(du, dv);
        if (!report.bracket_ok) break;
        if (report.final_update_norm <= opts.tol) break;
    }

    // Clamp rounding-level overshoot only; anything larger was flagged above.
    auto clamp_guard = [&](double w, double sub) {
        if (w > 1.0 && w <= 1.0 + guard) return 1.0;
        if (w < sub && w >= sub - guard) return sub;
        return w;
    };
    for (int j = 0; j <= n; ++j) {
        fields.u[j] = clamp_guard(fields.u[j], sub_u[j]);
        fields.v[j] = clamp_guard(fields.v[j], sub_v[j]);
    }

    report.residual_inf = discrete_residual(fields, p);
    report.converged = report.bracket_ok && report.monotone_ok &&
                       report.final_update_norm <= opts.tol;
    return {std::move(fields), report};
}

struct ExpansionResult {
    std::vector<FieldPair> fields;
    std::vector<SolveReport> reports;
    /// gaps[i]: max-norm difference between solves i and i+1 on the inner
    /// half of the smaller ball.
    std::vector<double> gaps;
};

/// Solves on a nondecreasing list of radii with a common spacing and reports
/// how much consecutive solutions move on the inner half of the smaller
/// ball; the influence of the artificial boundary must fade as R grows.
inline ExpansionResult expand_domain(const ModelParams& p, const SubCoeffs& coeffs,
                                     std::span<const double> radii, double h,
                                     const SolveOptions& opts = {}) {
    if (radii.size() < 2) {
        throw ValidationError("domain expansion needs at least two radii");
    }
    ExpansionResult out;
    for (std::size_t i = 0; i < radii.size(); ++i) {
        if (i > 0 && radii[i] < radii[i - 1]) {
            throw ValidationError("expansion radii must be nondecreasing");
        }
        const RadialGrid grid = RadialGrid::with_spacing(radii[i], h);
        auto [fields, report] = solve_ball(p, coeffs, grid, opts);
        if (!report.converged) {
            throw SolveError("ball solve failed at radius " + std::to_string(radii[i]));
        }
        out.fields.push_back(std::move(fields));
        out.reports.push_back(report);
    }
    for (std::size_t i = 0; i + 1 < radii.size(); ++i) {
        const FieldPair& small = out.fields[i];
        const FieldPair& large = out.fields[i + 1];
        const int window = small.grid.n / 2;  // same spacing: nodes align
        double gap = 0.0;
        for (int j = 0; j <= window; ++j) {
            gap = std::max(gap, std::abs(small.u[j] - large.u[j]));
            gap = std::max(gap, std::abs(small.v[j] - large.v[j]));
        }
        out.gaps.push_back(gap);
    }
    return out;
}

/// Maps converged fields back to the value functions z_i = -k_i ln(.),
/// takes radial derivatives by central differences (one-sided at the ends),
/// and attaches the growth certificates implied by the bracket exponents.
inline ValueField extract_values(const FieldPair& fields, const ModelParams& p,
                                 const SubCoeffs& coeffs) {
    const RadialGrid& g = fields.grid;
    const int n = g.n;
    ValueField out;
    out.grid = g;
    out.z1.resize(n + 1);
    out.z2.resize(n + 1);
    out.c1.resize(n + 1);
    out.c2.resize(n + 1);

    for (int j = 0; j <= n; ++j) {
        if (!(fields.u[j] > 0.0) || !(fields.v[j] > 0.0)) {
            throw DomainError("field values must be positive to recover z");
        }
        out.z1[j] = z_from_u(std::min(fields.u[j], 1.0), p.k1);
        out.z2[j] = z_from_u(std::min(fields.v[j], 1.0), p.k2);
    }

    auto derivative = [&](const std::vector<double>& z, int j) {
        if (j == 0) return (z[1] - z[0]) / g.h;
        if (j == n) return (z[n] - z[n - 1]) / g.h;
        return (z[j + 1] - z[j - 1]) / (2.0 * g.h);
    };

    out.growth_k1 = std::max(-p.k1 * coeffs.b1, -p.k1 * coeffs.d1);
    out.growth_k2 = std::max(-p.k2 * coeffs.b2, -p.k2 * coeffs.d2);
    for (int j = 0; j <= n; ++j) {
        const double r = g.node(j);
        const double dz1 = derivative(out.z1, j);
        const double dz2 = derivative(out.z2, j);
        out.c1[j] = -dz1;
        out.c2[j] = -dz2;
        if (2.0 * r <= g.radius) {
            out.slope1 = std::max(out.slope1, std::abs(dz1) / (1.0 + r));
            out.slope2 = std::max(out.slope2, std::abs(dz2) / (1.0 + r));
        }

        const double cert = 1.0 + r * r;
        if (out.z1[j] > out.growth_k1 * cert + 1e-9 ||
            out.z2[j] > out.growth_k2 * cert + 1e-9) {
            throw DomainError("quadratic growth certificate violated at r = " +
                              std::to_string(r));
        }
    }
    return out;
}

struct ConvexityReport {
    bool pass = false;
    double min_second_difference = 0.0;  // min over nodes of (z_{j+1}-2z_j+z_{j-1})/h^2
    double min_slope = 0.0;              // min over interior nodes of dz/dr
};

/// Radial convexity probe: divided second differences and radial slopes of
/// both value functions must stay above -1e-8.
inline ConvexityReport convexity_probe(const ValueField& values) {
    const RadialGrid& g = values.grid;
    ConvexityReport rep;
    rep.min_second_difference = std::numeric_limits<double>::infinity();
    rep.min_slope = std::numeric_limits<double>::infinity();
    const double h2 = g.h * g.h;
    for (const std::vector<double>* z : {&values.z1, &values.z2}) {
        for (int j = 1; j < g.n; ++j) {
            const double second = ((*z)[j + 1] - 2.0 * (*z)[j] + (*z)[j - 1]) / h2;
            const double slope = ((*z)[j + 1] - (*z)[j - 1]) / (2.0 * g.h);
            rep.min_second_difference = std::min(rep.min_second_difference, second);
            rep.min_slope = std::min(rep.min_slope, slope);
        }
    }
    rep.pass = rep.min_second_difference >= -1e-8 && rep.min_slope >= -1e-8;
    return rep;
}

}  // namespace rshjb
