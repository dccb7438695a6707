#pragma once

#include <array>
#include <cmath>
#include <span>
#include <string>

#include "rshjb/errors.hpp"
#include "rshjb/model.hpp"

namespace rshjb {

/// Exponents of the lower-bracket ansatz e^{B_i |x|^2 + D_i}. All four are
/// nonpositive, strictly negative when both envelope constants are positive.
/// `degenerate` marks the collapsed case M1 = M2 = 0 where the only
/// admissible choice is B = D = 0 and the bracket shrinks to {1}.
struct SubCoeffs {
    double b1 = 0.0, b2 = 0.0;
    double d1 = 0.0, d2 = 0.0;
    bool degenerate = false;
};

struct InequalityReport {
    bool pass = false;
    double worst_margin = 0.0;
    double worst_r = 0.0;
};

namespace detail {

// Envelope constants at or below the synthetic floor count as exactly zero:
// the floor only exists to keep the envelope formally positive for f == 0.
inline bool effectively_zero(double m) { return m <= kGrowthFloor; }

}  // namespace detail

/// Residual of the quadratic-coefficient system
///   -4 B_i^2 + 2 M_i / k_i^2 + 2 (lambda_i + a_i) B_i / k_i
///            - 2 a_i k_j B_j / k_i^2 = 0,   i = 1, 2.
inline std::array<double, 2> quad_system_residual(const ModelParams& p, const GrowthBound& m,
                                                  double b1, double b2) {
    const double g1 = -4.0 * b1 * b1 + 2.0 * m.m1 / (p.k1 * p.k1) +
                      2.0 * (p.lambda1 + p.a1) * b1 / p.k1 -
                      2.0 * p.a1 * p.k2 * b2 / (p.k1 * p.k1);
    const double g2 = -4.0 * b2 * b2 + 2.0 * m.m2 / (p.k2 * p.k2) +
                      2.0 * (p.lambda2 + p.a2) * b2 / p.k2 -
                      2.0 * p.a2 * p.k1 * b1 / (p.k2 * p.k2);
    return {g1, g2};
}

/// Residual of the constant-coefficient system
///   -2 B_i N + 2 M_i / k_i^2 + 2 (lambda_i + a_i) D_i / k_i
///            - 2 a_i k_j D_j / k_i^2 = 0,   i = 1, 2.
inline std::array<double, 2> const_system_residual(const ModelParams& p, const GrowthBound& m,
                                                   const SubCoeffs& c) {
    const double n = static_cast<double>(p.dim);
    const double g1 = -2.0 * c.b1 * n + 2.0 * m.m1 / (p.k1 * p.k1) +
                      2.0 * (p.lambda1 + p.a1) * c.d1 / p.k1 -
                      2.0 * p.a1 * p.k2 * c.d2 / (p.k1 * p.k1);
    const double g2 = -2.0 * c.b2 * n + 2.0 * m.m2 / (p.k2 * p.k2) +
                      2.0 * (p.lambda2 + p.a2) * c.d2 / p.k2 -
                      2.0 * p.a2 * p.k1 * c.d1 / (p.k2 * p.k2);
    return {g1, g2};
}

namespace detail {

// Nonpositive root of -4 x^2 + c x + d = 0 with c > 0, d >= 0.
inline double negative_quadratic_root(double c, double d) {
    return (c - std::sqrt(c * c + 16.0 * d)) / 8.0;
}

// Given b2 <= 0, the first equation is a quadratic in b1 with a unique
// nonpositive root (its constant term is >= 0 there).
inline double b1_given_b2(const ModelParams& p, const GrowthBound& m, double b2) {
    const double c = 2.0 * (p.lambda1 + p.a1) / p.k1;
    const double d = 2.0 * m.m1 / (p.k1 * p.k1) - 2.0 * p.a1 * p.k2 * b2 / (p.k1 * p.k1);
    return negative_quadratic_root(c, d);
}

// Fallback root finder on the closed negative quadrant: eliminate b1 in
// closed form, then bisect the remaining scalar equation in b2.
inline std::pair<double, double> bisect_quadrant(const ModelParams& p, const GrowthBound& m) {
    auto h = [&](double b2) {
        const double b1 = b1_given_b2(p, m, b2);
        return quad_system_residual(p, m, b1, b2)[1];
    };
    // h(0) >= 0; expand left until the sign flips (h ~ -4 b2^2 eventually).
    double lo = -1.0;
    for (int i = 0; i < 80 && !(h(lo) < 0.0); ++i) lo *= 2.0;
    if (!(h(lo) < 0.0)) {
        throw NoConvergence("no sign change found for the quadratic-coefficient system");
    }
    double hi = 0.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (h(mid) < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    const double b2 = 0.5 * (lo + hi);
    return {b1_given_b2(p, m, b2), b2};
}

}  // namespace detail

/// Solves the quadratic-coefficient system for the unique nonpositive pair
/// (B1, B2). Damped Newton from (-sqrt(M1)/k1, -sqrt(M2)/k2); falls back to
/// closed-form elimination plus bisection if Newton leaves the quadrant.
inline std::pair<double, double> solve_B(const ModelParams& p, const GrowthBound& m,
                                         int max_iters = 200) {
    if (m.m1 < 0.0 || m.m2 < 0.0) {
        throw ValidationError("growth constants must be >= 0");
    }
    if (detail::effectively_zero(m.m1) && detail::effectively_zero(m.m2)) {
        return {0.0, 0.0};
    }

    const double scale = 1.0 + std::max(2.0 * m.m1 / (p.k1 * p.k1), 2.0 * m.m2 / (p.k2 * p.k2));
    const double target = 5e-15 * scale;

    double b1 = -std::sqrt(m.m1) / p.k1;
    double b2 = -std::sqrt(m.m2) / p.k2;
    auto norm = [](const std::array<double, 2>& g) {
        return std::max(std::abs(g[0]), std::abs(g[1]));
    };

    std::array<double, 2> g = quad_system_residual(p, m, b1, b2);
    bool newton_ok = false;
    for (int it = 0; it < max_iters; ++it) {
        if (norm(g) <= target) {
            newton_ok = true;
            break;
        }
        const double j11 = -8.0 * b1 + 2.0 * (p.lambda1 + p.a1) / p.k1;
        const double j12 = -2.0 * p.a1 * p.k2 / (p.k1 * p.k1);
        const double j21 = -2.0 * p.a2 * p.k1 / (p.k2 * p.k2);
        const double j22 = -8.0 * b2 + 2.0 * (p.lambda2 + p.a2) / p.k2;
        const double det = j11 * j22 - j12 * j21;
        if (!(std::abs(det) > 1e-300)) break;
        const double s1 = -(j22 * g[0] - j12 * g[1]) / det;
        const double s2 = -(-j21 * g[0] + j11 * g[1]) / det;

        double alpha = 1.0;
        bool accepted = false;
        for (int back = 0; back < 40; ++back) {
            const double t1 = b1 + alpha * s1;
            const double t2 = b2 + alpha * s2;
            const auto gt = quad_system_residual(p, m, t1, t2);
            if (norm(gt) < norm(g)) {
                b1 = t1;
                b2 = t2;
                g = gt;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) break;
    }
    if (!newton_ok || b1 > 1e-12 || b2 > 1e-12) {
        auto [f1, f2] = detail::bisect_quadrant(p, m);
        b1 = f1;
        b2 = f2;
        g = quad_system_residual(p, m, b1, b2);
        if (norm(g) > 1e-10 * scale) {
            throw NoConvergence("quadratic-coefficient solve stalled, residual " +
                                std::to_string(norm(g)));
        }
    }
    if (b1 > 1e-12 || b2 > 1e-12) {
        throw PositiveRoot("quadratic-coefficient root left the nonpositive quadrant");
    }
    return {std::min(b1, 0.0), std::min(b2, 0.0)};
}

/// Solves the constant-coefficient system for (D1, D2) by direct inversion.
/// The determinant equals (4 l1 l2 + 4 l1 a2 + 4 l2 a1)/(k1 k2) > 0 for
/// valid parameters; a non-positive value signals bad inputs upstream.
inline std::pair<double, double> solve_D(const ModelParams& p, const GrowthBound& m,
                                         double b1, double b2) {
    const double n = static_cast<double>(p.dim);
    const double a11 = 2.0 * (p.lambda1 + p.a1) / p.k1;
    const double a12 = -2.0 * p.a1 * p.k2 / (p.k1 * p.k1);
    const double a21 = -2.0 * p.a2 * p.k1 / (p.k2 * p.k2);
    const double a22 = 2.0 * (p.lambda2 + p.a2) / p.k2;
    const double rhs1 = 2.0 * b1 * n - 2.0 * m.m1 / (p.k1 * p.k1);
    const double rhs2 = 2.0 * b2 * n - 2.0 * m.m2 / (p.k2 * p.k2);

    const double det = a11 * a22 - a12 * a21;
    if (!(det > 0.0)) {
        throw SingularMatrix("constant-coefficient matrix is not positive definite");
    }
    const double d1 = (rhs1 * a22 - a12 * rhs2) / det;
    const double d2 = (a11 * rhs2 - rhs1 * a21) / det;
    return {d1, d2};
}

/// Full coefficient build: quadratic exponents, then constant terms.
inline SubCoeffs solve_coeffs(const ModelParams& p, const GrowthBound& m, int max_iters = 200) {
    SubCoeffs c;
    if (detail::effectively_zero(m.m1) && detail::effectively_zero(m.m2)) {
        c.degenerate = true;
        return c;
    }
    std::tie(c.b1, c.b2) = solve_B(p, m, max_iters);
    std::tie(c.d1, c.d2) = solve_D(p, m, c.b1, c.b2);
    return c;
}

/// Lower bracket value e^{B_i r^2 + D_i} at radius r.
inline double eval_sub(const SubCoeffs& c, double r, int regime) {
    if (regime != 1 && regime != 2) {
        throw DomainError("regime must be 1 or 2");
    }
    const double b = (regime == 1) ? c.b1 : c.b2;
    const double d = (regime == 1) ? c.d1 : c.d2;
    return std::exp(b * r * r + d);
}

/// The two-sided bracket: exponential lower evaluators and the constant
/// upper field 1, ordered 0 < lower <= upper everywhere.
struct BracketPair {
    SubCoeffs coeffs;
    static constexpr double upper = 1.0;
    double lower(double r, int regime) const { return eval_sub(coeffs, r, regime); }
};

/// Checks the bracketing differential inequalities at the sampled radii,
/// using the exact laplacian of the ansatz, (4 B^2 r^2 + 2 B N) e^{B r^2 + D},
/// and the quadratic envelope in place of f. The upper bracket (1, 1) reduces
/// to f_i >= 0. Margins are defects per unit of (1 + r^2), so the slack is
/// radius-uniform; pass means every margin stays below 1e-9.
inline InequalityReport check_inequalities(const SubCoeffs& c, const ModelParams& p,
                                           const GrowthBound& m,
                                           std::span<const double> radii) {
    if (radii.empty()) {
        throw DomainError("sample radii must be nonempty");
    }
    const double n = static_cast<double>(p.dim);
    InequalityReport rep;
    rep.pass = true;
    rep.worst_margin = -std::numeric_limits<double>::infinity();

    auto note = [&](double margin, double r) {
        margin /= 1.0 + r * r;
        if (margin > rep.worst_margin) {
            rep.worst_margin = margin;
            rep.worst_r = r;
        }
        if (margin > 1e-9) rep.pass = false;
    };

    for (double r : radii) {
        const double r2 = r * r;
        const double e1 = c.b1 * r2 + c.d1;
        const double e2 = c.b2 * r2 + c.d2;

        // Lower bracket, both regimes (divided through by e^{B r^2 + D} > 0).
        const double low1 = -(4.0 * c.b1 * c.b1 * r2 + 2.0 * c.b1 * n) +
                            (2.0 / (p.k1 * p.k1)) *
                                (m.m1 * (r2 + 1.0) + (p.lambda1 + p.a1) * p.k1 * e1) -
                            2.0 * p.a1 * p.k2 * e2 / (p.k1 * p.k1);
        const double low2 = -(4.0 * c.b2 * c.b2 * r2 + 2.0 * c.b2 * n) +
                            (2.0 / (p.k2 * p.k2)) *
                                (m.m2 * (r2 + 1.0) + (p.lambda2 + p.a2) * p.k2 * e2) -
                            2.0 * p.a2 * p.k1 * e1 / (p.k2 * p.k2);
        note(low1, r);
        note(low2, r);

        // Upper bracket at (1, 1), with the raw costs.
        note(-(2.0 / (p.k1 * p.k1)) * eval_cost(p.cost1, r), r);
        note(-(2.0 / (p.k2 * p.k2)) * eval_cost(p.cost2, r), r);
    }
    return rep;
}

}  // namespace rshjb
