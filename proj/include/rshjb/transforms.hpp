#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "rshjb/errors.hpp"
#include "rshjb/model.hpp"

namespace rshjb {

/// Pointwise data of a value function in one regime: |x|, the value, the
/// squared gradient norm and the laplacian at that point.
struct PointState {
    double x_norm = 0.0;
    double value = 0.0;
    double grad_norm_sq = 0.0;
    double laplacian = 0.0;
    int regime = 1;
};

struct ResidualPair {
    double r1 = 0.0;
    double r2 = 0.0;
};

/// Rounding guard: transformed-field samples in (1, 1 + 1e-12] clamp to 1.
inline constexpr double kUnitOvershoot = 1e-12;

/// z = -k ln u, the inverse of the exponential change of variables.
inline double z_from_u(double u_value, double k) {
    if (!(u_value > 0.0) || u_value > 1.0 + kUnitOvershoot) {
        throw DomainError("u value must lie in (0, 1]");
    }
    if (u_value > 1.0) u_value = 1.0;
    return -k * std::log(u_value);
}

/// u = e^{-z/k}; round-trips with z_from_u.
inline double u_from_z(double z_value, double k) {
    if (!(z_value >= 0.0)) {
        throw DomainError("z value must be >= 0");
    }
    return std::exp(-z_value / k);
}

/// LHS - RHS of the coupled system in the original variables:
///   -(k_i/2) dz_i + |grad z_i|^2/2 - f_i + (lambda_i + a_i) z_i - a_i z_j.
inline ResidualPair residual_original(const PointState& s1, const PointState& s2,
                                      const ModelParams& p, double f1, double f2) {
    ResidualPair r;
    r.r1 = -0.5 * p.k1 * s1.laplacian + 0.5 * s1.grad_norm_sq - f1 +
           (p.lambda1 + p.a1) * s1.value - p.a1 * s2.value;
    r.r2 = -0.5 * p.k2 * s2.laplacian + 0.5 * s2.grad_norm_sq - f2 +
           (p.lambda2 + p.a2) * s2.value - p.a2 * s1.value;
    return r;
}

/// LHS - RHS of the semilinear form:
///   du - u (2/k1^2)(f1 + (lambda1 + a1) k1 ln u - a1 k2 ln v), and symmetric.
inline ResidualPair residual_transformed(double u, double v, double lap_u, double lap_v,
                                         const ModelParams& p, double f1, double f2) {
    if (!(u > 0.0) || !(v > 0.0)) {
        throw DomainError("transformed fields must be positive");
    }
    const double lu = std::log(u);
    const double lv = std::log(v);
    ResidualPair r;
    r.r1 = lap_u - u * (2.0 / (p.k1 * p.k1)) *
                       (f1 + (p.lambda1 + p.a1) * p.k1 * lu - p.a1 * p.k2 * lv);
    r.r2 = lap_v - v * (2.0 / (p.k2 * p.k2)) *
                       (f2 + (p.lambda2 + p.a2) * p.k2 * lv - p.a2 * p.k1 * lu);
    return r;
}

/// Confirms that the two residual forms agree at a mapped point: the
/// transformed residual, rescaled by k_i^2 / (2 u), must reproduce the
/// original one to 1e-10. In particular one vanishes iff the other does.
inline bool equivalence_check(const PointState& s1, const PointState& s2,
                              const ModelParams& p, double f1, double f2) {
    const ResidualPair orig = residual_original(s1, s2, p, f1, f2);

    // Map (z, |grad z|^2, dz) to the exponential variables by the chain rule:
    // u = e^{-z/k},  du = u (-dz/k + |grad z|^2 / k^2).
    const double u = std::exp(-s1.value / p.k1);
    const double v = std::exp(-s2.value / p.k2);
    const double lap_u = u * (-s1.laplacian / p.k1 + s1.grad_norm_sq / (p.k1 * p.k1));
    const double lap_v = v * (-s2.laplacian / p.k2 + s2.grad_norm_sq / (p.k2 * p.k2));
    const ResidualPair trans = residual_transformed(u, v, lap_u, lap_v, p, f1, f2);

    const double back1 = trans.r1 * (p.k1 * p.k1) / (2.0 * u);
    const double back2 = trans.r2 * (p.k2 * p.k2) / (2.0 * v);
    const double tol1 = 1e-10 * std::max(1.0, std::abs(orig.r1));
    const double tol2 = 1e-10 * std::max(1.0, std::abs(orig.r2));
    return std::abs(back1 - orig.r1) <= tol1 && std::abs(back2 - orig.r2) <= tol2;
}

/// Value, gradient and laplacian of a test function at a point, one regime.
struct RegimePoint {
    double value = 0.0;
    std::vector<double> gradient;
    double laplacian = 0.0;
};

/// Generator of the regime-modulated controlled diffusion applied to a
/// function pair: (k_i/2) dv(x,i) + c . grad v(x,i) - a_i v(x,i) + a_i v(x,j).
inline double generator_apply(const RegimePoint& v1, const RegimePoint& v2,
                              std::span<const double> control, const ModelParams& p,
                              int regime) {
    if (regime != 1 && regime != 2) {
        throw DomainError("regime must be 1 or 2");
    }
    const RegimePoint& own = (regime == 1) ? v1 : v2;
    const RegimePoint& other = (regime == 1) ? v2 : v1;
    const double k = (regime == 1) ? p.k1 : p.k2;
    const double a = (regime == 1) ? p.a1 : p.a2;

    double drift = 0.0;
    const std::size_t n = std::min(control.size(), own.gradient.size());
    for (std::size_t i = 0; i < n; ++i) {
        drift += control[i] * own.gradient[i];
    }
    return 0.5 * k * own.laplacian + drift - a * own.value + a * other.value;
}

struct HamiltonianMax {
    std::vector<double> c_star;
    double value = 0.0;
};

/// Maximizer of c -> g.c - |c|^2/2: the argmax is g itself, the max |g|^2/2.
inline HamiltonianMax hamiltonian_max(std::span<const double> grad) {
    HamiltonianMax out;
    out.c_star.assign(grad.begin(), grad.end());
    double sq = 0.0;
    for (double g : grad) sq += g * g;
    out.value = 0.5 * sq;
    return out;
}

}  // namespace rshjb
