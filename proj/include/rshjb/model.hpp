#pragma once

#include <cmath>
#include <string>

#include "rshjb/errors.hpp"

namespace rshjb {

/// Radial running-cost f(x) = p*|x|^2 + s*|x| + q with p, s, q >= 0.
struct CostCoeffs {
    double p = 0.0;
    double s = 0.0;
    double q = 0.0;
};

/// Problem data for the two-regime control model: per-regime noise levels
/// k_i (the diffusion part of the generator is (k_i/2) laplacian), switching
/// rates a_i, discount rates lambda_i, state dimension, and the pair of
/// running costs.
struct ModelParams {
    int dim = 1;
    double k1 = 1.0, k2 = 1.0;
    double a1 = 1.0, a2 = 1.0;
    double lambda1 = 1.0, lambda2 = 1.0;
    CostCoeffs cost1;
    CostCoeffs cost2;
};

/// Quadratic-envelope constants: f_i(x) <= M_i (|x|^2 + 1) for all x.
struct GrowthBound {
    double m1 = 0.0;
    double m2 = 0.0;
};

struct LambdaPair {
    double lambda1 = 0.0;
    double lambda2 = 0.0;
};

/// Synthetic floor used when f == 0, so the envelope constant stays positive.
inline constexpr double kGrowthFloor = 1e-12;

namespace detail {

inline void require_positive(double value, const char* name) {
    if (!(value > 0.0)) {
        throw ValidationError(std::string(name) + " must be > 0");
    }
}

inline void require_nonnegative(double value, const char* name) {
    if (!(value >= 0.0)) {
        throw ValidationError(std::string(name) + " must be >= 0");
    }
}

inline void validate_cost(const CostCoeffs& c, const char* tag) {
    require_nonnegative(c.p, (std::string(tag) + ".p").c_str());
    require_nonnegative(c.s, (std::string(tag) + ".s").c_str());
    require_nonnegative(c.q, (std::string(tag) + ".q").c_str());
}

}  // namespace detail

/// Checks every positivity constraint; returns the input unchanged on
/// success, otherwise throws naming the first violated constraint.
inline const ModelParams& validate_params(const ModelParams& p) {
    detail::require_positive(p.k1, "k1");
    detail::require_positive(p.k2, "k2");
    detail::require_positive(p.a1, "a1");
    detail::require_positive(p.a2, "a2");
    detail::require_positive(p.lambda1, "lambda1");
    detail::require_positive(p.lambda2, "lambda2");
    if (p.dim < 1) {
        throw ValidationError("dim must be >= 1");
    }
    detail::validate_cost(p.cost1, "cost1");
    detail::validate_cost(p.cost2, "cost2");
    return p;
}

/// Evaluates f at radius r = |x|.
inline double eval_cost(const CostCoeffs& c, double r) {
    if (!(r >= 0.0)) {
        throw DomainError("cost radius must be >= 0");
    }
    return c.p * r * r + c.s * r + c.q;
}

/// Smallest envelope constant of the form max(p + s/2, q + s/2), using
/// s*r <= s*(r^2 + 1)/2. Returns the positive floor for the zero cost.
inline double growth_bound(const CostCoeffs& c) {
    detail::validate_cost(c, "cost");
    const double m = std::max(c.p + 0.5 * c.s, c.q + 0.5 * c.s);
    return m > 0.0 ? m : kGrowthFloor;
}

inline GrowthBound growth_bound(const ModelParams& p) {
    return GrowthBound{growth_bound(p.cost1), growth_bound(p.cost2)};
}

/// Discount rates for which the model with f_i = |x|^2 admits the explicit
/// exponential-quadratic solution. Throws if either rate comes out <= 0.
inline LambdaPair special_lambda(int dim, double k1, double k2, double a1, double a2) {
    if (dim < 1) throw ValidationError("dim must be >= 1");
    detail::require_positive(k1, "k1");
    detail::require_positive(k2, "k2");
    detail::require_positive(a1, "a1");
    detail::require_positive(a2, "a2");

    const double n = static_cast<double>(dim);
    const double e1 = std::sqrt(n * n * k1 * k1 + 8.0) - n * k1;
    const double e2 = std::sqrt(n * n * k2 * k2 + 8.0) - n * k2;

    LambdaPair out;
    out.lambda1 = -a1 + n * k1 + 0.125 * a1 * e1 * e2 + 0.25 * n * a1 * k1 * e2;
    out.lambda2 = -a2 + n * k2 + 0.125 * a2 * e1 * e2 + 0.25 * n * a2 * k2 * e1;
    if (!(out.lambda1 > 0.0)) {
        throw NonPositiveLambda("special lambda1 is not positive");
    }
    if (!(out.lambda2 > 0.0)) {
        throw NonPositiveLambda("special lambda2 is not positive");
    }
    return out;
}

}  // namespace rshjb
