#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "rshjb/errors.hpp"

namespace rshjb {

/// Thomas algorithm for a tridiagonal system. `lower[0]` and
/// `upper[n-1]` are unused. No pivoting; callers supply diagonally
/// dominant systems.
inline std::vector<double> solve_tridiagonal(std::span<const double> lower,
                                             std::span<const double> diag,
                                             std::span<const double> upper,
                                             std::span<const double> rhs) {
    const std::size_t n = diag.size();
    if (lower.size() != n || upper.size() != n || rhs.size() != n || n == 0) {
        throw DomainError("tridiagonal bands must share a nonzero size");
    }
    std::vector<double> c_star(n), d_star(n), x(n);

    double denom = diag[0];
    if (!(std::abs(denom) > 1e-300)) throw SingularMatrix("zero pivot in tridiagonal solve");
    c_star[0] = upper[0] / denom;
    d_star[0] = rhs[0] / denom;
    for (std::size_t i = 1; i < n; ++i) {
        denom = diag[i] - lower[i] * c_star[i - 1];
        if (!(std::abs(denom) > 1e-300)) throw SingularMatrix("zero pivot in tridiagonal solve");
        c_star[i] = upper[i] / denom;
        d_star[i] = (rhs[i] - lower[i] * d_star[i - 1]) / denom;
    }
    x[n - 1] = d_star[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) {
        x[i] = d_star[i] - c_star[i] * x[i + 1];
    }
    return x;
}

}  // namespace rshjb
