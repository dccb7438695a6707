#pragma once

#include <stdexcept>
#include <string>

namespace rshjb {

/// Invalid model data or configuration (maps to CLI exit code 1).
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// The special discount-rate formulas produced a non-positive rate.
struct NonPositiveLambda : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Iterative solver exhausted its iteration budget.
struct NoConvergence : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Root finder converged to a root outside the required sign region.
struct PositiveRoot : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// 2x2 system matrix lost its positivity identity (invalid inputs upstream).
struct SingularMatrix : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A ball solve failed inside a multi-radius run; message names the radius.
struct SolveError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Simulated state left the admissible region (|X| > 1e8).
struct PolicyBlowUp : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace rshjb
