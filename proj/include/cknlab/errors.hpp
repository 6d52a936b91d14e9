#pragma once

#include <stdexcept>
#include <string>

namespace cknlab {

// Base class; CLI maps subclasses to exit codes.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid parameter combination (exit code 2).
struct AdmissibilityError : Error { using Error::Error; };
struct DomainError : Error { using Error::Error; };
struct DegenerateInput : Error { using Error::Error; };

// Solver failures (exit code 3).
struct SolverError : Error { using Error::Error; };
struct NewtonDiverged : SolverError { using SolverError::SolverError; };
struct NegativeSolution : SolverError { using SolverError::SolverError; };
struct StepRejected : SolverError { using SolverError::SolverError; };
struct PositivityLoss : SolverError { using SolverError::SolverError; };
struct EigFailed : SolverError { using SolverError::SolverError; };
struct InversionError : SolverError { using SolverError::SolverError; };
struct ShootingFailed : SolverError { using SolverError::SolverError; };
struct ContinuationStalled : SolverError { using SolverError::SolverError; };
struct InsufficientSamples : SolverError { using SolverError::SolverError; };

struct SearchFailed : SolverError {
    double best_value;
    SearchFailed(const std::string& what, double best)
        : SolverError(what), best_value(best) {}
};

}  // namespace cknlab
