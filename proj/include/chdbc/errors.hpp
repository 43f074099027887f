#ifndef CHDBC_ERRORS_HPP
#define CHDBC_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace chdbc {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Newton failures. StepFailedError tags the time step at which the nonlinear
// solve gave up so callers can report it.
struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SingularJacobianError : SolverError {
  using SolverError::SolverError;
};

struct NoConvergenceError : SolverError {
  using SolverError::SolverError;
};

struct LineSearchStalledError : SolverError {
  using SolverError::SolverError;
};

struct StepFailedError : SolverError {
  StepFailedError(int step_index, const std::string& what)
      : SolverError(what), step(step_index) {}
  int step;
};

struct InverseOutOfRangeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MeanNotZeroError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace chdbc

#endif
