#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace protorep {

/// Raised for malformed configs, maps, environment files or CLI arguments.
/// Maps to process exit code 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when a numeric routine cannot deliver its contract (singular
/// systems, non-positive entries where positivity is required, divergence).
/// Maps to process exit code 3.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

/// Linear solve failed outright or the pivot-growth estimate crossed the
/// ill-conditioning threshold.
struct SingularMatrixError : NumericError {
  SingularMatrixError(const std::string& what, double condition_estimate)
      : NumericError(what), condition_estimate(condition_estimate) {}
  double condition_estimate;
};

/// A quantity that must be strictly positive (eigenvector entry, matrix row)
/// vanished; `state` names the offending state in the caller's indexing.
struct PositivityError : NumericError {
  PositivityError(const std::string& what, int state)
      : NumericError(what), state(state) {}
  int state;
};

/// Iteration failed to converge; carries the last iterate and a gap estimate
/// so callers can diagnose or restart.
struct ConvergenceError : NumericError {
  ConvergenceError(const std::string& what, std::vector<double> last_iterate,
                   double gap_estimate)
      : NumericError(what),
        last_iterate(std::move(last_iterate)),
        gap_estimate(gap_estimate) {}
  std::vector<double> last_iterate;
  double gap_estimate;
};

}  // namespace protorep
