#pragma once

#include <stdexcept>
#include <string>

namespace fedq {

// Malformed or inconsistent configuration. CLI exit code 2.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A modelling assumption was violated at runtime (e.g. a weight left the
// configured range bound). CLI exit code 3.
class AssumptionViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Engine state does not allow the requested operation.
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Iterative optimum search did not reach its tolerance.
class SolverFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fedq
