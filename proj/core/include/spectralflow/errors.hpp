#pragma once

#include <stdexcept>
#include <string>

namespace spectralflow {

/// Bad user-supplied configuration (unknown key, missing required value,
/// out-of-range parameter). Message names the offending key where possible.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Mathematical precondition violated by the current state (zero field on the
/// quadrature, vanishing constraint gradient, degenerate geometry input).
struct DegenerateStateError : std::domain_error {
  explicit DegenerateStateError(const std::string& msg) : std::domain_error(msg) {}
};

/// Iterative solver failed to reach its tolerance within the iteration cap.
struct SolverError : std::runtime_error {
  explicit SolverError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace spectralflow
