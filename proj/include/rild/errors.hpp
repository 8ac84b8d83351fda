#pragma once

#include <stdexcept>
#include <string>

namespace rild {

// Common base so callers can catch everything from this library at once.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad user-facing configuration: unknown keys, invalid values, missing
// capabilities (for example a gradient-based run on a gradient-free problem).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Mismatched dimensions between ensembles, drifts, noise vectors, operators.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A forward map, potential, gradient, or fitness evaluation produced an
// unusable value (non-finite output, fitness above its declared bound).
class EvaluationError : public Error {
 public:
  using Error::Error;
};

// Every particle weight collapsed to zero during an update.
class WeightCollapseError : public Error {
 public:
  using Error::Error;
};

// A dense solver or factorization failed to converge.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// A trajectory left the representable range (stepsize too large, runaway
// drift). Carries the 1-based iteration at which the step failed when known.
class DivergenceError : public Error {
 public:
  explicit DivergenceError(const std::string& message, int iteration = -1)
      : Error(message), iteration_(iteration) {}
  int iteration() const { return iteration_; }

 private:
  int iteration_;
};

}  // namespace rild
