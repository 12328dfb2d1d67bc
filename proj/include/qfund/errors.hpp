#pragma once

#include <stdexcept>
#include <string>

namespace qfund {

// Base class for every error this library throws.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Input violated a domain-type invariant (negative contribution, parameter
// out of range, malformed scenario field, ...).
struct ValidationError : Error {
  using Error::Error;
};

// Scenario or report text is not syntactically valid.
struct ParseError : Error {
  using Error::Error;
};

// A file could not be read or written.
struct IoError : Error {
  using Error::Error;
};

// Evaluation requested outside a function's domain, e.g. a marginal value
// at F = 0 where it diverges.
struct DomainError : Error {
  using Error::Error;
};

// Funding gradient requested at c_j = 0 where h' diverges (weight exponent
// below 1). Callers handle the zero boundary explicitly.
struct SingularGradient : Error {
  using Error::Error;
};

// An iterative solver hit its cap before reaching tolerance.
struct NoConvergence : Error {
  using Error::Error;
};

// Requested Taylor order is too small to exhibit series convergence.
struct OrderTooLow : Error {
  using Error::Error;
};

// A curvature ratio was requested where the second derivative vanishes.
struct DegenerateSecondDerivative : Error {
  using Error::Error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ValidationError(message);
}

}  // namespace qfund
