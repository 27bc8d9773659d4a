#pragma once

#include <stdexcept>
#include <string>

namespace ot {

/// Base class for all errors thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Mismatched or unsupported tensor/point dimensions between two arguments.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Input rejected at validation: NaN/Inf entries, negative weights,
/// malformed shapes, duplicate sites where forbidden, bad file contents.
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

/// Measure with zero (or non-positive) total mass where a probability
/// measure is required.
class ZeroMassError : public InvalidInputError {
 public:
  using InvalidInputError::InvalidInputError;
};

/// Marginals of a transport problem do not balance within tolerance.
class InfeasibleMarginalsError : public Error {
 public:
  using Error::Error;
};

/// Cost matrix contains non-finite entries.
class InvalidCostError : public Error {
 public:
  using Error::Error;
};

/// Operation not available for the requested dimension or exponent.
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

/// Scaling iteration hit numerical underflow; the log-domain variant
/// handles the regime that triggered this.
class UnderflowError : public Error {
 public:
  using Error::Error;
};

/// Degenerate geometric configuration (zero-area triangle, empty domain,
/// coincident sites) that the algorithm cannot process.
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// Object used in a state that does not support the operation.
class StateError : public Error {
 public:
  using Error::Error;
};

}  // namespace ot
