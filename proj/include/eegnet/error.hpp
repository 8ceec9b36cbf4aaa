#pragma once

#include <stdexcept>
#include <string>

namespace eegnet {

// Common base so callers can catch anything thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor ranks/extents that do not line up, invalid axes, bad pool divisors.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Scalar arguments out of range (dropout p >= 1, empty bands, negative counts).
class ValueError : public Error {
 public:
  using Error::Error;
};

// Operations called out of order (backward before forward, step before init).
class StateError : public Error {
 public:
  using Error::Error;
};

// Non-finite values where the math guarantees finite ones.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Problems with the data itself: empty sets, labels out of range, missing
// subjects, degenerate batches.
class DataError : public Error {
 public:
  using Error::Error;
};

// Malformed files: wrong magic, unsupported version, truncation, checksum.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Metric preconditions not met (single-class AUC, length mismatches).
class MetricError : public Error {
 public:
  using Error::Error;
};

// Invalid experiment configuration. Maps to CLI exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A cross-checked internal invariant failed (e.g. sweep configs disagree on
// parameter count). Maps to CLI exit code 4.
class InvariantError : public Error {
 public:
  using Error::Error;
};

}  // namespace eegnet
