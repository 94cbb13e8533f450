#pragma once

#include <stdexcept>
#include <string>

namespace cdnet {

/// Inputs whose shapes do not agree (P, K or M mismatch).
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Inputs that violate a documented invariant (symmetry, sign, range, ...).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Non-finite values or runaway objective during optimization.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Files that cannot be opened or parsed.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A checkpoint whose payload is truncated or inconsistent.
class CorruptionError : public IoError {
 public:
  using IoError::IoError;
};

/// A checkpoint written by an incompatible format version.
class VersionError : public IoError {
 public:
  using IoError::IoError;
};

}  // namespace cdnet
