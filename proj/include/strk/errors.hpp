#pragma once

#include <stdexcept>
#include <string>

namespace strk {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Rejected argument values (non-finite numbers, out-of-range gears, ...).
struct InvalidInputError : Error {
  using Error::Error;
};

// Matrix/sequence dimensions that do not line up.
struct ShapeError : Error {
  using Error::Error;
};

// Non-finite values produced during a numeric computation.
struct NumericError : Error {
  explicit NumericError(const std::string& what, long step = -1)
      : Error(what), step_index(step) {}
  long step_index;
};

// File-level problems. Subtypes are distinct so callers can react to them.
struct IoError : Error {
  using Error::Error;
};
struct FormatError : IoError {
  using IoError::IoError;
};
struct VersionError : IoError {
  using IoError::IoError;
};
struct TruncationError : IoError {
  using IoError::IoError;
};
struct ChecksumError : IoError {
  using IoError::IoError;
};

// A dataset or checkpoint that belongs to a different arm/model.
struct SpecMismatchError : Error {
  using Error::Error;
};

}  // namespace strk
