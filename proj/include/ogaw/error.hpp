#pragma once

#include <stdexcept>
#include <string>

namespace ogaw {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad argument values, malformed inputs, unmet preconditions.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Tensor extents that do not agree with an operation's contract.
class DimensionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// A NaN or Inf where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failures and unreadable file contents.
class IoError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public IoError {
 public:
  enum class Kind { BadMagic, VersionMismatch, Truncated, OverlappingEntries, Malformed };

  CheckpointError(Kind kind, const std::string& detail)
      : IoError(std::string(kind_name(kind)) + ": " + detail), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

  static const char* kind_name(Kind kind) noexcept {
    switch (kind) {
      case Kind::BadMagic: return "bad magic";
      case Kind::VersionMismatch: return "version mismatch";
      case Kind::Truncated: return "truncated payload";
      case Kind::OverlappingEntries: return "overlapping directory entries";
      case Kind::Malformed: return "malformed header";
    }
    return "checkpoint error";
  }

 private:
  Kind kind_;
};

}  // namespace ogaw
