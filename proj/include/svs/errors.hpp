#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace svs {

enum class ErrorCode {
  InvalidArgument,
  IoFailure,
  MalformedHeader,
  VersionMismatch,
  DimensionMismatch,
  DuplicateView,
  MissingTopView,
  ModelInvariant,
  LengthMismatch,
  InsufficientCategories,
  CoverageUnreachable,
  ChecksumMismatch,
  NonFiniteValue,
  SeparationInfeasible,
  MissingInput,
};

/// Single exception type carrying a machine-checkable code.
class SvsError : public std::runtime_error {
 public:
  SvsError(ErrorCode code, std::string message)
      : std::runtime_error(std::move(message)), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw SvsError(code, message);
}

inline void require(bool cond, ErrorCode code, const std::string& message) {
  if (!cond) fail(code, message);
}

}  // namespace svs
