#pragma once

#include <stdexcept>
#include <string>

namespace navqa {

enum class ErrorCode {
  UnavailableAction,
  Unreachable,
  GenerationFailure,
  UnknownToken,
  DimensionMismatch,
  EmptyDataset,
  GoldReplayFailure,
  NonFiniteGradient,
  ConfigError,
  FormatError,
};

const char* error_code_name(ErrorCode code);

/// Single exception type for the library; `code()` tells callers which
/// contract was violated.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) fail(code, what);
}

}  // namespace navqa
