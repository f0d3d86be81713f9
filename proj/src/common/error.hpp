#pragma once

#include <stdexcept>
#include <string>

namespace deflow {

enum class ErrorCode {
  invalid_argument = 1,
  shape_mismatch,
  io,
  parse,
  numeric,
};

/// Base exception for every failure raised by the core library. The C API
/// maps `code()` onto its status enum.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(ErrorCode::invalid_argument, what);
}

}  // namespace deflow
