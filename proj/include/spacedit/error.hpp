#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace spacedit {

enum class ErrorCode {
  configuration,
  shape,
  input,
  optimization,
  precondition,
  alignment,
  parse,
  schema,
  format,
  not_found,
  busy,
  rejected,
  empty_class,
  degenerate,
  io,
  migration,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library; `code()` tells callers (HTTP layer,
/// CLI) how to map the failure.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace spacedit
