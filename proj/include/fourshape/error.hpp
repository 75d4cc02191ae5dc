#pragma once

#include <stdexcept>
#include <string>

namespace fourshape {

enum class ErrorCode {
  invalid_argument,
  invalid_coefficients,
  config,
  parse,
  io,
  shape_mismatch,
  numeric,
  adapter_handshake,
  adapter_timeout,
  adapter_transport,
  adapter_payload,
};

const char* error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace fourshape
