#pragma once

#include <stdexcept>
#include <string>

namespace e2loop {

enum class ErrorCode {
  InvalidConfig,
  Encode,
  ConnectRefused,
  SetupTimeout,
  SetupRejected,
  NotSubscribed,
  ConnectionLost,
  DuplicatePort,
  UnknownNode,
  FunctionNotAccepted,
  ControlNotSupported,
  Timeout,
  UnsupportedUnit,
  Io,
};

const char* error_code_name(ErrorCode code);

// Single exception type for the library; `code()` carries the typed failure.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace e2loop
