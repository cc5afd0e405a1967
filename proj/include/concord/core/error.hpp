#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace concord {

enum class ErrorCode {
  validation,
  phase,
  authorization,
  conflict,
  not_found,
  backend,
  protocol,
  corruption,
  generation_exhausted,
  analytics,
  undefined_influence,
};

std::string_view to_string(ErrorCode code);

// Base of every error raised by the library. Callers switch on code() to map
// onto exit codes or HTTP statuses.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& message)
      : Error(ErrorCode::validation, message) {}
};

class PhaseError : public Error {
 public:
  PhaseError(std::string phase, const std::string& message)
      : Error(ErrorCode::phase, message), phase_(std::move(phase)) {}

  const std::string& phase() const noexcept { return phase_; }

 private:
  std::string phase_;
};

class BackendError : public Error {
 public:
  BackendError(int attempts, const std::string& message)
      : Error(ErrorCode::backend, message), attempts_(attempts) {}

  int attempts() const noexcept { return attempts_; }

 private:
  int attempts_;
};

// Malformed response from a remote backend; the raw payload is kept for audit.
class ProtocolError : public Error {
 public:
  ProtocolError(std::string raw_payload, const std::string& message)
      : Error(ErrorCode::protocol, message), raw_payload_(std::move(raw_payload)) {}

  const std::string& raw_payload() const noexcept { return raw_payload_; }

 private:
  std::string raw_payload_;
};

class CorruptionError : public Error {
 public:
  explicit CorruptionError(const std::string& message)
      : Error(ErrorCode::corruption, message) {}
};

}  // namespace concord
