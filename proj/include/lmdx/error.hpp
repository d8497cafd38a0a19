#pragma once

#include <stdexcept>
#include <string>

namespace lmdx {

enum class ErrorCode {
  malformed_input,
  geometry_error,
  empty_document,
  malformed_schema,
  duplicate_key,
  segment_too_large,
  out_of_range,
  transport_error,
  auth_error,
  fixture_miss,
  budget_exceeded,
  no_exemplar_fits,
  schema_mismatch,
  zero_vector,
  config_error,
  io_error,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::malformed_input: return "malformed_input";
    case ErrorCode::geometry_error: return "geometry_error";
    case ErrorCode::empty_document: return "empty_document";
    case ErrorCode::malformed_schema: return "malformed_schema";
    case ErrorCode::duplicate_key: return "duplicate_key";
    case ErrorCode::segment_too_large: return "segment_too_large";
    case ErrorCode::out_of_range: return "out_of_range";
    case ErrorCode::transport_error: return "transport_error";
    case ErrorCode::auth_error: return "auth_error";
    case ErrorCode::fixture_miss: return "fixture_miss";
    case ErrorCode::budget_exceeded: return "budget_exceeded";
    case ErrorCode::no_exemplar_fits: return "no_exemplar_fits";
    case ErrorCode::schema_mismatch: return "schema_mismatch";
    case ErrorCode::zero_vector: return "zero_vector";
    case ErrorCode::config_error: return "config_error";
    case ErrorCode::io_error: return "io_error";
  }
  return "unknown";
}

}  // namespace lmdx
