#pragma once

#include <stdexcept>
#include <string>

namespace btc {

enum class ErrorCode {
  shape_mismatch,
  parse_error,
  data_error,
  config_error,
  io_error,
  bad_magic,
  truncated_file,
  unknown_version,
  duplicate_tensor,
  undefined_score,
  not_found,
};

inline const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::shape_mismatch:   return "shape-mismatch";
    case ErrorCode::parse_error:      return "parse-error";
    case ErrorCode::data_error:       return "data-error";
    case ErrorCode::config_error:     return "config-error";
    case ErrorCode::io_error:         return "io-error";
    case ErrorCode::bad_magic:        return "bad-magic";
    case ErrorCode::truncated_file:   return "truncated-file";
    case ErrorCode::unknown_version:  return "unknown-version";
    case ErrorCode::duplicate_tensor: return "duplicate-tensor";
    case ErrorCode::undefined_score:  return "undefined-score";
    case ErrorCode::not_found:        return "not-found";
  }
  return "error";
}

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

}  // namespace btc
