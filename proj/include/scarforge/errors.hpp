#pragma once

#include <stdexcept>
#include <string>

namespace scarforge {

enum class ErrorCode {
  FileMissing,
  IoFailure,
  MalformedHeader,
  BadDimension,
  SizeMismatch,
  GeometryMismatch,
  InvalidArgument,
  EmptyMask,
  NoOverlap,
  Divergence,
  OutOfRange,
  Unsatisfiable,
  PredictorFailure,
  NonFinite,
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::FileMissing: return "file-missing";
    case ErrorCode::IoFailure: return "io-failure";
    case ErrorCode::MalformedHeader: return "malformed-header";
    case ErrorCode::BadDimension: return "bad-dimension";
    case ErrorCode::SizeMismatch: return "size-mismatch";
    case ErrorCode::GeometryMismatch: return "geometry-mismatch";
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::EmptyMask: return "empty-mask";
    case ErrorCode::NoOverlap: return "no-overlap";
    case ErrorCode::Divergence: return "divergence";
    case ErrorCode::OutOfRange: return "out-of-range";
    case ErrorCode::Unsatisfiable: return "unsatisfiable";
    case ErrorCode::PredictorFailure: return "predictor-failure";
    case ErrorCode::NonFinite: return "non-finite";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace scarforge
