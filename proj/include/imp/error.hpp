#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace imp {

enum class ErrorCode {
  InvalidScore,
  InvalidBox,
  InvalidMaskValue,
  ClassOutOfRange,
  InvalidIndex,
  ShapeMismatch,
  LabelOutOfRange,
  ParseError,
  ValidationError,
  UnknownClassName,
  RunSumMismatch,
  UnsupportedFormat,
  NoValidPixels,
  NonFiniteValue,
  MissingPair,
  IoError,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code);

/// Exception carrying a machine-readable code. `cause` keeps the original
/// code when an error is re-wrapped (e.g. a per-record ValidationError whose
/// cause is InvalidScore).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code), cause_(code) {}
  Error(ErrorCode code, ErrorCode cause, const std::string& message)
      : std::runtime_error(message), code_(code), cause_(cause) {}

  ErrorCode code() const noexcept { return code_; }
  ErrorCode cause() const noexcept { return cause_; }

 private:
  ErrorCode code_;
  ErrorCode cause_;
};

}  // namespace imp
