#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace evidential {

enum class ErrorCode {
  InvalidArgument,
  InvalidFrame,
  EmptyFocal,
  InvalidFocal,
  NegativeMass,
  ZeroTotal,
  OutOfRange,
  FrameMismatch,
  TotalConflict,
  DimensionMismatch,
  ShapeMismatch,
  StaleCache,
  EmptyCluster,
  AllZeroDenominator,
  NonFiniteLoss,
  Empty,
  Io,
  Parse,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidFrame: return "InvalidFrame";
    case ErrorCode::EmptyFocal: return "EmptyFocal";
    case ErrorCode::InvalidFocal: return "InvalidFocal";
    case ErrorCode::NegativeMass: return "NegativeMass";
    case ErrorCode::ZeroTotal: return "ZeroTotal";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::FrameMismatch: return "FrameMismatch";
    case ErrorCode::TotalConflict: return "TotalConflict";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::StaleCache: return "StaleCache";
    case ErrorCode::EmptyCluster: return "EmptyCluster";
    case ErrorCode::AllZeroDenominator: return "AllZeroDenominator";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::Empty: return "Empty";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Parse: return "Parse";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-readable category.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

namespace detail {

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) throw Error(code, what);
}

}  // namespace detail

}  // namespace evidential
