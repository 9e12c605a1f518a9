#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace photostyle {

enum class ErrorCode {
  io_failure,
  decode_failure,
  unsupported_color_type,
  out_of_range,
  dimension_mismatch,
  image_too_small,
  image_too_large,
  unknown_layer,
  parse_error,
  unknown_label,
  unmapped_label,
  orphan_label,
  invalid_argument,
  non_finite,
  config_error,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::io_failure: return "io_failure";
    case ErrorCode::decode_failure: return "decode_failure";
    case ErrorCode::unsupported_color_type: return "unsupported_color_type";
    case ErrorCode::out_of_range: return "out_of_range";
    case ErrorCode::dimension_mismatch: return "dimension_mismatch";
    case ErrorCode::image_too_small: return "image_too_small";
    case ErrorCode::image_too_large: return "image_too_large";
    case ErrorCode::unknown_layer: return "unknown_layer";
    case ErrorCode::parse_error: return "parse_error";
    case ErrorCode::unknown_label: return "unknown_label";
    case ErrorCode::unmapped_label: return "unmapped_label";
    case ErrorCode::orphan_label: return "orphan_label";
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::non_finite: return "non_finite";
    case ErrorCode::config_error: return "config_error";
  }
  return "unknown";
}

/// Every failure in the library is reported as an Error carrying a code that
/// callers can switch on; the message is meant for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace photostyle
