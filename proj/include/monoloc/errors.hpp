#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace monoloc {

enum class ErrorCode {
  kBehindCamera,
  kOutOfBounds,
  kDistortionDivergence,
  kNoVisiblePoints,
  kParseError,
  kSchemaError,
  kConfigMissing,
  kConfigError,
  kInvalidArgument,
  kInsufficientObservations,
  kDegenerateObservation,
  kSingularNormalEquations,
  kRankDeficient,
  kNonPhysicalHeights,
  kNoMatchedFrames,
  kStateOutOfBounds,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kBehindCamera: return "behind_camera";
    case ErrorCode::kOutOfBounds: return "out_of_bounds";
    case ErrorCode::kDistortionDivergence: return "distortion_divergence";
    case ErrorCode::kNoVisiblePoints: return "no_visible_points";
    case ErrorCode::kParseError: return "parse_error";
    case ErrorCode::kSchemaError: return "schema_error";
    case ErrorCode::kConfigMissing: return "config_missing";
    case ErrorCode::kConfigError: return "config_invalid";
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kInsufficientObservations: return "insufficient_observations";
    case ErrorCode::kDegenerateObservation: return "degenerate_observation";
    case ErrorCode::kSingularNormalEquations: return "singular_normal_equations";
    case ErrorCode::kRankDeficient: return "rank_deficient";
    case ErrorCode::kNonPhysicalHeights: return "non_physical_heights";
    case ErrorCode::kNoMatchedFrames: return "no_matched_frames";
    case ErrorCode::kStateOutOfBounds: return "state_out_of_bounds";
  }
  return "unknown";
}

/// Single exception type thrown by the library. The code is what callers
/// branch on; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), message_(message) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

}  // namespace monoloc
