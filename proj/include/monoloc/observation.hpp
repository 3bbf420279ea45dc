#pragma once

// Raw 2D joint detections and their reduction to the four-point body model
// (neck, hip centre, knee centre, ankle centre).

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "monoloc/camera_models.hpp"
#include "monoloc/defaults.hpp"
#include "monoloc/errors.hpp"

namespace monoloc {

enum class BodyPoint : std::size_t { kNeck = 0, kHip = 1, kKnee = 2, kAnkle = 3 };
inline constexpr std::size_t kNumBodyPoints = 4;
inline constexpr std::array<const char*, kNumBodyPoints> kBodyPointNames = {"neck", "hip", "knee", "ankle"};

constexpr std::size_t index(BodyPoint p) { return static_cast<std::size_t>(p); }

struct JointDetection {
  double u = 0.0;
  double v = 0.0;
  double confidence = 0.0;
};

struct RawJointFrame {
  std::int64_t frame_id = 0;
  double timestamp = 0.0;
  std::int64_t person_id = 0;
  std::map<std::string, JointDetection> joints;
};

struct FourPointObservation {
  std::array<NormalizedPoint, kNumBodyPoints> points{};
  std::array<bool, kNumBodyPoints> visible{};
  std::int64_t frame_id = 0;
  double timestamp = 0.0;
  std::int64_t person_id = 0;

  int visible_count() const { return static_cast<int>(std::count(visible.begin(), visible.end(), true)); }

  const NormalizedPoint& operator[](BodyPoint p) const { return points[index(p)]; }
  bool is_visible(BodyPoint p) const { return visible[index(p)]; }

  void set(BodyPoint p, NormalizedPoint n) {
    points[index(p)] = n;
    visible[index(p)] = true;
  }

  // Visible points must be strictly ordered top to bottom in the image
  // (y grows downwards). Reported as a flag; callers decide what to do.
  bool upright_ordering() const {
    std::optional<double> previous;
    for (std::size_t i = 0; i < kNumBodyPoints; ++i) {
      if (!visible[i]) continue;
      if (previous && !(points[i].y > *previous)) return false;
      previous = points[i].y;
    }
    return true;
  }
};

namespace detail {

inline std::optional<PixelPoint> confident(const RawJointFrame& frame, const std::string& name, double threshold) {
  const auto it = frame.joints.find(name);
  if (it == frame.joints.end() || !(it->second.confidence > threshold)) return std::nullopt;
  return PixelPoint{it->second.u, it->second.v};
}

// Coordinate-wise median of the confident members of a left/right pair. For two
// values this is their midpoint; a single confident side is used alone.
inline std::optional<PixelPoint> pair_median(const RawJointFrame& frame, const std::string& left,
                                             const std::string& right, double threshold) {
  const auto l = confident(frame, left, threshold);
  const auto r = confident(frame, right, threshold);
  if (l && r) return PixelPoint{0.5 * (l->u + r->u), 0.5 * (l->v + r->v)};
  if (l) return l;
  return r;
}

}  // namespace detail

/// Pixel-space part of the reduction; exposed separately so it can be checked
/// without a camera.
inline std::array<std::optional<PixelPoint>, kNumBodyPoints> reduce_to_pixels(const RawJointFrame& frame,
                                                                             double confidence_threshold) {
  std::array<std::optional<PixelPoint>, kNumBodyPoints> px;
  px[index(BodyPoint::kNeck)] = detail::confident(frame, "neck", confidence_threshold);
  if (!px[index(BodyPoint::kNeck)]) {
    px[index(BodyPoint::kNeck)] = detail::pair_median(frame, "left_shoulder", "right_shoulder", confidence_threshold);
  }
  px[index(BodyPoint::kHip)] = detail::pair_median(frame, "left_hip", "right_hip", confidence_threshold);
  px[index(BodyPoint::kKnee)] = detail::pair_median(frame, "left_knee", "right_knee", confidence_threshold);
  px[index(BodyPoint::kAnkle)] = detail::pair_median(frame, "left_ankle", "right_ankle", confidence_threshold);
  return px;
}

/// Reduces a frame to the four-point model on the normalized plane. Points
/// whose back-projection fails are marked invisible rather than failing the
/// frame; throws kNoVisiblePoints if nothing is left.
inline FourPointObservation reduce_to_four_points(const RawJointFrame& frame, const CameraModel& camera,
                                                  double confidence_threshold = defaults::kConfidenceThreshold) {
  if (!(confidence_threshold >= 0.0 && confidence_threshold <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "confidence threshold must lie in [0, 1]");
  }
  FourPointObservation obs;
  obs.frame_id = frame.frame_id;
  obs.timestamp = frame.timestamp;
  obs.person_id = frame.person_id;

  const auto pixels = reduce_to_pixels(frame, confidence_threshold);
  for (std::size_t i = 0; i < kNumBodyPoints; ++i) {
    if (!pixels[i]) continue;
    try {
      obs.points[i] = back_project(camera, *pixels[i]);
      obs.visible[i] = true;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kBehindCamera && e.code() != ErrorCode::kOutOfBounds &&
          e.code() != ErrorCode::kDistortionDivergence) {
        throw;
      }
    }
  }
  if (obs.visible_count() == 0) {
    throw Error(ErrorCode::kNoVisiblePoints, "frame " + std::to_string(frame.frame_id) + " has no usable points");
  }
  return obs;
}

// ---------------------------------------------------------------------------
// JSON-lines I/O. One object per person per frame:
//   {"frame": int, "t": float, "person": int, "joints": {"left_hip": [u, v, conf], ...}}
// Lines holding a {"header": ...} object (reproducibility headers) and blank
// lines are skipped.

namespace detail {

template <typename T>
T required(const nlohmann::json& obj, const char* field, std::size_t line) {
  const auto it = obj.find(field);
  if (it == obj.end()) {
    throw Error(ErrorCode::kSchemaError, "line " + std::to_string(line) + ": missing field '" + field + "'");
  }
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::kSchemaError, "line " + std::to_string(line) + ": field '" + field + "' has the wrong type");
  }
}

inline bool is_blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace detail

inline RawJointFrame parse_frame(const nlohmann::json& obj, std::size_t line) {
  RawJointFrame frame;
  frame.frame_id = detail::required<std::int64_t>(obj, "frame", line);
  frame.timestamp = detail::required<double>(obj, "t", line);
  frame.person_id = detail::required<std::int64_t>(obj, "person", line);
  const auto joints = detail::required<nlohmann::json>(obj, "joints", line);
  if (!joints.is_object()) {
    throw Error(ErrorCode::kSchemaError, "line " + std::to_string(line) + ": field 'joints' must be an object");
  }
  for (const auto& [name, value] : joints.items()) {
    if (!value.is_array() || value.size() != 3 || !value[0].is_number() || !value[1].is_number() ||
        !value[2].is_number()) {
      throw Error(ErrorCode::kSchemaError,
                  "line " + std::to_string(line) + ": joint '" + name + "' must be [u, v, confidence]");
    }
    JointDetection det{value[0].get<double>(), value[1].get<double>(), value[2].get<double>()};
    if (!std::isfinite(det.u) || !std::isfinite(det.v) || !(det.confidence >= 0.0 && det.confidence <= 1.0)) {
      throw Error(ErrorCode::kSchemaError,
                  "line " + std::to_string(line) + ": joint '" + name + "' has invalid values");
    }
    frame.joints.emplace(name, det);
  }
  return frame;
}

inline std::vector<RawJointFrame> load_frames(std::istream& in) {
  std::vector<RawJointFrame> frames;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (detail::is_blank(text)) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::kParseError, "line " + std::to_string(line) + ": " + e.what());
    }
    if (!obj.is_object()) {
      throw Error(ErrorCode::kParseError, "line " + std::to_string(line) + ": expected a JSON object");
    }
    if (obj.contains("header")) continue;
    frames.push_back(parse_frame(obj, line));
  }
  return frames;
}

inline std::vector<RawJointFrame> load_frames(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kParseError, "cannot open frames file '" + path + "'");
  return load_frames(in);
}

inline nlohmann::json to_json(const RawJointFrame& frame) {
  nlohmann::json joints = nlohmann::json::object();
  for (const auto& [name, det] : frame.joints) joints[name] = {det.u, det.v, det.confidence};
  return {{"frame", frame.frame_id}, {"t", frame.timestamp}, {"person", frame.person_id}, {"joints", joints}};
}

}  // namespace monoloc
