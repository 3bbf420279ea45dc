#pragma once

// Localization metrics and a seeded synthetic scene generator.
//
// Location is the pelvis (hip centre) in the camera frame; distance is its
// Euclidean norm. ALE/ADE are mean absolute location/distance errors and
// VLE/VDE the population variances of the per-frame error series.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"

#include "monoloc/camera_models.hpp"
#include "monoloc/defaults.hpp"
#include "monoloc/errors.hpp"
#include "monoloc/observation.hpp"
#include "monoloc/pose_solver.hpp"

namespace monoloc {

inline CameraFramePoint pelvis_location(const PoseState& state, const JointHeights& heights) {
  return camera_frame_points(state, heights)[index(BodyPoint::kHip)];
}

// ---------------------------------------------------------------------------
// Metrics

struct EstimateSample {
  std::int64_t frame = 0;
  std::int64_t person = 0;
  Eigen::Vector3d pelvis = Eigen::Vector3d::Zero();
};

struct GroundTruthSample {
  std::int64_t frame = 0;
  std::int64_t person = 0;
  std::optional<Eigen::Vector3d> pelvis;
  std::optional<double> distance;  // taken from |pelvis| when absent

  double gt_distance() const { return distance ? *distance : pelvis->norm(); }
};

struct FrameError {
  std::int64_t frame = 0;
  std::int64_t person = 0;
  std::optional<double> location_error;
  double distance_error = 0.0;
};

struct MetricReport {
  std::optional<double> ale;  // m; absent for distance-only ground truth
  std::optional<double> vle;  // m^2
  double ade = 0.0;           // m
  double vde = 0.0;           // m^2
  std::size_t frame_count = 0;
  std::vector<FrameError> per_frame;
};

namespace detail {

inline std::pair<double, double> mean_and_population_variance(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  return {mean, var / static_cast<double>(v.size())};
}

}  // namespace detail

/// Matches estimates to ground truth by (frame, person). Ground truth without
/// a pelvis position contributes to ADE/VDE only.
inline MetricReport compute_metrics(const std::vector<EstimateSample>& estimates,
                                    const std::vector<GroundTruthSample>& ground_truth) {
  std::map<std::pair<std::int64_t, std::int64_t>, const GroundTruthSample*> gt_index;
  for (const auto& g : ground_truth) {
    if (!g.pelvis && !g.distance) {
      throw Error(ErrorCode::kSchemaError, "ground truth for frame " + std::to_string(g.frame) + " has no value");
    }
    gt_index[{g.frame, g.person}] = &g;
  }

  MetricReport report;
  std::vector<double> location_errors, distance_errors;
  for (const auto& e : estimates) {
    const auto it = gt_index.find({e.frame, e.person});
    if (it == gt_index.end()) continue;
    const GroundTruthSample& g = *it->second;
    FrameError fe{e.frame, e.person, std::nullopt, std::abs(e.pelvis.norm() - g.gt_distance())};
    if (g.pelvis) {
      fe.location_error = (e.pelvis - *g.pelvis).norm();
      location_errors.push_back(*fe.location_error);
    }
    distance_errors.push_back(fe.distance_error);
    report.per_frame.push_back(fe);
  }
  if (report.per_frame.empty()) throw Error(ErrorCode::kNoMatchedFrames, "no estimate matches the ground truth");

  report.frame_count = report.per_frame.size();
  std::tie(report.ade, report.vde) = detail::mean_and_population_variance(distance_errors);
  if (!location_errors.empty()) {
    const auto [ale, vle] = detail::mean_and_population_variance(location_errors);
    report.ale = ale;
    report.vle = vle;
  }
  return report;
}

inline nlohmann::json to_json(const MetricReport& r) {
  nlohmann::json j;
  j["ale"] = r.ale ? nlohmann::json(*r.ale) : nlohmann::json(nullptr);
  j["vle"] = r.vle ? nlohmann::json(*r.vle) : nlohmann::json(nullptr);
  j["ade"] = r.ade;
  j["vde"] = r.vde;
  j["frame_count"] = r.frame_count;
  return j;
}

// Ground truth JSON lines: {"frame", "person", "pelvis_xyz": [x, y, z]} and/or
// {"frame", "person", "distance": d}. Header lines are skipped.
inline std::vector<GroundTruthSample> load_ground_truth(std::istream& in) {
  std::vector<GroundTruthSample> out;
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
    if (!obj.is_object()) throw Error(ErrorCode::kParseError, "line " + std::to_string(line) + ": expected an object");
    if (obj.contains("header")) continue;
    GroundTruthSample g;
    g.frame = detail::required<std::int64_t>(obj, "frame", line);
    g.person = detail::required<std::int64_t>(obj, "person", line);
    if (obj.contains("pelvis_xyz")) {
      const auto v = detail::required<std::vector<double>>(obj, "pelvis_xyz", line);
      if (v.size() != 3) throw Error(ErrorCode::kSchemaError, "line " + std::to_string(line) + ": pelvis_xyz needs 3 values");
      g.pelvis = Eigen::Vector3d(v[0], v[1], v[2]);
    }
    if (obj.contains("distance")) g.distance = detail::required<double>(obj, "distance", line);
    if (!g.pelvis && !g.distance) {
      throw Error(ErrorCode::kSchemaError, "line " + std::to_string(line) + ": missing field 'pelvis_xyz' or 'distance'");
    }
    out.push_back(g);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic scenes

struct Sinusoid {
  double offset = 0.0;
  double amplitude = 0.0;
  double frequency = 0.0;  // Hz
  double phase = 0.0;      // rad

  double at(double t) const { return offset + amplitude * std::sin(2.0 * defaults::kPi * frequency * t + phase); }
};

struct SyntheticSceneConfig {
  double duration = 10.0;    // s
  double frame_rate = 30.0;  // Hz
  // Footprint path on the ground plane (x, z); walked back and forth at
  // `speed`. A single waypoint means a stationary person.
  std::vector<Eigen::Vector2d> waypoints = {Eigen::Vector2d(0.0, 4.0)};
  double speed = 1.0;  // m/s
  Sinusoid pitch;                               // rad
  Sinusoid roll;                                // rad
  Sinusoid camera_height{defaults::kNominalCameraHeight};  // m
  double attitude_random_walk = 0.0;  // rad / sqrt(s), added to pitch and roll
  double pixel_noise = 0.0;           // px, per coordinate
  CameraModel camera = CameraModel::pinhole(640, 480, 500.0, 500.0, 320.0, 240.0);
  JointHeights heights;
  double joint_half_width = defaults::kJointHalfWidth;
  bool walking_deformation = false;
  double deformation_amplitude = defaults::kWalkDeformationAmplitude;
  double deformation_frequency = defaults::kWalkDeformationFrequency;
  double confidence = 0.9;
  std::int64_t person_id = 0;
  StateBounds bounds;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(frame_rate > 0.0)) throw Error(ErrorCode::kConfigError, "frame_rate must be positive");
    if (!(duration >= 0.0)) throw Error(ErrorCode::kConfigError, "duration must be non-negative");
    if (waypoints.empty()) throw Error(ErrorCode::kConfigError, "at least one waypoint is required");
    if (waypoints.size() > 1 && !(speed > 0.0)) throw Error(ErrorCode::kConfigError, "speed must be positive");
    if (!(pixel_noise >= 0.0) || !(attitude_random_walk >= 0.0)) {
      throw Error(ErrorCode::kConfigError, "noise levels must be non-negative");
    }
    heights.validate();
    camera.validate();
  }
};

struct SceneFrame {
  RawJointFrame joints;
  PoseState truth;
  JointHeights heights;  // instantaneous (differs from config with walking deformation)
  Eigen::Vector3d pelvis;
  double distance = 0.0;
};

namespace detail {

inline Eigen::Vector2d position_on_path(const std::vector<Eigen::Vector2d>& waypoints, double speed, double t) {
  if (waypoints.size() == 1) return waypoints.front();
  double length = 0.0;
  for (std::size_t i = 1; i < waypoints.size(); ++i) length += (waypoints[i] - waypoints[i - 1]).norm();
  if (length == 0.0) return waypoints.front();
  double s = std::fmod(speed * t, 2.0 * length);
  if (s > length) s = 2.0 * length - s;  // walk back
  for (std::size_t i = 1; i < waypoints.size(); ++i) {
    const double seg = (waypoints[i] - waypoints[i - 1]).norm();
    if (s <= seg || i + 1 == waypoints.size()) {
      return seg > 0.0 ? waypoints[i - 1] + (waypoints[i] - waypoints[i - 1]) * std::min(1.0, s / seg) : waypoints[i];
    }
    s -= seg;
  }
  return waypoints.back();
}

// Independent stream per frame so output does not depend on evaluation order.
inline std::mt19937_64 frame_stream(std::uint64_t seed, std::int64_t frame, std::uint32_t purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(frame), static_cast<std::uint32_t>(static_cast<std::uint64_t>(frame) >> 32),
                    purpose};
  return std::mt19937_64(seq);
}

}  // namespace detail

/// Renders a scene frame by frame through the forward model. Left/right
/// joints are placed symmetrically about each body point in pixel space so
/// their midpoint is exactly the body point's projection before noise.
inline std::vector<SceneFrame> generate_scene(const SyntheticSceneConfig& config) {
  config.validate();
  const auto frame_count = static_cast<std::int64_t>(std::floor(config.duration * config.frame_rate + 1e-9)) + 1;

  // Random-walk attitude offsets, accumulated from per-frame draws.
  std::vector<double> walk_pitch(static_cast<std::size_t>(frame_count), 0.0);
  std::vector<double> walk_roll(static_cast<std::size_t>(frame_count), 0.0);
  if (config.attitude_random_walk > 0.0) {
    const double step = config.attitude_random_walk / std::sqrt(config.frame_rate);
    for (std::int64_t f = 1; f < frame_count; ++f) {
      auto rng = detail::frame_stream(config.seed, f, 1);
      std::normal_distribution<double> n(0.0, step);
      walk_pitch[static_cast<std::size_t>(f)] = walk_pitch[static_cast<std::size_t>(f - 1)] + n(rng);
      walk_roll[static_cast<std::size_t>(f)] = walk_roll[static_cast<std::size_t>(f - 1)] + n(rng);
    }
  }

  static const std::array<std::pair<const char*, const char*>, kNumBodyPoints> kSides = {
      std::pair{"left_shoulder", "right_shoulder"}, std::pair{"left_hip", "right_hip"},
      std::pair{"left_knee", "right_knee"}, std::pair{"left_ankle", "right_ankle"}};

  std::vector<SceneFrame> frames;
  frames.reserve(static_cast<std::size_t>(frame_count));
  for (std::int64_t f = 0; f < frame_count; ++f) {
    const double t = static_cast<double>(f) / config.frame_rate;
    SceneFrame out;
    const Eigen::Vector2d footprint = detail::position_on_path(config.waypoints, config.speed, t);
    out.truth.x_f = footprint.x();
    out.truth.z_f = footprint.y();
    out.truth.camera_height = config.camera_height.at(t);
    out.truth.pitch = config.pitch.at(t) + walk_pitch[static_cast<std::size_t>(f)];
    out.truth.roll = config.roll.at(t) + walk_roll[static_cast<std::size_t>(f)];
    if (!config.bounds.contains(out.truth)) {
      throw Error(ErrorCode::kStateOutOfBounds, "scene state leaves the solver bounds at t = " + std::to_string(t));
    }

    out.heights = config.heights;
    if (config.walking_deformation) {
      const double d = config.deformation_amplitude *
                       std::sin(2.0 * defaults::kPi * config.deformation_frequency * t);
      out.heights.knee += d;
      out.heights.ankle = std::max(0.0, out.heights.ankle + d);
    }
    out.pelvis = pelvis_location(out.truth, out.heights);
    out.distance = out.pelvis.norm();

    out.joints.frame_id = f;
    out.joints.timestamp = t;
    out.joints.person_id = config.person_id;

    auto rng = detail::frame_stream(config.seed, f, 2);
    std::normal_distribution<double> noise(0.0, config.pixel_noise > 0.0 ? config.pixel_noise : 1.0);
    const auto jitter = [&](PixelPoint p) {
      if (config.pixel_noise > 0.0) {
        p.u += noise(rng);
        p.v += noise(rng);
      }
      return p;
    };

    const Eigen::Matrix3d rt = rotation_from_angles(out.truth.pitch, out.truth.roll).transpose();
    const auto h = out.heights.as_array();
    for (std::size_t i = 0; i < kNumBodyPoints; ++i) {
      const Eigen::Vector3d ray(out.truth.x_f, out.truth.camera_height - h[i], out.truth.z_f);
      PixelPoint centre, side;
      try {
        centre = project_to_pixel(config.camera, project_camera_point(rt * ray));
        side = project_to_pixel(config.camera,
                                project_camera_point(rt * (ray + Eigen::Vector3d(config.joint_half_width, 0.0, 0.0))));
      } catch (const Error&) {
        continue;  // point not visible in this camera
      }
      const PixelPoint mirrored{2.0 * centre.u - side.u, 2.0 * centre.v - side.v};
      const PixelPoint left = jitter(side);
      const PixelPoint right = jitter(mirrored);
      if (!config.camera.contains(left) || !config.camera.contains(right)) continue;
      out.joints.joints[kSides[i].first] = {left.u, left.v, config.confidence};
      out.joints.joints[kSides[i].second] = {right.u, right.v, config.confidence};
    }
    frames.push_back(std::move(out));
  }
  return frames;
}

inline nlohmann::json ground_truth_json(const SceneFrame& f) {
  return {{"frame", f.joints.frame_id},
          {"person", f.joints.person_id},
          {"pelvis_xyz", {f.pelvis.x(), f.pelvis.y(), f.pelvis.z()}},
          {"distance", f.distance}};
}

inline nlohmann::json true_state_json(const SceneFrame& f) {
  return {{"frame", f.joints.frame_id}, {"t", f.joints.timestamp}, {"person", f.joints.person_id},
          {"X_F", f.truth.x_f},         {"Z_F", f.truth.z_f},      {"h_C", f.truth.camera_height},
          {"theta", f.truth.pitch},     {"phi", f.truth.roll}};
}

}  // namespace monoloc
