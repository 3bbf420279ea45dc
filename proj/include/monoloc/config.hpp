#pragma once

// JSON configuration files: camera, run-level solver/tracker settings, static
// calibration pose, person profile and synthetic scene. Unknown keys are
// rejected by name so that typos never fall back to defaults silently.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "monoloc/camera_models.hpp"
#include "monoloc/defaults.hpp"
#include "monoloc/errors.hpp"
#include "monoloc/evalkit.hpp"
#include "monoloc/height_calibration.hpp"
#include "monoloc/pose_solver.hpp"
#include "monoloc/tracking.hpp"

namespace monoloc {

using Json = nlohmann::json;

/// Reads JSON object members while remembering which were consumed.
class ConfigObject {
 public:
  ConfigObject(const Json& obj, std::string context) : obj_(obj), context_(std::move(context)) {
    if (!obj_.is_object()) throw Error(ErrorCode::kConfigError, context_ + ": expected an object");
  }

  bool has(const char* key) const { return obj_.contains(key); }

  // Returns the raw member and marks it consumed.
  const Json& raw(const char* key) {
    used_.insert(key);
    return obj_.at(key);
  }

  template <typename T>
  void read(const char* key, T& out) {
    if (!obj_.contains(key)) return;
    out = get<T>(key);
  }

  template <typename T>
  T require(const char* key) {
    if (!obj_.contains(key)) throw Error(ErrorCode::kConfigError, context_ + ": missing field '" + key + "'");
    return get<T>(key);
  }

  ConfigObject child(const char* key) {
    used_.insert(key);
    return ConfigObject(obj_.at(key), context_ + "." + key);
  }

  // Rejects every key that was never read.
  void finish() const {
    for (const auto& [key, value] : obj_.items()) {
      if (!used_.contains(key)) throw Error(ErrorCode::kConfigError, context_ + ": unknown field '" + key + "'");
    }
  }

 private:
  template <typename T>
  T get(const char* key) {
    used_.insert(key);
    try {
      return obj_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw Error(ErrorCode::kConfigError, context_ + ": field '" + key + "' has the wrong type");
    }
  }

  const Json& obj_;
  std::string context_;
  std::set<std::string> used_;
};

inline Json read_json_file(const std::string& path, const std::string& what) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::kConfigMissing, what + " file '" + path + "' does not exist");
  }
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kConfigMissing, "cannot open " + what + " file '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kConfigError, what + " file '" + path + "': " + e.what());
  }
}

/// 64-bit FNV-1a, used for the config hash in output headers.
inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// ---------------------------------------------------------------------------
// Camera

inline CameraModel parse_camera(const Json& j) {
  ConfigObject o(j, "camera");
  const auto variant = o.require<std::string>("variant");
  CameraModel cam;
  if (variant == "pinhole") {
    cam.variant = CameraVariant::kPinhole;
  } else if (variant == "fisheye") {
    cam.variant = CameraVariant::kFisheyeEquidistant;
  } else if (variant == "equirectangular") {
    cam.variant = CameraVariant::kEquirectangular;
  } else {
    throw Error(ErrorCode::kConfigError, "camera: unknown variant '" + variant + "'");
  }
  cam.width = o.require<int>("width");
  cam.height = o.require<int>("height");
  o.read("max_normalized", cam.max_normalized);
  if (cam.variant != CameraVariant::kEquirectangular) {
    cam.fx = o.require<double>("fx");
    cam.fy = o.require<double>("fy");
    cam.cx = o.require<double>("cx");
    cam.cy = o.require<double>("cy");
    std::vector<double> k;
    o.read("distortion", k);
    if (k.size() > 4) throw Error(ErrorCode::kConfigError, "camera: at most 4 distortion coefficients");
    std::copy(k.begin(), k.end(), cam.distortion.begin());
  }
  o.finish();
  cam.validate();
  return cam;
}

inline Json to_json(const CameraModel& cam) {
  Json j{{"variant", std::string(to_string(cam.variant))}, {"width", cam.width}, {"height", cam.height}};
  if (cam.variant != CameraVariant::kEquirectangular) {
    j["fx"] = cam.fx;
    j["fy"] = cam.fy;
    j["cx"] = cam.cx;
    j["cy"] = cam.cy;
    j["distortion"] = cam.distortion;
  }
  return j;
}

inline CameraModel load_camera(const std::string& path) { return parse_camera(read_json_file(path, "camera")); }

// ---------------------------------------------------------------------------
// Run configuration

struct RunConfig {
  SolverConfig solver;
  WeightConfig weights;
  double confidence_threshold = defaults::kConfidenceThreshold;
  TrackerConfig tracker;
};

namespace detail {

inline void read_range(ConfigObject& o, const char* key, double& lo, double& hi, double scale = 1.0) {
  if (!o.has(key)) return;
  const auto v = o.require<std::vector<double>>(key);
  if (v.size() != 2) throw Error(ErrorCode::kConfigError, std::string("bounds.") + key + " must be [lower, upper]");
  lo = v[0] * scale;
  hi = v[1] * scale;
}

inline WeightConfig parse_weights(ConfigObject o) {
  WeightConfig w;
  o.read("neck", w.neck);
  o.read("hip", w.hip);
  o.read("knee", w.knee);
  o.read("ankle", w.ankle);
  o.finish();
  w.validate();
  return w;
}

}  // namespace detail

inline RunConfig parse_run_config(const Json& j) {
  RunConfig rc;
  ConfigObject o(j, "config");
  if (o.has("solver")) {
    ConfigObject s = o.child("solver");
    SolverConfig& c = rc.solver;
    if (s.has("bounds")) {
      ConfigObject b = s.child("bounds");
      detail::read_range(b, "x_f", c.bounds.lower.x_f, c.bounds.upper.x_f);
      detail::read_range(b, "z_f", c.bounds.lower.z_f, c.bounds.upper.z_f);
      detail::read_range(b, "camera_height", c.bounds.lower.camera_height, c.bounds.upper.camera_height);
      detail::read_range(b, "pitch_deg", c.bounds.lower.pitch, c.bounds.upper.pitch, defaults::kDegToRad);
      detail::read_range(b, "roll_deg", c.bounds.lower.roll, c.bounds.upper.roll, defaults::kDegToRad);
      b.finish();
    }
    s.read("cauchy_scale", c.cauchy_scale);
    s.read("ftol", c.ftol);
    s.read("xtol", c.xtol);
    s.read("gtol", c.gtol);
    s.read("max_inner_iterations", c.max_inner_iterations);
    s.read("max_outer_alternations", c.max_outer_alternations);
    s.read("initial_trust_radius", c.initial_trust_radius);
    s.read("nominal_camera_height", c.nominal_camera_height);
    s.read("joint_refinement", c.joint_refinement);
    s.read("max_joint_iterations", c.max_joint_iterations);
    s.finish();
    c.validate();
  }
  if (o.has("weights")) rc.weights = detail::parse_weights(o.child("weights"));
  o.read("confidence_threshold", rc.confidence_threshold);
  if (!(rc.confidence_threshold >= 0.0 && rc.confidence_threshold < 1.0)) {
    throw Error(ErrorCode::kConfigError, "config: confidence_threshold must be in [0, 1)");
  }
  if (o.has("tracker")) {
    ConfigObject t = o.child("tracker");
    TrackerConfig& c = rc.tracker;
    t.read("process_noise_accel", c.process_noise_accel);
    t.read("measurement_noise", c.measurement_noise);
    t.read("initial_velocity_variance", c.initial_velocity_variance);
    t.read("gate_radius", c.gate_radius);
    t.read("miss_limit", c.miss_limit);
    t.read("confirm_hits", c.confirm_hits);
    t.finish();
    if (!(c.process_noise_accel >= 0.0) || !(c.measurement_noise > 0.0) || !(c.initial_velocity_variance > 0.0) ||
        !(c.gate_radius > 0.0) || c.miss_limit < 0 || c.confirm_hits < 1) {
      throw Error(ErrorCode::kConfigError, "config.tracker: values out of range");
    }
  }
  o.finish();
  return rc;
}

// ---------------------------------------------------------------------------
// Static calibration pose

struct StaticPoseConfig {
  std::int64_t person = 0;
  CalibrationConfig calibration;
};

inline std::optional<BodyPoint> body_point_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kNumBodyPoints; ++i) {
    if (name == kBodyPointNames[i]) return static_cast<BodyPoint>(i);
  }
  return std::nullopt;
}

inline StaticPoseConfig parse_static_pose(const Json& j, const WeightConfig& weights = {}) {
  StaticPoseConfig sp;
  sp.calibration.weights = weights;
  ConfigObject o(j, "static_pose");
  o.read("person", sp.person);
  double pitch_deg = 0.0, roll_deg = 0.0;
  o.read("pitch_deg", pitch_deg);
  o.read("roll_deg", roll_deg);
  sp.calibration.pitch = pitch_deg * defaults::kDegToRad;
  sp.calibration.roll = roll_deg * defaults::kDegToRad;
  o.read("camera_height", sp.calibration.camera_height);
  if (o.has("reference_point")) {
    const auto name = o.require<std::string>("reference_point");
    const auto p = body_point_from_name(name);
    if (!p) throw Error(ErrorCode::kConfigError, "static_pose: unknown reference_point '" + name + "'");
    sp.calibration.reference_point = *p;
  }
  if (o.has("reference_height")) {
    if (o.raw("reference_height").is_null()) {
      sp.calibration.reference_height.reset();
    } else {
      sp.calibration.reference_height = o.require<double>("reference_height");
    }
  }
  if (o.has("weights")) sp.calibration.weights = detail::parse_weights(o.child("weights"));
  o.finish();
  if (!(sp.calibration.camera_height > 0.0)) throw Error(ErrorCode::kConfigError, "static_pose: camera_height must be positive");
  return sp;
}

// ---------------------------------------------------------------------------
// Person profile

struct PersonProfile {
  std::int64_t person = 0;
  JointHeights heights;
};

inline PersonProfile parse_profile(const Json& j) {
  PersonProfile p;
  ConfigObject o(j, "profile");
  if (o.has("header")) o.raw("header");  // reproducibility header written by calibrate
  o.read("person", p.person);
  ConfigObject h = o.child("heights");
  p.heights.neck = h.require<double>("neck");
  p.heights.hip = h.require<double>("hip");
  p.heights.knee = h.require<double>("knee");
  p.heights.ankle = h.require<double>("ankle");
  h.finish();
  o.finish();
  if (!p.heights.physical()) {
    throw Error(ErrorCode::kConfigError, "profile: heights must satisfy neck > hip > knee > ankle >= 0");
  }
  return p;
}

inline Json to_json(const PersonProfile& p) {
  return {{"person", p.person},
          {"heights", {{"neck", p.heights.neck}, {"hip", p.heights.hip}, {"knee", p.heights.knee}, {"ankle", p.heights.ankle}}}};
}

// ---------------------------------------------------------------------------
// Synthetic scene

namespace detail {

inline Sinusoid parse_sinusoid(ConfigObject o, double scale) {
  Sinusoid s;
  double phase_deg = 0.0;
  o.read("offset", s.offset);
  o.read("amplitude", s.amplitude);
  o.read("frequency", s.frequency);
  o.read("phase_deg", phase_deg);
  o.finish();
  s.offset *= scale;
  s.amplitude *= scale;
  s.phase = phase_deg * defaults::kDegToRad;
  return s;
}

}  // namespace detail

/// Angles in the file are degrees. A "camera" member is optional when the
/// camera comes from its own file.
inline SyntheticSceneConfig parse_scene_config(const Json& j) {
  SyntheticSceneConfig c;
  ConfigObject o(j, "scene");
  o.read("duration", c.duration);
  o.read("frame_rate", c.frame_rate);
  if (o.has("waypoints")) {
    const auto wp = o.require<std::vector<std::vector<double>>>("waypoints");
    c.waypoints.clear();
    for (const auto& p : wp) {
      if (p.size() != 2) throw Error(ErrorCode::kConfigError, "scene: waypoints are [x, z] pairs");
      c.waypoints.emplace_back(p[0], p[1]);
    }
  }
  o.read("speed", c.speed);
  if (o.has("pitch_deg")) c.pitch = detail::parse_sinusoid(o.child("pitch_deg"), defaults::kDegToRad);
  if (o.has("roll_deg")) c.roll = detail::parse_sinusoid(o.child("roll_deg"), defaults::kDegToRad);
  if (o.has("camera_height")) c.camera_height = detail::parse_sinusoid(o.child("camera_height"), 1.0);
  double walk_deg = 0.0;
  o.read("attitude_random_walk_deg", walk_deg);
  c.attitude_random_walk = walk_deg * defaults::kDegToRad;
  o.read("pixel_noise", c.pixel_noise);
  if (o.has("camera")) c.camera = parse_camera(o.raw("camera"));
  if (o.has("heights")) {
    ConfigObject h = o.child("heights");
    h.read("neck", c.heights.neck);
    h.read("hip", c.heights.hip);
    h.read("knee", c.heights.knee);
    h.read("ankle", c.heights.ankle);
    h.finish();
  }
  o.read("joint_half_width", c.joint_half_width);
  o.read("walking_deformation", c.walking_deformation);
  o.read("deformation_amplitude", c.deformation_amplitude);
  o.read("deformation_frequency", c.deformation_frequency);
  o.read("confidence", c.confidence);
  o.read("person", c.person_id);
  o.read("seed", c.seed);
  o.finish();
  c.validate();
  return c;
}

}  // namespace monoloc
