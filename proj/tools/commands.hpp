#pragma once

// Subcommand implementations for the monoloc binary. Each run_* function
// takes parsed options, does its file I/O and returns normally or throws
// monoloc::Error; main() maps errors to exit codes.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "monoloc.hpp"

namespace monoloc::cli {

enum ExitCode : int { kSuccess = 0, kConfigFailure = 2, kDataFailure = 3, kNumericalFailure = 4 };

inline int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfigMissing:
    case ErrorCode::kConfigError:
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kStateOutOfBounds:
      return kConfigFailure;
    case ErrorCode::kParseError:
    case ErrorCode::kSchemaError:
    case ErrorCode::kInsufficientObservations:
    case ErrorCode::kNoVisiblePoints:
    case ErrorCode::kNoMatchedFrames:
    case ErrorCode::kBehindCamera:
    case ErrorCode::kOutOfBounds:
    case ErrorCode::kDegenerateObservation:
      return kDataFailure;
    case ErrorCode::kDistortionDivergence:
    case ErrorCode::kSingularNormalEquations:
    case ErrorCode::kRankDeficient:
    case ErrorCode::kNonPhysicalHeights:
      return kNumericalFailure;
  }
  return kNumericalFailure;
}

// Category printed on stderr; data shortages share one name.
inline std::string category_for(ErrorCode code) {
  if (code == ErrorCode::kInsufficientObservations || code == ErrorCode::kNoVisiblePoints) return "insufficient_data";
  return std::string(to_string(code));
}

struct CommonOptions {
  std::string camera;
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string output;  // "-" or empty means stdout
};

// ---------------------------------------------------------------------------
// Helpers

inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

/// Output sink that is either a file or stdout.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (path.empty() || path == "-") return;
    file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
    if (!*file_) throw Error(ErrorCode::kInvalidArgument, "cannot write '" + path + "'");
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Hash over the bytes of every config-like input, in argument order.
inline std::string config_hash(const std::vector<std::string>& paths) {
  std::string all;
  for (const auto& p : paths) {
    if (p.empty()) continue;
    all += read_file_bytes(p);
    all.push_back('\0');
  }
  return hex64(fnv1a(all));
}

inline Json header_json(const std::string& command, const std::string& hash, std::optional<std::uint64_t> seed) {
  Json h{{"tool", "monoloc"}, {"version", MONOLOC_VERSION}, {"command", command}, {"config_hash", hash}};
  h["seed"] = seed ? Json(*seed) : Json(nullptr);
  return h;
}

inline std::string header_csv(const std::string& command, const std::string& hash, std::optional<std::uint64_t> seed) {
  return "# monoloc " MONOLOC_VERSION " command=" + command + " config_hash=" + hash +
         " seed=" + (seed ? std::to_string(*seed) : std::string("none")) + "\n";
}

inline RunConfig load_run_config(const std::string& path) {
  if (path.empty()) return {};
  return parse_run_config(read_json_file(path, "config"));
}

inline CameraModel require_camera(const std::string& path) {
  if (path.empty()) throw Error(ErrorCode::kConfigMissing, "--camera is required");
  return load_camera(path);
}

inline std::vector<RawJointFrame> read_frames(const std::string& path) {
  if (path.empty()) throw Error(ErrorCode::kInvalidArgument, "--frames is required");
  return load_frames(path);
}

/// Profiles keyed by person. A lone profile applies to every person.
class ProfileSet {
 public:
  explicit ProfileSet(const std::vector<std::string>& paths) {
    if (paths.empty()) throw Error(ErrorCode::kConfigMissing, "--profile is required");
    for (const auto& p : paths) {
      const PersonProfile profile = parse_profile(read_json_file(p, "profile"));
      profiles_[profile.person] = profile.heights;
    }
  }

  std::optional<JointHeights> find(std::int64_t person) const {
    if (profiles_.size() == 1) return profiles_.begin()->second;
    const auto it = profiles_.find(person);
    if (it == profiles_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::map<std::int64_t, JointHeights> profiles_;
};

// ---------------------------------------------------------------------------
// Estimates table (localize output)

inline constexpr const char* kEstimateColumns =
    "frame,t,person,X_F,Z_F,h_C,theta_deg,phi_deg,pelvis_x,pelvis_y,pelvis_z,distance,cost,converged,skipped";

struct EstimateRow {
  std::int64_t frame = 0;
  double t = 0.0;
  std::int64_t person = 0;
  std::optional<LocalizationResult> result;
  Eigen::Vector3d pelvis = Eigen::Vector3d::Zero();
  std::string skipped;  // empty when solved
};

inline EstimateRow localize_frame(const RawJointFrame& frame, const CameraModel& camera, const ProfileSet& profiles,
                                  const RunConfig& config) {
  EstimateRow row{frame.frame_id, frame.timestamp, frame.person_id, std::nullopt, {}, {}};
  const auto heights = profiles.find(frame.person_id);
  if (!heights) {
    row.skipped = "no_profile";
    return row;
  }
  try {
    const FourPointObservation obs = reduce_to_four_points(frame, camera, config.confidence_threshold);
    row.result = solve_localization(obs, *heights, config.weights, config.solver);
    row.pelvis = pelvis_location(row.result->state, *heights);
  } catch (const Error& e) {
    row.skipped = category_for(e.code()) == "insufficient_data" ? "insufficient_observations"
                                                                : std::string(to_string(e.code()));
  }
  return row;
}

inline std::string estimate_csv_line(const EstimateRow& r) {
  std::string line = std::to_string(r.frame) + "," + format_number(r.t) + "," + std::to_string(r.person);
  if (!r.result) return line + ",,,,,,,,,,,," + r.skipped;
  const PoseState& s = r.result->state;
  for (double v : {s.x_f, s.z_f, s.camera_height, s.pitch / defaults::kDegToRad, s.roll / defaults::kDegToRad,
                   r.pelvis.x(), r.pelvis.y(), r.pelvis.z(), r.pelvis.norm(), r.result->final_cost}) {
    line += "," + format_number(v);
  }
  return line + "," + (r.result->converged ? "1" : "0") + ",";
}

/// Parsed estimates row; only the columns downstream consumers need.
struct EstimateRecord {
  std::int64_t frame = 0;
  double t = 0.0;
  std::int64_t person = 0;
  bool solved = false;
  double x_f = 0.0, z_f = 0.0;
  Eigen::Vector3d pelvis = Eigen::Vector3d::Zero();
};

inline std::vector<EstimateRecord> load_estimates_csv(std::istream& in) {
  std::vector<EstimateRecord> out;
  std::string text;
  std::size_t line = 0;
  std::map<std::string, std::size_t> column;
  const auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!s.empty() && s.back() == ',') cells.emplace_back();
    return cells;
  };
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.empty() || text[0] == '#') continue;
    const auto cells = split(text);
    if (column.empty()) {
      for (std::size_t i = 0; i < cells.size(); ++i) column[cells[i]] = i;
      for (const char* need : {"frame", "t", "person", "X_F", "Z_F", "pelvis_x", "pelvis_y", "pelvis_z", "skipped"}) {
        if (!column.contains(need)) throw Error(ErrorCode::kSchemaError, "estimates header lacks column '" + std::string(need) + "'");
      }
      continue;
    }
    const auto cell = [&](const char* name) -> const std::string& {
      const std::size_t i = column.at(name);
      static const std::string empty;
      return i < cells.size() ? cells[i] : empty;
    };
    const auto number = [&](const char* name) {
      try {
        std::size_t used = 0;
        const double v = std::stod(cell(name), &used);
        if (used != cell(name).size()) throw std::invalid_argument("trailing");
        return v;
      } catch (const std::exception&) {
        throw Error(ErrorCode::kParseError, "estimates line " + std::to_string(line) + ": bad value in column '" + name + "'");
      }
    };
    EstimateRecord r;
    r.frame = static_cast<std::int64_t>(number("frame"));
    r.t = number("t");
    r.person = static_cast<std::int64_t>(number("person"));
    r.solved = cell("skipped").empty();
    if (r.solved) {
      r.x_f = number("X_F");
      r.z_f = number("Z_F");
      r.pelvis = {number("pelvis_x"), number("pelvis_y"), number("pelvis_z")};
    }
    out.push_back(r);
  }
  return out;
}

inline std::vector<EstimateRecord> load_estimates_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kParseError, "cannot open estimates file '" + path + "'");
  return load_estimates_csv(in);
}

// ---------------------------------------------------------------------------
// calibrate

struct CalibrateOptions {
  CommonOptions common;
  std::string frames;
  std::string static_pose;
};

inline void run_calibrate(const CalibrateOptions& opt, std::ostream& report = std::cerr) {
  const CameraModel camera = require_camera(opt.common.camera);
  const RunConfig run = load_run_config(opt.common.config);
  if (opt.static_pose.empty()) throw Error(ErrorCode::kConfigMissing, "--static-pose is required");
  const StaticPoseConfig pose = parse_static_pose(read_json_file(opt.static_pose, "static pose"), run.weights);
  const auto frames = read_frames(opt.frames);

  std::vector<FourPointObservation> usable;
  for (const auto& f : frames) {
    if (f.person_id != pose.person) continue;
    try {
      const auto obs = reduce_to_four_points(f, camera, run.confidence_threshold);
      if (obs.visible_count() == static_cast<int>(kNumBodyPoints)) usable.push_back(obs);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNoVisiblePoints) throw;
    }
  }
  if (usable.empty()) {
    throw Error(ErrorCode::kInsufficientObservations,
                "no frame of person " + std::to_string(pose.person) + " shows all four points");
  }

  const CalibrationResult result = calibrate_heights(usable, pose.calibration);
  report << "calibrated from " << usable.size() << " frame(s); condition number "
         << format_number(result.condition.condition_number) << " (singular values "
         << format_number(result.condition.singular_values.minCoeff()) << " to "
         << format_number(result.condition.singular_values.maxCoeff()) << ")\n";
  if (result.condition.condition_number > 1e6) report << "warning: calibration system is poorly conditioned\n";

  Json profile = to_json(PersonProfile{pose.person, result.heights});
  profile["header"] = header_json("calibrate", config_hash({opt.common.camera, opt.common.config, opt.static_pose}),
                                  opt.common.seed);
  Output out(opt.common.output);
  out.stream() << profile.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// localize

struct LocalizeOptions {
  CommonOptions common;
  std::string frames;
  std::vector<std::string> profiles;
};

inline std::vector<EstimateRow> localize_all(const std::vector<RawJointFrame>& frames, const CameraModel& camera,
                                             const ProfileSet& profiles, const RunConfig& run) {
  std::vector<EstimateRow> rows;
  rows.reserve(frames.size());
  for (const auto& f : frames) rows.push_back(localize_frame(f, camera, profiles, run));
  return rows;
}

inline void run_localize(const LocalizeOptions& opt) {
  const CameraModel camera = require_camera(opt.common.camera);
  const RunConfig run = load_run_config(opt.common.config);
  const ProfileSet profiles(opt.profiles);
  const auto frames = read_frames(opt.frames);
  const auto rows = localize_all(frames, camera, profiles, run);

  std::vector<std::string> inputs{opt.common.camera, opt.common.config};
  inputs.insert(inputs.end(), opt.profiles.begin(), opt.profiles.end());
  Output out(opt.common.output);
  std::ostream& os = out.stream();
  os << header_csv("localize", config_hash(inputs), opt.common.seed) << kEstimateColumns << '\n';
  for (const auto& r : rows) os << estimate_csv_line(r) << '\n';
}

// ---------------------------------------------------------------------------
// track

struct TrackOptions {
  CommonOptions common;
  std::string estimates;  // localize CSV; alternative to frames + profile
  std::string frames;
  std::vector<std::string> profiles;
};

inline void run_track(const TrackOptions& opt) {
  const RunConfig run = load_run_config(opt.common.config);
  std::vector<EstimateRecord> records;
  std::vector<std::string> inputs{opt.common.config};
  if (!opt.estimates.empty()) {
    records = load_estimates_csv(opt.estimates);
  } else {
    const CameraModel camera = require_camera(opt.common.camera);
    const ProfileSet profiles(opt.profiles);
    inputs.push_back(opt.common.camera);
    inputs.insert(inputs.end(), opt.profiles.begin(), opt.profiles.end());
    for (const auto& r : localize_all(read_frames(opt.frames), camera, profiles, run)) {
      EstimateRecord rec{r.frame, r.t, r.person, r.result.has_value(), 0.0, 0.0, r.pelvis};
      if (r.result) {
        rec.x_f = r.result->state.x_f;
        rec.z_f = r.result->state.z_f;
      }
      records.push_back(rec);
    }
  }

  Output out(opt.common.output);
  std::ostream& os = out.stream();
  os << header_csv("track", config_hash(inputs), opt.common.seed) << "frame,t,track_id,x,z,vx,vz,status\n";

  Tracker tracker(run.tracker);
  // Consecutive rows with the same frame id form one tracker step.
  for (std::size_t i = 0; i < records.size();) {
    const std::int64_t frame = records[i].frame;
    const double t = records[i].t;
    std::vector<Eigen::Vector2d> detections;
    for (; i < records.size() && records[i].frame == frame; ++i) {
      if (records[i].solved) detections.emplace_back(records[i].x_f, records[i].z_f);
    }
    for (const Track& track : tracker.step(t, detections)) {
      os << frame << ',' << format_number(t) << ',' << track.id;
      for (double v : {track.mean[0], track.mean[1], track.mean[2], track.mean[3]}) os << ',' << format_number(v);
      os << ',' << to_string(track.status) << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// eval

struct EvalOptions {
  CommonOptions common;
  std::string estimates;
  std::string ground_truth;
  std::string per_frame;  // optional per-frame error CSV
};

inline MetricReport evaluate_files(const std::string& estimates_path, const std::string& ground_truth_path) {
  std::vector<EstimateSample> estimates;
  for (const auto& r : load_estimates_csv(estimates_path)) {
    if (r.solved) estimates.push_back({r.frame, r.person, r.pelvis});
  }
  std::ifstream gt(ground_truth_path);
  if (!gt) throw Error(ErrorCode::kParseError, "cannot open ground-truth file '" + ground_truth_path + "'");
  return compute_metrics(estimates, load_ground_truth(gt));
}

inline void run_eval(const EvalOptions& opt) {
  if (opt.estimates.empty() || opt.ground_truth.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "--estimates and --ground-truth are required");
  }
  const MetricReport report = evaluate_files(opt.estimates, opt.ground_truth);
  const std::string hash = config_hash({opt.common.config});

  Json j = to_json(report);
  j["header"] = header_json("eval", hash, opt.common.seed);
  Output out(opt.common.output);
  out.stream() << j.dump(2) << '\n';

  if (!opt.per_frame.empty()) {
    Output pf(opt.per_frame);
    std::ostream& os = pf.stream();
    os << header_csv("eval", hash, opt.common.seed) << "frame,person,location_error,distance_error\n";
    for (const auto& e : report.per_frame) {
      os << e.frame << ',' << e.person << ',' << (e.location_error ? format_number(*e.location_error) : "") << ','
         << format_number(e.distance_error) << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// synth

struct SynthOptions {
  CommonOptions common;  // config = scene file, output = path prefix
};

struct SynthOutputs {
  std::string frames, ground_truth, states;
};

inline SynthOutputs synth_output_paths(const std::string& prefix) {
  return {prefix + ".frames.jsonl", prefix + ".gt.jsonl", prefix + ".states.jsonl"};
}

inline SynthOutputs run_synth(const SynthOptions& opt) {
  if (opt.common.config.empty()) throw Error(ErrorCode::kConfigMissing, "--config (scene file) is required");
  if (opt.common.output.empty() || opt.common.output == "-") {
    throw Error(ErrorCode::kInvalidArgument, "--output must be a path prefix for the three scene files");
  }
  SyntheticSceneConfig scene = parse_scene_config(read_json_file(opt.common.config, "scene"));
  if (!opt.common.camera.empty()) scene.camera = load_camera(opt.common.camera);
  if (opt.common.seed) scene.seed = *opt.common.seed;
  const auto frames = generate_scene(scene);

  const Json header{{"header", header_json("synth", config_hash({opt.common.config, opt.common.camera}), scene.seed)}};
  const SynthOutputs paths = synth_output_paths(opt.common.output);
  Output f(paths.frames), g(paths.ground_truth), s(paths.states);
  f.stream() << header.dump() << '\n';
  g.stream() << header.dump() << '\n';
  s.stream() << header.dump() << '\n';
  for (const auto& frame : frames) {
    f.stream() << to_json(frame.joints).dump() << '\n';
    g.stream() << ground_truth_json(frame).dump() << '\n';
    s.stream() << true_state_json(frame).dump() << '\n';
  }
  return paths;
}

}  // namespace monoloc::cli
