#pragma once

// Constant-velocity Kalman tracking of footprints on the virtual ground plane
// with greedy gated nearest-neighbour association.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "monoloc/defaults.hpp"
#include "monoloc/errors.hpp"

namespace monoloc {

enum class TrackStatus { kTentative, kConfirmed, kLost };

inline std::string_view to_string(TrackStatus s) {
  switch (s) {
    case TrackStatus::kTentative: return "tentative";
    case TrackStatus::kConfirmed: return "confirmed";
    case TrackStatus::kLost: return "lost";
  }
  return "unknown";
}

struct Track {
  std::int64_t id = 0;
  Eigen::Vector4d mean = Eigen::Vector4d::Zero();  // x, z, vx, vz
  Eigen::Matrix4d covariance = Eigen::Matrix4d::Identity();
  double last_update_time = 0.0;
  int missed_count = 0;
  int hit_streak = 0;
  TrackStatus status = TrackStatus::kTentative;

  Eigen::Vector2d position() const { return mean.head<2>(); }
  Eigen::Vector2d velocity() const { return mean.tail<2>(); }
};

/// Continuous white-noise acceleration model integrated over dt.
inline Eigen::Matrix4d process_noise(double dt, double accel_sigma) {
  const double q = accel_sigma * accel_sigma;
  const double dt2 = dt * dt, dt3 = dt2 * dt;
  Eigen::Matrix4d Q = Eigen::Matrix4d::Zero();
  for (int axis = 0; axis < 2; ++axis) {
    Q(axis, axis) = q * dt3 / 3.0;
    Q(axis, axis + 2) = Q(axis + 2, axis) = q * dt2 / 2.0;
    Q(axis + 2, axis + 2) = q * dt;
  }
  return Q;
}

inline Track predict(Track track, double dt, double process_noise_accel = defaults::kProcessNoiseAccel) {
  if (!(dt >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "dt must be non-negative");
  if (dt == 0.0) return track;
  Eigen::Matrix4d F = Eigen::Matrix4d::Identity();
  F(0, 2) = dt;
  F(1, 3) = dt;
  track.mean = F * track.mean;
  track.covariance = F * track.covariance * F.transpose() + process_noise(dt, process_noise_accel);
  track.covariance = 0.5 * (track.covariance + track.covariance.transpose()).eval();
  return track;
}

/// Position-only Kalman update (Joseph form, symmetrized).
inline Track update(Track track, const Eigen::Vector2d& measurement,
                    double measurement_noise = defaults::kMeasurementNoise) {
  if (!measurement.allFinite()) throw Error(ErrorCode::kInvalidArgument, "measurement must be finite");
  if (!(measurement_noise > 0.0)) throw Error(ErrorCode::kInvalidArgument, "measurement noise must be positive");
  Eigen::Matrix<double, 2, 4> H = Eigen::Matrix<double, 2, 4>::Zero();
  H(0, 0) = 1.0;
  H(1, 1) = 1.0;
  const Eigen::Matrix2d R = measurement_noise * Eigen::Matrix2d::Identity();
  const Eigen::Matrix2d S = H * track.covariance * H.transpose() + R;
  const Eigen::Matrix<double, 4, 2> K = track.covariance * H.transpose() * S.inverse();
  track.mean += K * (measurement - H * track.mean);
  const Eigen::Matrix4d I_KH = Eigen::Matrix4d::Identity() - K * H;
  track.covariance = I_KH * track.covariance * I_KH.transpose() + K * R * K.transpose();
  track.covariance = 0.5 * (track.covariance + track.covariance.transpose()).eval();
  track.missed_count = 0;
  return track;
}

struct Association {
  std::vector<std::pair<std::size_t, std::size_t>> matches;  // (detection, track)
  std::vector<std::size_t> unmatched_detections;
  std::vector<std::size_t> unmatched_tracks;
};

/// Greedy global nearest neighbour: candidate pairs inside the gate are taken
/// in order of increasing distance, each detection and track at most once.
inline Association associate(std::span<const Eigen::Vector2d> detections, std::span<const Track> tracks,
                             double gate_radius = defaults::kGateRadius) {
  if (!(gate_radius > 0.0)) throw Error(ErrorCode::kInvalidArgument, "gate radius must be positive");
  std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
  for (std::size_t d = 0; d < detections.size(); ++d) {
    for (std::size_t t = 0; t < tracks.size(); ++t) {
      const double dist = (detections[d] - tracks[t].position()).norm();
      if (dist <= gate_radius) pairs.emplace_back(dist, d, t);
    }
  }
  std::sort(pairs.begin(), pairs.end());

  std::vector<bool> det_used(detections.size(), false), trk_used(tracks.size(), false);
  Association out;
  for (const auto& [dist, d, t] : pairs) {
    if (det_used[d] || trk_used[t]) continue;
    det_used[d] = trk_used[t] = true;
    out.matches.emplace_back(d, t);
  }
  for (std::size_t d = 0; d < detections.size(); ++d) {
    if (!det_used[d]) out.unmatched_detections.push_back(d);
  }
  for (std::size_t t = 0; t < tracks.size(); ++t) {
    if (!trk_used[t]) out.unmatched_tracks.push_back(t);
  }
  return out;
}

struct TrackerConfig {
  double process_noise_accel = defaults::kProcessNoiseAccel;
  double measurement_noise = defaults::kMeasurementNoise;
  double initial_velocity_variance = defaults::kInitialVelocityVariance;
  double gate_radius = defaults::kGateRadius;
  int miss_limit = defaults::kMissLimit;
  int confirm_hits = defaults::kConfirmHits;
};

/// Single-writer multi-person tracker. Feed frames in time order.
class Tracker {
 public:
  explicit Tracker(TrackerConfig config = {}) : config_(config) {}

  /// Advances all live tracks to `time`, associates and updates. Returns the
  /// tracks touched this frame, including those that just became lost.
  std::vector<Track> step(double time, std::span<const Eigen::Vector2d> detections) {
    for (Track& t : tracks_) t = predict(t, std::max(0.0, time - t.last_update_time), config_.process_noise_accel);
    for (Track& t : tracks_) t.last_update_time = std::max(t.last_update_time, time);

    const Association assoc = associate(detections, tracks_, config_.gate_radius);
    for (const auto& [d, t] : assoc.matches) {
      Track& track = tracks_[t];
      track = update(track, detections[d], config_.measurement_noise);
      ++track.hit_streak;
      if (track.status == TrackStatus::kTentative && track.hit_streak >= config_.confirm_hits) {
        track.status = TrackStatus::kConfirmed;
      }
    }
    for (std::size_t t : assoc.unmatched_tracks) {
      Track& track = tracks_[t];
      ++track.missed_count;
      track.hit_streak = 0;
      if (track.missed_count > config_.miss_limit) track.status = TrackStatus::kLost;
    }
    for (std::size_t d : assoc.unmatched_detections) {
      Track track;
      track.id = next_id_++;
      track.mean << detections[d], 0.0, 0.0;
      track.covariance = Eigen::Matrix4d::Zero();
      track.covariance(0, 0) = track.covariance(1, 1) = config_.measurement_noise;
      track.covariance(2, 2) = track.covariance(3, 3) = config_.initial_velocity_variance;
      track.last_update_time = time;
      track.hit_streak = 1;
      if (config_.confirm_hits <= 1) track.status = TrackStatus::kConfirmed;
      tracks_.push_back(track);
    }

    std::vector<Track> snapshot = tracks_;
    std::erase_if(tracks_, [](const Track& t) { return t.status == TrackStatus::kLost; });
    return snapshot;
  }

  const std::vector<Track>& tracks() const { return tracks_; }

 private:
  TrackerConfig config_;
  std::vector<Track> tracks_;
  std::int64_t next_id_ = 1;
};

}  // namespace monoloc
