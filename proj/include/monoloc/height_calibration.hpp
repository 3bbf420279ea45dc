#pragma once

// Static-pose calibration of the person's joint heights. With the camera
// attitude and height known, each visible point gives two equations that are
// linear in the per-frame footprint (X_F, Z_F) and the shared joint heights
// once the projection is cross-multiplied by depth:
//
//   P = X c1 + (h_C - h_i) c2 + Z c3,  c_j = columns of R^T
//   P.x - n.x P.z = 0,  P.y - n.y P.z = 0
//
// These equations are invariant under (X, Z, h_C - h_i) -> s (X, Z, h_C - h_i):
// a taller person further away projects identically. One joint height is
// therefore fixed as the scale reference (the ankle by default).

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "monoloc/defaults.hpp"
#include "monoloc/errors.hpp"
#include "monoloc/observation.hpp"
#include "monoloc/pose_solver.hpp"

namespace monoloc {

struct CalibrationConfig {
  double pitch = 0.0;
  double roll = 0.0;
  double camera_height = defaults::kNominalCameraHeight;
  WeightConfig weights;
  BodyPoint reference_point = BodyPoint::kAnkle;
  // nullopt leaves the scale free; the system is then rank deficient.
  std::optional<double> reference_height = defaults::kReferenceAnkleHeight;
};

struct CalibrationSystem {
  Eigen::MatrixXd matrix;
  Eigen::VectorXd rhs;
  int frames = 0;
  // Column index of each joint height, -1 for the fixed reference.
  std::array<int, kNumBodyPoints> height_column{};
};

struct ConditionReport {
  Eigen::VectorXd singular_values;  // descending
  double condition_number = 0.0;    // +inf when rank deficient
};

struct CalibrationResult {
  JointHeights heights;
  std::vector<std::pair<double, double>> footprints;  // (X_F, Z_F) per frame
  ConditionReport condition;
};

inline CalibrationSystem assemble_calibration_system(const std::vector<FourPointObservation>& observations,
                                                     const CalibrationConfig& config) {
  if (observations.empty()) throw Error(ErrorCode::kInsufficientObservations, "calibration needs at least one frame");
  if (!std::isfinite(config.pitch) || !std::isfinite(config.roll) || !std::isfinite(config.camera_height)) {
    throw Error(ErrorCode::kInvalidArgument, "known attitude and camera height must be finite");
  }
  for (const auto& obs : observations) {
    if (obs.visible_count() != static_cast<int>(kNumBodyPoints)) {
      throw Error(ErrorCode::kInsufficientObservations,
                  "calibration frame " + std::to_string(obs.frame_id) + " does not show all four points");
    }
  }

  CalibrationSystem sys;
  sys.frames = static_cast<int>(observations.size());
  int next = 2 * sys.frames;
  for (std::size_t i = 0; i < kNumBodyPoints; ++i) {
    const bool fixed = config.reference_height && i == index(config.reference_point);
    sys.height_column[i] = fixed ? -1 : next++;
  }
  const int rows = 8 * sys.frames;
  sys.matrix = Eigen::MatrixXd::Zero(rows, next);
  sys.rhs = Eigen::VectorXd::Zero(rows);

  const Eigen::Matrix3d rt = rotation_from_angles(config.pitch, config.roll).transpose();
  const Eigen::Vector3d c1 = rt.col(0), c2 = rt.col(1), c3 = rt.col(2);
  const auto w = config.weights.as_array();

  int row = 0;
  for (int f = 0; f < sys.frames; ++f) {
    const auto& obs = observations[static_cast<std::size_t>(f)];
    for (std::size_t i = 0; i < kNumBodyPoints; ++i) {
      const double sw = std::sqrt(w[i]);
      const double n[2] = {obs.points[i].x, obs.points[i].y};
      for (int axis = 0; axis < 2; ++axis) {
        const double a_x = c1[axis] - n[axis] * c1.z();
        const double a_z = c3[axis] - n[axis] * c3.z();
        const double a_h = c2[axis] - n[axis] * c2.z();
        sys.matrix(row, 2 * f) = sw * a_x;
        sys.matrix(row, 2 * f + 1) = sw * a_z;
        sys.rhs[row] = -sw * config.camera_height * a_h;
        if (sys.height_column[i] >= 0) {
          sys.matrix(row, sys.height_column[i]) = -sw * a_h;
        } else {
          sys.rhs[row] += sw * a_h * *config.reference_height;
        }
        ++row;
      }
    }
  }
  return sys;
}

inline ConditionReport condition_report(const Eigen::MatrixXd& matrix) {
  ConditionReport report;
  report.singular_values = Eigen::JacobiSVD<Eigen::MatrixXd>(matrix).singularValues();
  const Eigen::Index n = report.singular_values.size();
  if (n == 0) return report;
  const double largest = report.singular_values[0];
  const double smallest = report.singular_values[n - 1];
  // Values at round-off level count as zero, and fewer rows than columns
  // means implicit zero singular values.
  const double roundoff = largest * static_cast<double>(std::max(matrix.rows(), matrix.cols())) *
                          std::numeric_limits<double>::epsilon();
  const bool wide = matrix.rows() < matrix.cols();
  report.condition_number =
      (smallest > roundoff && !wide) ? largest / smallest : std::numeric_limits<double>::infinity();
  return report;
}

/// Solves the calibration system by SVD (minimum-norm least squares) and
/// checks the recovered heights for physical ordering.
inline CalibrationResult calibrate_heights(const std::vector<FourPointObservation>& observations,
                                           const CalibrationConfig& config = {}) {
  const CalibrationSystem sys = assemble_calibration_system(observations, config);
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(sys.matrix, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double threshold = 1e-10 * std::max(1.0, sv[0]);
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) rank += sv[i] > threshold;
  if (rank < sys.matrix.cols()) {
    throw Error(ErrorCode::kRankDeficient, "calibration system has rank " + std::to_string(rank) + " < " +
                                               std::to_string(sys.matrix.cols()) + " unknowns");
  }
  const Eigen::VectorXd solution = svd.solve(sys.rhs);

  CalibrationResult result;
  std::array<double, kNumBodyPoints> h{};
  for (std::size_t i = 0; i < kNumBodyPoints; ++i) {
    h[i] = sys.height_column[i] >= 0 ? solution[sys.height_column[i]] : *config.reference_height;
  }
  result.heights = {h[0], h[1], h[2], h[3]};
  for (int f = 0; f < sys.frames; ++f) result.footprints.emplace_back(solution[2 * f], solution[2 * f + 1]);
  result.condition = condition_report(sys.matrix);
  if (!result.heights.physical()) {
    throw Error(ErrorCode::kNonPhysicalHeights, "recovered heights violate neck > hip > knee > ankle >= 0");
  }
  return result;
}

}  // namespace monoloc
