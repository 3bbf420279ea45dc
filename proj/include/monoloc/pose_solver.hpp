#pragma once

// Joint estimation of camera attitude (pitch, roll), camera height and the
// person's footprint on the virtual ground plane from a four-point
// observation.
//
// Geometry. In the level robot frame the ray from the camera centre to body
// point i is CP_i = (X_F, h_C - h_i, Z_F). The camera-to-robot rotation is
// R = R_z(roll) R_x(pitch) with the elementary right-handed matrices, and
// points reach the camera frame through R^T (= R^-1). With these matrices a
// positive pitch turns the optical axis towards robot -y, i.e. upwards, and a
// point straight ahead then appears below the image centre.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "monoloc/camera_models.hpp"
#include "monoloc/defaults.hpp"
#include "monoloc/dogbox.hpp"
#include "monoloc/errors.hpp"
#include "monoloc/observation.hpp"
#include "monoloc/robust_loss.hpp"

namespace monoloc {

inline constexpr int kStateSize = 5;
using StateVector = Eigen::Matrix<double, kStateSize, 1>;

struct PoseState {
  double x_f = 0.0;            // lateral footprint offset, m
  double z_f = 1.0;            // forward footprint distance, m
  double camera_height = 0.5;  // h_C, m
  double pitch = 0.0;          // theta, rad
  double roll = 0.0;           // phi, rad

  StateVector vector() const { return (StateVector() << x_f, z_f, camera_height, pitch, roll).finished(); }

  static PoseState from_vector(const Eigen::Ref<const Eigen::VectorXd>& v) { return {v[0], v[1], v[2], v[3], v[4]}; }
};

struct JointHeights {
  double neck = 1.5;
  double hip = 1.0;
  double knee = 0.5;
  double ankle = 0.1;

  std::array<double, kNumBodyPoints> as_array() const { return {neck, hip, knee, ankle}; }

  bool physical() const { return neck > hip && hip > knee && knee > ankle && ankle >= 0.0; }

  void validate() const {
    if (!physical()) {
      throw Error(ErrorCode::kNonPhysicalHeights, "joint heights must satisfy neck > hip > knee > ankle >= 0");
    }
  }
};

struct WeightConfig {
  double neck = defaults::kWeightNeck;
  double hip = defaults::kWeightHip;
  double knee = defaults::kWeightKnee;
  double ankle = defaults::kWeightAnkle;

  std::array<double, kNumBodyPoints> as_array() const { return {neck, hip, knee, ankle}; }

  void validate() const {
    int positive = 0;
    for (double w : as_array()) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw Error(ErrorCode::kConfigError, "weights must be finite and >= 0");
      positive += w > 0.0;
    }
    if (positive < 3) throw Error(ErrorCode::kConfigError, "at least three weights must be positive");
  }
};

struct StateBounds {
  PoseState lower{defaults::kXMin, defaults::kZMin, defaults::kCameraHeightMin, -defaults::kAngleLimit,
                  -defaults::kAngleLimit};
  PoseState upper{defaults::kXMax, defaults::kZMax, defaults::kCameraHeightMax, defaults::kAngleLimit,
                  defaults::kAngleLimit};

  bool contains(const PoseState& s) const {
    const StateVector v = s.vector();
    return (v.array() >= lower.vector().array()).all() && (v.array() <= upper.vector().array()).all();
  }

  PoseState clamp(const PoseState& s) const {
    return PoseState::from_vector(s.vector().cwiseMax(lower.vector()).cwiseMin(upper.vector()));
  }
};

struct SolverConfig {
  StateBounds bounds;
  double cauchy_scale = defaults::kCauchyScale;
  double ftol = defaults::kFtol;
  double xtol = defaults::kXtol;
  double gtol = defaults::kGtol;
  int max_inner_iterations = defaults::kMaxInnerIterations;
  int max_outer_alternations = defaults::kMaxOuterAlternations;
  double initial_trust_radius = 0.0;  // <= 0 selects the solver default
  double nominal_camera_height = defaults::kNominalCameraHeight;
  // Finish with a dogbox pass over all five parameters. Pitch and camera
  // height shift the image almost identically, so block alternation alone
  // crawls along that valley.
  bool joint_refinement = true;
  int max_joint_iterations = defaults::kMaxJointIterations;

  void validate() const {
    const StateVector lo = bounds.lower.vector();
    const StateVector hi = bounds.upper.vector();
    if (!(lo.array() < hi.array()).all()) throw Error(ErrorCode::kConfigError, "lower bound must be below upper bound");
    if (!(bounds.lower.z_f > 0.0) || !(bounds.lower.camera_height > 0.0)) {
      throw Error(ErrorCode::kConfigError, "Z_F and h_C bounds must be positive");
    }
    if (!(ftol > 0.0 && xtol > 0.0 && gtol > 0.0)) throw Error(ErrorCode::kConfigError, "tolerances must be positive");
    if (!(cauchy_scale > 0.0)) throw Error(ErrorCode::kConfigError, "cauchy_scale must be positive");
    if (max_inner_iterations < 1 || max_outer_alternations < 1 || max_joint_iterations < 1) {
      throw Error(ErrorCode::kConfigError, "iteration limits must be >= 1");
    }
  }
};

struct LocalizationResult {
  PoseState state;
  double final_cost = 0.0;
  // Unweighted |n_i - pi(P_i^C)| per body point; NaN for invisible points.
  std::array<double, kNumBodyPoints> point_residual_norms{};
  bool converged = false;
  int iterations_used = 0;
  int outer_alternations = 0;
};

// ---------------------------------------------------------------------------
// Forward model

inline Eigen::Matrix3d rotation_x(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return (Eigen::Matrix3d() << 1, 0, 0, 0, c, -s, 0, s, c).finished();
}

inline Eigen::Matrix3d rotation_z(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return (Eigen::Matrix3d() << c, -s, 0, s, c, 0, 0, 0, 1).finished();
}

/// Camera-to-robot rotation R = R_z(roll) R_x(pitch).
inline Eigen::Matrix3d rotation_from_angles(double pitch, double roll) { return rotation_z(roll) * rotation_x(pitch); }

/// Body points expressed in the camera frame, P_i^C = R^T CP_i.
inline std::array<CameraFramePoint, kNumBodyPoints> camera_frame_points(const PoseState& s, const JointHeights& h) {
  const Eigen::Matrix3d rt = rotation_from_angles(s.pitch, s.roll).transpose();
  const auto heights = h.as_array();
  std::array<CameraFramePoint, kNumBodyPoints> out;
  for (std::size_t i = 0; i < kNumBodyPoints; ++i) {
    out[i] = rt * Eigen::Vector3d(s.x_f, s.camera_height - heights[i], s.z_f);
  }
  return out;
}

/// Noiseless observation of all four points.
inline FourPointObservation forward_project(const PoseState& s, const JointHeights& h) {
  FourPointObservation obs;
  const auto points = camera_frame_points(s, h);
  for (std::size_t i = 0; i < kNumBodyPoints; ++i) obs.set(static_cast<BodyPoint>(i), project_camera_point(points[i]));
  return obs;
}

// ---------------------------------------------------------------------------
// Objective

struct ReprojectionCost {
  double cost = 0.0;               // sum of rho(|r_i|^2); +inf if a point is behind the camera
  Eigen::VectorXd residuals;       // stacked sqrt(w_i) (n_i - pi(P_i^C)) for visible points
  std::array<double, kNumBodyPoints> point_norms{};  // |r_i| (weighted); NaN when invisible
};

inline ReprojectionCost reprojection_cost(const PoseState& s, const FourPointObservation& obs,
                                          const JointHeights& heights, const WeightConfig& weights,
                                          double cauchy_scale) {
  if (obs.visible_count() < 1) throw Error(ErrorCode::kNoVisiblePoints, "observation has no visible points");
  const auto points = camera_frame_points(s, heights);
  const auto w = weights.as_array();
  const CauchyLoss loss{cauchy_scale};

  ReprojectionCost out;
  out.point_norms.fill(std::numeric_limits<double>::quiet_NaN());
  out.residuals.resize(2 * obs.visible_count());
  Eigen::Index row = 0;
  for (std::size_t i = 0; i < kNumBodyPoints; ++i) {
    if (!obs.visible[i]) continue;
    if (!(points[i].z() > 0.0)) {
      out.cost = std::numeric_limits<double>::infinity();
      out.residuals.setConstant(std::numeric_limits<double>::quiet_NaN());
      return out;
    }
    const Eigen::Vector2d predicted = points[i].head<2>() / points[i].z();
    const Eigen::Vector2d r = std::sqrt(w[i]) * (obs.points[i].vec() - predicted);
    out.residuals.segment<2>(row) = r;
    out.point_norms[i] = r.norm();
    out.cost += loss.rho(r.squaredNorm());
    row += 2;
  }
  return out;
}

/// d(residuals)/d(X_F, Z_F, h_C, pitch, roll) of the non-robustified stacked
/// residuals, two rows per visible point.
inline Eigen::MatrixXd analytic_jacobian(const PoseState& s, const FourPointObservation& obs,
                                         const JointHeights& heights, const WeightConfig& weights) {
  if (obs.visible_count() < 1) throw Error(ErrorCode::kNoVisiblePoints, "observation has no visible points");
  const Eigen::Matrix3d rx = rotation_x(s.pitch);
  const Eigen::Matrix3d rz = rotation_z(s.roll);
  const Eigen::Matrix3d rt = (rz * rx).transpose();

  const double cp = std::cos(s.pitch), sp = std::sin(s.pitch);
  const double cr = std::cos(s.roll), sr = std::sin(s.roll);
  const Eigen::Matrix3d drx = (Eigen::Matrix3d() << 0, 0, 0, 0, -sp, -cp, 0, cp, -sp).finished();
  const Eigen::Matrix3d drz = (Eigen::Matrix3d() << -sr, -cr, 0, cr, -sr, 0, 0, 0, 0).finished();
  const Eigen::Matrix3d drt_dpitch = drx.transpose() * rz.transpose();
  const Eigen::Matrix3d drt_droll = rx.transpose() * drz.transpose();

  const auto h = heights.as_array();
  const auto w = weights.as_array();
  Eigen::MatrixXd jac(2 * obs.visible_count(), kStateSize);
  Eigen::Index row = 0;
  for (std::size_t i = 0; i < kNumBodyPoints; ++i) {
    if (!obs.visible[i]) continue;
    const Eigen::Vector3d ray(s.x_f, s.camera_height - h[i], s.z_f);
    const Eigen::Vector3d p = rt * ray;
    if (!(p.z() > 0.0)) throw Error(ErrorCode::kBehindCamera, "point has non-positive depth");
    const double iz = 1.0 / p.z();
    Eigen::Matrix<double, 2, 3> dpi;
    dpi << iz, 0.0, -p.x() * iz * iz, 0.0, iz, -p.y() * iz * iz;

    Eigen::Matrix<double, 3, kStateSize> dp;
    dp.col(0) = rt.col(0);
    dp.col(1) = rt.col(2);
    dp.col(2) = rt.col(1);
    dp.col(3) = drt_dpitch * ray;
    dp.col(4) = drt_droll * ray;
    jac.middleRows<2>(row) = -std::sqrt(w[i]) * dpi * dp;
    row += 2;
  }
  return jac;
}

// ---------------------------------------------------------------------------
// Solver

namespace detail {

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

/// Level-view starting point: zero pitch and roll, nominal camera height and a
/// depth read off the apparent length of the longest visible segment.
inline PoseState initialize_state(const FourPointObservation& obs, const JointHeights& heights,
                                  double nominal_camera_height, const StateBounds& bounds = {}) {
  const auto h = heights.as_array();
  std::optional<std::pair<std::size_t, std::size_t>> pair;
  double best = 0.0;
  for (std::size_t a = 0; a < kNumBodyPoints; ++a) {
    for (std::size_t b = a + 1; b < kNumBodyPoints; ++b) {
      if (!obs.visible[a] || !obs.visible[b]) continue;
      const double dh = std::abs(h[a] - h[b]);
      if (dh > best) {
        best = dh;
        pair = {a, b};
      }
    }
  }
  if (!pair) {
    throw Error(ErrorCode::kInsufficientObservations, "initialization needs two visible points of distinct height");
  }
  const auto [a, b] = *pair;  // a is above b
  const double dy = obs.points[b].y - obs.points[a].y;
  if (!(std::abs(dy) > 1e-12)) throw Error(ErrorCode::kDegenerateObservation, "visible points have zero apparent height");

  PoseState s;
  s.pitch = 0.0;
  s.roll = 0.0;
  s.camera_height = nominal_camera_height;
  s.z_f = std::abs((h[a] - h[b]) / dy);
  s.z_f = std::clamp(s.z_f, bounds.lower.z_f, bounds.upper.z_f);
  std::vector<double> xs;
  for (std::size_t i = 0; i < kNumBodyPoints; ++i) {
    if (obs.visible[i]) xs.push_back(obs.points[i].x);
  }
  s.x_f = s.z_f * detail::median(xs);
  return bounds.clamp(s);
}

namespace detail {

// Solves one block of the alternating scheme with the complementary block
// held fixed. Robust loss enters through IRLS rescaling of residuals and
// Jacobian rows; the objective handed to the dogbox solver is 0.5 sum rho.
inline DogboxReport solve_block(const PoseState& start, const std::vector<int>& block, const FourPointObservation& obs,
                                const JointHeights& heights, const WeightConfig& weights, const SolverConfig& config) {
  const StateVector full0 = start.vector();
  const auto n = static_cast<Eigen::Index>(block.size());
  const auto assemble = [&](const Eigen::VectorXd& sub) {
    StateVector full = full0;
    for (Eigen::Index k = 0; k < n; ++k) full[block[static_cast<std::size_t>(k)]] = sub[k];
    return PoseState::from_vector(full);
  };
  const CauchyLoss loss{config.cauchy_scale};

  const auto cost = [&](const Eigen::VectorXd& sub) {
    return 0.5 * reprojection_cost(assemble(sub), obs, heights, weights, config.cauchy_scale).cost;
  };
  const auto linearize = [&](const Eigen::VectorXd& sub) {
    const PoseState s = assemble(sub);
    const ReprojectionCost rc = reprojection_cost(s, obs, heights, weights, config.cauchy_scale);
    const Eigen::MatrixXd full_jac = analytic_jacobian(s, obs, heights, weights);
    Linearization lin;
    lin.cost = 0.5 * rc.cost;
    lin.residuals = rc.residuals;
    lin.jacobian.resize(full_jac.rows(), n);
    for (Eigen::Index k = 0; k < n; ++k) lin.jacobian.col(k) = full_jac.col(block[static_cast<std::size_t>(k)]);
    for (Eigen::Index row = 0; row < rc.residuals.size(); row += 2) {
      const double scale = std::sqrt(loss.derivative(rc.residuals.segment<2>(row).squaredNorm()));
      lin.residuals.segment<2>(row) *= scale;
      lin.jacobian.middleRows(row, 2) *= scale;
    }
    return lin;
  };

  Box box{Eigen::VectorXd(n), Eigen::VectorXd(n)};
  Eigen::VectorXd x0(n);
  const StateVector lo = config.bounds.lower.vector();
  const StateVector hi = config.bounds.upper.vector();
  for (Eigen::Index k = 0; k < n; ++k) {
    const int i = block[static_cast<std::size_t>(k)];
    box.lower[k] = lo[i];
    box.upper[k] = hi[i];
    x0[k] = full0[i];
  }
  DogboxOptions options;
  options.ftol = config.ftol;
  options.xtol = config.xtol;
  options.gtol = config.gtol;
  options.max_iterations = config.max_inner_iterations;
  options.initial_trust_radius = config.initial_trust_radius;
  DogboxReport report = dogbox_minimize(cost, linearize, x0, box, options);
  report.x = assemble(report.x).vector();
  return report;
}

}  // namespace detail

namespace detail {

// Second starting point: roll read off the image direction of the body axis
// (exact for zero pitch, where roll only rotates the image about the principal
// point), depth from the de-rotated segment length.
inline std::optional<PoseState> roll_aligned_start(const FourPointObservation& obs, const JointHeights& heights,
                                                   double nominal_camera_height, const StateBounds& bounds) {
  std::optional<std::size_t> top, bottom;
  for (std::size_t i = 0; i < kNumBodyPoints; ++i) {
    if (!obs.visible[i]) continue;
    if (!top) top = i;
    bottom = i;
  }
  if (!top || *top == *bottom) return std::nullopt;
  const Eigen::Vector2d d = obs.points[*bottom].vec() - obs.points[*top].vec();
  if (!(d.norm() > 1e-12)) return std::nullopt;
  const auto h = heights.as_array();

  PoseState s;
  s.roll = std::atan2(d.x(), d.y());
  s.pitch = 0.0;
  s.camera_height = nominal_camera_height;
  s.z_f = (h[*top] - h[*bottom]) / d.norm();
  const double c = std::cos(s.roll), sn = std::sin(s.roll);
  std::vector<double> xs;
  for (std::size_t i = 0; i < kNumBodyPoints; ++i) {
    if (obs.visible[i]) xs.push_back(c * obs.points[i].x - sn * obs.points[i].y);
  }
  s.x_f = s.z_f * median(xs);
  return bounds.clamp(s);
}

struct Candidate {
  PoseState state;
  double cost = std::numeric_limits<double>::infinity();
  bool converged = false;
  int iterations = 0;
  int alternations = 0;
};

inline Candidate refine(PoseState state, bool alternate, const FourPointObservation& obs, const JointHeights& heights,
                        const WeightConfig& weights, const SolverConfig& config) {
  static const std::vector<int> kTranslation = {0, 1, 2};
  static const std::vector<int> kRotation = {3, 4};
  static const std::vector<int> kAll = {0, 1, 2, 3, 4};

  Candidate out;
  double cost = reprojection_cost(state, obs, heights, weights, config.cauchy_scale).cost;
  if (!std::isfinite(cost)) return out;

  const auto run = [&](const std::vector<int>& block, int budget) {
    SolverConfig c = config;
    c.max_inner_iterations = budget;
    try {
      const DogboxReport report = solve_block(state, block, obs, heights, weights, c);
      state = PoseState::from_vector(report.x);
      out.iterations += report.iterations;
      return report.converged;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kSingularNormalEquations) throw;
      return false;
    }
  };

  if (alternate) {
    for (int outer = 0; outer < config.max_outer_alternations; ++outer) {
      const double previous = cost;
      bool converged = run(kTranslation, config.max_inner_iterations);
      converged = run(kRotation, config.max_inner_iterations) && converged;
      cost = reprojection_cost(state, obs, heights, weights, config.cauchy_scale).cost;
      out.alternations = outer + 1;
      if (previous - cost <= config.ftol * previous) {
        out.converged = converged;
        break;
      }
    }
  }
  if (config.joint_refinement) {
    out.converged = run(kAll, config.max_joint_iterations);
    cost = reprojection_cost(state, obs, heights, weights, config.cauchy_scale).cost;
  }
  out.state = state;
  out.cost = cost;
  return out;
}

}  // namespace detail

/// Per-frame localization. The alternating scheme runs the translation block
/// {X_F, Z_F, h_C} and the rotation block {pitch, roll} in turn until the cost
/// stops decreasing; with joint_refinement (the default) every start is then
/// polished over all five parameters and, when no explicit start is given,
/// the level-view and roll-aligned starts are tried as well. The lowest cost
/// wins. Exhausting an iteration budget is reported through `converged`.
inline LocalizationResult solve_localization(const FourPointObservation& obs, const JointHeights& heights,
                                             const WeightConfig& weights = {}, const SolverConfig& config = {},
                                             std::optional<PoseState> initial = std::nullopt) {
  if (obs.visible_count() < 3) {
    throw Error(ErrorCode::kInsufficientObservations,
                "need at least three visible points, got " + std::to_string(obs.visible_count()));
  }
  const PoseState start = initial ? config.bounds.clamp(*initial)
                                  : initialize_state(obs, heights, config.nominal_camera_height, config.bounds);
  if (!std::isfinite(reprojection_cost(start, obs, heights, weights, config.cauchy_scale).cost)) {
    throw Error(ErrorCode::kDegenerateObservation, "initial state places body points behind the camera");
  }

  detail::Candidate best = detail::refine(start, true, obs, heights, weights, config);
  int iterations = best.iterations;
  if (config.joint_refinement && !initial) {
    std::vector<PoseState> starts = {start};
    if (auto aligned = detail::roll_aligned_start(obs, heights, config.nominal_camera_height, config.bounds)) {
      starts.push_back(*aligned);
    }
    for (const PoseState& s : starts) {
      const detail::Candidate c = detail::refine(s, false, obs, heights, weights, config);
      iterations += c.iterations;
      if (c.cost < best.cost) best = c;
    }
  }

  LocalizationResult result;
  result.state = best.state;
  result.final_cost = best.cost;
  result.converged = best.converged;
  result.iterations_used = iterations;
  result.outer_alternations = best.alternations;
  const ReprojectionCost unweighted =
      reprojection_cost(best.state, obs, heights, WeightConfig{1.0, 1.0, 1.0, 1.0}, config.cauchy_scale);
  result.point_residual_norms = unweighted.point_norms;
  return result;
}

}  // namespace monoloc
