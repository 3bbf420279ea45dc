#include <algorithm>
#include <functional>
#include <random>

#include <gtest/gtest.h>

#include "monoloc/height_calibration.hpp"
#include "oracles.hpp"

using namespace monoloc;

namespace {

const JointHeights kHeights{1.5, 1.0, 0.5, 0.1};
constexpr double kDeg = M_PI / 180.0;

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kInvalidArgument;
}

std::vector<FourPointObservation> frames_at(const std::vector<PoseState>& states, const JointHeights& h) {
  std::vector<FourPointObservation> out;
  for (const auto& s : states) out.push_back(oracle::observe(s, h));
  return out;
}

void expect_heights_near(const JointHeights& a, const JointHeights& b, double tol) {
  EXPECT_NEAR(a.neck, b.neck, tol);
  EXPECT_NEAR(a.hip, b.hip, tol);
  EXPECT_NEAR(a.knee, b.knee, tol);
  EXPECT_NEAR(a.ankle, b.ankle, tol);
}

}  // namespace

TEST(Calibration, SingleLevelFrame) {
  const auto res = calibrate_heights(frames_at({{0, 4, 0.5, 0, 0}}, kHeights));
  expect_heights_near(res.heights, kHeights, 1e-9);
  ASSERT_EQ(res.footprints.size(), 1u);
  EXPECT_NEAR(res.footprints[0].first, 0.0, 1e-9);
  EXPECT_NEAR(res.footprints[0].second, 4.0, 1e-9);
}

TEST(Calibration, ThreeFramesAtDifferentDepths) {
  const auto res = calibrate_heights(frames_at({{0, 2, 0.5, 0, 0}, {0.3, 3, 0.5, 0, 0}, {-0.2, 4, 0.5, 0, 0}}, kHeights));
  expect_heights_near(res.heights, kHeights, 1e-9);
  EXPECT_NEAR(res.footprints[1].first, 0.3, 1e-9);
  EXPECT_NEAR(res.footprints[2].second, 4.0, 1e-9);
  EXPECT_TRUE(std::isfinite(res.condition.condition_number));
}

TEST(Calibration, NoiselessExactnessOverRandomScenes) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> angle(-30 * kDeg, 30 * kDeg), cam(0.3, 1.0), u(0, 1);
  for (int trial = 0; trial < 200; ++trial) {
    JointHeights h;
    h.ankle = 0.05 + 0.1 * u(rng);
    h.knee = h.ankle + 0.3 + 0.3 * u(rng);
    h.hip = h.knee + 0.3 + 0.3 * u(rng);
    h.neck = h.hip + 0.4 + 0.3 * u(rng);
    CalibrationConfig cfg;
    cfg.pitch = angle(rng);
    cfg.roll = angle(rng);
    cfg.camera_height = cam(rng);
    cfg.reference_height = h.ankle;
    std::vector<PoseState> states;
    for (int f = 0; f < 1 + trial % 3; ++f) {
      PoseState s = oracle::sample_visible_state(rng, h);
      s.pitch = cfg.pitch;
      s.roll = cfg.roll;
      s.camera_height = cfg.camera_height;
      bool visible = true;
      for (double hj : h.as_array()) visible = visible && oracle::camera_point(s, hj).z() > 0.5;
      if (visible) states.push_back(s);
    }
    if (states.empty()) continue;
    const auto res = calibrate_heights(frames_at(states, h), cfg);
    expect_heights_near(res.heights, h, 1e-9);
  }
}

TEST(Calibration, DuplicateFramesDoNotChangeTheSolution) {
  const auto once = frames_at({{0.5, 3, 0.5, 0, 0}, {-0.5, 5, 0.5, 0, 0}}, kHeights);
  auto twice = once;
  twice.insert(twice.end(), once.begin(), once.end());
  const auto a = calibrate_heights(once);
  const auto b = calibrate_heights(twice);
  expect_heights_near(a.heights, b.heights, 1e-12);
}

TEST(Calibration, CommonWeightScalingLeavesMinimizerUnchanged) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> noise(0, 0.004);
  auto obs = frames_at({{0.2, 3, 0.5, 0, 0}, {-0.4, 4.5, 0.5, 0, 0}}, kHeights);
  for (auto& o : obs) {
    for (auto& p : o.points) {
      p.x += noise(rng);
      p.y += noise(rng);
    }
  }
  CalibrationConfig base, scaled;
  scaled.weights = {3.0, 3.0, 2.1, 1.5};
  const auto a = calibrate_heights(obs, base);
  const auto b = calibrate_heights(obs, scaled);
  expect_heights_near(a.heights, b.heights, 1e-12);
}

TEST(Calibration, NoisyStaticFramesMedianErrorIsSmall) {
  // 2 px at f = 500 is 0.004 on the normalized plane.
  std::mt19937_64 rng(10);
  std::normal_distribution<double> noise(0, 2.0 / 500.0);
  std::vector<double> errors;
  for (int trial = 0; trial < 100; ++trial) {
    auto obs = frames_at({{0.1, 3, 0.5, 0, 0}}, kHeights);
    for (auto& p : obs[0].points) {
      p.x += noise(rng);
      p.y += noise(rng);
    }
    const auto res = calibrate_heights(obs);
    const auto est = res.heights.as_array(), truth = kHeights.as_array();
    for (std::size_t i = 0; i < kNumBodyPoints; ++i) errors.push_back(std::abs(est[i] - truth[i]));
  }
  std::nth_element(errors.begin(), errors.begin() + errors.size() / 2, errors.end());
  EXPECT_LT(errors[errors.size() / 2], 0.03);
}

TEST(Calibration, FreeScaleIsRankDeficient) {
  // Without a reference height, scaling the scene about the camera leaves
  // every projection unchanged.
  CalibrationConfig cfg;
  cfg.reference_height.reset();
  const auto obs = frames_at({{0, 2, 0.5, 0, 0}, {0.3, 3, 0.5, 0, 0}, {-0.2, 4, 0.5, 0, 0}}, kHeights);
  EXPECT_EQ(code_of([&] { calibrate_heights(obs, cfg); }), ErrorCode::kRankDeficient);
  const auto report = condition_report(assemble_calibration_system(obs, cfg).matrix);
  EXPECT_LT(report.singular_values.minCoeff(), 1e-12);
  EXPECT_TRUE(std::isinf(report.condition_number));
}

TEST(Calibration, ImpossibleReferenceGivesNonPhysicalHeights) {
  CalibrationConfig cfg;
  cfg.reference_height = 2.0;  // ankle above the camera flips the scale
  EXPECT_EQ(code_of([&] { calibrate_heights(frames_at({{0, 4, 0.5, 0, 0}}, kHeights), cfg); }),
            ErrorCode::kNonPhysicalHeights);
}

TEST(Calibration, RequiresFullyVisibleFrames) {
  auto obs = frames_at({{0, 4, 0.5, 0, 0}}, kHeights);
  obs[0].visible[index(BodyPoint::kKnee)] = false;
  EXPECT_EQ(code_of([&] { calibrate_heights(obs); }), ErrorCode::kInsufficientObservations);
  EXPECT_EQ(code_of([] { calibrate_heights({}); }), ErrorCode::kInsufficientObservations);
}

TEST(Calibration, NonDefaultReferenceJoint) {
  CalibrationConfig cfg;
  cfg.reference_point = BodyPoint::kHip;
  cfg.reference_height = kHeights.hip;
  const auto res = calibrate_heights(frames_at({{0.5, 3.5, 0.5, 0, 0}}, kHeights), cfg);
  expect_heights_near(res.heights, kHeights, 1e-9);
}

TEST(ConditionReport, IdentityHasUnitCondition) {
  const auto r = condition_report(Eigen::MatrixXd::Identity(5, 5));
  EXPECT_DOUBLE_EQ(r.condition_number, 1.0);
}

TEST(ConditionReport, RankDeficientHasZeroSingularValue) {
  Eigen::MatrixXd m(3, 3);
  m << 1, 2, 3, 2, 4, 6, 1, 0, 1;
  const auto r = condition_report(m);
  EXPECT_LT(r.singular_values[2], 1e-12);
  EXPECT_GT(r.condition_number, 1e12);
}

TEST(ConditionReport, ReproducibleForTheThreeFrameSystem) {
  const auto obs = frames_at({{0, 2, 0.5, 0, 0}, {0, 3, 0.5, 0, 0}, {0, 4, 0.5, 0, 0}}, kHeights);
  const auto a = condition_report(assemble_calibration_system(obs, {}).matrix);
  const auto b = condition_report(assemble_calibration_system(obs, {}).matrix);
  EXPECT_TRUE(std::isfinite(a.condition_number));
  EXPECT_EQ(a.condition_number, b.condition_number);
  // Oracle: singular values of the same matrix from an independent decomposition.
  const Eigen::MatrixXd m = assemble_calibration_system(obs, {}).matrix;
  const Eigen::MatrixXd normal = m.transpose() * m;
  const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(normal).eigenvalues().cwiseSqrt();
  EXPECT_NEAR(a.singular_values.maxCoeff(), ev.maxCoeff(), 1e-9);
  EXPECT_NEAR(a.singular_values.minCoeff(), ev.minCoeff(), 1e-9);
}
