#pragma once

// Every tunable default used by the library and the CLI lives here. Values
// that are not dictated by the model itself are engineering choices and are
// overridable through the run configuration file.

namespace monoloc::defaults {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kDegToRad = kPi / 180.0;

// Camera geometry.
inline constexpr double kMaxNormalizedCoordinate = 20.0;
inline constexpr double kUndistortTolerance = 1e-10;
inline constexpr int kUndistortMaxIterations = 20;

// Observation reduction.
inline constexpr double kConfidenceThreshold = 0.3;

// Point weights; knees and ankles move the most while walking.
inline constexpr double kWeightNeck = 1.0;
inline constexpr double kWeightHip = 1.0;
inline constexpr double kWeightKnee = 0.7;
inline constexpr double kWeightAnkle = 0.5;

// State bounds.
inline constexpr double kXMin = -30.0, kXMax = 30.0;
inline constexpr double kZMin = 0.3, kZMax = 30.0;
inline constexpr double kCameraHeightMin = 0.2, kCameraHeightMax = 1.2;
inline constexpr double kAngleLimit = 45.0 * kDegToRad;
inline constexpr double kNominalCameraHeight = 0.5;

// Solver.
inline constexpr double kCauchyScale = 0.01;
inline constexpr double kFtol = 1e-8;
inline constexpr double kXtol = 1e-8;
inline constexpr double kGtol = 1e-10;
inline constexpr int kMaxInnerIterations = 50;
inline constexpr int kMaxOuterAlternations = 10;
inline constexpr int kMaxJointIterations = 500;

// Calibration scale reference (see height_calibration.hpp).
inline constexpr double kReferenceAnkleHeight = 0.10;

// Tracking.
inline constexpr double kProcessNoiseAccel = 2.0;         // m/s^2
inline constexpr double kMeasurementNoise = 0.1 * 0.1;    // m^2
inline constexpr double kInitialVelocityVariance = 1.0;   // (m/s)^2
inline constexpr double kGateRadius = 1.0;                // m
inline constexpr int kMissLimit = 15;
inline constexpr int kConfirmHits = 3;

// Synthetic scenes.
inline constexpr double kJointHalfWidth = 0.15;
inline constexpr double kWalkDeformationAmplitude = 0.05;
inline constexpr double kWalkDeformationFrequency = 1.5;

}  // namespace monoloc::defaults
