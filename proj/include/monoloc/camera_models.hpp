#pragma once

// Pixel <-> normalized image plane conversion for pinhole, equidistant
// fisheye and equirectangular cameras.
//
// Frame convention shared by the whole library: camera x points right, y
// points down and z points forward. An upright person's "up" is -y when the
// camera is level. The normalized image plane is z = 1.

#include <array>
#include <cmath>
#include <string>

#include <Eigen/Core>

#include "monoloc/defaults.hpp"
#include "monoloc/errors.hpp"

namespace monoloc {

struct PixelPoint {
  double u = 0.0;
  double v = 0.0;
};

struct NormalizedPoint {
  double x = 0.0;
  double y = 0.0;

  Eigen::Vector2d vec() const { return {x, y}; }
};

using CameraFramePoint = Eigen::Vector3d;

enum class CameraVariant { kPinhole, kFisheyeEquidistant, kEquirectangular };

inline std::string_view to_string(CameraVariant v) {
  switch (v) {
    case CameraVariant::kPinhole: return "pinhole";
    case CameraVariant::kFisheyeEquidistant: return "fisheye";
    case CameraVariant::kEquirectangular: return "equirectangular";
  }
  return "unknown";
}

struct CameraModel {
  CameraVariant variant = CameraVariant::kPinhole;
  int width = 0;
  int height = 0;
  double fx = 0.0, fy = 0.0, cx = 0.0, cy = 0.0;
  // Pinhole: k1, k2, p1, p2 (radial-tangential).
  // Fisheye: k1..k4 of theta_d = theta (1 + k1 t^2 + k2 t^4 + k3 t^6 + k4 t^8).
  std::array<double, 4> distortion{};
  double max_normalized = defaults::kMaxNormalizedCoordinate;

  static CameraModel pinhole(int width, int height, double fx, double fy, double cx, double cy,
                             std::array<double, 4> k = {}) {
    CameraModel cam{CameraVariant::kPinhole, width, height, fx, fy, cx, cy, k};
    cam.validate();
    return cam;
  }

  static CameraModel fisheye(int width, int height, double fx, double fy, double cx, double cy,
                             std::array<double, 4> k = {}) {
    CameraModel cam{CameraVariant::kFisheyeEquidistant, width, height, fx, fy, cx, cy, k};
    cam.validate();
    return cam;
  }

  static CameraModel equirectangular(int width, int height) {
    CameraModel cam;
    cam.variant = CameraVariant::kEquirectangular;
    cam.width = width;
    cam.height = height;
    cam.validate();
    return cam;
  }

  void validate() const {
    if (width < 1 || height < 1) {
      throw Error(ErrorCode::kConfigError, "camera width and height must be >= 1");
    }
    if (!(max_normalized > 0.0)) {
      throw Error(ErrorCode::kConfigError, "max_normalized must be positive");
    }
    if (variant == CameraVariant::kEquirectangular) return;
    if (!(fx > 0.0) || !(fy > 0.0)) {
      throw Error(ErrorCode::kConfigError, "focal lengths must be positive");
    }
    if (!(cx > 0.0 && cx < width) || !(cy > 0.0 && cy < height)) {
      throw Error(ErrorCode::kConfigError, "principal point must lie inside the image");
    }
    for (double k : distortion) {
      if (!std::isfinite(k)) throw Error(ErrorCode::kConfigError, "distortion must be finite");
    }
  }

  bool contains(const PixelPoint& px) const {
    return px.u >= 0.0 && px.u <= width && px.v >= 0.0 && px.v <= height;
  }
};

/// Perspective division onto the z = 1 plane. Shared by every camera variant
/// because estimation happens entirely on the normalized plane.
inline NormalizedPoint project_camera_point(const CameraFramePoint& p) {
  if (!(p.z() > 0.0)) throw Error(ErrorCode::kBehindCamera, "point has non-positive depth");
  return {p.x() / p.z(), p.y() / p.z()};
}

namespace detail {

inline Eigen::Vector2d distort_radtan(const std::array<double, 4>& k, double x, double y) {
  const double r2 = x * x + y * y;
  const double radial = 1.0 + k[0] * r2 + k[1] * r2 * r2;
  return {x * radial + 2.0 * k[2] * x * y + k[3] * (r2 + 2.0 * x * x),
          y * radial + k[2] * (r2 + 2.0 * y * y) + 2.0 * k[3] * x * y};
}

inline double distort_theta(const std::array<double, 4>& k, double theta) {
  const double t2 = theta * theta;
  return theta * (1.0 + t2 * (k[0] + t2 * (k[1] + t2 * (k[2] + t2 * k[3]))));
}

// Fixed-point inversion of the radial-tangential model.
inline Eigen::Vector2d undistort_radtan(const std::array<double, 4>& k, Eigen::Vector2d distorted) {
  Eigen::Vector2d p = distorted;
  for (int it = 0; it < defaults::kUndistortMaxIterations; ++it) {
    const double r2 = p.squaredNorm();
    const double radial = 1.0 + k[0] * r2 + k[1] * r2 * r2;
    const Eigen::Vector2d tangential(2.0 * k[2] * p.x() * p.y() + k[3] * (r2 + 2.0 * p.x() * p.x()),
                                     k[2] * (r2 + 2.0 * p.y() * p.y()) + 2.0 * k[3] * p.x() * p.y());
    const Eigen::Vector2d next = (distorted - tangential) / radial;
    if (!next.allFinite()) break;
    const double change = (next - p).lpNorm<Eigen::Infinity>();
    p = next;
    if (change < defaults::kUndistortTolerance) return p;
  }
  throw Error(ErrorCode::kDistortionDivergence, "radial-tangential undistortion did not converge");
}

// Fixed-point inversion of theta_d = theta * poly(theta^2).
inline double undistort_theta(const std::array<double, 4>& k, double theta_d) {
  double theta = theta_d;
  for (int it = 0; it < defaults::kUndistortMaxIterations; ++it) {
    const double t2 = theta * theta;
    const double poly = 1.0 + t2 * (k[0] + t2 * (k[1] + t2 * (k[2] + t2 * k[3])));
    const double next = theta_d / poly;
    if (!std::isfinite(next)) break;
    const double change = std::abs(next - theta);
    theta = next;
    if (change < defaults::kUndistortTolerance) return theta;
  }
  throw Error(ErrorCode::kDistortionDivergence, "fisheye undistortion did not converge");
}

inline NormalizedPoint checked(const CameraModel& cam, double x, double y) {
  if (!std::isfinite(x) || !std::isfinite(y) || std::abs(x) > cam.max_normalized ||
      std::abs(y) > cam.max_normalized) {
    throw Error(ErrorCode::kBehindCamera, "ray is too oblique to the optical axis");
  }
  return {x, y};
}

}  // namespace detail

/// Maps a pixel to the normalized image plane. Throws kOutOfBounds for pixels
/// outside the image, kBehindCamera when the ray does not point forward (or is
/// too oblique), and kDistortionDivergence if undistortion fails.
inline NormalizedPoint back_project(const CameraModel& cam, const PixelPoint& px) {
  if (!std::isfinite(px.u) || !std::isfinite(px.v) || !cam.contains(px)) {
    throw Error(ErrorCode::kOutOfBounds, "pixel outside image");
  }
  switch (cam.variant) {
    case CameraVariant::kPinhole: {
      const Eigen::Vector2d distorted((px.u - cam.cx) / cam.fx, (px.v - cam.cy) / cam.fy);
      const bool has_distortion =
          cam.distortion[0] != 0.0 || cam.distortion[1] != 0.0 || cam.distortion[2] != 0.0 || cam.distortion[3] != 0.0;
      const Eigen::Vector2d p = has_distortion ? detail::undistort_radtan(cam.distortion, distorted) : distorted;
      return detail::checked(cam, p.x(), p.y());
    }
    case CameraVariant::kFisheyeEquidistant: {
      const double xd = (px.u - cam.cx) / cam.fx;
      const double yd = (px.v - cam.cy) / cam.fy;
      const double theta_d = std::hypot(xd, yd);
      if (theta_d == 0.0) return {0.0, 0.0};
      const double theta = detail::undistort_theta(cam.distortion, theta_d);
      if (!(theta < 0.5 * defaults::kPi)) throw Error(ErrorCode::kBehindCamera, "fisheye ray beyond 90 degrees");
      const double scale = std::tan(theta) / theta_d;
      return detail::checked(cam, xd * scale, yd * scale);
    }
    case CameraVariant::kEquirectangular: {
      const double lon = (px.u - 0.5 * cam.width) * (2.0 * defaults::kPi / cam.width);
      const double lat = (px.v - 0.5 * cam.height) * (defaults::kPi / cam.height);
      const double z = std::cos(lat) * std::cos(lon);
      if (!(z > 0.0)) throw Error(ErrorCode::kBehindCamera, "equirectangular ray points backwards");
      return detail::checked(cam, std::tan(lon), std::tan(lat) / std::cos(lon));
    }
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown camera variant");
}

/// Exact forward model, the inverse of back_project.
inline PixelPoint project_to_pixel(const CameraModel& cam, const NormalizedPoint& n) {
  if (!std::isfinite(n.x) || !std::isfinite(n.y)) {
    throw Error(ErrorCode::kInvalidArgument, "normalized point must be finite");
  }
  PixelPoint px;
  switch (cam.variant) {
    case CameraVariant::kPinhole: {
      const Eigen::Vector2d d = detail::distort_radtan(cam.distortion, n.x, n.y);
      px = {cam.fx * d.x() + cam.cx, cam.fy * d.y() + cam.cy};
      break;
    }
    case CameraVariant::kFisheyeEquidistant: {
      const double r = std::hypot(n.x, n.y);
      if (r == 0.0) {
        px = {cam.cx, cam.cy};
        break;
      }
      const double theta_d = detail::distort_theta(cam.distortion, std::atan(r));
      px = {cam.fx * theta_d * n.x / r + cam.cx, cam.fy * theta_d * n.y / r + cam.cy};
      break;
    }
    case CameraVariant::kEquirectangular: {
      const double lon = std::atan2(n.x, 1.0);
      const double lat = std::atan2(n.y, std::sqrt(n.x * n.x + 1.0));
      px = {0.5 * cam.width + lon * cam.width / (2.0 * defaults::kPi), 0.5 * cam.height + lat * cam.height / defaults::kPi};
      break;
    }
  }
  if (!cam.contains(px)) throw Error(ErrorCode::kOutOfBounds, "projection falls outside the image");
  return px;
}

}  // namespace monoloc
