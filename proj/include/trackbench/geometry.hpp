#pragma once

// Pinhole projection and rigid-body pose algebra.
//
// Pixel convention: (0,0) is the center of the top-left pixel, u grows to the
// right and v grows downwards. Camera frame: x right, y down, z along the
// optical axis. Depth always means the camera-frame z coordinate.

#include <cmath>
#include <string>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "trackbench/errors.hpp"

namespace trackbench {

using Point3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

struct Pixel {
  double u = 0.0;
  double v = 0.0;

  friend Pixel operator+(Pixel a, const Vec2& d) { return {a.u + d.x(), a.v + d.y()}; }
  friend Vec2 operator-(const Pixel& a, const Pixel& b) { return {a.u - b.u, a.v - b.v}; }
  friend bool operator==(const Pixel&, const Pixel&) = default;
};

inline double distance(const Pixel& a, const Pixel& b) { return std::hypot(a.u - b.u, a.v - b.v); }

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  bool valid() const {
    return fx > 0 && fy > 0 && width > 0 && height > 0 && cx >= 0 && cx < width && cy >= 0 &&
           cy < height;
  }

  bool contains(const Pixel& p, double margin = 0.0) const {
    return p.u >= margin && p.v >= margin && p.u <= width - 1 - margin &&
           p.v <= height - 1 - margin;
  }

  friend bool operator==(const CameraIntrinsics&, const CameraIntrinsics&) = default;
};

inline constexpr double kMinDepth = 1e-9;

inline Pixel project(const CameraIntrinsics& K, const Point3& X) {
  if (!(X.z() > kMinDepth)) {
    throw NonPositiveDepth("point at z=" + std::to_string(X.z()) + " cannot be projected");
  }
  return {K.fx * X.x() / X.z() + K.cx, K.fy * X.y() / X.z() + K.cy};
}

inline Point3 backproject(const CameraIntrinsics& K, const Pixel& p, double depth) {
  if (!(depth > 0.0)) {
    throw NonPositiveDepth("depth " + std::to_string(depth) + " is not positive");
  }
  return {depth * (p.u - K.cx) / K.fx, depth * (p.v - K.cy) / K.fy, depth};
}

/// Rigid transform mapping camera-frame points into the spatial frame,
/// X_s = R * X_c + t. The rotation is kept as a unit quaternion and is
/// renormalized whenever a pose is built.
class RigidPose {
 public:
  RigidPose() = default;
  RigidPose(const Eigen::Quaterniond& q, const Eigen::Vector3d& t) : q_(q.normalized()), t_(t) {}

  static RigidPose identity() { return {}; }
  static RigidPose from_translation(const Eigen::Vector3d& t) {
    return {Eigen::Quaterniond::Identity(), t};
  }
  static RigidPose from_axis_angle(const Eigen::Vector3d& axis, double angle,
                                   const Eigen::Vector3d& t = Eigen::Vector3d::Zero()) {
    return {Eigen::Quaterniond(Eigen::AngleAxisd(angle, axis.normalized())), t};
  }

  const Eigen::Quaterniond& rotation() const { return q_; }
  const Eigen::Vector3d& translation() const { return t_; }
  Eigen::Matrix3d rotation_matrix() const { return q_.toRotationMatrix(); }

  Point3 operator*(const Point3& X) const { return q_ * X + t_; }

 private:
  Eigen::Quaterniond q_ = Eigen::Quaterniond::Identity();
  Eigen::Vector3d t_ = Eigen::Vector3d::Zero();
};

inline Point3 transform(const RigidPose& P, const Point3& X) { return P * X; }

/// transform(compose(a, b), X) == transform(a, transform(b, X))
inline RigidPose compose(const RigidPose& a, const RigidPose& b) {
  return {a.rotation() * b.rotation(), a.rotation() * b.translation() + a.translation()};
}

inline RigidPose inverse(const RigidPose& P) {
  const Eigen::Quaterniond qi = P.rotation().conjugate();
  return {qi, -(qi * P.translation())};
}

/// Spherical linear interpolation between two unit quaternions, taking the
/// short way around.
inline Eigen::Quaterniond slerp(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b,
                                double tau) {
  return a.slerp(tau, b).normalized();
}

}  // namespace trackbench
