#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace hotrack {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Rigid transform x -> R x + t.
struct Rigid {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();

  Vec3 apply(const Vec3& x) const { return R * x + t; }
  Rigid operator*(const Rigid& o) const { return {R * o.R, R * o.t + t}; }
  Rigid inverse() const { return {R.transpose(), -(R.transpose() * t)}; }
  static Rigid identity() { return {}; }
};

Mat3 skew(const Vec3& v);

/// Rodrigues' formula for the exponential map of so(3).
Mat3 exp_so3(const Vec3& omega);

/// Inverse of exp_so3, returning the rotation vector with angle in [0, pi].
Vec3 log_so3(const Mat3& R);

/// Left Jacobian of SO(3): exp(omega + d) ~ exp(J_l(omega) d) exp(omega).
Mat3 left_jacobian_so3(const Vec3& omega);

/// Rotation of `angle` radians about unit `axis`.
Mat3 axis_angle(const Vec3& axis, double angle);

}  // namespace hotrack
