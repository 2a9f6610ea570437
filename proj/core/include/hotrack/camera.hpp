#pragma once

#include <Eigen/Core>

#include "hotrack/geometry.hpp"

namespace hotrack {

using Vec2 = Eigen::Vector2d;

/// Pinhole intrinsics in pixels. Pixel (u, v) is the centre of column u, row v.
struct Intrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;

  Intrinsics scaled(double sx, double sy) const { return {fx * sx, fy * sy, cx * sx, cy * sy}; }
};

struct CameraModel {
  Intrinsics intrinsics;
  int width = 0;
  int height = 0;
};

/// Camera-frame point (mm, +z forward) for a pixel and a depth along z.
Vec3 backproject(const Vec2& pixel, double depth_mm, const Intrinsics& K);
Vec2 project(const Vec3& point, const Intrinsics& K);

/// Unit viewing ray through a pixel.
Vec3 pixel_ray(const Vec2& pixel, const Intrinsics& K);

}  // namespace hotrack
