#include "hotrack/camera.hpp"

#include "hotrack/error.hpp"

namespace hotrack {

Vec3 backproject(const Vec2& pixel, double depth_mm, const Intrinsics& K) {
  if (!(depth_mm > 0.0)) throw InvalidInput("backproject: depth must be positive");
  return {(pixel.x() - K.cx) * depth_mm / K.fx, (pixel.y() - K.cy) * depth_mm / K.fy, depth_mm};
}

Vec2 project(const Vec3& point, const Intrinsics& K) {
  return {K.fx * point.x() / point.z() + K.cx, K.fy * point.y() / point.z() + K.cy};
}

Vec3 pixel_ray(const Vec2& pixel, const Intrinsics& K) {
  return Vec3((pixel.x() - K.cx) / K.fx, (pixel.y() - K.cy) / K.fy, 1.0).normalized();
}

}  // namespace hotrack
