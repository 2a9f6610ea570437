#include <cmath>
#include <limits>
#include <numbers>

#include "hotrack/error.hpp"
#include "hotrack/scene_model.hpp"

namespace hotrack {

namespace {

struct Footprint {
  double u, v, rx, ry, z, sigma;
  bool valid = false;
};

// Beyond this many pixels per axis the footprint is counted analytically.
constexpr double kMaxRasterRadius = 2000.0;

}  // namespace

std::vector<double> compute_visibility(const GaussianMixture& posed, const CameraModel& camera,
                                       VisibilityKind which, int hand_count) {
  if (camera.width <= 0 || camera.height <= 0)
    throw InvalidInput("compute_visibility: zero image size");
  if (!(camera.intrinsics.fx > 0.0) || !(camera.intrinsics.fy > 0.0))
    throw InvalidInput("compute_visibility: focal lengths must be positive");

  const int W = kOcclusionMapWidth;
  const int H = kOcclusionMapHeight;
  const Intrinsics K = camera.intrinsics.scaled(static_cast<double>(W) / camera.width,
                                                static_cast<double>(H) / camera.height);
  const int n = static_cast<int>(posed.size());
  std::vector<Footprint> fp(n);
  for (int i = 0; i < n; ++i) {
    const Gaussian& g = posed[i];
    if (!(g.mean.z() > 0.0)) continue;
    fp[i] = {K.fx * g.mean.x() / g.mean.z() + K.cx, K.fy * g.mean.y() / g.mean.z() + K.cy,
             K.fx * g.sigma / g.mean.z(), K.fy * g.sigma / g.mean.z(), g.mean.z(), g.sigma, true};
  }

  std::vector<double> zbuf(static_cast<std::size_t>(W) * H, std::numeric_limits<double>::infinity());
  std::vector<int> owner(static_cast<std::size_t>(W) * H, -1);
  std::vector<double> covered(n, 0.0);

  for (int i = 0; i < n; ++i) {
    const Footprint& f = fp[i];
    if (!f.valid) continue;
    auto visit = [&](int px, int py, double rho2) {
      if (px < 0 || py < 0 || px >= W || py >= H) return;
      const double depth = f.z - f.sigma * std::sqrt(std::max(0.0, 1.0 - rho2));
      const std::size_t idx = static_cast<std::size_t>(py) * W + px;
      if (depth < zbuf[idx]) {
        zbuf[idx] = depth;
        owner[idx] = i;
      }
    };
    if (f.rx > kMaxRasterRadius || f.ry > kMaxRasterRadius) {
      covered[i] = std::numbers::pi * f.rx * f.ry;
      for (int py = 0; py < H; ++py)
        for (int px = 0; px < W; ++px) {
          const double dx = (px - f.u) / f.rx, dy = (py - f.v) / f.ry;
          const double rho2 = dx * dx + dy * dy;
          if (rho2 <= 1.0) visit(px, py, rho2);
        }
      continue;
    }
    const int x0 = static_cast<int>(std::ceil(f.u - f.rx)), x1 = static_cast<int>(std::floor(f.u + f.rx));
    const int y0 = static_cast<int>(std::ceil(f.v - f.ry)), y1 = static_cast<int>(std::floor(f.v + f.ry));
    for (int py = y0; py <= y1; ++py)
      for (int px = x0; px <= x1; ++px) {
        const double dx = (px - f.u) / f.rx, dy = (py - f.v) / f.ry;
        const double rho2 = dx * dx + dy * dy;
        if (rho2 > 1.0) continue;
        covered[i] += 1.0;
        visit(px, py, rho2);
      }
    if (covered[i] == 0.0) {
      // Footprint smaller than a pixel: sample the pixel containing the centre.
      covered[i] = 1.0;
      visit(static_cast<int>(std::lround(f.u)), static_cast<int>(std::lround(f.v)), 0.0);
    }
  }

  std::vector<double> won(n, 0.0);
  for (int o : owner)
    if (o >= 0) won[o] += 1.0;

  const int count = which == VisibilityKind::HandOnly ? std::min(hand_count, n) : n;
  std::vector<double> f(count, 0.0);
  for (int i = 0; i < count; ++i)
    if (fp[i].valid && covered[i] > 0.0) f[i] = std::min(1.0, won[i] / covered[i]);
  return f;
}

}  // namespace hotrack
