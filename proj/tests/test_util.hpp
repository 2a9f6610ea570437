#pragma once

#include <cmath>
#include <functional>
#include <random>

#include "hotrack/kinematics.hpp"
#include "hotrack/model_io.hpp"

namespace hotrack::test {

inline const HandModelDefinition& hand() {
  static const HandModelDefinition h = default_hand_model();
  return h;
}
inline const KinematicModel& kin() { return hand().kinematics; }
inline const SceneModel& scene() {
  static const SceneModel s = default_scene(hand(), 12);
  return s;
}

/// Articulation uniformly inside the limits, global parts in a plausible box.
inline PoseVector random_pose(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  PoseVector p = PoseVector::Zero();
  p.segment<3>(kHandTranslation) = Vec3(40 * u(rng), 40 * u(rng), 450 + 50 * u(rng));
  p.segment<3>(kHandRotation) = Vec3(u(rng), u(rng), u(rng)) * 0.8;
  const auto limits = joint_limits(kin());
  for (int i = 0; i < kArticulationDofs; ++i) {
    const auto [lo, hi] = limits[i];
    p[kArticulationBegin + i] = lo + (hi - lo) * 0.5 * (u(rng) + 1.0);
  }
  p.segment<3>(kObjectTranslation) = Vec3(60 * u(rng), 60 * u(rng), 420 + 40 * u(rng));
  p.segment<3>(kObjectRotation) = Vec3(u(rng), u(rng), u(rng));
  return p;
}

/// Plain central differences, kept separate from the library's helper.
template <int N, class F>
Eigen::Matrix<double, N, 1> central_diff(F&& f, const Eigen::Matrix<double, N, 1>& x, double h) {
  Eigen::Matrix<double, N, 1> g;
  for (int i = 0; i < N; ++i) {
    auto a = x, b = x;
    a[i] += h;
    b[i] -= h;
    g[i] = (f(a) - f(b)) / (2 * h);
  }
  return g;
}

/// Largest component error relative to the larger gradient's largest component.
template <class A, class B>
double rel_err(const A& a, const B& b, double floor = 1e-8) {
  const double scale = std::max({a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff(), floor});
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

}  // namespace hotrack::test
