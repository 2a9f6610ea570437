#include "hotrack/scene_model.hpp"

#include <cmath>
#include <string>

#include "hotrack/error.hpp"

namespace hotrack {

double mixture_density(const GaussianMixture& mixture, const Vec3& x) {
  double sum = 0.0;
  for (const Gaussian& g : mixture)
    sum += g.weight * std::exp(-(x - g.mean).squaredNorm() / (2.0 * g.sigma * g.sigma));
  return sum;
}

void SceneModel::validate(const KinematicModel& kin) const {
  if (hand_count() != kHandGaussians)
    throw InvalidInput("hand model must have exactly 30 Gaussians, got " +
                       std::to_string(hand_count()));
  if (object_count() < 1 || object_count() > 256)
    throw InvalidInput("object Gaussian count must lie in [1, 256]");
  for (const RiggedGaussian& g : hand) {
    if (g.bone < 0 || g.bone >= kin.joint_count())
      throw InvalidInput("hand Gaussian rigged to a non-existent bone");
    if (!(g.sigma > 0.0)) throw InvalidInput("hand Gaussian sigma must be positive");
  }
  for (const Gaussian& g : object)
    if (!(g.sigma > 0.0)) throw InvalidInput("object Gaussian sigma must be positive");
  for (int i = 0; i < kFingertips; ++i) {
    if (fingertips[i] < 0 || fingertips[i] >= hand_count())
      throw InvalidInput("fingertip index out of range");
    for (int j = 0; j < i; ++j)
      if (fingertips[i] == fingertips[j]) throw InvalidInput("duplicate fingertip index");
  }
}

std::vector<std::vector<int>> influence_sets(const KinematicModel& kin, const SceneModel& scene) {
  std::vector<std::vector<int>> sets;
  sets.reserve(scene.hand.size());
  for (const RiggedGaussian& g : scene.hand) sets.push_back(kin.path_dofs(g.bone));
  return sets;
}

PosedScene pose_scene_full(const SceneModel& scene, const KinematicModel& kin,
                           const PoseVector& pose) {
  PosedScene out;
  out.skeleton = forward_kinematics(kin, pose);
  out.hand_count = scene.hand_count();
  out.mixture.reserve(scene.size());
  for (const RiggedGaussian& r : scene.hand) {
    if (r.bone < 0 || r.bone >= kin.joint_count()) throw InvalidInput("rigging bone out of range");
    Gaussian g;
    g.mean = out.skeleton.bones[r.bone].apply(r.offset);
    g.sigma = r.sigma;
    g.label = r.label;
    out.mixture.push_back(g);
  }
  for (Gaussian g : scene.object) {
    g.mean = out.skeleton.object.apply(g.mean);
    out.mixture.push_back(g);
  }
  return out;
}

GaussianMixture pose_scene(const SceneModel& scene, const KinematicModel& kin,
                           const PoseVector& pose) {
  return pose_scene_full(scene, kin, pose).mixture;
}

std::array<Vec3, kFingertips> fingertip_positions(const SceneModel& scene,
                                                  const GaussianMixture& posed) {
  std::array<Vec3, kFingertips> out;
  for (int i = 0; i < kFingertips; ++i) out[i] = posed.at(scene.fingertips[i]).mean;
  return out;
}

std::array<Vec3, kObjectLandmarks> object_landmark_positions(const SceneModel& scene,
                                                             const PosedSkeleton& skeleton) {
  std::array<Vec3, kObjectLandmarks> out;
  for (int i = 0; i < kObjectLandmarks; ++i) out[i] = skeleton.object.apply(scene.object_landmarks[i]);
  return out;
}

}  // namespace hotrack
