#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "hotrack/kinematics.hpp"
#include "hotrack/scene_model.hpp"

namespace hotrack {

/// Contents of a model-definition file: skeleton, limits and hand rigging.
struct HandModelDefinition {
  KinematicModel kinematics;
  std::vector<RiggedGaussian> hand;
  std::array<int, kFingertips> fingertips{};
};

/// Built-in adult right-hand profile: 21 joints, 20 articulation DOFs, 30 Gaussians.
HandModelDefinition default_hand_model();

HandModelDefinition hand_model_from_json(std::string_view text);
std::string hand_model_to_json(const HandModelDefinition& model);
HandModelDefinition load_hand_model(const std::filesystem::path& path);
void save_hand_model(const HandModelDefinition& model, const std::filesystem::path& path);

/// Cuboid used by the synthetic fixtures, in mm.
inline const Vec3 kDefaultObjectSize{50.0, 50.0, 75.0};

/// Three corners of a centred box, used as object landmarks.
std::array<Vec3, kObjectLandmarks> box_corner_landmarks(const Vec3& size);

SceneModel make_scene(const HandModelDefinition& hand, GaussianMixture object,
                      const std::array<Vec3, kObjectLandmarks>& landmarks);

/// Default hand plus the default cuboid fitted with `object_gaussians` components.
SceneModel default_scene(const HandModelDefinition& hand, int object_gaussians = 12);

}  // namespace hotrack
