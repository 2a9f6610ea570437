#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "hotrack/camera.hpp"
#include "hotrack/classification.hpp"
#include "hotrack/model_io.hpp"
#include "hotrack/tracker.hpp"

namespace hotrack {

struct SynthConfig {
  int length = 100;
  std::string trajectory = "constant";  // constant | grasp | sweep
  double depth_noise_mm = 2.0;
  bool forearm = true;
  bool render_object = true;
  double hue_noise_deg = 2.0;
  CameraModel camera{{285.0, 285.0, 159.5, 119.5}, 320, 240};
};

struct ForestTrainingConfig {
  int layer1_images = 2000;
  int layer2_images = 1000;  // per viewpoint
  int heldout_images = 100;  // per forest
  ForestParams layer1{.max_depth = 21};
  ForestParams layer2{.max_depth = 19};
};

struct RunPaths {
  std::filesystem::path sequence;     // manifest
  std::filesystem::path model;        // hand model definition; empty = built-in
  std::filesystem::path object;       // occupancy grid (.txt) or mesh (.off/.obj); empty = default cuboid
  std::filesystem::path forests;      // directory with layer1.forest and layer2_<view>.forest
  std::filesystem::path annotations;  // ground truth for eval
  std::filesystem::path predictions;  // trajectory for eval
  std::filesystem::path init;         // trajectory whose first frame seeds tracking
  std::filesystem::path output;       // output directory
};

struct RunConfig {
  RunPaths paths;
  TrackerConfig tracker;
  SynthConfig synth;
  ForestTrainingConfig forest;
  std::optional<PoseVector> init_pose;
  int object_gaussians = 12;
  double object_voxel_mm = 2.5;
  std::uint64_t seed = 1;
  int threads = 1;

  void validate() const;
};

/// Parses a JSON run configuration. Unknown keys are rejected; relative paths
/// resolve against `base_dir`.
RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);
std::string run_config_to_json(const RunConfig& config);

struct LoadedScene {
  HandModelDefinition hand;
  SceneModel scene;
};

/// Hand model from `paths.model` (or the built-in one) plus the object fitted
/// with `object_gaussians` components. Occupancy grids load from .txt, meshes
/// from .off/.obj and are voxelized at `object_voxel_mm`. Loaded objects use
/// three corners of the occupied bounding box as landmarks.
LoadedScene load_scene(const RunConfig& config);

}  // namespace hotrack
