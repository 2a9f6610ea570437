#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include <filesystem>

#include "hotrack/classification.hpp"
#include "hotrack/eval.hpp"
#include "hotrack/depth_input.hpp"
#include "hotrack/kinematics.hpp"
#include "hotrack/scene_model.hpp"

namespace hotrack {

struct SynthColors {
  Hsv skin{20.0, 0.45, 0.80};
  Hsv object{120.0, 0.80, 0.70};
  double hue_noise_deg = 2.0;
};

struct ForearmOptions {
  bool enabled = true;
  double radius = 28.0;   // mm
  double start = 12.0;    // mm from the wrist along the hand's +y axis
  double length = 260.0;  // mm
};

struct RenderOptions {
  bool render_object = true;
  ForearmOptions forearm;
  double depth_noise_mm = 2.0;
  SynthColors colors;
  std::uint64_t seed = 0;  // colour and depth noise
};

/// Rendered depth, colour and per-pixel ground truth. Labels hold Label codes,
/// kArmCode for the forearm and Label::Background wherever depth is invalid.
struct RenderedFrame {
  DepthFrame depth;
  ColorFrame color;
  std::vector<std::uint8_t> labels;
};

/// 320x240 camera used by the synthetic fixtures.
CameraModel default_synth_camera();

/// A comfortable front-facing pose about 43 cm from the camera.
PoseVector default_synth_pose();

/// Nearest ray hit over the 1-sigma spheres of `posed` (and an optional
/// capsule-free forearm cylinder). `labels` selects the class per sphere.
RenderedFrame render_spheres(const GaussianMixture& posed, const CameraModel& camera,
                             const RenderOptions& options = {},
                             const std::optional<std::array<Vec3, 2>>& forearm_axis = std::nullopt);

RenderedFrame render_frame(const SceneModel& scene, const KinematicModel& kin, const PoseVector& pose,
                           const CameraModel& camera, const RenderOptions& options = {});

// ---------------------------------------------------------------------------
// Training data

struct TrainingSetOptions {
  CameraModel camera = default_synth_camera();
  RenderOptions render;
  std::uint64_t seed = 1;
  double min_distance = 350.0;  // hand distance range, mm
  double max_distance = 550.0;
  double lateral_jitter = 40.0;      // mm
  double rotation_jitter_deg = 30.0;  // around each viewpoint's base orientation
  double overlap_tolerance = 0.0;    // mm of allowed 1-sigma sphere interpenetration
  int placements_per_pose = 10;
};

struct TrainingSample {
  PoseVector pose = PoseVector::Zero();
  Viewpoint viewpoint = Viewpoint::Front;
  RenderedFrame frame;
  int attempts = 0;  // poses drawn before this sample was accepted
};

/// Base orientation whose canonical axis faces the camera for viewpoint `v`.
Mat3 viewpoint_rotation(Viewpoint v);

/// Sample `index` of a dataset; independent of every other index. With a
/// viewpoint the sample is redrawn until select_viewpoint agrees with it.
TrainingSample generate_training_sample(const SceneModel& scene, const KinematicModel& kin,
                                        const TrainingSetOptions& options, std::uint64_t index,
                                        std::optional<Viewpoint> viewpoint = std::nullopt);

/// `count` samples cycling through the four viewpoints.
std::vector<TrainingSample> generate_training_set(const SceneModel& scene, const KinematicModel& kin,
                                                  int count, const TrainingSetOptions& options);

/// true when some object sphere cuts into some hand sphere by more than `tolerance`.
bool hand_object_intersect(const GaussianMixture& posed, int hand_count, double tolerance);

/// Crop of the object-free depth to its valid bounding box, with forest labels.
/// Layer 1: hand/arm (background is invalid depth and therefore ignored).
/// Layer 2: the six hand parts; arm pixels keep their depth but are ignored.
TrainingImage to_training_image(const RenderedFrame& frame, int layer);

/// Streams `count` samples straight into cropped training images.
std::vector<TrainingImage> make_training_images(const SceneModel& scene, const KinematicModel& kin,
                                                const TrainingSetOptions& options, int count,
                                                int layer, std::optional<Viewpoint> viewpoint,
                                                int threads = 1);

// ---------------------------------------------------------------------------
// Sequences

struct Keyframe {
  double frame = 0.0;
  PoseVector pose = PoseVector::Zero();
};

/// Per-DOF cubic Hermite interpolation with Catmull-Rom tangents (one-sided at
/// the ends), clamped outside the keyframe range.
PoseVector interpolate_keyframes(const std::vector<Keyframe>& keys, double frame);

struct LandmarkSet {
  std::array<Vec3, kFingertips> fingertips{};
  std::array<bool, kFingertips> fingertip_visible{};
  std::array<Vec3, kObjectLandmarks> object{};
  std::array<bool, kObjectLandmarks> object_visible{};
};

struct SyntheticSequence {
  CameraModel camera;
  std::vector<RenderedFrame> frames;
  std::vector<PoseVector> poses;
  std::vector<LandmarkSet> landmarks;
};

/// Landmarks of `pose` with visibility judged against the rendered depth.
LandmarkSet ground_truth_landmarks(const SceneModel& scene, const KinematicModel& kin,
                                   const PoseVector& pose, const RenderedFrame& frame);

SyntheticSequence generate_sequence(const SceneModel& scene, const KinematicModel& kin,
                                    const std::vector<Keyframe>& keys, const CameraModel& camera,
                                    int length, const RenderOptions& options = {}, int threads = 1);

/// Fingers close around an object placed where the index fingertip ends up
/// touching it. Per-frame motion stays well under 5 degrees and 10 mm.
std::vector<Keyframe> grasp_trajectory(const SceneModel& scene, const KinematicModel& kin,
                                       const PoseVector& start, int length);

/// The object passes in front of the fingers from the thumb side to the
/// little side while the fingers flex slowly.
std::vector<Keyframe> occlusion_sweep_trajectory(const SceneModel& scene, const KinematicModel& kin,
                                                 const PoseVector& start, int length);

/// Smallest fingertip-to-object-Gaussian distance minus sigma_k + sigma_l.
double min_contact_margin(const SceneModel& scene, const KinematicModel& kin, const PoseVector& pose);

AnnotationSet sequence_annotations(const SyntheticSequence& seq);

/// Writes frames (PGM/PPM), camera.json, manifest.json, annotations.json and
/// ground_truth.json (poses in the trajectory format) into `dir`.
/// Returns the manifest path.
std::filesystem::path write_sequence(const SyntheticSequence& seq, const SceneModel& scene,
                                     const KinematicModel& kin, const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Forest set training

struct ForestSetSizes {
  int layer1_images = 2000;
  int layer2_images = 1000;  // per viewpoint
  int heldout_images = 100;  // per forest, drawn with a disjoint seed
};

struct ForestSetReport {
  AccuracyReport layer1;
  std::array<AccuracyReport, kViewpointCount> layer2;
  /// Two-layer output against ground truth on held-out frames, all viewpoints,
  /// over valid non-object pixels; the forearm counts as background.
  AccuracyReport cascade;
  double seconds = 0.0;
};

ForestSet train_forest_set(const SceneModel& scene, const KinematicModel& kin,
                           const TrainingSetOptions& data, const ForestSetSizes& sizes,
                           ForestParams layer1, ForestParams layer2, ForestSetReport* report = nullptr);

}  // namespace hotrack
