#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "hotrack/depth_input.hpp"
#include "hotrack/kinematics.hpp"
#include "hotrack/labels.hpp"

namespace hotrack {

// ---------------------------------------------------------------------------
// Colour segmentation

struct Hsv {
  double h = 0.0;  // degrees, [0, 360)
  double s = 0.0;  // [0, 1]
  double v = 0.0;  // [0, 1]
};

Hsv rgb_to_hsv(std::uint8_t r, std::uint8_t g, std::uint8_t b);
std::array<std::uint8_t, 3> hsv_to_rgb(const Hsv& hsv);

/// Hue interval may wrap through 0 (hue_lo > hue_hi).
struct HsvRange {
  double hue_lo = 0.0;
  double hue_hi = 360.0;
  double sat_lo = 0.0;
  double sat_hi = 1.0;
  double val_lo = 0.0;
  double val_hi = 1.0;

  bool contains(const Hsv& c) const;
  void validate() const;
};

struct ObjectSegmentation {
  std::vector<std::uint8_t> object_mask;  // 1 where the colour falls in range
  DepthFrame hand_depth;                  // input depth with object pixels invalidated
};

ObjectSegmentation segment_object_hsv(const ColorFrame& color, const DepthFrame& depth,
                                      const HsvRange& range);

// ---------------------------------------------------------------------------
// Depth-difference features

/// Read-only depth image for feature evaluation (mm, 0 = invalid).
struct DepthView {
  int width = 0;
  int height = 0;
  const float* data = nullptr;

  /// Depth at a probe pixel; out-of-image or invalid probes read kMaxDepthMm.
  float probe(int u, int v) const {
    if (u < 0 || v < 0 || u >= width || v >= height) return kMaxDepthMm;
    const float d = data[static_cast<std::size_t>(v) * width + u];
    return d > 0.0f ? d : kMaxDepthMm;
  }
};

inline DepthView view_of(const DepthFrame& f) { return {f.width, f.height, f.depth.data()}; }

enum class FeatureKind : std::uint8_t { Unary = 0, Binary = 1 };

/// Offsets are in pixel-millimetres and get divided by the centre depth.
struct DepthFeature {
  FeatureKind kind = FeatureKind::Unary;
  Eigen::Vector2f offset1 = Eigen::Vector2f::Zero();
  Eigen::Vector2f offset2 = Eigen::Vector2f::Zero();
};

/// Feature response at (u, v) whose centre depth is `center_depth` (> 0).
/// Unary: probe - centre. Binary: probe1 - probe2.
float evaluate_feature(const DepthView& depth, int u, int v, float center_depth,
                       const DepthFeature& feature);

// ---------------------------------------------------------------------------
// Decision forests

enum class Viewpoint : std::int8_t { Front = 0, Back = 1, Thumb = 2, Little = 3 };
inline constexpr int kViewpointCount = 4;
std::string_view viewpoint_name(Viewpoint v);

// Layer-1 classes.
inline constexpr int kLayer1Hand = 0;
inline constexpr int kLayer1Arm = 1;
inline constexpr int kLayer1Background = 2;
inline constexpr int kLayer1Classes = 3;
// Layer-2 classes: thumb, index, middle, ring, little, palm, background.
inline constexpr int kLayer2Background = 6;
inline constexpr int kLayer2Classes = 7;

struct TreeNode {
  DepthFeature feature;
  float threshold = 0.0f;
  std::int32_t left = -1;   // taken when feature < threshold
  std::int32_t right = -1;
  std::int32_t leaf = -1;   // index into leaf histograms, or -1 for split nodes
};

struct DecisionTree {
  std::vector<TreeNode> nodes;    // nodes[0] is the root
  std::vector<float> histograms;  // leaf_count x class_count, each row sums to 1

  int depth() const;
  std::size_t leaf_count(int class_count) const { return histograms.size() / class_count; }
};

struct DecisionForest {
  int class_count = 0;
  int max_depth = 0;
  int layer = 1;
  int viewpoint = -1;  // -1 for the layer-1 forest
  std::vector<DecisionTree> trees;

  /// Average of the trees' leaf histograms at (u, v); `out` has class_count entries.
  void predict(const DepthView& depth, int u, int v, std::span<float> out) const;
  int predict_class(const DepthView& depth, int u, int v) const;
};

/// Labelled depth image for training. Labels are forest classes; 255 = not sampled.
struct TrainingImage {
  int width = 0;
  int height = 0;
  std::vector<float> depth;
  std::vector<std::uint8_t> labels;

  DepthView view() const { return {width, height, depth.data()}; }
};

inline constexpr std::uint8_t kIgnoreLabel = 255;

struct ForestParams {
  int trees = 3;
  int pixels_per_image = 2000;
  int candidate_offsets = 100;
  int thresholds = 40;
  int max_depth = 19;
  double min_gain = 1e-4;           ///< nats
  float offset_range = 60000.0f;    ///< pixel-mm half-width of the offset window
  int min_samples = 2;              ///< nodes with fewer samples become leaves
  std::uint64_t seed = 1;
  int threads = 1;
};

/// Trains `params.trees` trees, each on a distinct random subset of the images.
DecisionForest train_forest(std::span<const TrainingImage> dataset, const ForestParams& params,
                            int class_count);

/// Per-pixel accuracy over labelled (non-ignored) valid pixels.
struct AccuracyReport {
  double accuracy = 0.0;
  double majority_baseline = 0.0;
  std::size_t pixels = 0;
  std::vector<std::size_t> class_counts;
};
AccuracyReport evaluate_forest(const DecisionForest& forest, std::span<const TrainingImage> images);

/// Versioned little-endian binary format, see docs/formats.md.
void save_forest(const DecisionForest& forest, const std::filesystem::path& path);
DecisionForest load_forest(const std::filesystem::path& path);
std::vector<std::uint8_t> serialize_forest(const DecisionForest& forest);
DecisionForest deserialize_forest(std::span<const std::uint8_t> bytes);

/// One layer-1 forest plus one layer-2 forest per viewpoint.
struct ForestSet {
  DecisionForest layer1;
  std::array<DecisionForest, kViewpointCount> layer2;
};

/// layer1.forest plus layer2_<viewpoint>.forest in `dir`.
void save_forest_set(const ForestSet& set, const std::filesystem::path& dir);
ForestSet load_forest_set(const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Pipeline stages

/// Picks the viewpoint whose canonical hand axis points most directly at the
/// camera given the previous pose; ties follow front > back > thumb > little.
Viewpoint select_viewpoint(const PoseVector& previous_pose, const KinematicModel& kinematics);

/// Two-layer per-pixel classification of the object-free depth map.
LabelHistogramImage classify_pixels(const DecisionForest& layer1, const DecisionForest& layer2,
                                    const DepthFrame& hand_depth,
                                    std::span<const std::uint8_t> object_mask, int threads = 1);

}  // namespace hotrack
