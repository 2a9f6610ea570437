#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "hotrack/camera.hpp"
#include "hotrack/labels.hpp"
#include "hotrack/scene_model.hpp"

namespace hotrack {

inline constexpr float kMaxDepthMm = 10000.0f;

/// Registered depth image in millimetres; 0 marks a missing measurement.
struct DepthFrame {
  int width = 0;
  int height = 0;
  std::vector<float> depth;
  Intrinsics intrinsics;
  double timestamp = 0.0;

  DepthFrame() = default;
  DepthFrame(int w, int h, const Intrinsics& K);
  float at(int u, int v) const { return depth[static_cast<std::size_t>(v) * width + u]; }
  float& at(int u, int v) { return depth[static_cast<std::size_t>(v) * width + u]; }
  bool valid(int u, int v) const { return at(u, v) > 0.0f; }
  std::size_t size() const { return depth.size(); }
  CameraModel camera() const { return {intrinsics, width, height}; }
  /// Throws InvalidInput on bad sizes or out-of-range depths.
  void validate() const;
};

/// 8-bit RGB image registered to the depth frame.
struct ColorFrame {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel

  ColorFrame() = default;
  ColorFrame(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0) {}
  const std::uint8_t* pixel(int u, int v) const { return &rgb[(static_cast<std::size_t>(v) * width + u) * 3]; }
  std::uint8_t* pixel(int u, int v) { return &rgb[(static_cast<std::size_t>(v) * width + u) * 3]; }
};

/// A merged quadtree cell summarised as one data Gaussian.
struct QuadLeaf {
  int x = 0;  // top-left pixel of the cell
  int y = 0;
  int size = 1;  // side length in pixels (1, 2, 4 or 8)
  std::uint64_t coverage = 0;  // bit (dy * size + dx) set for each masked pixel
  int pixel_count = 0;
  double mean_depth = 0.0;
  double depth_variance = 0.0;
  Vec2 centroid = Vec2::Zero();  // 2D centre of gravity of the masked pixels
  Vec3 mean = Vec3::Zero();
  double sigma = 0.0;
  Label label = Label::Background;
  double label_prob = 0.0;

  bool covers(int u, int v) const {
    const int dx = u - x, dy = v - y;
    if (dx < 0 || dy < 0 || dx >= size || dy >= size) return false;
    return (coverage >> (dy * size + dx)) & 1u;
  }
};

struct QuadtreeOptions {
  double epsilon_mm = 30.0;      ///< standard-deviation threshold for merging
  int max_block = 8;             ///< root cell size; the grid is anchored at (0, 0)
  double displacement_scale = 1.0;  ///< mean pushed this many side lengths along the ray
};

/// Bottom-up quadtree clustering of the masked, valid pixels of `frame`.
/// `mask` must have one entry per pixel (nonzero = foreground).
std::vector<QuadLeaf> quadtree_cluster(const DepthFrame& frame, std::span<const std::uint8_t> mask,
                                       const QuadtreeOptions& options = {});

/// Sums the per-pixel histograms over each leaf and stores the winning class
/// and its normalised share. Ties resolve to the lower class index.
void attach_labels(std::vector<QuadLeaf>& leaves, const LabelHistogramImage& histograms);
/// As above, first checking that the histogram image is congruent with `frame`.
void attach_labels(std::vector<QuadLeaf>& leaves, const LabelHistogramImage& histograms,
                   const DepthFrame& frame);

/// Data-side mixtures: object-labelled leaves and everything else.
struct DataMixtures {
  GaussianMixture hand;
  GaussianMixture object;
  std::size_t size() const { return hand.size() + object.size(); }
};

DataMixtures split_channels(const std::vector<QuadLeaf>& leaves);

}  // namespace hotrack
