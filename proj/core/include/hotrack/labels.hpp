#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

namespace hotrack {

/// Scene classes shared by model Gaussians, data leaves and classifier output.
enum class Label : std::uint8_t {
  Thumb = 0,
  Index = 1,
  Middle = 2,
  Ring = 3,
  Little = 4,
  Palm = 5,
  Object = 6,
  Background = 7,
};

inline constexpr int kLabelCount = 8;

/// Ground-truth code used only by the synthetic renderer for forearm pixels.
inline constexpr std::uint8_t kArmCode = 8;

inline constexpr int label_index(Label l) { return static_cast<int>(l); }

std::string_view label_name(Label l);
Label label_from_name(std::string_view name);

using LabelHistogram = std::array<float, kLabelCount>;

/// Per-pixel class likelihoods over the 8 scene classes.
struct LabelHistogramImage {
  int width = 0;
  int height = 0;
  std::vector<LabelHistogram> pixels;

  LabelHistogramImage() = default;
  LabelHistogramImage(int w, int h);
  LabelHistogram& at(int u, int v) { return pixels[static_cast<std::size_t>(v) * width + u]; }
  const LabelHistogram& at(int u, int v) const {
    return pixels[static_cast<std::size_t>(v) * width + u];
  }
  /// Index of the most likely class at a pixel; ties resolve to the lower index.
  Label argmax(int u, int v) const;
};

}  // namespace hotrack
