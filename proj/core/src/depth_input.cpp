#include "hotrack/depth_input.hpp"

#include <cmath>
#include <string>

#include "hotrack/error.hpp"

namespace hotrack {

DepthFrame::DepthFrame(int w, int h, const Intrinsics& K)
    : width(w), height(h), depth(static_cast<std::size_t>(w) * h, 0.0f), intrinsics(K) {}

void DepthFrame::validate() const {
  if (width <= 0 || height <= 0) throw InvalidInput("depth frame has zero size");
  if (depth.size() != static_cast<std::size_t>(width) * height)
    throw InvalidInput("depth buffer does not match frame size");
  for (float d : depth)
    if (!(d >= 0.0f && d <= kMaxDepthMm)) throw InvalidInput("depth value outside [0, 10000] mm");
}

namespace {

struct Cell {
  bool merged = false;  // the whole cell is one leaf candidate
  int count = 0;
  double sum = 0.0;
  double sum_sq = 0.0;
  double su = 0.0;
  double sv = 0.0;
};

}  // namespace

std::vector<QuadLeaf> quadtree_cluster(const DepthFrame& frame, std::span<const std::uint8_t> mask,
                                       const QuadtreeOptions& options) {
  if (mask.size() != frame.size()) throw InvalidInput("quadtree_cluster: mask size mismatch");
  const int B = options.max_block;
  if (B < 1 || B > 8 || (B & (B - 1)) != 0) throw InvalidInput("quadtree_cluster: block size must be 1, 2, 4 or 8");
  const double eps2 = options.epsilon_mm * options.epsilon_mm;
  const Intrinsics& K = frame.intrinsics;

  std::vector<QuadLeaf> leaves;
  // levels[l] holds (B >> l)^2 ... cells of size (1 << l) inside the current block.
  std::vector<std::vector<Cell>> levels;
  int depth_levels = 0;
  while ((1 << depth_levels) < B) ++depth_levels;
  levels.resize(depth_levels + 1);

  auto emit = [&](int x, int y, int size) {
    QuadLeaf leaf;
    leaf.x = x;
    leaf.y = y;
    leaf.size = size;
    double sum = 0.0, sum_sq = 0.0, su = 0.0, sv = 0.0;
    for (int dy = 0; dy < size; ++dy)
      for (int dx = 0; dx < size; ++dx) {
        const int u = x + dx, v = y + dy;
        if (u >= frame.width || v >= frame.height) continue;
        const std::size_t idx = static_cast<std::size_t>(v) * frame.width + u;
        const double d = frame.depth[idx];
        if (!mask[idx] || !(d > 0.0)) continue;
        leaf.coverage |= std::uint64_t{1} << (dy * size + dx);
        ++leaf.pixel_count;
        sum += d;
        sum_sq += d * d;
        su += u;
        sv += v;
      }
    if (leaf.pixel_count == 0) return;
    const double n = leaf.pixel_count;
    leaf.mean_depth = sum / n;
    leaf.depth_variance = std::max(0.0, sum_sq / n - leaf.mean_depth * leaf.mean_depth);
    leaf.centroid = Vec2(su / n, sv / n);
    const double side = 0.5 * (size * leaf.mean_depth / K.fx + size * leaf.mean_depth / K.fy);
    leaf.sigma = 0.5 * side;
    leaf.mean = backproject(leaf.centroid, leaf.mean_depth, K) +
                options.displacement_scale * side * pixel_ray(leaf.centroid, K);
    leaves.push_back(leaf);
  };

  for (int by = 0; by < frame.height; by += B) {
    for (int bx = 0; bx < frame.width; bx += B) {
      // Level 0: single pixels.
      auto& base = levels[0];
      base.assign(static_cast<std::size_t>(B) * B, Cell{});
      bool any = false;
      for (int dy = 0; dy < B; ++dy)
        for (int dx = 0; dx < B; ++dx) {
          const int u = bx + dx, v = by + dy;
          Cell& c = base[static_cast<std::size_t>(dy) * B + dx];
          c.merged = true;
          if (u >= frame.width || v >= frame.height) continue;
          const std::size_t idx = static_cast<std::size_t>(v) * frame.width + u;
          const double d = frame.depth[idx];
          if (!mask[idx] || !(d > 0.0)) continue;
          c.count = 1;
          c.sum = d;
          c.sum_sq = d * d;
          any = true;
        }
      if (!any) continue;

      // Merge upwards: a parent merges only if all children merged and the
      // masked depth variance stays below eps^2 (fewer than 2 pixels merge trivially).
      for (int l = 1; l <= depth_levels; ++l) {
        const int n_child = B >> (l - 1);
        const int n = B >> l;
        auto& child = levels[l - 1];
        auto& cur = levels[l];
        cur.assign(static_cast<std::size_t>(n) * n, Cell{});
        for (int cy = 0; cy < n; ++cy)
          for (int cx = 0; cx < n; ++cx) {
            Cell& p = cur[static_cast<std::size_t>(cy) * n + cx];
            bool all = true;
            for (int k = 0; k < 4; ++k) {
              const Cell& c = child[static_cast<std::size_t>(2 * cy + k / 2) * n_child + 2 * cx + k % 2];
              all = all && c.merged;
              p.count += c.count;
              p.sum += c.sum;
              p.sum_sq += c.sum_sq;
            }
            if (!all) continue;
            if (p.count < 2) {
              p.merged = true;
            } else {
              const double mean = p.sum / p.count;
              const double var = p.sum_sq / p.count - mean * mean;
              p.merged = var < eps2;
            }
          }
      }

      // Emit maximal merged cells, top-down.
      auto recurse = [&](auto&& self, int l, int cx, int cy) -> void {
        const int n = B >> l;
        const Cell& c = levels[l][static_cast<std::size_t>(cy) * n + cx];
        if (c.count == 0) return;
        const int size = 1 << l;
        if (c.merged) {
          emit(bx + cx * size, by + cy * size, size);
          return;
        }
        for (int k = 0; k < 4; ++k) self(self, l - 1, 2 * cx + k % 2, 2 * cy + k / 2);
      };
      recurse(recurse, depth_levels, 0, 0);
    }
  }
  return leaves;
}

void attach_labels(std::vector<QuadLeaf>& leaves, const LabelHistogramImage& histograms) {
  for (QuadLeaf& leaf : leaves) {
    std::array<double, kLabelCount> sum{};
    for (int dy = 0; dy < leaf.size; ++dy)
      for (int dx = 0; dx < leaf.size; ++dx) {
        if (!((leaf.coverage >> (dy * leaf.size + dx)) & 1u)) continue;
        const int u = leaf.x + dx, v = leaf.y + dy;
        if (u >= histograms.width || v >= histograms.height)
          throw InvalidInput("attach_labels: histogram image smaller than the depth frame");
        const LabelHistogram& h = histograms.at(u, v);
        for (int c = 0; c < kLabelCount; ++c) sum[c] += h[c];
      }
    int best = 0;
    double total = 0.0;
    for (int c = 0; c < kLabelCount; ++c) {
      total += sum[c];
      if (sum[c] > sum[best]) best = c;
    }
    leaf.label = static_cast<Label>(best);
    leaf.label_prob = total > 0.0 ? sum[best] / total : 0.0;
  }
}

void attach_labels(std::vector<QuadLeaf>& leaves, const LabelHistogramImage& histograms,
                   const DepthFrame& frame) {
  if (histograms.width != frame.width || histograms.height != frame.height)
    throw InvalidInput("attach_labels: histogram image size differs from the depth frame");
  attach_labels(leaves, histograms);
}

DataMixtures split_channels(const std::vector<QuadLeaf>& leaves) {
  DataMixtures out;
  for (const QuadLeaf& leaf : leaves) {
    Gaussian g;
    g.mean = leaf.mean;
    g.sigma = leaf.sigma;
    g.weight = 1.0;
    g.label = leaf.label;
    g.label_prob = leaf.label_prob;
    (leaf.label == Label::Object ? out.object : out.hand).push_back(g);
  }
  return out;
}

}  // namespace hotrack
