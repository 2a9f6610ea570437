#include "hotrack/classification.hpp"

#include <algorithm>
#include <cmath>

#include "hotrack/error.hpp"
#include "hotrack/parallel.hpp"

namespace hotrack {

Hsv rgb_to_hsv(std::uint8_t r8, std::uint8_t g8, std::uint8_t b8) {
  const double r = r8 / 255.0, g = g8 / 255.0, b = b8 / 255.0;
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double c = mx - mn;
  Hsv out;
  out.v = mx;
  out.s = mx > 0.0 ? c / mx : 0.0;
  if (c <= 0.0) return out;
  double h;
  if (mx == r)
    h = std::fmod((g - b) / c, 6.0);
  else if (mx == g)
    h = (b - r) / c + 2.0;
  else
    h = (r - g) / c + 4.0;
  h *= 60.0;
  if (h < 0.0) h += 360.0;
  if (h >= 360.0) h -= 360.0;
  out.h = h;
  return out;
}

std::array<std::uint8_t, 3> hsv_to_rgb(const Hsv& in) {
  double h = std::fmod(in.h, 360.0);
  if (h < 0.0) h += 360.0;
  const double s = std::clamp(in.s, 0.0, 1.0);
  const double v = std::clamp(in.v, 0.0, 1.0);
  const double c = v * s;
  const double x = c * (1.0 - std::fabs(std::fmod(h / 60.0, 2.0) - 1.0));
  const double m = v - c;
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(h / 60.0)) {
    case 0: r = c; g = x; break;
    case 1: r = x; g = c; break;
    case 2: g = c; b = x; break;
    case 3: g = x; b = c; break;
    case 4: r = x; b = c; break;
    default: r = c; b = x; break;
  }
  auto to8 = [](double t) {
    return static_cast<std::uint8_t>(std::clamp(std::lround(t * 255.0), 0l, 255l));
  };
  return {to8(r + m), to8(g + m), to8(b + m)};
}

bool HsvRange::contains(const Hsv& c) const {
  const bool hue_ok = hue_lo <= hue_hi ? (c.h >= hue_lo && c.h <= hue_hi)
                                       : (c.h >= hue_lo || c.h <= hue_hi);
  return hue_ok && c.s >= sat_lo && c.s <= sat_hi && c.v >= val_lo && c.v <= val_hi;
}

void HsvRange::validate() const {
  auto finite = [](double x) { return std::isfinite(x); };
  if (!finite(hue_lo) || !finite(hue_hi) || !finite(sat_lo) || !finite(sat_hi) ||
      !finite(val_lo) || !finite(val_hi))
    throw InvalidInput("HSV range has non-finite bounds");
  if (hue_lo < 0.0 || hue_lo > 360.0 || hue_hi < 0.0 || hue_hi > 360.0)
    throw InvalidInput("hue bounds must lie in [0, 360]");
  if (sat_lo > sat_hi || val_lo > val_hi) throw InvalidInput("empty saturation or value interval");
  if (sat_lo < 0.0 || sat_hi > 1.0 || val_lo < 0.0 || val_hi > 1.0)
    throw InvalidInput("saturation and value bounds must lie in [0, 1]");
}

ObjectSegmentation segment_object_hsv(const ColorFrame& color, const DepthFrame& depth,
                                      const HsvRange& range) {
  range.validate();
  if (color.width != depth.width || color.height != depth.height ||
      color.rgb.size() != depth.size() * 3)
    throw InvalidInput("colour and depth frames are not congruent");
  ObjectSegmentation out;
  out.object_mask.assign(depth.size(), 0);
  out.hand_depth = depth;
  for (std::size_t i = 0; i < depth.size(); ++i) {
    const std::uint8_t* p = &color.rgb[i * 3];
    if (range.contains(rgb_to_hsv(p[0], p[1], p[2]))) {
      out.object_mask[i] = 1;
      out.hand_depth.depth[i] = 0.0f;
    }
  }
  return out;
}

namespace {
// Round to nearest; the bias keeps the cast argument positive so truncation
// equals floor. Offsets beyond the bias land far outside any image anyway.
inline int offset_pixel(float base, float offset, float inv_depth) {
  constexpr float kBias = 65536.0f;
  const float x = base + offset * inv_depth + 0.5f + kBias;
  if (x <= 0.0f) return -1 << 20;
  return static_cast<int>(x) - static_cast<int>(kBias);
}
}  // namespace

float evaluate_feature(const DepthView& depth, int u, int v, float center_depth,
                       const DepthFeature& f) {
  const float inv = 1.0f / center_depth;
  const float fu = static_cast<float>(u), fv = static_cast<float>(v);
  const float p1 = depth.probe(offset_pixel(fu, f.offset1.x(), inv), offset_pixel(fv, f.offset1.y(), inv));
  if (f.kind == FeatureKind::Unary) return p1 - center_depth;
  const float p2 = depth.probe(offset_pixel(fu, f.offset2.x(), inv), offset_pixel(fv, f.offset2.y(), inv));
  return p1 - p2;
}

std::string_view viewpoint_name(Viewpoint v) {
  switch (v) {
    case Viewpoint::Front: return "front";
    case Viewpoint::Back: return "back";
    case Viewpoint::Thumb: return "thumb";
    case Viewpoint::Little: return "little";
  }
  return "front";
}

Viewpoint select_viewpoint(const PoseVector& previous_pose, const KinematicModel&) {
  require_finite(previous_pose);
  const Mat3 R = exp_so3(previous_pose.segment<3>(kHandRotation));
  Vec3 view = previous_pose.segment<3>(kHandTranslation);
  view = view.norm() > 1e-9 ? view.normalized() : Vec3::UnitZ();
  const Vec3 toward_camera = -view;
  const std::array<Vec3, kViewpointCount> canonical = {-Vec3::UnitZ(), Vec3::UnitZ(),
                                                       Vec3::UnitX(), -Vec3::UnitX()};
  int best = 0;
  double best_score = -1e300;
  for (int k = 0; k < kViewpointCount; ++k) {
    const double score = (R * canonical[k]).dot(toward_camera);
    if (score > best_score) {
      best_score = score;
      best = k;
    }
  }
  return static_cast<Viewpoint>(best);
}

LabelHistogramImage classify_pixels(const DecisionForest& layer1, const DecisionForest& layer2,
                                    const DepthFrame& hand_depth,
                                    std::span<const std::uint8_t> object_mask, int threads) {
  if (object_mask.size() != hand_depth.size())
    throw InvalidInput("object mask size does not match the depth frame");
  if (layer1.class_count != kLayer1Classes || layer2.class_count != kLayer2Classes)
    throw InvalidInput("forest class counts do not match the two-layer layout");
  LabelHistogramImage out(hand_depth.width, hand_depth.height);
  const DepthView view = view_of(hand_depth);
  parallel_for(static_cast<std::size_t>(hand_depth.height), threads, [&](std::size_t row) {
    const int v = static_cast<int>(row);
    std::array<float, kLayer1Classes> p1{};
    std::array<float, kLayer2Classes> p2{};
    for (int u = 0; u < hand_depth.width; ++u) {
      const std::size_t idx = row * hand_depth.width + u;
      LabelHistogram& h = out.pixels[idx];
      h.fill(0.0f);
      if (object_mask[idx]) {
        h[label_index(Label::Object)] = 1.0f;
        continue;
      }
      if (!hand_depth.valid(u, v) || layer1.trees.empty()) {
        h[label_index(Label::Background)] = 1.0f;
        continue;
      }
      layer1.predict(view, u, v, p1);
      const int c1 = static_cast<int>(std::max_element(p1.begin(), p1.end()) - p1.begin());
      if (c1 != kLayer1Hand || layer2.trees.empty()) {
        h[label_index(Label::Background)] = 1.0f;
        continue;
      }
      layer2.predict(view, u, v, p2);
      for (int c = 0; c < kLayer2Background; ++c) h[c] = p2[c];
      h[label_index(Label::Background)] = p2[kLayer2Background];
    }
  });
  return out;
}

}  // namespace hotrack
