#include "hotrack/labels.hpp"

#include <string>

#include "hotrack/error.hpp"

namespace hotrack {

namespace {
constexpr std::array<std::string_view, kLabelCount> kNames = {
    "thumb", "index", "middle", "ring", "little", "palm", "object", "background"};
}

std::string_view label_name(Label l) { return kNames[label_index(l)]; }

Label label_from_name(std::string_view name) {
  for (int i = 0; i < kLabelCount; ++i)
    if (kNames[i] == name) return static_cast<Label>(i);
  throw InvalidInput("unknown label '" + std::string(name) + "'");
}

LabelHistogramImage::LabelHistogramImage(int w, int h)
    : width(w), height(h), pixels(static_cast<std::size_t>(w) * h) {
  LabelHistogram bg{};
  bg[label_index(Label::Background)] = 1.0f;
  std::fill(pixels.begin(), pixels.end(), bg);
}

Label LabelHistogramImage::argmax(int u, int v) const {
  const LabelHistogram& h = at(u, v);
  int best = 0;
  for (int c = 1; c < kLabelCount; ++c)
    if (h[c] > h[best]) best = c;
  return static_cast<Label>(best);
}

}  // namespace hotrack
