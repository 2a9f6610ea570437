// Annotation readers. The external adapter is kept entirely in this file so
// its field mapping can be swapped without touching the metric code.

#include <charconv>
#include <cmath>
#include <sstream>

#include "hotrack/eval.hpp"
#include "json_util.hpp"

namespace hotrack {

using nlohmann::json;

void AnnotationSet::validate() const {
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const FrameAnnotation& f = frames[i];
    if (i > 0 && f.frame <= frames[i - 1].frame)
      throw InvalidInput("annotation frame indices must be strictly increasing");
    for (int k = 0; k < kFingertips; ++k)
      if (f.fingertip_visible[k] && !f.fingertips[k].allFinite())
        throw InvalidInput("visible fingertip has a non-finite position");
    for (int k = 0; k < kObjectLandmarks; ++k)
      if (f.object_visible[k] && !f.object[k].allFinite())
        throw InvalidInput("visible object landmark has a non-finite position");
  }
}

namespace {

json landmark_array(std::span<const Vec3> p, std::span<const bool> visible) {
  json a = json::array();
  for (std::size_t i = 0; i < p.size(); ++i)
    a.push_back({{"position", detail::to_json(p[i])}, {"visible", visible[i]}});
  return a;
}

template <std::size_t N>
void read_landmarks(const json& j, std::array<Vec3, N>& p, std::array<bool, N>& visible,
                    const std::string& what) {
  if (!j.is_array() || j.size() != N)
    throw ParseError(what + ": expected " + std::to_string(N) + " entries");
  for (std::size_t i = 0; i < N; ++i) {
    detail::check_keys(j[i], {"position", "visible"}, what);
    visible[i] = j[i].at("visible").get<bool>();
    p[i] = visible[i] || j[i].contains("position") ? detail::vec3(j[i].at("position")) : Vec3::Zero();
  }
}

AnnotationSet parse_native(std::string_view text) {
  const json doc = detail::parse_json(text, "annotations");
  AnnotationSet set;
  try {
    detail::check_keys(doc, {"format", "version", "frames"}, "annotations");
    if (doc.at("format") != "hotrack-annotations") throw ParseError("annotations: wrong format tag");
    if (doc.at("version") != 1) throw ParseError("annotations: unsupported version");
    for (const json& f : doc.at("frames")) {
      detail::check_keys(f, {"frame", "fingertips", "object"}, "annotation frame");
      FrameAnnotation a;
      a.frame = f.at("frame").get<int>();
      const std::string where = "frame " + std::to_string(a.frame);
      read_landmarks(f.at("fingertips"), a.fingertips, a.fingertip_visible, where + " fingertips");
      read_landmarks(f.at("object"), a.object, a.object_visible, where + " object");
      set.frames.push_back(a);
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("annotations: ") + e.what());
  }
  try {
    set.validate();
  } catch (const InvalidInput& e) {
    throw ParseError(std::string("annotations: ") + e.what());
  }
  return set;
}

// External layout: one frame per line,
//   <frame> followed by 8 triples (5 fingertips thumb..little, then 3 object corners),
// in millimetres. A triple of "nan nan nan" or "-1 -1 -1" marks an occluded
// landmark. Blank lines and lines starting with '#' are skipped.
bool read_double(const std::string& tok, double& out) {
  if (tok == "nan" || tok == "NaN" || tok == "NAN") {
    out = std::nan("");
    return true;
  }
  const char* end = tok.data() + tok.size();
  const auto res = std::from_chars(tok.data(), end, out);
  return res.ec == std::errc() && res.ptr == end;
}

AnnotationSet parse_external(std::string_view text) {
  AnnotationSet set;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    std::vector<std::string> tokens;
    for (std::string t; ls >> t;) tokens.push_back(t);
    constexpr std::size_t kFields = 1 + 3 * (kFingertips + kObjectLandmarks);
    if (tokens.size() != kFields)
      throw ParseError("external annotations: expected " + std::to_string(kFields) + " fields, got " +
                           std::to_string(tokens.size()), lineno);
    FrameAnnotation a;
    int frame = 0;
    const auto res = std::from_chars(tokens[0].data(), tokens[0].data() + tokens[0].size(), frame);
    if (res.ec != std::errc() || res.ptr != tokens[0].data() + tokens[0].size())
      throw ParseError("external annotations: bad frame index '" + tokens[0] + "'", lineno);
    a.frame = frame;
    for (int k = 0; k < kFingertips + kObjectLandmarks; ++k) {
      Vec3 p;
      for (int c = 0; c < 3; ++c)
        if (!read_double(tokens[1 + 3 * k + c], p[c]))
          throw ParseError("external annotations: bad number '" + tokens[1 + 3 * k + c] + "'", lineno);
      const bool visible = p.allFinite() && !(p.array() == -1.0).all();
      if (k < kFingertips) {
        a.fingertips[k] = visible ? p : Vec3::Zero();
        a.fingertip_visible[k] = visible;
      } else {
        a.object[k - kFingertips] = visible ? p : Vec3::Zero();
        a.object_visible[k - kFingertips] = visible;
      }
    }
    if (!set.frames.empty() && a.frame <= set.frames.back().frame)
      throw ParseError("external annotations: frame indices must increase", lineno);
    set.frames.push_back(a);
  }
  return set;
}

}  // namespace

AnnotationSet parse_annotations(std::string_view text, AnnotationFormat format) {
  return format == AnnotationFormat::Native ? parse_native(text) : parse_external(text);
}

AnnotationSet load_annotations(const std::filesystem::path& path, AnnotationFormat format) {
  return parse_annotations(detail::read_text(path), format);
}

std::string annotations_to_json(const AnnotationSet& set) {
  set.validate();
  json frames = json::array();
  for (const FrameAnnotation& f : set.frames)
    frames.push_back({{"frame", f.frame},
                      {"fingertips", landmark_array(f.fingertips, f.fingertip_visible)},
                      {"object", landmark_array(f.object, f.object_visible)}});
  json doc = {{"format", "hotrack-annotations"}, {"version", 1}, {"frames", std::move(frames)}};
  return doc.dump(1) + "\n";
}

void save_annotations(const AnnotationSet& set, const std::filesystem::path& path) {
  detail::write_text(path, annotations_to_json(set));
}

}  // namespace hotrack
