#include "hotrack/eval.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "json_util.hpp"

namespace hotrack {

using nlohmann::json;

FramePrediction predict_landmarks(const SceneModel& scene, const KinematicModel& kin,
                                  const PoseVector& pose, int frame) {
  const PosedScene posed = pose_scene_full(scene, kin, pose);
  FramePrediction p;
  p.frame = frame;
  p.pose = pose;
  p.fingertips = fingertip_positions(scene, posed.mixture);
  p.object = object_landmark_positions(scene, posed.skeleton);
  return p;
}

ErrorReport average_error(std::span<const FramePrediction> predicted, const AnnotationSet& truth) {
  truth.validate();
  std::map<int, const FramePrediction*> by_frame;
  for (const FramePrediction& p : predicted) by_frame[p.frame] = &p;
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();

  ErrorReport r;
  double sum_c = 0.0, sum_f = 0.0, sum_o = 0.0;
  for (const FrameAnnotation& a : truth.frames) {
    const auto it = by_frame.find(a.frame);
    if (it == by_frame.end()) continue;
    const FramePrediction& p = *it->second;
    double ef = 0.0, eo = 0.0;
    int nf = 0, no = 0;
    for (int k = 0; k < kFingertips; ++k)
      if (a.fingertip_visible[k]) {
        ef += (p.fingertips[k] - a.fingertips[k]).norm();
        ++nf;
      }
    for (int k = 0; k < kObjectLandmarks; ++k)
      if (a.object_visible[k]) {
        eo += (p.object[k] - a.object[k]).norm();
        ++no;
      }
    FrameError e;
    e.frame = a.frame;
    e.fingertips = nf > 0 ? ef / nf : nan;
    e.object = no > 0 ? eo / no : nan;
    e.combined = nf + no > 0 ? (ef + eo) / (nf + no) : nan;
    if (nf > 0) {
      sum_f += e.fingertips;
      ++r.fingertip_frames;
    }
    if (no > 0) {
      sum_o += e.object;
      ++r.object_frames;
    }
    if (nf + no > 0) {
      sum_c += e.combined;
      ++r.combined_frames;
    }
    r.per_frame.push_back(e);
  }
  if (r.per_frame.empty()) throw InvalidInput("predictions and annotations share no frame");
  r.combined = r.combined_frames ? sum_c / r.combined_frames : nan;
  r.fingertips = r.fingertip_frames ? sum_f / r.fingertip_frames : nan;
  r.object = r.object_frames ? sum_o / r.object_frames : nan;
  return r;
}

std::vector<double> consistency_curve(std::span<const double> errors,
                                      std::span<const double> thresholds) {
  std::size_t n = 0;
  for (double e : errors) n += std::isnan(e) ? 0 : 1;
  std::vector<double> out;
  out.reserve(thresholds.size());
  for (double t : thresholds) {
    std::size_t below = 0;
    for (double e : errors)
      if (!std::isnan(e) && e <= t) ++below;
    out.push_back(n ? static_cast<double>(below) / n : 0.0);
  }
  return out;
}

std::vector<double> default_thresholds() {
  std::vector<double> t;
  for (int i = 0; i <= 50; ++i) t.push_back(i);
  return t;
}

namespace {

json points(std::span<const Vec3> ps) {
  json a = json::array();
  for (const Vec3& p : ps) a.push_back(detail::to_json(p));
  return a;
}

template <std::size_t N>
std::array<Vec3, N> read_points(const json& j, const char* what) {
  if (!j.is_array() || j.size() != N)
    throw ParseError(std::string(what) + ": expected " + std::to_string(N) + " points");
  std::array<Vec3, N> out;
  for (std::size_t i = 0; i < N; ++i) out[i] = detail::vec3(j[i]);
  return out;
}

std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  std::ostringstream ss;
  ss.precision(9);
  ss << x;
  return ss.str();
}

}  // namespace

std::string trajectory_to_json(std::span<const FramePrediction> frames) {
  json doc = {{"format", "hotrack-trajectory"}, {"version", 1}};
  json arr = json::array();
  for (const FramePrediction& f : frames) {
    arr.push_back({{"frame", f.frame},
                   {"pose", std::vector<double>(f.pose.data(), f.pose.data() + kPoseDofs)},
                   {"fingertips", points(f.fingertips)},
                   {"object", points(f.object)}});
  }
  doc["frames"] = std::move(arr);
  return doc.dump(1) + "\n";
}

std::vector<FramePrediction> parse_trajectory(std::string_view text) {
  const json doc = detail::parse_json(text, "trajectory");
  try {
    detail::check_keys(doc, {"format", "version", "frames"}, "trajectory");
    if (doc.at("format") != "hotrack-trajectory") throw ParseError("trajectory: wrong format tag");
    if (doc.at("version") != 1) throw ParseError("trajectory: unsupported version");
    std::vector<FramePrediction> out;
    for (const json& f : doc.at("frames")) {
      detail::check_keys(f, {"frame", "pose", "fingertips", "object"}, "trajectory frame");
      FramePrediction p;
      p.frame = f.at("frame").get<int>();
      const auto pose = f.at("pose").get<std::vector<double>>();
      if (pose.size() != kPoseDofs) throw ParseError("trajectory: pose must have 32 entries");
      for (int i = 0; i < kPoseDofs; ++i) p.pose[i] = pose[i];
      p.fingertips = read_points<kFingertips>(f.at("fingertips"), "fingertips");
      p.object = read_points<kObjectLandmarks>(f.at("object"), "object");
      out.push_back(p);
    }
    return out;
  } catch (const json::exception& e) {
    throw ParseError(std::string("trajectory: ") + e.what());
  }
}

void save_trajectory(std::span<const FramePrediction> frames, const std::filesystem::path& path) {
  detail::write_text(path, trajectory_to_json(frames));
}

std::vector<FramePrediction> load_trajectory(const std::filesystem::path& path) {
  return parse_trajectory(detail::read_text(path));
}

std::string per_frame_errors_csv(const ErrorReport& report) {
  std::string s = "frame,combined_mm,fingertips_mm,object_mm\n";
  for (const FrameError& e : report.per_frame)
    s += std::to_string(e.frame) + "," + fmt(e.combined) + "," + fmt(e.fingertips) + "," + fmt(e.object) + "\n";
  return s;
}

std::string consistency_csv(std::span<const double> thresholds, std::span<const double> fractions) {
  std::string s = "threshold_mm,fraction\n";
  for (std::size_t i = 0; i < thresholds.size() && i < fractions.size(); ++i)
    s += fmt(thresholds[i]) + "," + fmt(fractions[i]) + "\n";
  return s;
}

std::string report_to_json(const ErrorReport& r) {
  auto num = [](double x) { return std::isnan(x) ? json(nullptr) : json(x); };
  json doc = {{"combined_mm", num(r.combined)},
              {"fingertips_mm", num(r.fingertips)},
              {"object_mm", num(r.object)},
              {"frames", r.per_frame.size()},
              {"combined_frames", r.combined_frames},
              {"fingertip_frames", r.fingertip_frames},
              {"object_frames", r.object_frames}};
  return doc.dump(1) + "\n";
}

}  // namespace hotrack
