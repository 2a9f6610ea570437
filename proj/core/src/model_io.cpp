#include "hotrack/model_io.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hotrack/error.hpp"
#include "json_util.hpp"

namespace hotrack {

using nlohmann::json;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// Columns are the joint's local axes expressed in the parent frame: local -y runs
// along the bone, local -z is the flexion side.
Mat3 frame_from(const Vec3& along_bone, const Vec3& flex_side) {
  const Vec3 y = -along_bone.normalized();
  Vec3 z = -(flex_side - flex_side.dot(-y) * (-y));
  z.normalize();
  const Vec3 x = y.cross(z);
  Mat3 R;
  R.col(0) = x;
  R.col(1) = y;
  R.col(2) = z;
  return R;
}

struct FingerSpec {
  const char* name;
  Label label;
  Vec3 base;
  Mat3 base_rotation;
  std::array<double, 3> lengths;
  std::array<double, 4> sigmas;  // three phalanges + fingertip
};

}  // namespace

HandModelDefinition default_hand_model() {
  std::vector<Joint> joints;
  joints.push_back({"wrist", -1, Rigid::identity(), {}});

  const DofSpec abduct{Vec3::UnitZ(), -20.0 * kDeg, 20.0 * kDeg};
  const DofSpec base_flex{Vec3::UnitX(), -10.0 * kDeg, 90.0 * kDeg};
  const DofSpec distal_flex{Vec3::UnitX(), 0.0, 100.0 * kDeg};

  const Mat3 thumb_frame = frame_from(Vec3(0.75, -0.6, -0.28), Vec3(-0.55, -0.1, -0.8));
  const std::array<FingerSpec, 5> fingers = {{
      {"thumb", Label::Thumb, {22.0, -18.0, -8.0}, thumb_frame, {40.0, 32.0, 28.0}, {11.0, 9.5, 8.5, 8.0}},
      {"index", Label::Index, {24.0, -88.0, 0.0}, Mat3::Identity(), {42.0, 25.0, 21.0}, {9.5, 8.5, 7.5, 7.0}},
      {"middle", Label::Middle, {5.0, -92.0, 0.0}, Mat3::Identity(), {46.0, 28.0, 22.0}, {10.0, 8.8, 7.8, 7.2}},
      {"ring", Label::Ring, {-13.0, -88.0, 0.0}, Mat3::Identity(), {43.0, 27.0, 21.0}, {9.5, 8.5, 7.5, 7.0}},
      {"little", Label::Little, {-29.0, -77.0, 0.0}, Mat3::Identity(), {34.0, 20.0, 19.0}, {8.5, 7.5, 6.8, 6.3}},
  }};

  HandModelDefinition def;
  std::vector<RiggedGaussian> finger_gaussians;
  std::array<int, 5> tips{};
  for (std::size_t f = 0; f < fingers.size(); ++f) {
    const FingerSpec& s = fingers[f];
    const int base = static_cast<int>(joints.size());
    const std::string n = s.name;
    joints.push_back({n + "_base", 0, Rigid{s.base_rotation, s.base}, {abduct, base_flex}});
    joints.push_back({n + "_mid", base, Rigid{Mat3::Identity(), Vec3(0.0, -s.lengths[0], 0.0)}, {distal_flex}});
    joints.push_back({n + "_distal", base + 1, Rigid{Mat3::Identity(), Vec3(0.0, -s.lengths[1], 0.0)}, {distal_flex}});
    joints.push_back({n + "_tip", base + 2,
                      Rigid{Mat3::Identity(), Vec3(0.0, -(s.lengths[2] - 0.8 * s.sigmas[3]), 0.0)}, {}});
    finger_gaussians.push_back({base, Vec3(0.0, -0.5 * s.lengths[0], 0.0), s.sigmas[0], s.label});
    finger_gaussians.push_back({base + 1, Vec3(0.0, -0.5 * s.lengths[1], 0.0), s.sigmas[1], s.label});
    finger_gaussians.push_back({base + 2, Vec3(0.0, -0.3 * s.lengths[2], 0.0), s.sigmas[2], s.label});
    finger_gaussians.push_back({base + 3, Vec3::Zero(), s.sigmas[3], s.label});
    tips[f] = 10 + static_cast<int>(f) * 4 + 3;
  }

  // Palm grid plus the thenar pad.
  for (double y : {-22.0, -46.0, -70.0})
    for (double x : {22.0, 0.0, -22.0}) def.hand.push_back({0, Vec3(x, y, 0.0), 14.0, Label::Palm});
  def.hand.push_back({0, Vec3(26.0, -30.0, -4.0), 13.0, Label::Palm});
  def.hand.insert(def.hand.end(), finger_gaussians.begin(), finger_gaussians.end());
  def.fingertips = tips;
  def.kinematics = KinematicModel(std::move(joints));
  return def;
}

static HandModelDefinition hand_model_from_json_unchecked(std::string_view text) {
  const json doc = detail::parse_json(text, "model definition");
  detail::check_keys(doc, {"format", "version", "joints", "gaussians"}, "model definition");
  if (doc.value("format", std::string()) != "hotrack-hand-model")
    throw ParseError("model definition: format must be 'hotrack-hand-model'");
  if (doc.value("version", 0) != 1) throw ParseError("model definition: unsupported version");

  std::vector<Joint> joints;
  std::map<std::string, int> by_name;
  for (const json& j : doc.at("joints")) {
    detail::check_keys(j, {"name", "parent", "rest_translation", "rest_rotation", "dofs"}, "joint");
    Joint joint;
    joint.name = j.at("name").get<std::string>();
    const std::string parent = j.value("parent", std::string());
    if (parent.empty()) {
      joint.parent = -1;
    } else {
      auto it = by_name.find(parent);
      if (it == by_name.end()) throw ParseError("joint '" + joint.name + "' references unknown or later parent '" + parent + "'");
      joint.parent = it->second;
    }
    joint.rest.t = detail::vec3(j.at("rest_translation"));
    joint.rest.R = exp_so3(detail::vec3(j.value("rest_rotation", json::array({0, 0, 0}))));
    for (const json& d : j.value("dofs", json::array())) {
      detail::check_keys(d, {"axis", "lower_deg", "upper_deg"}, "dof");
      joint.dofs.push_back({detail::vec3(d.at("axis")), d.at("lower_deg").get<double>() * kDeg,
                            d.at("upper_deg").get<double>() * kDeg});
    }
    if (!by_name.emplace(joint.name, static_cast<int>(joints.size())).second)
      throw ParseError("duplicate joint name '" + joint.name + "'");
    joints.push_back(std::move(joint));
  }

  HandModelDefinition def;
  def.kinematics = KinematicModel(std::move(joints));
  std::vector<int> tips;
  for (const json& g : doc.at("gaussians")) {
    detail::check_keys(g, {"bone", "offset", "sigma", "label", "fingertip"}, "gaussian");
    RiggedGaussian r;
    const std::string bone = g.at("bone").get<std::string>();
    auto it = by_name.find(bone);
    if (it == by_name.end()) throw ParseError("gaussian rigged to unknown bone '" + bone + "'");
    r.bone = it->second;
    r.offset = detail::vec3(g.at("offset"));
    r.sigma = g.at("sigma").get<double>();
    if (!(r.sigma > 0.0)) throw ParseError("gaussian sigma must be positive");
    r.label = label_from_name(g.at("label").get<std::string>());
    if (g.value("fingertip", false)) tips.push_back(static_cast<int>(def.hand.size()));
    def.hand.push_back(r);
  }
  if (tips.size() != kFingertips) throw ParseError("model definition must flag exactly 5 fingertip gaussians");
  std::copy(tips.begin(), tips.end(), def.fingertips.begin());
  return def;
}

std::string hand_model_to_json(const HandModelDefinition& model) {
  json doc;
  doc["format"] = "hotrack-hand-model";
  doc["version"] = 1;
  const auto& joints = model.kinematics.joints();
  json js = json::array();
  for (const Joint& j : joints) {
    json o;
    o["name"] = j.name;
    o["parent"] = j.parent < 0 ? std::string() : joints[j.parent].name;
    o["rest_translation"] = detail::to_json(j.rest.t);
    o["rest_rotation"] = detail::to_json(log_so3(j.rest.R));
    json dofs = json::array();
    for (const DofSpec& d : j.dofs)
      dofs.push_back({{"axis", detail::to_json(d.axis)}, {"lower_deg", d.lower / kDeg}, {"upper_deg", d.upper / kDeg}});
    o["dofs"] = dofs;
    js.push_back(o);
  }
  doc["joints"] = js;
  json gs = json::array();
  for (std::size_t i = 0; i < model.hand.size(); ++i) {
    const RiggedGaussian& g = model.hand[i];
    const bool tip = std::find(model.fingertips.begin(), model.fingertips.end(), static_cast<int>(i)) !=
                     model.fingertips.end();
    gs.push_back({{"bone", joints[g.bone].name},
                  {"offset", detail::to_json(g.offset)},
                  {"sigma", g.sigma},
                  {"label", std::string(label_name(g.label))},
                  {"fingertip", tip}});
  }
  doc["gaussians"] = gs;
  return doc.dump(2) + "\n";
}

HandModelDefinition load_hand_model(const std::filesystem::path& path) {
  return hand_model_from_json(detail::read_text(path));
}

void save_hand_model(const HandModelDefinition& model, const std::filesystem::path& path) {
  detail::write_text(path, hand_model_to_json(model));
}

std::array<Vec3, kObjectLandmarks> box_corner_landmarks(const Vec3& size) {
  const Vec3 h = 0.5 * size;
  return {Vec3(h.x(), h.y(), h.z()), Vec3(-h.x(), h.y(), h.z()), Vec3(h.x(), -h.y(), -h.z())};
}

SceneModel make_scene(const HandModelDefinition& hand, GaussianMixture object,
                      const std::array<Vec3, kObjectLandmarks>& landmarks) {
  SceneModel scene;
  scene.hand = hand.hand;
  scene.fingertips = hand.fingertips;
  scene.object = std::move(object);
  scene.object_landmarks = landmarks;
  scene.validate(hand.kinematics);
  return scene;
}

SceneModel default_scene(const HandModelDefinition& hand, int object_gaussians) {
  const VoxelGrid box = make_box_grid(kDefaultObjectSize, 2.5);
  return make_scene(hand, fit_object_gaussians(box, object_gaussians), box_corner_landmarks(kDefaultObjectSize));
}

HandModelDefinition hand_model_from_json(std::string_view text) {
  try {
    return hand_model_from_json_unchecked(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model definition: ") + e.what());
  }
}

}  // namespace hotrack
