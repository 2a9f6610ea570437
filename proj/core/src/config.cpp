#include "hotrack/config.hpp"

#include <limits>

#include "hotrack/error.hpp"
#include "json_util.hpp"

namespace hotrack {

using nlohmann::json;

namespace {

template <class T>
void opt(const json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

void opt_path(const json& j, const char* key, std::filesystem::path& dst,
              const std::filesystem::path& base) {
  if (!j.contains(key)) return;
  std::filesystem::path p = j.at(key).get<std::string>();
  dst = p.is_relative() && !base.empty() ? base / p : p;
}

void read_forest_params(const json& j, ForestParams& p, const std::string& what) {
  detail::check_keys(j, {"trees", "pixels_per_image", "candidate_offsets", "thresholds", "max_depth",
                         "min_gain", "offset_range", "min_samples"},
                     what);
  opt(j, "trees", p.trees);
  opt(j, "pixels_per_image", p.pixels_per_image);
  opt(j, "candidate_offsets", p.candidate_offsets);
  opt(j, "thresholds", p.thresholds);
  opt(j, "max_depth", p.max_depth);
  opt(j, "min_gain", p.min_gain);
  opt(j, "offset_range", p.offset_range);
  opt(j, "min_samples", p.min_samples);
}

json forest_params_json(const ForestParams& p) {
  return {{"trees", p.trees},           {"pixels_per_image", p.pixels_per_image},
          {"candidate_offsets", p.candidate_offsets}, {"thresholds", p.thresholds},
          {"max_depth", p.max_depth},   {"min_gain", p.min_gain},
          {"offset_range", p.offset_range}, {"min_samples", p.min_samples}};
}

}  // namespace

void RunConfig::validate() const {
  tracker.validate();
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (object_gaussians < 1) throw ConfigError("object_gaussians must be >= 1");
  if (!(object_voxel_mm > 0.0)) throw ConfigError("object_voxel_mm must be positive");
  if (synth.length < 1) throw ConfigError("synth.length must be >= 1");
  if (synth.trajectory != "constant" && synth.trajectory != "grasp" && synth.trajectory != "sweep")
    throw ConfigError("synth.trajectory must be constant, grasp or sweep");
  if (synth.camera.width <= 0 || synth.camera.height <= 0 || !(synth.camera.intrinsics.fx > 0.0) ||
      !(synth.camera.intrinsics.fy > 0.0))
    throw ConfigError("synth.camera is invalid");
  if (forest.layer1_images < 1 || forest.layer2_images < 1 || forest.heldout_images < 0)
    throw ConfigError("forest image counts must be positive");
  if (forest.layer1.max_depth > 21 || forest.layer2.max_depth > 19)
    throw ConfigError("forest depth exceeds the layer maximum (21 / 19)");
  if (init_pose && !init_pose->allFinite()) throw ConfigError("init_pose is not finite");
}

RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir) {
  const json doc = detail::parse_json(text, "run config");
  RunConfig c;
  try {
    detail::check_keys(doc, {"paths", "energy", "ablation", "optimizer", "quadtree", "hsv", "synth",
                             "forest", "init_pose", "object_gaussians", "object_voxel_mm", "seed",
                             "threads"},
                       "run config");
    if (doc.contains("paths")) {
      const json& p = doc["paths"];
      detail::check_keys(p, {"sequence", "model", "object", "forests", "annotations", "predictions",
                             "init", "output"},
                         "paths");
      opt_path(p, "sequence", c.paths.sequence, base_dir);
      opt_path(p, "model", c.paths.model, base_dir);
      opt_path(p, "object", c.paths.object, base_dir);
      opt_path(p, "forests", c.paths.forests, base_dir);
      opt_path(p, "annotations", c.paths.annotations, base_dir);
      opt_path(p, "predictions", c.paths.predictions, base_dir);
      opt_path(p, "init", c.paths.init, base_dir);
      opt_path(p, "output", c.paths.output, base_dir);
    }
    if (doc.contains("energy")) {
      const json& e = doc["energy"];
      detail::check_keys(e, {"w_p", "w_t", "w_s", "w_c", "w_o", "lambda", "r_max"}, "energy");
      EnergyWeights& w = c.tracker.weights;
      opt(e, "w_p", w.w_p);
      opt(e, "w_t", w.w_t);
      opt(e, "w_s", w.w_s);
      opt(e, "w_c", w.w_c);
      opt(e, "w_o", w.w_o);
      opt(e, "lambda", w.lambda);
      opt(e, "r_max", w.r_max);
    }
    if (doc.contains("ablation")) {
      const json& a = doc["ablation"];
      detail::check_keys(a, {"alignment", "semantic", "limits", "temporal", "contact", "occlusion",
                             "label_proposal"},
                         "ablation");
      TermSwitches& s = c.tracker.switches;
      opt(a, "alignment", s.alignment);
      opt(a, "semantic", s.semantic);
      opt(a, "limits", s.limits);
      opt(a, "temporal", s.temporal);
      opt(a, "contact", s.contact);
      opt(a, "occlusion", s.occlusion);
      opt(a, "label_proposal", c.tracker.label_proposal);
    }
    if (doc.contains("optimizer")) {
      const json& o = doc["optimizer"];
      detail::check_keys(o, {"iterations", "initial_step", "grow", "max_halvings", "min_step",
                             "translation_scale", "rotation_scale", "release_factor"},
                         "optimizer");
      DescentOptions& d = c.tracker.descent;
      opt(o, "iterations", d.iterations);
      opt(o, "initial_step", d.initial_step);
      opt(o, "grow", d.grow);
      opt(o, "max_halvings", d.max_halvings);
      opt(o, "min_step", d.min_step);
      opt(o, "translation_scale", d.translation_scale);
      opt(o, "rotation_scale", d.rotation_scale);
      opt(o, "release_factor", c.tracker.release_factor);
    }
    if (doc.contains("quadtree")) {
      const json& q = doc["quadtree"];
      detail::check_keys(q, {"epsilon_mm", "max_block", "displacement_scale"}, "quadtree");
      opt(q, "epsilon_mm", c.tracker.quadtree.epsilon_mm);
      opt(q, "max_block", c.tracker.quadtree.max_block);
      opt(q, "displacement_scale", c.tracker.quadtree.displacement_scale);
    }
    if (doc.contains("hsv")) {
      const json& h = doc["hsv"];
      detail::check_keys(h, {"hue_lo", "hue_hi", "sat_lo", "sat_hi", "val_lo", "val_hi"}, "hsv");
      HsvRange& r = c.tracker.object_hsv;
      opt(h, "hue_lo", r.hue_lo);
      opt(h, "hue_hi", r.hue_hi);
      opt(h, "sat_lo", r.sat_lo);
      opt(h, "sat_hi", r.sat_hi);
      opt(h, "val_lo", r.val_lo);
      opt(h, "val_hi", r.val_hi);
    }
    if (doc.contains("synth")) {
      const json& s = doc["synth"];
      detail::check_keys(s, {"length", "trajectory", "depth_noise_mm", "forearm", "render_object",
                             "hue_noise_deg", "camera"},
                         "synth");
      opt(s, "length", c.synth.length);
      opt(s, "trajectory", c.synth.trajectory);
      opt(s, "depth_noise_mm", c.synth.depth_noise_mm);
      opt(s, "forearm", c.synth.forearm);
      opt(s, "render_object", c.synth.render_object);
      opt(s, "hue_noise_deg", c.synth.hue_noise_deg);
      if (s.contains("camera")) {
        const json& k = s["camera"];
        detail::check_keys(k, {"fx", "fy", "cx", "cy", "width", "height"}, "synth.camera");
        opt(k, "fx", c.synth.camera.intrinsics.fx);
        opt(k, "fy", c.synth.camera.intrinsics.fy);
        opt(k, "cx", c.synth.camera.intrinsics.cx);
        opt(k, "cy", c.synth.camera.intrinsics.cy);
        opt(k, "width", c.synth.camera.width);
        opt(k, "height", c.synth.camera.height);
      }
    }
    if (doc.contains("forest")) {
      const json& f = doc["forest"];
      detail::check_keys(f, {"layer1_images", "layer2_images", "heldout_images", "layer1", "layer2"},
                         "forest");
      opt(f, "layer1_images", c.forest.layer1_images);
      opt(f, "layer2_images", c.forest.layer2_images);
      opt(f, "heldout_images", c.forest.heldout_images);
      if (f.contains("layer1")) read_forest_params(f["layer1"], c.forest.layer1, "forest.layer1");
      if (f.contains("layer2")) read_forest_params(f["layer2"], c.forest.layer2, "forest.layer2");
    }
    if (doc.contains("init_pose")) {
      const auto v = doc["init_pose"].get<std::vector<double>>();
      if (v.size() != kPoseDofs) throw ParseError("init_pose must have 32 entries");
      PoseVector p;
      for (int i = 0; i < kPoseDofs; ++i) p[i] = v[i];
      c.init_pose = p;
    }
    opt(doc, "object_gaussians", c.object_gaussians);
    opt(doc, "object_voxel_mm", c.object_voxel_mm);
    opt(doc, "seed", c.seed);
    opt(doc, "threads", c.threads);
  } catch (const json::exception& e) {
    throw ParseError(std::string("run config: ") + e.what());
  }
  c.tracker.threads = c.threads;
  c.forest.layer1.seed = c.seed;
  c.forest.layer2.seed = c.seed + 1;
  c.forest.layer1.threads = c.forest.layer2.threads = c.threads;
  try {
    c.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(detail::read_text(path), path.parent_path());
}

std::string run_config_to_json(const RunConfig& c) {
  const EnergyWeights& w = c.tracker.weights;
  const TermSwitches& s = c.tracker.switches;
  const DescentOptions& d = c.tracker.descent;
  const HsvRange& h = c.tracker.object_hsv;
  json doc;
  doc["paths"] = {{"sequence", c.paths.sequence.string()},       {"model", c.paths.model.string()},
                  {"object", c.paths.object.string()},           {"forests", c.paths.forests.string()},
                  {"annotations", c.paths.annotations.string()}, {"predictions", c.paths.predictions.string()},
                  {"init", c.paths.init.string()},               {"output", c.paths.output.string()}};
  doc["energy"] = {{"w_p", w.w_p}, {"w_t", w.w_t}, {"w_s", w.w_s},       {"w_c", w.w_c},
                   {"w_o", w.w_o}, {"lambda", w.lambda}, {"r_max", w.r_max}};
  doc["ablation"] = {{"alignment", s.alignment}, {"semantic", s.semantic}, {"limits", s.limits},
                     {"temporal", s.temporal},   {"contact", s.contact},   {"occlusion", s.occlusion},
                     {"label_proposal", c.tracker.label_proposal}};
  doc["optimizer"] = {{"iterations", d.iterations},
                      {"initial_step", d.initial_step},
                      {"grow", d.grow},
                      {"max_halvings", d.max_halvings},
                      {"min_step", d.min_step},
                      {"translation_scale", d.translation_scale},
                      {"rotation_scale", d.rotation_scale},
                      {"release_factor", c.tracker.release_factor}};
  doc["quadtree"] = {{"epsilon_mm", c.tracker.quadtree.epsilon_mm},
                     {"max_block", c.tracker.quadtree.max_block},
                     {"displacement_scale", c.tracker.quadtree.displacement_scale}};
  doc["hsv"] = {{"hue_lo", h.hue_lo}, {"hue_hi", h.hue_hi}, {"sat_lo", h.sat_lo},
                {"sat_hi", h.sat_hi}, {"val_lo", h.val_lo}, {"val_hi", h.val_hi}};
  const Intrinsics& K = c.synth.camera.intrinsics;
  doc["synth"] = {{"length", c.synth.length},
                  {"trajectory", c.synth.trajectory},
                  {"depth_noise_mm", c.synth.depth_noise_mm},
                  {"forearm", c.synth.forearm},
                  {"render_object", c.synth.render_object},
                  {"hue_noise_deg", c.synth.hue_noise_deg},
                  {"camera", {{"fx", K.fx}, {"fy", K.fy}, {"cx", K.cx}, {"cy", K.cy},
                              {"width", c.synth.camera.width}, {"height", c.synth.camera.height}}}};
  doc["forest"] = {{"layer1_images", c.forest.layer1_images},
                   {"layer2_images", c.forest.layer2_images},
                   {"heldout_images", c.forest.heldout_images},
                   {"layer1", forest_params_json(c.forest.layer1)},
                   {"layer2", forest_params_json(c.forest.layer2)}};
  if (c.init_pose)
    doc["init_pose"] = std::vector<double>(c.init_pose->data(), c.init_pose->data() + kPoseDofs);
  doc["object_gaussians"] = c.object_gaussians;
  doc["object_voxel_mm"] = c.object_voxel_mm;
  doc["seed"] = c.seed;
  doc["threads"] = c.threads;
  return doc.dump(2) + "\n";
}

}  // namespace hotrack

namespace hotrack {

LoadedScene load_scene(const RunConfig& config) {
  LoadedScene out;
  out.hand = config.paths.model.empty() ? default_hand_model() : load_hand_model(config.paths.model);
  if (config.paths.object.empty()) {
    out.scene = default_scene(out.hand, config.object_gaussians);
    return out;
  }
  const auto ext = config.paths.object.extension().string();
  const VoxelGrid grid = ext == ".txt" ? load_occupancy_grid(config.paths.object)
                                       : voxelize(load_mesh(config.paths.object), config.object_voxel_mm);
  if (grid.occupied_count() == 0) throw InvalidInput("object geometry has no occupied voxels");
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity()), hi = -lo;
  for (int k = 0; k < grid.dims.z(); ++k)
    for (int j = 0; j < grid.dims.y(); ++j)
      for (int i = 0; i < grid.dims.x(); ++i)
        if (grid.occupied[grid.index(i, j, k)]) {
          lo = lo.cwiseMin(grid.center(i, j, k));
          hi = hi.cwiseMax(grid.center(i, j, k));
        }
  const std::array<Vec3, kObjectLandmarks> corners{Vec3(hi.x(), hi.y(), hi.z()), Vec3(lo.x(), hi.y(), hi.z()),
                                                   Vec3(hi.x(), lo.y(), lo.z())};
  ObjectFitOptions fit;
  out.scene = make_scene(out.hand, fit_object_gaussians(grid, config.object_gaussians, fit), corners);
  return out;
}

}  // namespace hotrack
