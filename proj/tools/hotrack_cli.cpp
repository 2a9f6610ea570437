// hotrack: command-line front end for synthesis, forest training, tracking,
// evaluation and gradient checking.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "hotrack/config.hpp"
#include "hotrack/error.hpp"
#include "hotrack/eval.hpp"
#include "hotrack/gradcheck.hpp"
#include "hotrack/image_io.hpp"
#include "hotrack/synth.hpp"
#include "hotrack/tracker.hpp"

namespace fs = std::filesystem;
using namespace hotrack;

namespace {

struct Common {
  std::string config;
  std::optional<int> threads;
  std::optional<std::uint64_t> seed;
  std::string out;
};

struct Failure {
  int code;
};

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw InvalidInput("cannot write " + path.string());
}

RunConfig load_config(const Common& c) {
  RunConfig cfg = c.config.empty() ? RunConfig{} : load_run_config(c.config);
  if (c.threads) cfg.threads = *c.threads;
  if (c.seed) {
    cfg.seed = *c.seed;
    cfg.forest.layer1.seed = cfg.seed;
    cfg.forest.layer2.seed = cfg.seed + 1;
  }
  cfg.tracker.threads = cfg.threads;
  cfg.forest.layer1.threads = cfg.forest.layer2.threads = cfg.threads;
  if (!c.out.empty()) cfg.paths.output = c.out;
  cfg.validate();
  return cfg;
}

fs::path output_dir(const RunConfig& cfg) {
  if (cfg.paths.output.empty()) throw ConfigError("no output directory (set paths.output or --out)");
  fs::create_directories(cfg.paths.output);
  return cfg.paths.output;
}

RenderOptions render_options(const RunConfig& cfg) {
  RenderOptions r;
  r.render_object = cfg.synth.render_object;
  r.forearm.enabled = cfg.synth.forearm;
  r.depth_noise_mm = cfg.synth.depth_noise_mm;
  r.colors.hue_noise_deg = cfg.synth.hue_noise_deg;
  r.seed = cfg.seed;
  return r;
}

int cmd_synth(const Common& common, const std::optional<int>& length, const std::string& trajectory) {
  RunConfig cfg = load_config(common);
  if (length) cfg.synth.length = *length;
  if (!trajectory.empty()) cfg.synth.trajectory = trajectory;
  cfg.validate();
  const LoadedScene model = load_scene(cfg);
  const KinematicModel& kin = model.hand.kinematics;
  const PoseVector start = cfg.init_pose.value_or(default_synth_pose());
  const int n = cfg.synth.length;
  std::vector<Keyframe> keys;
  if (cfg.synth.trajectory == "grasp")
    keys = grasp_trajectory(model.scene, kin, start, n);
  else if (cfg.synth.trajectory == "sweep")
    keys = occlusion_sweep_trajectory(model.scene, kin, start, n);
  else
    keys = {{0.0, start}, {static_cast<double>(std::max(n - 1, 1)), start}};
  const SyntheticSequence seq =
      generate_sequence(model.scene, kin, keys, cfg.synth.camera, n, render_options(cfg), cfg.threads);
  const fs::path manifest = write_sequence(seq, model.scene, kin, output_dir(cfg));
  std::cout << "wrote " << n << " frames, manifest " << manifest.string() << '\n';
  return 0;
}

std::string accuracy_json(const ForestSetReport& r) {
  auto one = [](const AccuracyReport& a) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "{\"accuracy\": %.6f, \"majority_baseline\": %.6f, \"pixels\": %zu}",
                  a.accuracy, a.majority_baseline, a.pixels);
    return std::string(buf);
  };
  std::string s = "{\n  \"layer1\": " + one(r.layer1) + ",\n  \"layer2\": {\n";
  for (int v = 0; v < kViewpointCount; ++v)
    s += std::string("    \"") + std::string(viewpoint_name(static_cast<Viewpoint>(v))) + "\": " +
         one(r.layer2[v]) + (v + 1 < kViewpointCount ? ",\n" : "\n");
  s += "  },\n  \"cascade\": " + one(r.cascade) + "\n}\n";
  return s;
}

int cmd_train(const Common& common) {
  const RunConfig cfg = load_config(common);
  const LoadedScene model = load_scene(cfg);
  TrainingSetOptions data;
  data.camera = cfg.synth.camera;
  data.render = render_options(cfg);
  data.seed = cfg.seed;
  const ForestSetSizes sizes{cfg.forest.layer1_images, cfg.forest.layer2_images, cfg.forest.heldout_images};
  ForestSetReport report;
  const ForestSet set =
      train_forest_set(model.scene, model.hand.kinematics, data, sizes, cfg.forest.layer1, cfg.forest.layer2, &report);
  const fs::path dir = output_dir(cfg);
  save_forest_set(set, dir);
  const std::string acc = accuracy_json(report);
  write_file(dir / "accuracy.json", acc);
  std::cout << acc << "training took " << report.seconds << " s\n";
  return 0;
}

int cmd_track(const Common& common, const std::string& sequence, const std::string& forests) {
  RunConfig cfg = load_config(common);
  if (!sequence.empty()) cfg.paths.sequence = sequence;
  if (!forests.empty()) cfg.paths.forests = forests;
  if (cfg.paths.sequence.empty()) throw ConfigError("no sequence manifest (set paths.sequence or --sequence)");
  const LoadedScene model = load_scene(cfg);
  const SequenceManifest manifest = read_manifest(cfg.paths.sequence);
  const CameraModel camera = read_camera(manifest.camera);
  std::optional<ForestSet> set;
  if (!cfg.paths.forests.empty()) set = load_forest_set(cfg.paths.forests);
  else std::cerr << "warning: no forests given; hand data is unlabelled\n";

  PoseVector init = cfg.init_pose.value_or(default_synth_pose());
  if (!cfg.paths.init.empty()) {
    const auto traj = load_trajectory(cfg.paths.init);
    if (traj.empty()) throw InvalidInput(cfg.paths.init.string() + ": empty trajectory");
    init = traj.front().pose;
  }
  const TrackerModel tm{&model.hand.kinematics, &model.scene, set ? &*set : nullptr};
  const auto source = [&](std::size_t i) {
    SequenceFrame f = load_sequence_frame(manifest, camera, i);
    return std::pair<ColorFrame, DepthFrame>(std::move(f.color), std::move(f.depth));
  };
  const SequenceRun run = track_sequence(init, manifest.frames.size(), source, tm, cfg.tracker);
  const fs::path dir = output_dir(cfg);
  save_trajectory(run.trajectory, dir / "trajectory.json");
  write_file(dir / "diagnostics.csv", diagnostics_csv(run.diagnostics));
  write_file(dir / "timings.csv", timings_csv(run.diagnostics));
  double total = 0.0;
  for (const auto& d : run.diagnostics) total += d.timings.total_ms;
  std::cout << "tracked " << run.trajectory.size() << " frames";
  if (!run.diagnostics.empty()) std::cout << ", mean " << total / run.diagnostics.size() << " ms/frame";
  std::cout << '\n';
  return 0;
}

int cmd_eval(const Common& common, const std::string& predictions, const std::string& annotations,
             bool external) {
  RunConfig cfg = load_config(common);
  if (!predictions.empty()) cfg.paths.predictions = predictions;
  if (!annotations.empty()) cfg.paths.annotations = annotations;
  if (cfg.paths.predictions.empty() || cfg.paths.annotations.empty())
    throw ConfigError("eval needs predictions and annotations");
  const auto pred = load_trajectory(cfg.paths.predictions);
  const AnnotationSet truth =
      load_annotations(cfg.paths.annotations, external ? AnnotationFormat::External : AnnotationFormat::Native);
  const ErrorReport report = average_error(pred, truth);
  std::vector<double> errors;
  for (const FrameError& e : report.per_frame) errors.push_back(e.combined);
  const auto thresholds = default_thresholds();
  const auto curve = consistency_curve(errors, thresholds);
  if (!cfg.paths.output.empty()) {
    const fs::path dir = output_dir(cfg);
    write_file(dir / "report.json", report_to_json(report));
    write_file(dir / "per_frame.csv", per_frame_errors_csv(report));
    write_file(dir / "consistency.csv", consistency_csv(thresholds, curve));
  }
  std::printf("E combined %.4f mm (%zu frames), fingertips %.4f mm, object %.4f mm\n", report.combined,
              report.combined_frames, report.fingertips, report.object);
  return 0;
}

int cmd_gradcheck(const Common& common, const std::optional<int>& states) {
  const RunConfig cfg = load_config(common);
  const LoadedScene model = load_scene(cfg);
  GradCheckOptions o;
  o.seed = cfg.seed;
  o.threads = cfg.threads;
  if (states) o.states = *states;
  const GradCheckReport report = run_gradcheck(model.hand.kinematics, model.scene, o);
  std::cout << report.to_text();
  if (!cfg.paths.output.empty()) write_file(output_dir(cfg) / "gradcheck.txt", report.to_text());
  return report.passed() ? 0 : 1;
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("-c,--config", c.config, "JSON run configuration")->check(CLI::ExistingFile);
  app->add_option("-j,--threads", c.threads, "worker threads (results do not depend on it)")
      ->check(CLI::PositiveNumber);
  app->add_option("--seed", c.seed, "random seed");
  app->add_option("-o,--out", c.out, "output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hand and object tracking by Gaussian mixture alignment"};
  app.require_subcommand(1);

  Common synth_c, train_c, track_c, eval_c, grad_c;
  std::optional<int> length, states;
  std::string trajectory, sequence, forests, predictions, annotations;
  bool external = false;

  auto* synth = app.add_subcommand("synth", "render a synthetic sequence with ground truth");
  add_common(synth, synth_c);
  synth->add_option("--length", length, "number of frames")->check(CLI::PositiveNumber);
  synth->add_option("--trajectory", trajectory, "constant | grasp | sweep")
      ->check(CLI::IsMember({"constant", "grasp", "sweep"}));

  auto* train = app.add_subcommand("train-forest", "train the two-layer classifier on synthetic data");
  add_common(train, train_c);

  auto* track = app.add_subcommand("track", "track a recorded sequence");
  add_common(track, track_c);
  track->add_option("--sequence", sequence, "sequence manifest")->check(CLI::ExistingFile);
  track->add_option("--forests", forests, "forest directory")->check(CLI::ExistingDirectory);

  auto* eval = app.add_subcommand("eval", "landmark error of a trajectory against annotations");
  add_common(eval, eval_c);
  eval->add_option("--predictions", predictions, "trajectory file")->check(CLI::ExistingFile);
  eval->add_option("--annotations", annotations, "annotation file")->check(CLI::ExistingFile);
  eval->add_flag("--external", external, "annotations use the whitespace text format");

  auto* grad = app.add_subcommand("gradcheck", "compare analytic gradients with finite differences");
  add_common(grad, grad_c);
  grad->add_option("--states", states, "random states per term")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) return cmd_synth(synth_c, length, trajectory);
    if (*train) return cmd_train(train_c);
    if (*track) return cmd_track(track_c, sequence, forests);
    if (*eval) return cmd_eval(eval_c, predictions, annotations, external);
    if (*grad) return cmd_gradcheck(grad_c, states);
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 3;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 4;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 5;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
