// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.
//
//   hotrack_acceptance [--only 1,2,...] [--forest-cache DIR]
//
// Criteria 3, 4, 8 and 10 share one desk-scale forest set. With
// --forest-cache the set is loaded from DIR when present and saved there
// after training otherwise.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "hotrack/classification.hpp"
#include "hotrack/config.hpp"
#include "hotrack/depth_input.hpp"
#include "hotrack/energy.hpp"
#include "hotrack/eval.hpp"
#include "hotrack/gradcheck.hpp"
#include "hotrack/optimizer.hpp"
#include "hotrack/synth.hpp"
#include "hotrack/tracker.hpp"
#include "quadrature.hpp"

using namespace hotrack;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Context {
  LoadedScene model;
  const KinematicModel& kin() const { return model.hand.kinematics; }
  const SceneModel& scene() const { return model.scene; }
  std::optional<fs::path> forest_cache;
  std::optional<ForestSet> forests;
  std::optional<ForestSetReport> training_report;
  double training_seconds = 0.0;

  const ForestSet& forest_set() {
    if (forests) return *forests;
    if (forest_cache && fs::exists(*forest_cache / "layer1.forest")) {
      forests = load_forest_set(*forest_cache);
      std::printf("# loaded forests from %s\n", forest_cache->string().c_str());
    } else {
      const RunConfig cfg;  // desk-scale defaults
      TrainingSetOptions data;
      data.render.forearm.enabled = cfg.synth.forearm;
      data.render.depth_noise_mm = cfg.synth.depth_noise_mm;
      data.render.colors.hue_noise_deg = cfg.synth.hue_noise_deg;
      data.seed = cfg.seed;
      const ForestSetSizes sizes{2000, 1000, 100};
      ForestSetReport report;
      const auto t0 = Clock::now();
      forests = train_forest_set(scene(), kin(), data, sizes, cfg.forest.layer1, cfg.forest.layer2, &report);
      training_seconds = seconds_since(t0);
      training_report = report;
      std::printf("# trained forests in %.0f s\n", training_seconds);
      if (forest_cache) save_forest_set(*forests, *forest_cache);
    }
    std::fflush(stdout);
    return *forests;
  }
};

RenderOptions clean_render() {
  RenderOptions o;
  o.depth_noise_mm = 0.0;
  o.colors.hue_noise_deg = 0.0;
  return o;
}

struct TrackRun {
  ErrorReport report;
  std::vector<FramePrediction> trajectory;
  std::vector<FrameDiagnostics> diagnostics;
};

TrackRun track_synthetic(Context& ctx, const SyntheticSequence& seq, const TrackerConfig& config,
                         const ForestSet* forests) {
  const TrackerModel tm{&ctx.kin(), &ctx.scene(), forests};
  const auto source = [&](std::size_t i) {
    return std::pair<ColorFrame, DepthFrame>(seq.frames[i].color, seq.frames[i].depth);
  };
  SequenceRun run = track_sequence(seq.poses.front(), seq.frames.size(), source, tm, config);
  TrackRun out;
  out.report = average_error(run.trajectory, sequence_annotations(seq));
  out.trajectory = std::move(run.trajectory);
  out.diagnostics = std::move(run.diagnostics);
  return out;
}

std::vector<Keyframe> constant_keys(const PoseVector& p, int n) {
  return {{0.0, p}, {static_cast<double>(n - 1), p}};
}

// Largest per-frame joint change (rad) and translation change (mm) over a sequence.
std::pair<double, double> max_motion(const std::vector<PoseVector>& poses) {
  double joint = 0.0, trans = 0.0;
  for (std::size_t i = 1; i < poses.size(); ++i) {
    const PoseVector d = poses[i] - poses[i - 1];
    joint = std::max(joint, d.segment<kArticulationDofs>(kArticulationBegin).cwiseAbs().maxCoeff());
    trans = std::max({trans, d.segment<3>(kHandTranslation).norm(), d.segment<3>(kObjectTranslation).norm()});
  }
  return {joint, trans};
}

// ---------------------------------------------------------------------------

Outcome gradients(Context& ctx) {
  GradCheckOptions o;
  o.states = 100;
  const GradCheckReport r = run_gradcheck(ctx.kin(), ctx.scene(), o);
  std::string worst;
  std::set<std::string> needed{"E_a", "E_s", "E_p", "E_t", "E_c", "E_o", "E_align", "E_label"};
  for (const TermCheck& t : r.terms) {
    worst += fmt(" %s=%.1e", t.term.c_str(), t.worst_error);
    if (t.states >= 100) needed.erase(t.term);
  }
  const bool ok = r.passed() && needed.empty() && r.seconds < 60.0;
  return {ok, fmt("%.1f s, worst relative error:", r.seconds) + worst +
                  (needed.empty() ? "" : " (missing terms)")};
}

Outcome overlap_oracle(Context&) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> sig(3.0, 40.0), off(-1.0, 1.0);
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    const double si = sig(rng), sj = sig(rng);
    const Vec3 mi(off(rng) * 50, off(rng) * 50, off(rng) * 50);
    // Separation up to about two combined widths so the overlap is not negligible.
    const Vec3 dir = Vec3(off(rng), off(rng), off(rng)).normalized();
    const Vec3 mj = mi + dir * (std::abs(off(rng)) * 2.0 * std::hypot(si, sj));
    const double want = test::quadrature_overlap(mi, si, mj, sj);
    const double got = gaussian_overlap(mi, si, mj, sj);
    worst = std::max(worst, std::abs(got - want) / want);
  }
  const double unit = gaussian_overlap(Vec3::Zero(), 1.0, Vec3::Zero(), 1.0);
  const double unit_err = std::abs(unit - std::pow(std::numbers::pi, 1.5));
  const double secs = seconds_since(t0);
  return {worst < 1e-3 && unit_err < 1e-9 && secs < 60.0,
          fmt("50 pairs worst relative error %.2e, |O - pi^1.5| = %.1e, %.1f s", worst, unit_err, secs)};
}

Outcome tracking_self_consistency(Context& ctx) {
  const ForestSet& forests = ctx.forest_set();
  const int n = 100;
  const PoseVector start = default_synth_pose();
  const CameraModel cam = default_synth_camera();
  const SyntheticSequence still =
      generate_sequence(ctx.scene(), ctx.kin(), constant_keys(start, n), cam, n, clean_render());
  const SyntheticSequence grasp = generate_sequence(
      ctx.scene(), ctx.kin(), grasp_trajectory(ctx.scene(), ctx.kin(), start, n), cam, n, clean_render());
  const auto [joint, trans] = max_motion(grasp.poses);
  const bool smooth = joint <= 5.0 * std::numbers::pi / 180.0 && trans <= 10.0;
  const double e_still = track_synthetic(ctx, still, TrackerConfig{}, &forests).report.combined;
  const double e_grasp = track_synthetic(ctx, grasp, TrackerConfig{}, &forests).report.combined;
  return {e_still < 1.0 && e_grasp < 5.0 && smooth,
          fmt("constant E = %.3f mm (< 1), grasp E = %.3f mm (< 5), grasp motion <= %.2f deg, %.2f mm per frame",
              e_still, e_grasp, joint * 180.0 / std::numbers::pi, trans)};
}

Outcome ablation_direction(Context& ctx) {
  const ForestSet& forests = ctx.forest_set();
  const int n = 100;
  const PoseVector start = default_synth_pose();
  RenderOptions render;  // default sensor noise
  render.seed = 4;
  const SyntheticSequence sweep = generate_sequence(
      ctx.scene(), ctx.kin(), occlusion_sweep_trajectory(ctx.scene(), ctx.kin(), start, n),
      default_synth_camera(), n, render);

  TrackerConfig data_only;
  data_only.switches = {true, false, false, false, false, false};
  data_only.label_proposal = false;
  TrackerConfig with_priors = data_only;
  with_priors.switches.occlusion = true;
  with_priors.switches.contact = true;
  const double e_data = track_synthetic(ctx, sweep, data_only, &forests).report.combined;
  const double e_priors = track_synthetic(ctx, sweep, with_priors, &forests).report.combined;
  const double e_full = track_synthetic(ctx, sweep, TrackerConfig{}, &forests).report.combined;
  return {e_priors < e_data,
          fmt("E_a only %.6f mm, E_a + E_o + E_c %.6f mm (full energy %.6f mm)", e_data, e_priors, e_full)};
}

Outcome quadtree_invariants(Context& ctx) {
  TrainingSetOptions noisy;
  noisy.seed = 77;
  TrainingSetOptions smooth = noisy;
  smooth.render = clean_render();
  const QuadtreeOptions q;
  const double limit = q.epsilon_mm * q.epsilon_mm;
  int violations = 0, frames = 0;
  double worst_variance = 0.0, min_ratio = 1e9, sum_ratio = 0.0;
  for (int i = 0; i < 1000; ++i) {
    for (const TrainingSetOptions* o : {&noisy, &smooth}) {
      const RenderedFrame f = generate_training_sample(ctx.scene(), ctx.kin(), *o, i).frame;
      const DepthFrame& d = f.depth;
      std::vector<std::uint8_t> mask(d.size());
      std::size_t masked = 0;
      for (std::size_t p = 0; p < d.size(); ++p) masked += mask[p] = d.depth[p] > 0.0f;
      const std::vector<QuadLeaf> leaves = quadtree_cluster(d, mask, q);
      std::vector<int> cover(d.size(), 0);
      for (const QuadLeaf& l : leaves) {
        bool bad = !(l.size == 1 || l.size == 2 || l.size == 4 || l.size == 8) || l.size > q.max_block ||
                   l.x % l.size != 0 || l.y % l.size != 0;
        double s = 0, s2 = 0;
        int n = 0;
        for (int dy = 0; dy < l.size && !bad; ++dy)
          for (int dx = 0; dx < l.size; ++dx) {
            if (!l.covers(l.x + dx, l.y + dy)) continue;
            const int u = l.x + dx, v = l.y + dy;
            if (u >= d.width || v >= d.height || !mask[static_cast<std::size_t>(v) * d.width + u]) {
              bad = true;
              break;
            }
            ++cover[static_cast<std::size_t>(v) * d.width + u];
            const double z = d.at(u, v);
            s += z;
            s2 += z * z;
            ++n;
          }
        if (n > 1) {
          const double var = std::max(0.0, s2 / n - (s / n) * (s / n));
          worst_variance = std::max(worst_variance, var);
          bad = bad || !(var < limit);
        }
        bad = bad || n == 0 || n != l.pixel_count;
        violations += bad;
      }
      for (std::size_t p = 0; p < d.size(); ++p) violations += mask[p] ? cover[p] != 1 : cover[p] != 0;
      if (o == &smooth && !leaves.empty()) {
        const double ratio = static_cast<double>(masked) / leaves.size();
        min_ratio = std::min(min_ratio, ratio);
        sum_ratio += ratio;
        ++frames;
      }
    }
  }
  return {violations == 0 && frames == 1000 && min_ratio >= 10.0,
          fmt("2000 frames (1000 noisy, 1000 noise-free), %d violations, worst leaf variance %.2f mm^2, "
              "compression on noise-free frames min %.1f mean %.1f",
              violations, worst_variance, min_ratio, sum_ratio / std::max(frames, 1))};
}

Outcome proposal_selection(Context&) {
  struct Row {
    double e0, e1;
    bool label;
  };
  const double lambda = 1.003;
  const std::vector<Row> table{
      {1.0, 0.5, true},         {1.0, 1.0, true},     {1.0, 1.002, true},  {1.0, 1.0031, false},
      {1.0, 2.0, false},        {0.0, 0.0, false},    {0.0, 1e-12, false}, {1e6, 1.0029e6, true},
      {1e6, 1.0031e6, false},   {3.5, 3.52, false},   {3.5, 3.51, true},
  };
  int wrong = 0;
  const PoseVector x0 = PoseVector::Zero(), x1 = PoseVector::Ones();
  auto check = [&](double e0, double e1, bool label) {
    const auto e_val = [&](const PoseVector& x) { return x.isZero() ? e0 : e1; };
    const bool picked = select_proposal(x0, x1, e_val, lambda) == x1;
    wrong += picked != label || prefer_label_proposal(e0, e1, lambda) != label;
  };
  for (const Row& r : table) check(r.e0, r.e1, r.label);
  // Boundary E1 = lambda E0 keeps X0.
  for (double e0 : {1.0, 2.5, 1e-3, 7e5}) check(e0, lambda * e0, false);
  return {wrong == 0, fmt("%zu fixture rows + 4 boundary rows, %d mismatches", table.size(), wrong)};
}

Outcome contact_hysteresis(Context&) {
  const double sk = 10.0, sl = 20.0, td = sk + sl;
  const std::array<int, 1> tips{0};
  const auto mixture = [&](double d) {
    Gaussian tip, obj;
    tip.sigma = sk;
    obj.sigma = sl;
    obj.mean = Vec3(d, 0, 0);
    return GaussianMixture{tip, obj};
  };
  int errors = 0;
  auto engaged = [&](const TouchConstraintSet& s) { return s.active.size() == 1; };
  // Engagement only below sigma_k + sigma_l.
  errors += engaged(update_contacts(mixture(1.001 * td), 1, tips, {}));
  errors += !engaged(update_contacts(mixture(0.999 * td), 1, tips, {}));
  // Approach, dwell in the band, leave.
  std::vector<double> script;
  for (int i = 0; i <= 20; ++i) script.push_back(2.0 * td - i * 0.1 * td);           // 2 t_d -> 0
  for (int i = 0; i <= 60; ++i) script.push_back(td * (1.25 + 0.24 * std::sin(0.9 * i)));  // band
  for (int i = 0; i <= 10; ++i) script.push_back(td * (1.49 + 0.01 * i));            // to 1.59 t_d
  TouchConstraintSet s;
  bool was_engaged = false, released = false;
  int engage_frame = -1, transitions = 0;
  for (std::size_t f = 0; f < script.size(); ++f) {
    s = update_contacts(mixture(script[f]), 1, tips, s);
    const bool now = engaged(s);
    transitions += now != was_engaged;
    if (now && engage_frame < 0) engage_frame = static_cast<int>(f);
    if (now) errors += s.active[0].target != td;
    if (!now && was_engaged) released = true;
    // Expected state from the rules alone.
    const double d = script[f];
    const bool expect = was_engaged ? !(d > 1.5 * td) : d < td;
    errors += now != expect;
    was_engaged = now;
  }
  errors += !released || transitions != 2 || engage_frame < 0 || !(script[engage_frame] < td);
  return {errors == 0, fmt("%zu scripted frames, engaged at d = %.2f t_d, %d state changes, %d rule violations",
                           script.size(), engage_frame >= 0 ? script[engage_frame] / td : -1.0, transitions,
                           errors)};
}

Outcome forest_accuracy(Context& ctx) {
  const ForestSet& set = ctx.forest_set();
  TrainingSetOptions heldout;
  heldout.render.forearm.enabled = RunConfig{}.synth.forearm;
  heldout.seed = 0x5eed0acc;
  std::string detail;
  bool ok = true;
  auto judge = [&](const char* name, const AccuracyReport& r) {
    const bool pass = r.accuracy >= 0.85 && r.accuracy - r.majority_baseline >= 0.20;
    ok = ok && pass;
    detail += fmt(" %s %.1f%% (baseline %.1f%%)%s", name, 100 * r.accuracy, 100 * r.majority_baseline,
                  pass ? "" : "*");
  };
  judge("layer1", evaluate_forest(set.layer1, make_training_images(ctx.scene(), ctx.kin(), heldout, 200, 1,
                                                                    std::nullopt)));
  for (int v = 0; v < kViewpointCount; ++v) {
    TrainingSetOptions h = heldout;
    h.seed = heldout.seed + 101 * (v + 1);
    const Viewpoint vp = static_cast<Viewpoint>(v);
    judge(std::string(viewpoint_name(vp)).c_str(),
          evaluate_forest(set.layer2[v], make_training_images(ctx.scene(), ctx.kin(), h, 100, 2, vp)));
  }
  if (ctx.training_report)
    detail += fmt("; cascade %.1f%%; training %.0f s", 100 * ctx.training_report->cascade.accuracy,
                  ctx.training_seconds);
  return {ok, "held-out per-pixel accuracy:" + detail};
}

Outcome metric_exactness(Context&) {
  int wrong = 0;
  auto annotated = [](int frame) {
    FrameAnnotation a;
    a.frame = frame;
    a.fingertip_visible.fill(true);
    a.object_visible.fill(true);
    for (int k = 0; k < kFingertips; ++k) a.fingertips[k] = Vec3(10.0 * k, 5.0, 400.0);
    for (int k = 0; k < kObjectLandmarks; ++k) a.object[k] = Vec3(-20.0, 7.0 * k, 380.0);
    return a;
  };
  auto predicted = [](const FrameAnnotation& a, const Vec3& shift) {
    FramePrediction p;
    p.frame = a.frame;
    for (int k = 0; k < kFingertips; ++k) p.fingertips[k] = a.fingertips[k] + shift;
    for (int k = 0; k < kObjectLandmarks; ++k) p.object[k] = a.object[k] + shift;
    return p;
  };
  // 3-4-5
  AnnotationSet one{{annotated(0)}};
  std::vector<FramePrediction> p1{predicted(one.frames[0], Vec3(3, 4, 0))};
  const ErrorReport r1 = average_error(p1, one);
  wrong += r1.combined != 5.0 || r1.fingertips != 5.0 || r1.object != 5.0;
  // Mean of frames: 10 and 20.
  AnnotationSet two{{annotated(0), annotated(1)}};
  std::vector<FramePrediction> p2{predicted(two.frames[0], Vec3(0, 0, 10)), predicted(two.frames[1], Vec3(0, 20, 0))};
  const ErrorReport r2 = average_error(p2, two);
  wrong += r2.combined != 15.0;
  // Occluded landmarks are excluded; a frame with nothing visible is skipped.
  AnnotationSet occ{{annotated(0), annotated(1), annotated(2)}};
  std::vector<FramePrediction> p3{predicted(occ.frames[0], Vec3(3, 4, 0)), predicted(occ.frames[1], Vec3(0, 0, 10)),
                                  predicted(occ.frames[2], Vec3(0, 0, 1000))};
  occ.frames[0].fingertip_visible[2] = false;
  p3[0].fingertips[2] += Vec3(500, 0, 0);
  occ.frames[1].object_visible.fill(false);
  occ.frames[2].fingertip_visible.fill(false);
  occ.frames[2].object_visible.fill(false);
  const ErrorReport r3 = average_error(p3, occ);
  wrong += r3.combined != 7.5 || r3.combined_frames != 2 || r3.object != 5.0 || r3.object_frames != 1 ||
           r3.fingertips != 7.5 || !std::isnan(r3.per_frame[2].combined);
  return {wrong == 0, fmt("3-4-5 -> %.6g mm, mean of frames -> %.6g mm, occlusion fixture -> %.6g mm over %zu frames",
                          r1.combined, r2.combined, r3.combined, r3.combined_frames)};
}

Outcome performance(Context& ctx) {
  const ForestSet& forests = ctx.forest_set();
  const int n = 60;
  const PoseVector start = default_synth_pose();
  RenderOptions render;
  render.seed = 10;
  const SyntheticSequence seq = generate_sequence(
      ctx.scene(), ctx.kin(), grasp_trajectory(ctx.scene(), ctx.kin(), start, n), default_synth_camera(), n, render);
  const TrackerModel tm{&ctx.kin(), &ctx.scene(), &forests};
  TrackerState state = TrackerState::initial(start, ctx.scene());
  StageTimings sum;
  const auto t0 = Clock::now();
  for (int i = 0; i < n; ++i) {
    FrameResult r = track_frame(state, seq.frames[i].color, seq.frames[i].depth, tm, TrackerConfig{});
    const StageTimings& t = r.diagnostics.timings;
    sum.segmentation_ms += t.segmentation_ms;
    sum.viewpoint_ms += t.viewpoint_ms;
    sum.classification_ms += t.classification_ms;
    sum.clustering_ms += t.clustering_ms;
    sum.visibility_ms += t.visibility_ms;
    sum.optimization_ms += t.optimization_ms;
    sum.commit_ms += t.commit_ms;
    state = std::move(r.state);
  }
  const double fps = n / seconds_since(t0);
  return {fps >= 10.0,
          fmt("%.1f frames/s on one thread; mean ms: segmentation %.2f, viewpoint %.2f, classification %.2f, "
              "clustering %.2f, visibility %.2f, optimization %.2f, commit %.2f",
              fps, sum.segmentation_ms / n, sum.viewpoint_ms / n, sum.classification_ms / n, sum.clustering_ms / n,
              sum.visibility_ms / n, sum.optimization_ms / n, sum.commit_ms / n)};
}

Outcome determinism(Context& ctx) {
  std::vector<std::string> failures;
  // Forests: same config and seed, then a different thread count.
  ForestParams p1, p2;
  p1.trees = p2.trees = 2;
  p1.max_depth = p2.max_depth = 10;
  p1.pixels_per_image = p2.pixels_per_image = 300;
  p2.seed = p1.seed + 1;
  TrainingSetOptions data;
  data.seed = 5;
  const ForestSetSizes small{24, 12, 4};
  auto bytes = [&](int threads, ForestSetReport* report) {
    ForestParams a = p1, b = p2;
    a.threads = b.threads = threads;
    const ForestSet s = train_forest_set(ctx.scene(), ctx.kin(), data, small, a, b, report);
    std::vector<std::uint8_t> out = serialize_forest(s.layer1);
    for (const auto& f : s.layer2) {
      const auto more = serialize_forest(f);
      out.insert(out.end(), more.begin(), more.end());
    }
    return out;
  };
  ForestSetReport ra, rb;
  const auto fa = bytes(1, &ra), fb = bytes(1, &rb), fc = bytes(3, nullptr);
  if (fa != fb) failures.push_back("forest bytes differ between identical runs");
  if (fa != fc) failures.push_back("forest bytes depend on thread count");
  if (ra.layer1.accuracy != rb.layer1.accuracy || ra.cascade.accuracy != rb.cascade.accuracy)
    failures.push_back("forest reports differ");

  // Trajectories and reports.
  const PoseVector start = default_synth_pose();
  RenderOptions render;
  render.seed = 3;
  const int n = 12;
  const SyntheticSequence seq = generate_sequence(
      ctx.scene(), ctx.kin(), occlusion_sweep_trajectory(ctx.scene(), ctx.kin(), start, n), default_synth_camera(),
      n, render);
  TrackerConfig c1;
  TrackerConfig c3 = c1;
  c3.threads = 3;
  const TrackRun a = track_synthetic(ctx, seq, c1, nullptr), b = track_synthetic(ctx, seq, c1, nullptr),
                 c = track_synthetic(ctx, seq, c3, nullptr);
  if (trajectory_to_json(a.trajectory) != trajectory_to_json(b.trajectory))
    failures.push_back("trajectory differs between identical runs");
  if (report_to_json(a.report) != report_to_json(b.report) ||
      per_frame_errors_csv(a.report) != per_frame_errors_csv(b.report))
    failures.push_back("error report differs between identical runs");
  if (diagnostics_csv(a.diagnostics) != diagnostics_csv(b.diagnostics))
    failures.push_back("diagnostics differ between identical runs");
  if (trajectory_to_json(a.trajectory) != trajectory_to_json(c.trajectory))
    failures.push_back("trajectory depends on thread count");

  // Energy values and gradients bit-stable across thread counts.
  int energy_mismatch = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const GradCheckState st = random_gradcheck_state(ctx.kin(), ctx.scene(), seed, 60);
    std::optional<Evaluation> ref[2];
    for (int threads : {1, 2, 3, 4, 7}) {
      const EnergyFunction e(ctx.kin(), ctx.scene(), st.data, st.model_weights, st.temporal, st.contacts,
                             EnergyWeights{}, TermSwitches{}, threads);
      for (int obj = 0; obj < 2; ++obj) {
        const Evaluation v = e.evaluate(obj == 0 ? Objective::Align : Objective::Label, st.pose);
        if (!ref[obj]) {
          ref[obj] = v;
          continue;
        }
        energy_mismatch += std::memcmp(&v.value, &ref[obj]->value, sizeof(double)) != 0 ||
                           std::memcmp(v.gradient.data(), ref[obj]->gradient.data(), sizeof(double) * kPoseDofs) != 0;
      }
    }
  }
  if (energy_mismatch) failures.push_back(fmt("%d energy evaluations not bit-identical across threads", energy_mismatch));

  std::string detail = "forests (threads 1, 1, 3), trajectories, reports, diagnostics, energy at 20 states x 5 thread counts";
  for (const auto& f : failures) detail += "; " + f;
  return {failures.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  std::optional<fs::path> cache;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--only" && i + 1 < argc) {
      std::string list = argv[++i];
      for (std::size_t pos = 0; pos < list.size();) {
        const std::size_t comma = list.find(',', pos);
        only.insert(std::stoi(list.substr(pos, comma - pos)));
        pos = comma == std::string::npos ? list.size() : comma + 1;
      }
    } else if (arg == "--forest-cache" && i + 1 < argc) {
      cache = argv[++i];
    } else {
      std::fprintf(stderr, "usage: %s [--only 1,2,...] [--forest-cache DIR]\n", argv[0]);
      return 2;
    }
  }

  Context ctx{load_scene(RunConfig{})};
  ctx.forest_cache = cache;

  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome(Context&)> run;
  };
  const std::vector<Criterion> criteria{
      {1, "gradient correctness", gradients},
      {2, "overlap integral oracle", overlap_oracle},
      {3, "synthetic tracking self-consistency", tracking_self_consistency},
      {4, "ablation direction", ablation_direction},
      {5, "quadtree invariants", quadtree_invariants},
      {6, "proposal selection", proposal_selection},
      {7, "contact hysteresis", contact_hysteresis},
      {8, "forest desk-scale accuracy", forest_accuracy},
      {9, "metric harness exactness", metric_exactness},
      {10, "performance target", performance},
      {11, "determinism", determinism},
  };

  int failed = 0;
  for (const Criterion& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run(ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s  %2d  %-38s %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
