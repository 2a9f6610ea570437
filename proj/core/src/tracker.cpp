#include "hotrack/tracker.hpp"

#include <chrono>
#include <future>
#include <sstream>

#include "hotrack/error.hpp"

namespace hotrack {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

void check_model(const TrackerModel& model) {
  if (model.kinematics == nullptr || model.scene == nullptr)
    throw InvalidInput("tracker model needs kinematics and a scene");
}

}  // namespace

void TrackerConfig::validate() const {
  weights.validate();
  descent.validate();
  object_hsv.validate();
  if (!(quadtree.epsilon_mm > 0.0)) throw ConfigError("quadtree epsilon must be positive");
  if (quadtree.max_block != 1 && quadtree.max_block != 2 && quadtree.max_block != 4 &&
      quadtree.max_block != 8)
    throw ConfigError("quadtree block size must be 1, 2, 4 or 8");
  if (!(release_factor > 1.0)) throw ConfigError("release factor must exceed 1");
  if (threads < 1) throw ConfigError("thread count must be >= 1");
}

TrackerState TrackerState::initial(const PoseVector& pose, const SceneModel& scene,
                                   double release_factor) {
  require_finite(pose);
  TrackerState s;
  s.pose = pose;
  s.temporal = TemporalState::at_rest(pose, scene.hand_count());
  s.temporal.occlusion.clear();  // filled from the first frame's camera
  s.contacts.release_factor = release_factor;
  return s;
}

FrameData prepare_frame(const TrackerState& state, const ColorFrame& color, const DepthFrame& depth,
                        const TrackerModel& model, const TrackerConfig& config,
                        StageTimings* timings) {
  check_model(model);
  depth.validate();
  StageTimings local;
  StageTimings& t = timings ? *timings : local;
  FrameData out;

  auto t0 = Clock::now();
  out.segmentation = segment_object_hsv(color, depth, config.object_hsv);
  t.segmentation_ms = ms_since(t0);

  t0 = Clock::now();
  out.viewpoint = select_viewpoint(state.pose, *model.kinematics);
  t.viewpoint_ms = ms_since(t0);

  t0 = Clock::now();
  const DepthFrame& hand_depth = out.segmentation.hand_depth;
  if (model.forests != nullptr) {
    out.labels = classify_pixels(model.forests->layer1,
                                 model.forests->layer2[static_cast<int>(out.viewpoint)], hand_depth,
                                 out.segmentation.object_mask, config.threads);
  } else {
    out.labels = LabelHistogramImage(depth.width, depth.height);
    for (std::size_t i = 0; i < depth.size(); ++i) {
      if (out.segmentation.object_mask[i]) {
        out.labels.pixels[i].fill(0.0f);
        out.labels.pixels[i][label_index(Label::Object)] = 1.0f;
      }
    }
  }
  t.classification_ms = ms_since(t0);

  t0 = Clock::now();
  std::vector<std::uint8_t> hand_mask(depth.size(), 0);
  for (int v = 0; v < depth.height; ++v)
    for (int u = 0; u < depth.width; ++u) {
      const std::size_t i = static_cast<std::size_t>(v) * depth.width + u;
      if (!hand_depth.valid(u, v)) continue;
      hand_mask[i] = model.forests == nullptr || out.labels.argmax(u, v) != Label::Background;
    }
  out.hand_leaves = quadtree_cluster(hand_depth, hand_mask, config.quadtree);
  out.object_leaves = quadtree_cluster(depth, out.segmentation.object_mask, config.quadtree);
  attach_labels(out.hand_leaves, out.labels, depth);
  attach_labels(out.object_leaves, out.labels, depth);
  if (model.forests == nullptr) {
    // No classifier: hand leaves carry no part evidence.
    for (QuadLeaf& leaf : out.hand_leaves) {
      leaf.label = Label::Background;
      leaf.label_prob = 1.0;
    }
  }
  DataMixtures hand = split_channels(out.hand_leaves);
  DataMixtures object = split_channels(out.object_leaves);
  out.mixtures.hand = std::move(hand.hand);
  out.mixtures.object = std::move(object.object);
  t.clustering_ms = ms_since(t0);
  return out;
}

FrameResult track_frame(const TrackerState& state, const ColorFrame& color, const DepthFrame& depth,
                        const TrackerModel& model, const TrackerConfig& config) {
  config.validate();
  check_model(model);
  require_finite(state.pose);
  const auto start = Clock::now();
  const KinematicModel& kin = *model.kinematics;
  const SceneModel& scene = *model.scene;

  FrameResult result;
  FrameDiagnostics& diag = result.diagnostics;
  const FrameData frame = prepare_frame(state, color, depth, model, config, &diag.timings);
  diag.viewpoint = frame.viewpoint;
  diag.hand_leaves = frame.mixtures.hand.size();
  diag.object_leaves = frame.mixtures.object.size();

  if (frame.mixtures.size() == 0) {
    result.pose = state.pose;
    result.state = state;
    result.state.frame = state.frame + 1;
    diag.degenerate = true;
    diag.warning = "no foreground leaves; pose left unchanged";
    diag.timings.total_ms = ms_since(start);
    return result;
  }

  // Visibility of the previous solution weights the model for this frame.
  auto t0 = Clock::now();
  const CameraModel camera = depth.camera();
  const GaussianMixture posed_old = pose_scene(scene, kin, state.pose);
  std::vector<double> visibility = compute_visibility(posed_old, camera, VisibilityKind::All,
                                                      scene.hand_count());
  TemporalState temporal = state.temporal;
  temporal.previous = state.pose;
  temporal.old = state.pose;
  if (temporal.occlusion.size() != static_cast<std::size_t>(scene.hand_count()))
    temporal.occlusion =
        compute_visibility(posed_old, camera, VisibilityKind::HandOnly, scene.hand_count());
  diag.timings.visibility_ms = ms_since(t0);

  t0 = Clock::now();
  const int inner_threads = std::max(1, config.threads / 2);
  const EnergyFunction energy(kin, scene, frame.mixtures, visibility, temporal, state.contacts,
                              config.weights, config.switches, inner_threads);
  auto run = [&](Objective objective) {
    return descend([&](const PoseVector& x) {
      const Evaluation e = energy.evaluate(objective, x, true);
      return EnergyValue{e.value, e.gradient};
    }, state.pose, config.descent);
  };
  DescentResult align, label;
  if (config.label_proposal && config.threads > 1) {
    auto pending = std::async(std::launch::async, [&] { return run(Objective::Label); });
    align = run(Objective::Align);
    label = pending.get();
  } else {
    align = run(Objective::Align);
    if (config.label_proposal) label = run(Objective::Label);
  }

  const Evaluation align_eval = energy.evaluate(Objective::Align, align.pose, false);
  diag.align_terms = align_eval.terms;
  diag.align_value = align.value;
  diag.align_trace = align.trace;
  diag.e_val_align = energy.value(Objective::Validation, align.pose);
  PoseVector chosen = align.pose;
  if (config.label_proposal) {
    const Evaluation label_eval = energy.evaluate(Objective::Label, label.pose, false);
    diag.label_terms = label_eval.terms;
    diag.label_value = label.value;
    diag.label_trace = label.trace;
    diag.e_val_label = energy.value(Objective::Validation, label.pose);
    if (prefer_label_proposal(diag.e_val_align, diag.e_val_label, config.weights.lambda)) {
      chosen = label.pose;
      diag.chosen = 1;
    }
  }
  diag.timings.optimization_ms = ms_since(t0);

  // Commit: everything carried forward derives from the chosen pose only.
  t0 = Clock::now();
  TrackerState next;
  next.pose = chosen;
  next.frame = state.frame + 1;
  next.viewpoint = frame.viewpoint;
  next.temporal.previous = chosen;
  next.temporal.old = chosen;
  next.temporal.velocity = chosen - state.pose;
  const GaussianMixture posed_new = pose_scene(scene, kin, chosen);
  next.temporal.occlusion =
      compute_visibility(posed_new, camera, VisibilityKind::HandOnly, scene.hand_count());
  next.visibility = compute_visibility(posed_new, camera, VisibilityKind::All, scene.hand_count());
  TouchConstraintSet contacts = state.contacts;
  contacts.release_factor = config.release_factor;
  next.contacts = update_contacts(posed_new, scene.hand_count(), scene.fingertips, contacts);
  diag.contacts = next.contacts.active.size();
  diag.timings.commit_ms = ms_since(t0);

  result.pose = chosen;
  result.state = std::move(next);
  diag.timings.total_ms = ms_since(start);
  return result;
}

}  // namespace hotrack

namespace hotrack {

SequenceRun track_sequence(const PoseVector& initial_pose, std::size_t frame_count,
                           const FrameSource& frames, const TrackerModel& model,
                           const TrackerConfig& config) {
  if (!model.scene || !model.kinematics) throw InvalidInput("tracker model is incomplete");
  SequenceRun run;
  run.trajectory.reserve(frame_count);
  run.diagnostics.reserve(frame_count);
  TrackerState state = TrackerState::initial(initial_pose, *model.scene, config.release_factor);
  for (std::size_t f = 0; f < frame_count; ++f) {
    const auto [color, depth] = frames(f);
    FrameResult r = track_frame(state, color, depth, model, config);
    run.trajectory.push_back(predict_landmarks(*model.scene, *model.kinematics, r.pose, static_cast<int>(f)));
    run.diagnostics.push_back(std::move(r.diagnostics));
    state = std::move(r.state);
  }
  return run;
}

std::string diagnostics_csv(std::span<const FrameDiagnostics> frames) {
  std::ostringstream out;
  out.precision(17);
  out << "frame,degenerate,chosen,viewpoint,hand_leaves,object_leaves,contacts,align_value,label_value,"
         "e_val_align,e_val_label,align_steps,label_steps,e_a,e_s,e_p,e_t,e_c,e_o,warning\n";
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const FrameDiagnostics& d = frames[f];
    const TermValues& t = d.chosen == 0 ? d.align_terms : d.label_terms;
    out << f << ',' << d.degenerate << ',' << d.chosen << ',' << viewpoint_name(d.viewpoint) << ','
        << d.hand_leaves << ',' << d.object_leaves << ',' << d.contacts << ',' << d.align_value << ','
        << d.label_value << ',' << d.e_val_align << ',' << d.e_val_label << ','
        << d.align_trace.size() << ',' << d.label_trace.size() << ',' << t.a << ',' << t.s << ','
        << t.p << ',' << t.t << ',' << t.c << ',' << t.o << ',' << d.warning << '\n';
  }
  return out.str();
}

std::string timings_csv(std::span<const FrameDiagnostics> frames) {
  std::ostringstream out;
  out << "frame,segmentation_ms,viewpoint_ms,classification_ms,clustering_ms,visibility_ms,"
         "optimization_ms,commit_ms,total_ms\n";
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const StageTimings& t = frames[f].timings;
    out << f << ',' << t.segmentation_ms << ',' << t.viewpoint_ms << ',' << t.classification_ms << ','
        << t.clustering_ms << ',' << t.visibility_ms << ',' << t.optimization_ms << ',' << t.commit_ms
        << ',' << t.total_ms << '\n';
  }
  return out.str();
}

}  // namespace hotrack
