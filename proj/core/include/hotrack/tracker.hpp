#pragma once

#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hotrack/classification.hpp"
#include "hotrack/depth_input.hpp"
#include "hotrack/energy.hpp"
#include "hotrack/eval.hpp"
#include "hotrack/optimizer.hpp"

namespace hotrack {

/// Default object colour window (saturated green).
inline HsvRange default_object_hsv() { return {90.0, 150.0, 0.35, 1.0, 0.15, 1.0}; }

struct TrackerConfig {
  EnergyWeights weights;
  TermSwitches switches;
  DescentOptions descent;
  QuadtreeOptions quadtree;
  HsvRange object_hsv = default_object_hsv();
  double release_factor = 1.5;
  bool label_proposal = true;  // false runs only the alignment proposal
  int threads = 1;

  void validate() const;
};

/// Everything carried from one frame to the next. Only track_frame produces
/// new states, always from the committed pose.
struct TrackerState {
  PoseVector pose = PoseVector::Zero();  // last committed solution
  TemporalState temporal;
  TouchConstraintSet contacts;
  Viewpoint viewpoint = Viewpoint::Front;
  std::vector<double> visibility;  // f_i of the committed pose, empty before the first frame
  long frame = 0;

  static TrackerState initial(const PoseVector& pose, const SceneModel& scene,
                              double release_factor = 1.5);
};

struct StageTimings {
  double segmentation_ms = 0.0;
  double viewpoint_ms = 0.0;
  double classification_ms = 0.0;
  double clustering_ms = 0.0;
  double visibility_ms = 0.0;
  double optimization_ms = 0.0;
  double commit_ms = 0.0;
  double total_ms = 0.0;
};

struct FrameDiagnostics {
  bool degenerate = false;
  std::string warning;
  int chosen = 0;  // 0: alignment proposal, 1: label proposal
  Viewpoint viewpoint = Viewpoint::Front;
  std::size_t hand_leaves = 0;
  std::size_t object_leaves = 0;
  std::size_t contacts = 0;
  TermValues align_terms;  // at the alignment proposal
  TermValues label_terms;  // at the label proposal
  double align_value = 0.0;
  double label_value = 0.0;
  double e_val_align = 0.0;
  double e_val_label = 0.0;
  std::vector<double> align_trace;
  std::vector<double> label_trace;
  StageTimings timings;
};

struct FrameResult {
  PoseVector pose = PoseVector::Zero();
  TrackerState state;
  FrameDiagnostics diagnostics;
};

/// Model and classifiers shared by every frame of a run. Without forests all
/// valid non-object pixels are treated as hand data labelled background.
struct TrackerModel {
  const KinematicModel* kinematics = nullptr;
  const SceneModel* scene = nullptr;
  const ForestSet* forests = nullptr;
};

/// One full tracking step; pure in (state, frames, model, config).
FrameResult track_frame(const TrackerState& state, const ColorFrame& color, const DepthFrame& depth,
                        const TrackerModel& model, const TrackerConfig& config);

/// Data mixtures exactly as track_frame builds them, exposed for tests and tools.
struct FrameData {
  ObjectSegmentation segmentation;
  LabelHistogramImage labels;
  std::vector<QuadLeaf> hand_leaves;
  std::vector<QuadLeaf> object_leaves;
  DataMixtures mixtures;
  Viewpoint viewpoint = Viewpoint::Front;
};

FrameData prepare_frame(const TrackerState& state, const ColorFrame& color, const DepthFrame& depth,
                        const TrackerModel& model, const TrackerConfig& config,
                        StageTimings* timings = nullptr);

/// Frame provider for track_sequence.
using FrameSource = std::function<std::pair<ColorFrame, DepthFrame>(std::size_t)>;

struct SequenceRun {
  std::vector<FramePrediction> trajectory;
  std::vector<FrameDiagnostics> diagnostics;
};

/// Tracks `frame_count` frames starting from `initial_pose`.
SequenceRun track_sequence(const PoseVector& initial_pose, std::size_t frame_count,
                           const FrameSource& frames, const TrackerModel& model,
                           const TrackerConfig& config);

/// Per-frame diagnostics without timings (deterministic) and the stage timings.
std::string diagnostics_csv(std::span<const FrameDiagnostics> frames);
std::string timings_csv(std::span<const FrameDiagnostics> frames);

}  // namespace hotrack
