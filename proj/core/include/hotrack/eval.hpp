#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hotrack/kinematics.hpp"
#include "hotrack/scene_model.hpp"

namespace hotrack {

struct FrameAnnotation {
  int frame = 0;
  std::array<Vec3, kFingertips> fingertips{};
  std::array<bool, kFingertips> fingertip_visible{};
  std::array<Vec3, kObjectLandmarks> object{};
  std::array<bool, kObjectLandmarks> object_visible{};
};

struct AnnotationSet {
  std::vector<FrameAnnotation> frames;  // strictly increasing frame indices

  /// Throws InvalidInput on non-increasing indices or non-finite visible positions.
  void validate() const;
};

struct FramePrediction {
  int frame = 0;
  PoseVector pose = PoseVector::Zero();
  std::array<Vec3, kFingertips> fingertips{};
  std::array<Vec3, kObjectLandmarks> object{};
};

FramePrediction predict_landmarks(const SceneModel& scene, const KinematicModel& kin,
                                  const PoseVector& pose, int frame);

/// Errors of one frame; NaN where no landmark of that group is visible.
struct FrameError {
  int frame = 0;
  double combined = 0.0;
  double fingertips = 0.0;
  double object = 0.0;
};

struct ErrorReport {
  double combined = 0.0;    // mean over frames with a visible landmark
  double fingertips = 0.0;
  double object = 0.0;
  std::size_t combined_frames = 0;
  std::size_t fingertip_frames = 0;
  std::size_t object_frames = 0;
  std::vector<FrameError> per_frame;  // frames present in both inputs
};

/// Mean 3D Euclidean landmark error over visible landmarks, per frame and
/// averaged over frames. Throws InvalidInput when no frame index is shared.
ErrorReport average_error(std::span<const FramePrediction> predicted, const AnnotationSet& truth);

/// Fraction of errors at or below each threshold. NaN errors are skipped.
std::vector<double> consistency_curve(std::span<const double> errors,
                                      std::span<const double> thresholds);
/// 0, 1, ..., 50 mm.
std::vector<double> default_thresholds();

enum class AnnotationFormat { Native, External };

AnnotationSet parse_annotations(std::string_view text, AnnotationFormat format);
AnnotationSet load_annotations(const std::filesystem::path& path,
                               AnnotationFormat format = AnnotationFormat::Native);
std::string annotations_to_json(const AnnotationSet& set);
void save_annotations(const AnnotationSet& set, const std::filesystem::path& path);

/// Per-frame pose and landmark trajectory written by the tracker.
std::string trajectory_to_json(std::span<const FramePrediction> frames);
std::vector<FramePrediction> parse_trajectory(std::string_view text);
void save_trajectory(std::span<const FramePrediction> frames, const std::filesystem::path& path);
std::vector<FramePrediction> load_trajectory(const std::filesystem::path& path);

/// CSV exports.
std::string per_frame_errors_csv(const ErrorReport& report);
std::string consistency_csv(std::span<const double> thresholds, std::span<const double> fractions);
std::string report_to_json(const ErrorReport& report);

}  // namespace hotrack
