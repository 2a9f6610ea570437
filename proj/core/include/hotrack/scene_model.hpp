#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "hotrack/camera.hpp"
#include "hotrack/geometry.hpp"
#include "hotrack/kinematics.hpp"
#include "hotrack/labels.hpp"

namespace hotrack {

inline constexpr int kHandGaussians = 30;
inline constexpr int kFingertips = 5;
inline constexpr int kObjectLandmarks = 3;

/// Unnormalized isotropic Gaussian exp(-|x - mean|^2 / (2 sigma^2)) scaled by weight.
struct Gaussian {
  Vec3 mean = Vec3::Zero();
  double sigma = 1.0;
  double weight = 1.0;
  Label label = Label::Background;
  double label_prob = 1.0;
  double visibility = 1.0;
};

using GaussianMixture = std::vector<Gaussian>;

double mixture_density(const GaussianMixture& mixture, const Vec3& x);

/// A hand Gaussian rigidly attached to a bone of the skeleton.
struct RiggedGaussian {
  int bone = 0;
  Vec3 offset = Vec3::Zero();
  double sigma = 1.0;
  Label label = Label::Palm;
};

/// Hand mixture rigged to the skeleton plus the rigid object mixture.
/// Posed mixtures list the hand Gaussians first, then the object Gaussians.
struct SceneModel {
  std::vector<RiggedGaussian> hand;
  GaussianMixture object;  // means in the object frame
  std::array<int, kFingertips> fingertips{};  // indices into `hand`, thumb..little
  std::array<Vec3, kObjectLandmarks> object_landmarks{};  // object frame

  int hand_count() const { return static_cast<int>(hand.size()); }
  int object_count() const { return static_cast<int>(object.size()); }
  int size() const { return hand_count() + object_count(); }
  /// Bone of posed Gaussian `i` (object Gaussians ride on the object bone).
  int bone_of(const KinematicModel& kin, int i) const {
    return i < hand_count() ? hand[i].bone : kin.object_bone();
  }

  /// Throws InvalidInput if counts, rigging or fingertip indices are inconsistent.
  void validate(const KinematicModel& kin) const;
};

/// Articulation DOFs influencing each hand Gaussian (global DOFs excluded).
std::vector<std::vector<int>> influence_sets(const KinematicModel& kin, const SceneModel& scene);

struct PosedScene {
  PosedSkeleton skeleton;
  GaussianMixture mixture;
  int hand_count = 0;
};

PosedScene pose_scene_full(const SceneModel& scene, const KinematicModel& kin,
                           const PoseVector& pose);

/// Posed mixture in the world frame; sigma, labels and weights unchanged.
GaussianMixture pose_scene(const SceneModel& scene, const KinematicModel& kin,
                           const PoseVector& pose);

/// Fingertip Gaussian means followed by nothing else, world frame.
std::array<Vec3, kFingertips> fingertip_positions(const SceneModel& scene, const GaussianMixture& posed);
std::array<Vec3, kObjectLandmarks> object_landmark_positions(const SceneModel& scene,
                                                             const PosedSkeleton& skeleton);

// ---------------------------------------------------------------------------
// Object geometry and Gaussian fitting

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;
};

/// Occupancy grid; voxel (i, j, k) has centre origin + voxel_size * (i, j, k) + voxel_size / 2.
struct VoxelGrid {
  Eigen::Vector3i dims = Eigen::Vector3i::Zero();
  double voxel_size = 1.0;
  Vec3 origin = Vec3::Zero();
  std::vector<std::uint8_t> occupied;

  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * dims.y() + j) * dims.x() + i;
  }
  Vec3 center(int i, int j, int k) const {
    return origin + voxel_size * Vec3(i + 0.5, j + 0.5, k + 0.5);
  }
  std::size_t occupied_count() const;
  double occupied_volume() const;
};

/// Axis-aligned solid box centred at the origin.
VoxelGrid make_box_grid(const Vec3& size, double voxel_size);

/// Solid voxelization of a closed mesh by ray parity along +x.
VoxelGrid voxelize(const TriangleMesh& mesh, double voxel_size);

/// ASCII OFF or Wavefront OBJ (v/f records only).
TriangleMesh load_mesh(const std::filesystem::path& path);

/// Text occupancy grid, see docs/formats.md.
VoxelGrid load_occupancy_grid(const std::filesystem::path& path);
void save_occupancy_grid(const VoxelGrid& grid, const std::filesystem::path& path);

struct ObjectFitOptions {
  int samples = 20000;
  int restarts = 20;
  int max_iterations = 100;
  std::uint64_t seed = 7;
  double min_coverage = 0.9;  // enforced for count > 1 by scaling all sigmas
};

/// k-means on points sampled inside the occupied volume. Each sigma is the RMS
/// member distance, floored at the radius of the sphere whose volume equals the
/// cluster's share of the occupied volume. With more than one component the
/// sigmas are then scaled by the smallest common factor that makes the 1-sigma
/// spheres cover `min_coverage` of the occupied voxels.
GaussianMixture fit_object_gaussians(const VoxelGrid& geometry, int count,
                                     const ObjectFitOptions& options = {});

/// Fraction of occupied voxels whose centre lies inside the union of 1-sigma spheres.
double sphere_coverage(const VoxelGrid& geometry, const GaussianMixture& mixture);

// ---------------------------------------------------------------------------
// Visibility

enum class VisibilityKind {
  All,       ///< f_i for every Gaussian of the posed mixture
  HandOnly,  ///< occlusion weights of the hand Gaussians; the object still occludes
};

inline constexpr int kOcclusionMapWidth = 160;
inline constexpr int kOcclusionMapHeight = 120;

/// Renders each Gaussian as a depth-tested sphere footprint (circle of radius
/// sigma in projection) into a coarse occlusion map. f_i is the fraction of the
/// footprint pixels that Gaussian wins; exact depth ties go to the lower index.
std::vector<double> compute_visibility(const GaussianMixture& posed, const CameraModel& camera,
                                       VisibilityKind which = VisibilityKind::All,
                                       int hand_count = kHandGaussians);

}  // namespace hotrack
