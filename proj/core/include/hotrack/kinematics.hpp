#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "hotrack/geometry.hpp"

namespace hotrack {

inline constexpr int kHandDofs = 26;
inline constexpr int kObjectDofs = 6;
inline constexpr int kPoseDofs = kHandDofs + kObjectDofs;
inline constexpr int kArticulationDofs = 20;

// Pose vector layout.
inline constexpr int kHandTranslation = 0;   // 0..2, mm, world frame
inline constexpr int kHandRotation = 3;      // 3..5, rotation vector
inline constexpr int kArticulationBegin = 6; // 6..25, radians
inline constexpr int kObjectTranslation = 26;
inline constexpr int kObjectRotation = 29;

using PoseVector = Eigen::Matrix<double, kPoseDofs, 1>;
using Gradient = Eigen::Matrix<double, kPoseDofs, 1>;
using PointJacobian = Eigen::Matrix<double, 3, kPoseDofs>;

/// One revolute degree of freedom of a joint. The axis is expressed in the
/// joint frame after the preceding DOFs of the same joint have been applied;
/// the axis passes through the joint origin.
struct DofSpec {
  Vec3 axis = Vec3::UnitX();
  double lower = 0.0;
  double upper = 0.0;
};

struct Joint {
  std::string name;
  int parent = -1;
  Rigid rest;                 // relative to parent
  std::vector<DofSpec> dofs;  // 0, 1 or 2
};

/// Articulated hand skeleton (26 DOF) plus the rigid object (6 DOF).
///
/// Joints are stored in topological order. Articulation DOFs are numbered
/// consecutively in joint order starting at kArticulationBegin. Bone `b` is
/// the frame of joint `b`; object_bone() addresses the rigid object.
class KinematicModel {
 public:
  KinematicModel() = default;
  explicit KinematicModel(std::vector<Joint> joints);

  const std::vector<Joint>& joints() const { return joints_; }
  int joint_count() const { return static_cast<int>(joints_.size()); }
  int object_bone() const { return joint_count(); }

  /// Pose index of the first DOF of joint `j`, or -1 if the joint is fixed.
  int first_dof(int joint) const { return first_dof_[joint]; }
  /// Joint that owns articulation DOF `dof` (pose index).
  int dof_joint(int dof) const { return dof_joint_[dof - kArticulationBegin]; }
  const DofSpec& dof(int dof) const;

  /// Articulation DOFs on the path root -> bone (global DOFs excluded).
  const std::vector<int>& path_dofs(int bone) const;

  bool is_valid_bone(int bone) const { return bone >= 0 && bone <= object_bone(); }

 private:
  std::vector<Joint> joints_;
  std::vector<int> first_dof_;
  std::vector<int> dof_joint_;
  std::vector<std::vector<int>> path_dofs_;
  std::vector<int> empty_;
};

/// Result of forward kinematics: world transforms of every bone plus the
/// quantities needed for analytic derivatives.
struct PosedSkeleton {
  std::vector<Rigid> bones;
  Rigid hand_global;
  Rigid object;
  Mat3 hand_rotation_jacobian = Mat3::Identity();
  Mat3 object_rotation_jacobian = Mat3::Identity();
  // World axis and origin of every articulation DOF, indexed by pose index.
  std::array<Vec3, kPoseDofs> dof_axis{};
  std::array<Vec3, kPoseDofs> dof_origin{};
};

void require_finite(const PoseVector& pose);

Rigid rigid_from_pose(const PoseVector& pose, int translation_index, int rotation_index);

PosedSkeleton forward_kinematics(const KinematicModel& model, const PoseVector& pose);

/// World position of a point given in the local frame of `bone`.
Vec3 transform_point(const KinematicModel& model, const PosedSkeleton& posed, int bone,
                     const Vec3& local);

/// d(world point)/d(pose) for a point fixed in the frame of `bone`.
PointJacobian point_jacobian(const KinematicModel& model, const PosedSkeleton& posed, int bone,
                             const Vec3& local);
PointJacobian point_jacobian(const KinematicModel& model, const PoseVector& pose, int bone,
                             const Vec3& local);

/// Adds J^T * force to `gradient` for the world point `world` rigidly attached
/// to `bone`. Equivalent to point_jacobian(...).transpose() * force, without
/// forming the matrix.
void accumulate_point_gradient(const KinematicModel& model, const PosedSkeleton& posed, int bone,
                               const Vec3& world, const Vec3& force, Gradient& gradient);

/// Joint-limit intervals of the 20 articulation DOFs, in pose-index order.
std::vector<std::pair<double, double>> joint_limits(const KinematicModel& model);

/// Clamp articulation DOFs into their limits.
PoseVector clamp_to_limits(const KinematicModel& model, PoseVector pose);

}  // namespace hotrack
