#include "hotrack/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hotrack/error.hpp"

namespace hotrack {

KinematicModel::KinematicModel(std::vector<Joint> joints) : joints_(std::move(joints)) {
  if (joints_.empty()) throw InvalidInput("kinematic model has no joints");
  first_dof_.assign(joints_.size(), -1);
  path_dofs_.resize(joints_.size());
  int next = kArticulationBegin;
  for (std::size_t j = 0; j < joints_.size(); ++j) {
    const Joint& joint = joints_[j];
    if (j == 0 ? joint.parent != -1 : (joint.parent < 0 || joint.parent >= static_cast<int>(j)))
      throw InvalidInput("joint '" + joint.name + "' violates topological parent order");
    if (joint.dofs.size() > 3) throw InvalidInput("joint '" + joint.name + "' has too many DOFs");
    if (j != 0) path_dofs_[j] = path_dofs_[joint.parent];
    if (!joint.dofs.empty()) first_dof_[j] = next;
    for (const DofSpec& d : joint.dofs) {
      if (!(d.lower <= d.upper))
        throw InvalidInput("joint '" + joint.name + "' has lower limit above upper limit");
      if (!(d.axis.norm() > 0.0)) throw InvalidInput("joint '" + joint.name + "' has zero axis");
      dof_joint_.push_back(static_cast<int>(j));
      path_dofs_[j].push_back(next);
      ++next;
    }
  }
  if (next - kArticulationBegin != kArticulationDofs)
    throw InvalidInput("hand skeleton must carry exactly 20 articulation DOFs, got " +
                       std::to_string(next - kArticulationBegin));
  for (auto& joint : joints_)
    for (auto& d : joint.dofs) d.axis.normalize();
}

const DofSpec& KinematicModel::dof(int dof) const {
  const int j = dof_joint(dof);
  return joints_[j].dofs[dof - first_dof_[j]];
}

const std::vector<int>& KinematicModel::path_dofs(int bone) const {
  if (bone == object_bone()) return empty_;
  return path_dofs_.at(bone);
}

void require_finite(const PoseVector& pose) {
  if (!pose.allFinite()) throw InvalidInput("pose vector contains a non-finite entry");
}

Rigid rigid_from_pose(const PoseVector& pose, int translation_index, int rotation_index) {
  return {exp_so3(pose.segment<3>(rotation_index)), pose.segment<3>(translation_index)};
}

PosedSkeleton forward_kinematics(const KinematicModel& model, const PoseVector& pose) {
  require_finite(pose);
  PosedSkeleton out;
  out.hand_global = rigid_from_pose(pose, kHandTranslation, kHandRotation);
  out.object = rigid_from_pose(pose, kObjectTranslation, kObjectRotation);
  out.hand_rotation_jacobian = left_jacobian_so3(pose.segment<3>(kHandRotation));
  out.object_rotation_jacobian = left_jacobian_so3(pose.segment<3>(kObjectRotation));

  const auto& joints = model.joints();
  out.bones.resize(joints.size());
  for (std::size_t j = 0; j < joints.size(); ++j) {
    const Joint& joint = joints[j];
    const Rigid& parent = j == 0 ? out.hand_global : out.bones[joint.parent];
    Rigid frame = parent * joint.rest;
    int index = model.first_dof(static_cast<int>(j));
    for (const DofSpec& d : joint.dofs) {
      out.dof_axis[index] = frame.R * d.axis;
      out.dof_origin[index] = frame.t;
      frame.R = frame.R * axis_angle(d.axis, pose[index]);
      ++index;
    }
    out.bones[j] = frame;
  }
  return out;
}

Vec3 transform_point(const KinematicModel& model, const PosedSkeleton& posed, int bone,
                     const Vec3& local) {
  if (!model.is_valid_bone(bone)) throw InvalidInput("bone index out of range");
  if (bone == model.object_bone()) return posed.object.apply(local);
  return posed.bones[bone].apply(local);
}

void accumulate_point_gradient(const KinematicModel& model, const PosedSkeleton& posed, int bone,
                               const Vec3& world, const Vec3& force, Gradient& gradient) {
  if (bone == model.object_bone()) {
    gradient.segment<3>(kObjectTranslation) += force;
    gradient.segment<3>(kObjectRotation) +=
        posed.object_rotation_jacobian.transpose() * (world - posed.object.t).cross(force);
    return;
  }
  gradient.segment<3>(kHandTranslation) += force;
  gradient.segment<3>(kHandRotation) +=
      posed.hand_rotation_jacobian.transpose() * (world - posed.hand_global.t).cross(force);
  for (int k : model.path_dofs(bone))
    gradient[k] += posed.dof_axis[k].dot((world - posed.dof_origin[k]).cross(force));
}

PointJacobian point_jacobian(const KinematicModel& model, const PosedSkeleton& posed, int bone,
                             const Vec3& local) {
  if (!model.is_valid_bone(bone)) throw InvalidInput("bone index out of range");
  const Vec3 world = transform_point(model, posed, bone, local);
  PointJacobian J = PointJacobian::Zero();
  if (bone == model.object_bone()) {
    J.block<3, 3>(0, kObjectTranslation).setIdentity();
    J.block<3, 3>(0, kObjectRotation) = -skew(world - posed.object.t) * posed.object_rotation_jacobian;
    return J;
  }
  J.block<3, 3>(0, kHandTranslation).setIdentity();
  J.block<3, 3>(0, kHandRotation) = -skew(world - posed.hand_global.t) * posed.hand_rotation_jacobian;
  for (int k : model.path_dofs(bone)) J.col(k) = posed.dof_axis[k].cross(world - posed.dof_origin[k]);
  return J;
}

PointJacobian point_jacobian(const KinematicModel& model, const PoseVector& pose, int bone,
                             const Vec3& local) {
  if (!model.is_valid_bone(bone)) throw InvalidInput("bone index out of range");
  return point_jacobian(model, forward_kinematics(model, pose), bone, local);
}

std::vector<std::pair<double, double>> joint_limits(const KinematicModel& model) {
  std::vector<std::pair<double, double>> out;
  out.reserve(kArticulationDofs);
  for (int k = kArticulationBegin; k < kHandDofs; ++k) {
    const DofSpec& d = model.dof(k);
    out.emplace_back(d.lower, d.upper);
  }
  return out;
}

PoseVector clamp_to_limits(const KinematicModel& model, PoseVector pose) {
  for (int k = kArticulationBegin; k < kHandDofs; ++k) {
    const DofSpec& d = model.dof(k);
    pose[k] = std::clamp(pose[k], d.lower, d.upper);
  }
  return pose;
}

}  // namespace hotrack
