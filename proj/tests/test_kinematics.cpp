#include <gtest/gtest.h>

#include <numbers>

#include "hotrack/error.hpp"
#include "hotrack/geometry.hpp"
#include "hotrack/kinematics.hpp"
#include "hotrack/model_io.hpp"
#include "test_util.hpp"

using namespace hotrack;
using test::kin;

namespace {

// Rest transforms composed by hand, independent of forward_kinematics.
std::vector<Rigid> accumulated_rest(const KinematicModel& m, const Rigid& root) {
  std::vector<Rigid> out(m.joint_count());
  for (int j = 0; j < m.joint_count(); ++j) {
    const Joint& joint = m.joints()[j];
    out[j] = (j == 0 ? root : out[joint.parent]) * joint.rest;
  }
  return out;
}

void expect_near(const Rigid& a, const Rigid& b, double tol) {
  EXPECT_LT((a.R - b.R).cwiseAbs().maxCoeff(), tol + 1e-300);
  EXPECT_LT((a.t - b.t).cwiseAbs().maxCoeff(), tol + 1e-300);
}

}  // namespace

TEST(Geometry, ExpLogRoundTrip) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    Vec3 w(u(rng), u(rng), u(rng));
    w *= 3.0 * std::abs(u(rng));
    const Mat3 R = exp_so3(w);
    EXPECT_LT((R * R.transpose() - Mat3::Identity()).norm(), 1e-12);
    EXPECT_NEAR(R.determinant(), 1.0, 1e-12);
    EXPECT_LT((exp_so3(log_so3(R)) - R).norm(), 1e-9);
  }
  EXPECT_LT((exp_so3(Vec3::Zero()) - Mat3::Identity()).norm(), 1e-15);
}

TEST(Geometry, ExpMatchesEigenAngleAxis) {
  const Vec3 axis = Vec3(1, 2, -0.5).normalized();
  const Mat3 ref = Eigen::AngleAxisd(0.7, axis).toRotationMatrix();
  EXPECT_LT((exp_so3(0.7 * axis) - ref).norm(), 1e-12);
  EXPECT_LT((axis_angle(axis, 0.7) - ref).norm(), 1e-12);
}

TEST(Geometry, LeftJacobianMatchesDifferences) {
  const Vec3 w(0.3, -0.8, 0.5);
  const Mat3 J = left_jacobian_so3(w);
  const double h = 1e-6;
  for (int k = 0; k < 3; ++k) {
    Vec3 d = Vec3::Zero();
    d[k] = h;
    // exp(w + d) exp(w)^T ~ exp(J d): read the rotation vector off the product.
    const Vec3 v = log_so3(exp_so3(w + d) * exp_so3(w).transpose()) / h;
    EXPECT_LT((v - J.col(k)).norm(), 1e-5);
  }
}

TEST(Kinematics, DefaultModelShape) {
  EXPECT_EQ(kin().joint_count(), 21);
  const auto limits = joint_limits(kin());
  ASSERT_EQ(limits.size(), 20u);
  for (const auto& [lo, hi] : limits) EXPECT_LE(lo, hi);
  EXPECT_EQ(kin().joints()[0].parent, -1);
  for (int j = 1; j < kin().joint_count(); ++j) EXPECT_LT(kin().joints()[j].parent, j);
}

TEST(Kinematics, RestPoseEqualsAccumulatedRest) {
  const PosedSkeleton posed = forward_kinematics(kin(), PoseVector::Zero());
  const auto ref = accumulated_rest(kin(), Rigid::identity());
  for (int j = 0; j < kin().joint_count(); ++j) expect_near(posed.bones[j], ref[j], 1e-12);
  expect_near(posed.object, Rigid::identity(), 0.0);
}

TEST(Kinematics, GlobalTranslationShiftsEveryBone) {
  PoseVector p = PoseVector::Zero();
  const Vec3 t(12.5, -40.0, 300.0);
  p.segment<3>(kHandTranslation) = t;
  const PosedSkeleton posed = forward_kinematics(kin(), p);
  const auto ref = accumulated_rest(kin(), Rigid::identity());
  for (int j = 0; j < kin().joint_count(); ++j) {
    EXPECT_LT((posed.bones[j].R - ref[j].R).norm(), 1e-12);
    EXPECT_LT((posed.bones[j].t - (ref[j].t + t)).norm(), 1e-12);
  }
}

TEST(Kinematics, SingleJointQuarterTurn) {
  // Index base flex to 90 degrees; the middle joint sits one phalanx away
  // along the bent bone: Rx(90) (0, -L, 0) = (0, 0, -L) in the base frame.
  const int index_base = 5, index_mid = 6;
  ASSERT_EQ(kin().joints()[index_base].name.rfind("_base"), kin().joints()[index_base].name.size() - 5);
  const double L = -kin().joints()[index_mid].rest.t.y();
  PoseVector p = PoseVector::Zero();
  p[kin().first_dof(index_base) + 1] = std::numbers::pi / 2;
  const PosedSkeleton posed = forward_kinematics(kin(), p);
  const Rigid& base_rest = kin().joints()[index_base].rest;
  const Vec3 expected = base_rest.t + base_rest.R * Vec3(0.0, 0.0, -L);
  EXPECT_LT((posed.bones[index_mid].t - expected).norm(), 1e-10);
}

TEST(Kinematics, RigidInvariance) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    PoseVector p = test::random_pose(rng);
    const PosedSkeleton a = forward_kinematics(kin(), p);
    const Rigid motion{exp_so3(Vec3(0.3, -0.2, 0.9) * (trial + 1) / 20.0), Vec3(5.0, -7.0, 11.0)};
    const Rigid composed = motion * a.hand_global;
    p.segment<3>(kHandRotation) = log_so3(composed.R);
    p.segment<3>(kHandTranslation) = composed.t;
    const PosedSkeleton b = forward_kinematics(kin(), p);
    for (int j = 0; j < kin().joint_count(); ++j) expect_near(b.bones[j], motion * a.bones[j], 1e-9);
  }
}

TEST(Kinematics, ObjectIndependentOfHand) {
  std::mt19937_64 rng(5);
  PoseVector p = test::random_pose(rng);
  const Rigid before = forward_kinematics(kin(), p).object;
  p.head<kHandDofs>().setConstant(0.1);
  const Rigid after = forward_kinematics(kin(), p).object;
  expect_near(before, after, 0.0);
}

TEST(Kinematics, RejectsNonFinitePose) {
  PoseVector p = PoseVector::Zero();
  p[7] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(forward_kinematics(kin(), p), InvalidInput);
  p[7] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(forward_kinematics(kin(), p), InvalidInput);
}

TEST(Kinematics, JacobianRejectsBadBone) {
  EXPECT_THROW(point_jacobian(kin(), PoseVector::Zero(), -1, Vec3::Zero()), InvalidInput);
  EXPECT_THROW(point_jacobian(kin(), PoseVector::Zero(), kin().object_bone() + 1, Vec3::Zero()),
               InvalidInput);
}

TEST(Kinematics, TranslationColumnsAreWorldAxes) {
  std::mt19937_64 rng(2);
  const PoseVector p = test::random_pose(rng);
  const PointJacobian J = point_jacobian(kin(), p, 8, Vec3(1.0, -3.0, 2.0));
  EXPECT_LT((J.block<3, 3>(0, kHandTranslation) - Mat3::Identity()).norm(), 1e-15);
  const PointJacobian Jo = point_jacobian(kin(), p, kin().object_bone(), Vec3(4.0, 1.0, 0.0));
  EXPECT_LT((Jo.block<3, 3>(0, kObjectTranslation) - Mat3::Identity()).norm(), 1e-15);
}

TEST(Kinematics, JacobianZeroOffPath) {
  std::mt19937_64 rng(4);
  const PoseVector p = test::random_pose(rng);
  for (int bone = 0; bone <= kin().object_bone(); ++bone) {
    const PointJacobian J = point_jacobian(kin(), p, bone, Vec3(2.0, -5.0, 1.0));
    const auto& path = kin().path_dofs(bone);
    for (int d = kArticulationBegin; d < kArticulationBegin + kArticulationDofs; ++d)
      if (std::find(path.begin(), path.end(), d) == path.end()) EXPECT_EQ(J.col(d).norm(), 0.0);
    const bool object = bone == kin().object_bone();
    for (int d = 0; d < 6; ++d) EXPECT_EQ(J.col(d).norm() == 0.0, object);
    for (int d = kObjectTranslation; d < kPoseDofs; ++d) EXPECT_EQ(J.col(d).norm() == 0.0, !object);
  }
}

TEST(Kinematics, JacobianMatchesFiniteDifferences) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-20.0, 20.0);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const PoseVector p = test::random_pose(rng);
    const int bone = static_cast<int>(rng() % (kin().object_bone() + 1));
    const Vec3 local(u(rng), u(rng), u(rng));
    const PointJacobian J = point_jacobian(kin(), p, bone, local);
    PointJacobian N;
    for (int r = 0; r < 3; ++r) {
      auto f = [&](const PoseVector& q) { return transform_point(kin(), forward_kinematics(kin(), q), bone, local)[r]; };
      N.row(r) = test::central_diff<kPoseDofs>(f, p, 1e-5).transpose();
    }
    worst = std::max(worst, test::rel_err(J, N));
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Kinematics, AccumulateGradientEqualsJacobianTranspose) {
  std::mt19937_64 rng(8);
  const PoseVector p = test::random_pose(rng);
  const PosedSkeleton posed = forward_kinematics(kin(), p);
  const Vec3 local(3.0, -9.0, 2.0), force(0.4, -1.2, 2.0);
  for (int bone : {0, 4, 12, 20, kin().object_bone()}) {
    Gradient g = Gradient::Zero();
    accumulate_point_gradient(kin(), posed, bone, transform_point(kin(), posed, bone, local), force, g);
    const Gradient ref = point_jacobian(kin(), posed, bone, local).transpose() * force;
    EXPECT_LT((g - ref).norm(), 1e-9 * (1.0 + ref.norm()));
  }
}

TEST(Kinematics, ClampToLimits) {
  PoseVector p = PoseVector::Constant(10.0);
  const PoseVector c = clamp_to_limits(kin(), p);
  const auto limits = joint_limits(kin());
  for (int i = 0; i < kArticulationDofs; ++i) EXPECT_EQ(c[kArticulationBegin + i], limits[i].second);
  EXPECT_EQ(c[0], 10.0);
  EXPECT_EQ(c[31], 10.0);
}

TEST(Kinematics, ConstructorValidatesTopologyAndDofCount) {
  std::vector<Joint> joints = kin().joints();
  joints[3].parent = 7;
  EXPECT_THROW(KinematicModel{joints}, InvalidInput);
  joints = kin().joints();
  joints[5].dofs.pop_back();
  EXPECT_THROW(KinematicModel{joints}, InvalidInput);
  joints = kin().joints();
  std::swap(joints[5].dofs[0].lower, joints[5].dofs[0].upper);
  EXPECT_THROW(KinematicModel{joints}, InvalidInput);
}

TEST(ModelIo, JsonRoundTrip) {
  const std::string text = hand_model_to_json(test::hand());
  const HandModelDefinition back = hand_model_from_json(text);
  ASSERT_EQ(back.hand.size(), test::hand().hand.size());
  for (std::size_t i = 0; i < back.hand.size(); ++i) {
    EXPECT_EQ(back.hand[i].bone, test::hand().hand[i].bone);
    EXPECT_EQ(back.hand[i].sigma, test::hand().hand[i].sigma);
    EXPECT_EQ(back.hand[i].label, test::hand().hand[i].label);
    EXPECT_LT((back.hand[i].offset - test::hand().hand[i].offset).norm(), 1e-12);
  }
  std::mt19937_64 rng(1);
  const PoseVector p = test::random_pose(rng);
  const auto a = forward_kinematics(test::kin(), p), b = forward_kinematics(back.kinematics, p);
  for (int j = 0; j < test::kin().joint_count(); ++j) expect_near(a.bones[j], b.bones[j], 1e-9);
  EXPECT_EQ(back.fingertips, test::hand().fingertips);
  ASSERT_EQ(back.hand.size(), 30u);
}

TEST(ModelIo, RejectsUnknownKeysAndBadVersion) {
  std::string text = hand_model_to_json(test::hand());
  const auto pos = text.find('{');
  EXPECT_THROW(hand_model_from_json(text.substr(0, pos + 1) + "\"bogus\": 1," + text.substr(pos + 1)), ParseError);
  EXPECT_THROW(hand_model_from_json("{\"format\": \"hotrack-hand\", \"version\": 99}"), ParseError);
  EXPECT_THROW(hand_model_from_json("not json"), ParseError);
}
