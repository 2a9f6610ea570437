#pragma once

#include <span>
#include <vector>

#include "hotrack/depth_input.hpp"
#include "hotrack/kinematics.hpp"
#include "hotrack/scene_model.hpp"

namespace hotrack {

struct EnergyWeights {
  double w_p = 0.1;
  double w_t = 0.1;
  double w_s = 3e-7;
  double w_c = 5e-7;
  double w_o = 1.0;
  double lambda = 1.003;
  double r_max = 300.0;  // mm

  void validate() const;
};

/// Ablation switches; a disabled term contributes nothing to any composite.
struct TermSwitches {
  bool alignment = true;  // E_a
  bool semantic = true;   // E_s
  bool limits = true;     // E_p
  bool temporal = true;   // E_t
  bool contact = true;    // E_c
  bool occlusion = true;  // E_o
};

/// Cross-frame quantities the temporal and occlusion priors depend on.
struct TemporalState {
  PoseVector previous = PoseVector::Zero();  // solution of the last frame
  PoseVector velocity = PoseVector::Zero();  // previous - the one before it
  PoseVector old = PoseVector::Zero();       // pose both proposals start from
  std::vector<double> occlusion;             // hand-only visibility per hand Gaussian

  static TemporalState at_rest(const PoseVector& pose, int hand_count = kHandGaussians);
};

struct TouchConstraint {
  int fingertip = 0;  // hand Gaussian index
  int object = 0;     // object Gaussian index (0-based within the object mixture)
  double target = 0.0;  // t_d, mm
};

struct TouchConstraintSet {
  std::vector<TouchConstraint> active;
  double release_factor = 1.5;  // release when the distance exceeds factor * t_d
};

struct EnergyValue {
  double value = 0.0;
  Gradient gradient = Gradient::Zero();
};

/// Integral over R^3 of the product of two unnormalised isotropic Gaussians.
double gaussian_overlap(const Vec3& mu_i, double sigma_i, const Vec3& mu_j, double sigma_j);

/// Visibility-weighted alignment of model and data densities with hand and
/// object channels kept apart. `model_weights` has one entry per posed model
/// Gaussian (empty means all ones).
EnergyValue e_a(const KinematicModel& kin, const SceneModel& scene, const PoseVector& pose,
                const DataMixtures& data, std::span<const double> model_weights = {},
                int threads = 1);
/// Label-gated attraction between every model Gaussian and every data leaf.
EnergyValue e_s(const KinematicModel& kin, const SceneModel& scene, const PoseVector& pose,
                const DataMixtures& data, double r_max);
/// Quadratic penalty outside the articulation limits.
EnergyValue e_p(const KinematicModel& kin, const PoseVector& pose);
/// Constant-velocity prior over all 32 DOFs.
EnergyValue e_t(const PoseVector& pose, const TemporalState& state);
/// Touch constraints between fingertip and object Gaussians.
EnergyValue e_c(const KinematicModel& kin, const SceneModel& scene, const PoseVector& pose,
                const TouchConstraintSet& contacts);
/// Keeps articulation DOFs of occluded regions near their previous values.
EnergyValue e_o(const KinematicModel& kin, const SceneModel& scene, const PoseVector& pose,
                const TemporalState& state);

enum class Objective { Align, Label, Validation };

struct TermValues {
  double a = 0.0, s = 0.0, p = 0.0, t = 0.0, c = 0.0, o = 0.0;
};

struct Evaluation {
  double value = 0.0;
  Gradient gradient = Gradient::Zero();
  TermValues terms;  // unweighted
};

/// All terms bound to one frame. The data self-overlap is computed once at
/// construction. The referenced model and data must outlive this object.
class EnergyFunction {
 public:
  EnergyFunction(const KinematicModel& kin, const SceneModel& scene, const DataMixtures& data,
                 std::vector<double> model_weights, TemporalState state,
                 TouchConstraintSet contacts, EnergyWeights weights, TermSwitches switches = {},
                 int threads = 1);

  Evaluation evaluate(Objective objective, const PoseVector& pose, bool with_gradient = true) const;
  double value(Objective objective, const PoseVector& pose) const {
    return evaluate(objective, pose, false).value;
  }

  const EnergyWeights& weights() const { return weights_; }
  const TermSwitches& switches() const { return switches_; }
  double data_self_overlap() const { return data_self_; }

 private:
  const KinematicModel& kin_;
  const SceneModel& scene_;
  const DataMixtures& data_;
  std::vector<double> model_weights_;
  TemporalState state_;
  TouchConstraintSet contacts_;
  EnergyWeights weights_;
  TermSwitches switches_;
  int threads_;
  double data_self_ = 0.0;
  std::vector<double> occlusion_coeff_;  // per pose index
};

/// Self-overlap of the data mixtures (the pose-independent part of E_a).
double data_self_overlap(const DataMixtures& data, int threads = 1);

}  // namespace hotrack
