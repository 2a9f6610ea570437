#pragma once

#include <functional>
#include <span>
#include <vector>

#include "hotrack/energy.hpp"

namespace hotrack {

struct DescentOptions {
  int iterations = 10;
  double initial_step = 1.0;
  double grow = 1.2;
  int max_halvings = 10;
  double min_step = 1e-12;
  double translation_scale = 5.0;  // mm per unit step
  double rotation_scale = 0.05;    // rad per unit step

  void validate() const;
};

/// Diagonal preconditioner: translation DOFs get translation_scale, all
/// angular DOFs rotation_scale.
PoseVector step_scales(const DescentOptions& options);

using ObjectiveFn = std::function<EnergyValue(const PoseVector&)>;

struct DescentResult {
  PoseVector pose = PoseVector::Zero();
  double value = 0.0;
  double initial_value = 0.0;
  int accepted_steps = 0;
  int evaluations = 0;
  std::vector<double> trace;  // objective after each accepted step
};

/// Normalised, preconditioned gradient descent with an adaptive step. Each
/// iteration tries x - s * S * u with u = S g / |S g|; a failed try halves s
/// (up to max_halvings), a first-try success grows s by `grow`. Stops early at
/// a stationary point, when no halving helps, or when s underflows. Returns
/// the best pose seen.
DescentResult descend(const ObjectiveFn& objective, const PoseVector& init,
                      const DescentOptions& options = {});

/// true when the label proposal wins: e_label_pose < lambda * e_align_pose.
bool prefer_label_proposal(double e_val_align, double e_val_label, double lambda);

/// Returns x1 iff e_val(x1) < lambda * e_val(x0).
PoseVector select_proposal(const PoseVector& x0, const PoseVector& x1,
                           const std::function<double(const PoseVector&)>& e_val, double lambda);

/// Contact lifecycle on an already posed mixture (hand Gaussians first).
/// Active constraints beyond release_factor * t_d are dropped, then each free
/// fingertip engages its nearest object Gaussian l with distance < sigma_k + sigma_l.
TouchConstraintSet update_contacts(const GaussianMixture& posed, int hand_count,
                                   std::span<const int> fingertips, TouchConstraintSet contacts);

TouchConstraintSet update_contacts(const SceneModel& scene, const KinematicModel& kin,
                                   const PoseVector& committed, TouchConstraintSet contacts);

}  // namespace hotrack
