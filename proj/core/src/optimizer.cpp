#include "hotrack/optimizer.hpp"

#include <cmath>
#include <limits>

#include "hotrack/error.hpp"

namespace hotrack {

void DescentOptions::validate() const {
  if (iterations < 0 || max_halvings < 0) throw ConfigError("descent iteration counts must be >= 0");
  if (!(initial_step > 0.0) || !(grow >= 1.0) || !(min_step > 0.0) || !(translation_scale > 0.0) ||
      !(rotation_scale > 0.0))
    throw ConfigError("descent step parameters must be positive (grow >= 1)");
}

PoseVector step_scales(const DescentOptions& options) {
  PoseVector s = PoseVector::Constant(options.rotation_scale);
  s.segment<3>(kHandTranslation).setConstant(options.translation_scale);
  s.segment<3>(kObjectTranslation).setConstant(options.translation_scale);
  return s;
}

DescentResult descend(const ObjectiveFn& objective, const PoseVector& init,
                      const DescentOptions& options) {
  options.validate();
  require_finite(init);
  const PoseVector S = step_scales(options);

  DescentResult r;
  EnergyValue current = objective(init);
  ++r.evaluations;
  if (!std::isfinite(current.value) || !current.gradient.allFinite())
    throw NumericalError("objective is not finite at the initial pose");
  PoseVector x = init;
  r.initial_value = current.value;
  double s = options.initial_step;

  for (int it = 0; it < options.iterations; ++it) {
    const PoseVector sg = S.cwiseProduct(current.gradient);
    const double norm = sg.norm();
    if (norm == 0.0) break;
    const PoseVector direction = S.cwiseProduct(sg) / norm;
    bool accepted = false;
    bool underflow = false;
    for (int h = 0; h <= options.max_halvings; ++h) {
      const PoseVector trial = x - s * direction;
      EnergyValue e = objective(trial);
      ++r.evaluations;
      if (std::isfinite(e.value) && e.gradient.allFinite() && e.value < current.value) {
        x = trial;
        current = std::move(e);
        if (h == 0) s *= options.grow;
        accepted = true;
        break;
      }
      s *= 0.5;
      if (s < options.min_step) {
        underflow = true;
        break;
      }
    }
    if (!accepted || underflow) break;
    ++r.accepted_steps;
    r.trace.push_back(current.value);
  }
  // Only improvements are accepted, so the last iterate is the best seen.
  r.pose = x;
  r.value = current.value;
  return r;
}

bool prefer_label_proposal(double e_val_align, double e_val_label, double lambda) {
  return e_val_label < lambda * e_val_align;
}

PoseVector select_proposal(const PoseVector& x0, const PoseVector& x1,
                           const std::function<double(const PoseVector&)>& e_val, double lambda) {
  return prefer_label_proposal(e_val(x0), e_val(x1), lambda) ? x1 : x0;
}

TouchConstraintSet update_contacts(const GaussianMixture& posed, int hand_count,
                                   std::span<const int> fingertips, TouchConstraintSet contacts) {
  if (hand_count < 0 || hand_count > static_cast<int>(posed.size()))
    throw InvalidInput("hand count exceeds the posed mixture");
  if (!(contacts.release_factor > 1.0)) throw ConfigError("release factor must exceed 1");
  const int object_count = static_cast<int>(posed.size()) - hand_count;

  std::vector<TouchConstraint> kept;
  for (const TouchConstraint& c : contacts.active) {
    if (c.fingertip < 0 || c.fingertip >= hand_count || c.object < 0 || c.object >= object_count)
      throw InvalidInput("touch constraint refers to a missing Gaussian");
    const double d = (posed[c.fingertip].mean - posed[hand_count + c.object].mean).norm();
    if (d <= contacts.release_factor * c.target) kept.push_back(c);
  }
  for (int k : fingertips) {
    if (k < 0 || k >= hand_count) throw InvalidInput("fingertip index out of range");
    bool engaged = false;
    for (const TouchConstraint& c : kept) engaged = engaged || c.fingertip == k;
    if (engaged) continue;
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int l = 0; l < object_count; ++l) {
      const Gaussian& g = posed[hand_count + l];
      const double d = (posed[k].mean - g.mean).norm();
      if (d < posed[k].sigma + g.sigma && d < best_d) {
        best_d = d;
        best = l;
      }
    }
    if (best >= 0) kept.push_back({k, best, posed[k].sigma + posed[hand_count + best].sigma});
  }
  contacts.active = std::move(kept);
  return contacts;
}

TouchConstraintSet update_contacts(const SceneModel& scene, const KinematicModel& kin,
                                   const PoseVector& committed, TouchConstraintSet contacts) {
  const GaussianMixture posed = pose_scene(scene, kin, committed);
  return update_contacts(posed, scene.hand_count(), scene.fingertips, std::move(contacts));
}

}  // namespace hotrack
