#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hotrack/energy.hpp"

namespace hotrack {

struct GradCheckOptions {
  int states = 100;
  double step = 1e-5;
  double relative_tolerance = 1e-4;
  double absolute_floor = 1e-8;
  std::uint64_t seed = 1;
  int data_gaussians = 60;  // per channel
  int threads = 1;
};

/// max_i |a_i - n_i| / max(max_i |a_i|, max_i |n_i|, floor)
double gradient_relative_error(const Gradient& analytic, const Gradient& numeric, double floor);

/// Central differences of `f` at `x`, one DOF at a time.
Gradient numeric_gradient(const std::function<double(const PoseVector&)>& f, const PoseVector& x,
                          double step);

struct TermCheck {
  std::string term;
  int states = 0;
  double worst_error = 0.0;
  int worst_state = -1;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<TermCheck> terms;
  double seconds = 0.0;
  bool passed() const;
  std::string to_text() const;
};

/// A random but reproducible evaluation state: pose, data, contacts, priors.
struct GradCheckState {
  PoseVector pose = PoseVector::Zero();
  DataMixtures data;
  std::vector<double> model_weights;
  TemporalState temporal;
  TouchConstraintSet contacts;
};

GradCheckState random_gradcheck_state(const KinematicModel& kin, const SceneModel& scene,
                                      std::uint64_t seed, int data_gaussians);

/// Compares every analytic term and composite gradient with finite differences.
GradCheckReport run_gradcheck(const KinematicModel& kin, const SceneModel& scene,
                              const GradCheckOptions& options = {});

}  // namespace hotrack
