#include "hotrack/gradcheck.hpp"

#include <chrono>
#include <cstdio>
#include <random>

namespace hotrack {

double gradient_relative_error(const Gradient& a, const Gradient& n, double floor) {
  const double scale = std::max({a.cwiseAbs().maxCoeff(), n.cwiseAbs().maxCoeff(), floor});
  return (a - n).cwiseAbs().maxCoeff() / scale;
}

Gradient numeric_gradient(const std::function<double(const PoseVector&)>& f, const PoseVector& x,
                          double step) {
  Gradient g;
  for (int i = 0; i < kPoseDofs; ++i) {
    PoseVector xp = x, xm = x;
    xp[i] += step;
    xm[i] -= step;
    g[i] = (f(xp) - f(xm)) / (2.0 * step);
  }
  return g;
}

bool GradCheckReport::passed() const {
  for (const TermCheck& t : terms)
    if (!t.passed) return false;
  return !terms.empty();
}

std::string GradCheckReport::to_text() const {
  std::string s;
  char line[160];
  for (const TermCheck& t : terms) {
    std::snprintf(line, sizeof line, "%-8s %s  states=%d  worst_rel_error=%.3e (state %d)\n",
                  t.term.c_str(), t.passed ? "PASS" : "FAIL", t.states, t.worst_error, t.worst_state);
    s += line;
  }
  std::snprintf(line, sizeof line, "overall  %s  %.2f s\n", passed() ? "PASS" : "FAIL", seconds);
  return s + line;
}

GradCheckState random_gradcheck_state(const KinematicModel& kin, const SceneModel& scene,
                                      std::uint64_t seed, int data_gaussians) {
  std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ull + 17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto limits = joint_limits(kin);

  auto random_pose = [&] {
    PoseVector p = PoseVector::Zero();
    p.segment<3>(kHandTranslation) = Vec3(30 * u(rng), 60 + 30 * u(rng), 430 + 30 * u(rng));
    p.segment<3>(kHandRotation) = 0.5 * Vec3(u(rng), u(rng), u(rng));
    // Slightly beyond the limits so the limit prior is exercised.
    for (int k = 0; k < kArticulationDofs; ++k) {
      const double lo = limits[k].first - 0.15, hi = limits[k].second + 0.15;
      p[kArticulationBegin + k] = lo + unit(rng) * (hi - lo);
    }
    p.segment<3>(kObjectTranslation) = Vec3(40 * u(rng), -30 + 40 * u(rng), 400 + 30 * u(rng));
    p.segment<3>(kObjectRotation) = 1.5 * Vec3(u(rng), u(rng), u(rng));
    return p;
  };

  GradCheckState s;
  s.pose = random_pose();
  // Data drawn around a nearby pose so overlaps are far from zero.
  PoseVector near = s.pose;
  near.segment<3>(kHandTranslation) += 8.0 * Vec3(u(rng), u(rng), u(rng));
  near.segment<3>(kObjectTranslation) += 8.0 * Vec3(u(rng), u(rng), u(rng));
  const GaussianMixture ref = pose_scene(scene, kin, near);
  for (int i = 0; i < 2 * data_gaussians; ++i) {
    const bool hand = i < data_gaussians;
    const int src = hand ? static_cast<int>(unit(rng) * scene.hand_count()) % scene.hand_count()
                         : scene.hand_count() +
                               static_cast<int>(unit(rng) * scene.object_count()) % scene.object_count();
    Gaussian g;
    g.mean = ref[src].mean + 10.0 * Vec3(u(rng), u(rng), u(rng));
    g.sigma = 2.0 + 8.0 * unit(rng);
    g.weight = 0.5 + unit(rng);
    g.label = hand ? (unit(rng) < 0.7 ? ref[src].label : static_cast<Label>(static_cast<int>(unit(rng) * 6) % 6))
                   : Label::Object;
    g.label_prob = 0.3 + 0.7 * unit(rng);
    (hand ? s.data.hand : s.data.object).push_back(g);
  }
  s.model_weights.resize(scene.size());
  for (double& w : s.model_weights) w = unit(rng);
  s.temporal.previous = random_pose();
  s.temporal.velocity = 0.05 * PoseVector::NullaryExpr([&] { return u(rng); });
  s.temporal.old = s.temporal.previous;
  s.temporal.occlusion.resize(scene.hand_count());
  for (double& f : s.temporal.occlusion) f = unit(rng);
  for (int k = 0; k < kFingertips; ++k) {
    if (unit(rng) < 0.4) continue;
    s.contacts.active.push_back({scene.fingertips[k],
                                 static_cast<int>(unit(rng) * scene.object_count()) % scene.object_count(),
                                 10.0 + 20.0 * unit(rng)});
  }
  return s;
}

GradCheckReport run_gradcheck(const KinematicModel& kin, const SceneModel& scene,
                              const GradCheckOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  using Term = std::function<EnergyValue(const GradCheckState&, const EnergyFunction&, const PoseVector&)>;
  auto composite = [](Objective o) -> Term {
    return [o](const GradCheckState&, const EnergyFunction& f, const PoseVector& x) {
      const Evaluation e = f.evaluate(o, x, true);
      return EnergyValue{e.value, e.gradient};
    };
  };
  const int threads = options.threads;
  const std::vector<std::pair<std::string, Term>> terms = {
      {"E_a", [&](const GradCheckState& s, const EnergyFunction&, const PoseVector& x) {
         return e_a(kin, scene, x, s.data, s.model_weights, threads);
       }},
      {"E_s", [&](const GradCheckState& s, const EnergyFunction&, const PoseVector& x) {
         return e_s(kin, scene, x, s.data, EnergyWeights{}.r_max);
       }},
      {"E_p", [&](const GradCheckState&, const EnergyFunction&, const PoseVector& x) { return e_p(kin, x); }},
      {"E_t", [&](const GradCheckState& s, const EnergyFunction&, const PoseVector& x) {
         return e_t(x, s.temporal);
       }},
      {"E_c", [&](const GradCheckState& s, const EnergyFunction&, const PoseVector& x) {
         return e_c(kin, scene, x, s.contacts);
       }},
      {"E_o", [&](const GradCheckState& s, const EnergyFunction&, const PoseVector& x) {
         return e_o(kin, scene, x, s.temporal);
       }},
      {"E_align", composite(Objective::Align)},
      {"E_label", composite(Objective::Label)},
  };

  GradCheckReport report;
  for (const auto& [name, _] : terms) report.terms.push_back({name, 0, 0.0, -1, true});
  for (int k = 0; k < options.states; ++k) {
    const GradCheckState s = random_gradcheck_state(kin, scene, options.seed + k, options.data_gaussians);
    // Large composite weights so every term is visible in the composite gradients.
    EnergyWeights w;
    w.w_s = 1e-3;
    w.w_c = 1e-3;
    const EnergyFunction f(kin, scene, s.data, s.model_weights, s.temporal, s.contacts, w, {}, threads);
    for (std::size_t t = 0; t < terms.size(); ++t) {
      const Term& term = terms[t].second;
      const EnergyValue analytic = term(s, f, s.pose);
      const Gradient numeric = numeric_gradient(
          [&](const PoseVector& x) { return term(s, f, x).value; }, s.pose, options.step);
      const double err = gradient_relative_error(analytic.gradient, numeric, options.absolute_floor);
      TermCheck& c = report.terms[t];
      ++c.states;
      if (err > c.worst_error || c.worst_state < 0) {
        c.worst_error = err;
        c.worst_state = k;
      }
      if (!(err < options.relative_tolerance)) c.passed = false;
    }
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace hotrack
