#include "hotrack/energy.hpp"

#include <cmath>
#include <numbers>

#include "hotrack/error.hpp"
#include "hotrack/parallel.hpp"

namespace hotrack {

void EnergyWeights::validate() const {
  for (double w : {w_p, w_t, w_s, w_c, w_o, r_max})
    if (!std::isfinite(w) || w < 0.0) throw ConfigError("energy weights must be finite and >= 0");
  if (!std::isfinite(lambda) || lambda < 1.0) throw ConfigError("lambda must be >= 1");
  if (r_max <= 0.0) throw ConfigError("r_max must be positive");
}

TemporalState TemporalState::at_rest(const PoseVector& pose, int hand_count) {
  TemporalState s;
  s.previous = pose;
  s.old = pose;
  s.velocity.setZero();
  s.occlusion.assign(hand_count, 1.0);
  return s;
}

double gaussian_overlap(const Vec3& mu_i, double sigma_i, const Vec3& mu_j, double sigma_j) {
  if (!(sigma_i > 0.0) || !(sigma_j > 0.0)) throw InvalidInput("Gaussian sigma must be positive");
  const double si2 = sigma_i * sigma_i, sj2 = sigma_j * sigma_j;
  const double s = si2 + sj2;
  const double c = 2.0 * std::numbers::pi * si2 * sj2 / s;
  return c * std::sqrt(c) * std::exp(-(mu_i - mu_j).squaredNorm() / (2.0 * s));
}

namespace {

// Overlap and its derivative factor: dO/dmu_i = -O * (mu_i - mu_j) / s.
inline double overlap_s(const Gaussian& a, const Gaussian& b, double& s) {
  const double sa = a.sigma * a.sigma, sb = b.sigma * b.sigma;
  s = sa + sb;
  const double c = 2.0 * std::numbers::pi * sa * sb / s;
  return c * std::sqrt(c) * std::exp(-(a.mean - b.mean).squaredNorm() / (2.0 * s));
}

bool hand_channel(int i, int hand_count) { return i < hand_count; }

void check_finite(const EnergyValue& e, const char* term) {
  if (!std::isfinite(e.value) || !e.gradient.allFinite())
    throw NumericalError(std::string("non-finite value in ") + term);
}

std::vector<double> resolve_weights(std::span<const double> w, std::size_t n) {
  if (w.empty()) return std::vector<double>(n, 1.0);
  if (w.size() != n) throw InvalidInput("model weight count does not match the posed mixture");
  for (double x : w)
    if (!std::isfinite(x) || x < 0.0) throw InvalidInput("model weights must be finite and >= 0");
  return {w.begin(), w.end()};
}

// Pose-dependent part of E_a: model-model minus twice model-data.
void alignment_terms(const KinematicModel& kin, const SceneModel& scene, const PosedScene& posed,
                     const DataMixtures& data, const std::vector<double>& weights, int threads,
                     bool with_gradient, EnergyValue& out) {
  const GaussianMixture& m = posed.mixture;
  const int n = static_cast<int>(m.size());
  const int hc = posed.hand_count;
  std::vector<double> row(n, 0.0);
  std::vector<Vec3> force(n, Vec3::Zero());
  parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t ii) {
    const int i = static_cast<int>(ii);
    const Gaussian& gi = m[i];
    const double wi = weights[i] * gi.weight;
    if (wi == 0.0) return;
    const bool hand = hand_channel(i, hc);
    double v = 0.0;
    Vec3 f = Vec3::Zero();
    const int lo = hand ? 0 : hc, hi = hand ? hc : n;
    for (int k = lo; k < hi; ++k) {
      const double wk = weights[k] * m[k].weight;
      if (wk == 0.0) continue;
      double s;
      const double o = wi * wk * overlap_s(gi, m[k], s);
      v += o;
      if (k != i) f -= 2.0 * o / s * (gi.mean - m[k].mean);
    }
    const GaussianMixture& d = hand ? data.hand : data.object;
    for (const Gaussian& gj : d) {
      double s;
      const double o = wi * gj.weight * overlap_s(gi, gj, s);
      v -= 2.0 * o;
      f += 2.0 * o / s * (gi.mean - gj.mean);
    }
    row[i] = v;
    force[i] = f;
  });
  for (int i = 0; i < n; ++i) {
    out.value += row[i];
    if (with_gradient && force[i].squaredNorm() > 0.0)
      accumulate_point_gradient(kin, posed.skeleton, scene.bone_of(kin, i), m[i].mean, force[i],
                                out.gradient);
  }
}

void semantic_terms(const KinematicModel& kin, const SceneModel& scene, const PosedScene& posed,
                    const DataMixtures& data, double r_max, bool with_gradient, EnergyValue& out) {
  const GaussianMixture& m = posed.mixture;
  for (int i = 0; i < static_cast<int>(m.size()); ++i) {
    const Gaussian& gi = m[i];
    Vec3 f = Vec3::Zero();
    for (const GaussianMixture* channel : {&data.hand, &data.object}) {
      for (const Gaussian& gj : *channel) {
        if (gj.label != gi.label) continue;
        const Vec3 diff = gi.mean - gj.mean;
        const double d = diff.norm();
        if (d > r_max) continue;
        const double p = gi.label_prob * gj.label_prob;
        out.value += (1.0 - d / r_max) * p * d * d;
        f += p * (2.0 - 3.0 * d / r_max) * diff;
      }
    }
    if (with_gradient && f.squaredNorm() > 0.0)
      accumulate_point_gradient(kin, posed.skeleton, scene.bone_of(kin, i), gi.mean, f, out.gradient);
  }
}

void contact_terms(const KinematicModel& kin, const SceneModel& scene, const PosedScene& posed,
                   const TouchConstraintSet& contacts, bool with_gradient, EnergyValue& out) {
  for (const TouchConstraint& c : contacts.active) {
    if (c.fingertip < 0 || c.fingertip >= posed.hand_count || c.object < 0 ||
        posed.hand_count + c.object >= static_cast<int>(posed.mixture.size()))
      throw InvalidInput("touch constraint refers to a missing Gaussian");
    const int l = posed.hand_count + c.object;
    const Vec3 diff = posed.mixture[c.fingertip].mean - posed.mixture[l].mean;
    const double r = diff.squaredNorm() - c.target * c.target;
    out.value += r * r;
    if (!with_gradient) continue;
    const Vec3 f = 4.0 * r * diff;
    accumulate_point_gradient(kin, posed.skeleton, scene.bone_of(kin, c.fingertip),
                              posed.mixture[c.fingertip].mean, f, out.gradient);
    accumulate_point_gradient(kin, posed.skeleton, scene.bone_of(kin, l), posed.mixture[l].mean, -f,
                              out.gradient);
  }
}

void limit_terms(const KinematicModel& kin, const PoseVector& pose, EnergyValue& out) {
  const auto limits = joint_limits(kin);
  for (int k = 0; k < kArticulationDofs; ++k) {
    const int j = kArticulationBegin + k;
    const double x = pose[j];
    double bound;
    if (x > limits[k].second)
      bound = limits[k].second;
    else if (x < limits[k].first)
      bound = limits[k].first;
    else
      continue;
    out.value += (x - bound) * (x - bound);
    out.gradient[j] += 2.0 * (x - bound);
  }
}

void temporal_terms(const PoseVector& pose, const TemporalState& state, EnergyValue& out) {
  const PoseVector r = (pose - state.previous) - state.velocity;
  out.value += r.squaredNorm();
  out.gradient += 2.0 * r;
}

std::vector<double> occlusion_coefficients(const KinematicModel& kin, const SceneModel& scene,
                                           const TemporalState& state) {
  if (state.occlusion.size() != static_cast<std::size_t>(scene.hand_count()))
    throw InvalidInput("occlusion weights must have one entry per hand Gaussian");
  const auto sets = influence_sets(kin, scene);
  std::vector<double> c(kPoseDofs, 0.0);
  for (int i = 0; i < scene.hand_count(); ++i) {
    const double w = 1.0 - state.occlusion[i];
    for (int j : sets[i]) c[j] += w;
  }
  return c;
}

void occlusion_terms(const std::vector<double>& coeff, const PoseVector& pose,
                     const TemporalState& state, EnergyValue& out) {
  for (int j = kArticulationBegin; j < kArticulationBegin + kArticulationDofs; ++j) {
    if (coeff[j] == 0.0) continue;
    const double d = pose[j] - state.old[j];
    out.value += coeff[j] * d * d;
    out.gradient[j] += 2.0 * coeff[j] * d;
  }
}

}  // namespace

double data_self_overlap(const DataMixtures& data, int threads) {
  double total = 0.0;
  for (const GaussianMixture* channel : {&data.hand, &data.object}) {
    const GaussianMixture& d = *channel;
    std::vector<double> row(d.size(), 0.0);
    parallel_for(d.size(), threads, [&](std::size_t j) {
      double v = 0.0, s;
      for (const Gaussian& g : d) v += d[j].weight * g.weight * overlap_s(d[j], g, s);
      row[j] = v;
    });
    for (double v : row) total += v;
  }
  return total;
}

EnergyValue e_a(const KinematicModel& kin, const SceneModel& scene, const PoseVector& pose,
                const DataMixtures& data, std::span<const double> model_weights, int threads) {
  require_finite(pose);
  if (scene.size() == 0) throw InvalidInput("model mixture is empty");
  const PosedScene posed = pose_scene_full(scene, kin, pose);
  const auto w = resolve_weights(model_weights, posed.mixture.size());
  EnergyValue out;
  out.value = data_self_overlap(data, threads);
  alignment_terms(kin, scene, posed, data, w, threads, true, out);
  // Rounding can leave a tiny negative residue at perfect alignment.
  out.value = std::max(0.0, out.value);
  check_finite(out, "E_a");
  return out;
}

EnergyValue e_s(const KinematicModel& kin, const SceneModel& scene, const PoseVector& pose,
                const DataMixtures& data, double r_max) {
  require_finite(pose);
  if (!(r_max > 0.0)) throw InvalidInput("r_max must be positive");
  const PosedScene posed = pose_scene_full(scene, kin, pose);
  EnergyValue out;
  semantic_terms(kin, scene, posed, data, r_max, true, out);
  check_finite(out, "E_s");
  return out;
}

EnergyValue e_p(const KinematicModel& kin, const PoseVector& pose) {
  require_finite(pose);
  EnergyValue out;
  limit_terms(kin, pose, out);
  return out;
}

EnergyValue e_t(const PoseVector& pose, const TemporalState& state) {
  require_finite(pose);
  EnergyValue out;
  temporal_terms(pose, state, out);
  return out;
}

EnergyValue e_c(const KinematicModel& kin, const SceneModel& scene, const PoseVector& pose,
                const TouchConstraintSet& contacts) {
  require_finite(pose);
  const PosedScene posed = pose_scene_full(scene, kin, pose);
  EnergyValue out;
  contact_terms(kin, scene, posed, contacts, true, out);
  check_finite(out, "E_c");
  return out;
}

EnergyValue e_o(const KinematicModel& kin, const SceneModel& scene, const PoseVector& pose,
                const TemporalState& state) {
  require_finite(pose);
  EnergyValue out;
  occlusion_terms(occlusion_coefficients(kin, scene, state), pose, state, out);
  return out;
}

EnergyFunction::EnergyFunction(const KinematicModel& kin, const SceneModel& scene,
                               const DataMixtures& data, std::vector<double> model_weights,
                               TemporalState state, TouchConstraintSet contacts,
                               EnergyWeights weights, TermSwitches switches, int threads)
    : kin_(kin),
      scene_(scene),
      data_(data),
      model_weights_(resolve_weights(model_weights, static_cast<std::size_t>(scene.size()))),
      state_(std::move(state)),
      contacts_(std::move(contacts)),
      weights_(weights),
      switches_(switches),
      threads_(std::max(1, threads)) {
  weights_.validate();
  if (scene.size() == 0) throw InvalidInput("model mixture is empty");
  if (state_.occlusion.empty()) state_.occlusion.assign(scene.hand_count(), 1.0);
  data_self_ = hotrack::data_self_overlap(data_, threads_);
  occlusion_coeff_ = occlusion_coefficients(kin_, scene_, state_);
}

Evaluation EnergyFunction::evaluate(Objective objective, const PoseVector& pose,
                                    bool with_gradient) const {
  require_finite(pose);
  const bool align = objective == Objective::Align;
  const bool label = objective == Objective::Label;
  const bool use_s = label && switches_.semantic;
  const bool use_t = align && switches_.temporal;
  const bool use_c = align && switches_.contact && !contacts_.active.empty();
  const bool use_o = align && switches_.occlusion;

  Evaluation out;
  PosedScene posed;
  if (switches_.alignment || use_s || use_c) posed = pose_scene_full(scene_, kin_, pose);

  auto add = [&](const EnergyValue& e, double w, double& slot) {
    slot = e.value;
    out.value += w * e.value;
    if (with_gradient) out.gradient += w * e.gradient;
  };

  if (switches_.alignment) {
    EnergyValue e;
    e.value = data_self_;
    alignment_terms(kin_, scene_, posed, data_, model_weights_, threads_, with_gradient, e);
    e.value = std::max(0.0, e.value);
    check_finite(e, "E_a");
    add(e, 1.0, out.terms.a);
  }
  if (use_s) {
    EnergyValue e;
    semantic_terms(kin_, scene_, posed, data_, weights_.r_max, with_gradient, e);
    check_finite(e, "E_s");
    add(e, weights_.w_s, out.terms.s);
  }
  if (switches_.limits) {
    EnergyValue e;
    limit_terms(kin_, pose, e);
    add(e, weights_.w_p, out.terms.p);
  }
  if (use_t) {
    EnergyValue e;
    temporal_terms(pose, state_, e);
    add(e, weights_.w_t, out.terms.t);
  }
  if (use_c) {
    EnergyValue e;
    contact_terms(kin_, scene_, posed, contacts_, with_gradient, e);
    check_finite(e, "E_c");
    add(e, weights_.w_c, out.terms.c);
  }
  if (use_o) {
    EnergyValue e;
    occlusion_terms(occlusion_coeff_, pose, state_, e);
    add(e, weights_.w_o, out.terms.o);
  }
  if (!std::isfinite(out.value)) throw NumericalError("energy evaluation produced a non-finite value");
  return out;
}

}  // namespace hotrack
