#include "hotrack/synth.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "hotrack/error.hpp"
#include "hotrack/image_io.hpp"
#include "hotrack/parallel.hpp"

namespace hotrack {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t x = seed * 0x9e3779b97f4a7c15ull + index + 0x632be59bd9b4e019ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Nearest positive hit of the ray t * dir with a sphere, or +inf.
double ray_sphere(const Vec3& dir, const Vec3& c, double r) {
  const double b = dir.dot(c);
  const double disc = b * b - (c.squaredNorm() - r * r);
  if (disc < 0.0) return std::numeric_limits<double>::infinity();
  const double s = std::sqrt(disc);
  if (b - s > 0.0) return b - s;
  if (b + s > 0.0) return b + s;
  return std::numeric_limits<double>::infinity();
}

// Nearest positive hit with a finite capped cylinder.
double ray_cylinder(const Vec3& dir, const Vec3& a, const Vec3& b, double radius) {
  double best = std::numeric_limits<double>::infinity();
  const Vec3 axis = (b - a).normalized();
  const double len = (b - a).norm();
  const Vec3 w = -a;
  const Vec3 rp = dir - dir.dot(axis) * axis;
  const Vec3 wp = w - w.dot(axis) * axis;
  const double A = rp.squaredNorm();
  const double B = 2.0 * rp.dot(wp);
  const double C = wp.squaredNorm() - radius * radius;
  const double disc = B * B - 4.0 * A * C;
  if (A > 1e-15 && disc >= 0.0) {
    const double sq = std::sqrt(disc);
    for (double t : {(-B - sq) / (2.0 * A), (-B + sq) / (2.0 * A)}) {
      if (t <= 0.0) continue;
      const double s = (w + t * dir).dot(axis);
      if (s >= 0.0 && s <= len) {
        best = std::min(best, t);
        break;
      }
    }
  }
  const double denom = dir.dot(axis);
  if (std::fabs(denom) > 1e-12) {
    for (const Vec3* cap : {&a, &b}) {
      const double t = cap->dot(axis) / denom;
      if (t > 0.0 && (t * dir - *cap).norm() <= radius) best = std::min(best, t);
    }
  }
  return best;
}

Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return q.toRotationMatrix();
}

Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v(n(rng), n(rng), n(rng));
  while (v.norm() < 1e-9) v = Vec3(n(rng), n(rng), n(rng));
  return v.normalized();
}

void set_rotation(PoseVector& pose, int index, const Mat3& R) {
  pose.segment<3>(index) = log_so3(R);
}

}  // namespace

CameraModel default_synth_camera() { return {{285.0, 285.0, 159.5, 119.5}, 320, 240}; }

PoseVector default_synth_pose() {
  PoseVector p = PoseVector::Zero();
  p.segment<3>(kHandTranslation) = Vec3(0.0, 60.0, 430.0);
  for (int f = 0; f < 5; ++f) {
    const int base = kArticulationBegin + 4 * f;
    p[base + 1] = 10.0 * kDeg;
    p[base + 2] = 15.0 * kDeg;
    p[base + 3] = 10.0 * kDeg;
  }
  // Object parked off to the thumb side.
  p.segment<3>(kObjectTranslation) = Vec3(130.0, 0.0, 430.0);
  return p;
}

RenderedFrame render_spheres(const GaussianMixture& posed, const CameraModel& camera,
                             const RenderOptions& options,
                             const std::optional<std::array<Vec3, 2>>& forearm_axis) {
  if (camera.width <= 0 || camera.height <= 0 || !(camera.intrinsics.fx > 0.0) ||
      !(camera.intrinsics.fy > 0.0))
    throw InvalidInput("invalid synthetic camera");
  const Intrinsics& K = camera.intrinsics;
  const int W = camera.width, H = camera.height;
  RenderedFrame out;
  out.depth = DepthFrame(W, H, K);
  out.color = ColorFrame(W, H);
  out.labels.assign(static_cast<std::size_t>(W) * H, static_cast<std::uint8_t>(Label::Background));
  std::vector<double> zbuf(static_cast<std::size_t>(W) * H, std::numeric_limits<double>::infinity());

  for (std::size_t i = 0; i < posed.size(); ++i) {
    const Gaussian& g = posed[i];
    const double r = g.sigma;
    const Vec3& c = g.mean;
    int u0 = 0, u1 = W - 1, v0 = 0, v1 = H - 1;
    if (c.z() - r > 1e-6) {
      // Conservative projected bounds of the sphere.
      const double zn = c.z() - r;
      u0 = std::max(0, static_cast<int>(std::floor(K.fx * (c.x() - r) / (c.x() - r < 0 ? zn : c.z() + r) + K.cx)) - 1);
      u1 = std::min(W - 1, static_cast<int>(std::ceil(K.fx * (c.x() + r) / (c.x() + r > 0 ? zn : c.z() + r) + K.cx)) + 1);
      v0 = std::max(0, static_cast<int>(std::floor(K.fy * (c.y() - r) / (c.y() - r < 0 ? zn : c.z() + r) + K.cy)) - 1);
      v1 = std::min(H - 1, static_cast<int>(std::ceil(K.fy * (c.y() + r) / (c.y() + r > 0 ? zn : c.z() + r) + K.cy)) + 1);
    } else if (c.z() + r <= 0.0) {
      continue;
    }
    for (int v = v0; v <= v1; ++v)
      for (int u = u0; u <= u1; ++u) {
        const Vec3 dir = pixel_ray(Vec2(u, v), K);
        const double t = ray_sphere(dir, c, r);
        if (!std::isfinite(t)) continue;
        const double z = t * dir.z();
        const std::size_t idx = static_cast<std::size_t>(v) * W + u;
        if (z > 0.0 && z < zbuf[idx]) {
          zbuf[idx] = z;
          out.labels[idx] = static_cast<std::uint8_t>(g.label);
        }
      }
  }
  if (forearm_axis) {
    const auto& [a, b] = *forearm_axis;
    for (int v = 0; v < H; ++v)
      for (int u = 0; u < W; ++u) {
        const Vec3 dir = pixel_ray(Vec2(u, v), K);
        const double t = ray_cylinder(dir, a, b, options.forearm.radius);
        if (!std::isfinite(t)) continue;
        const double z = t * dir.z();
        const std::size_t idx = static_cast<std::size_t>(v) * W + u;
        if (z > 0.0 && z < zbuf[idx]) {
          zbuf[idx] = z;
          out.labels[idx] = kArmCode;
        }
      }
  }

  std::mt19937_64 rng(mix_seed(options.seed, 0x5eed));
  std::normal_distribution<double> hue_noise(0.0, options.colors.hue_noise_deg);
  std::normal_distribution<double> depth_noise(0.0, options.depth_noise_mm);
  for (std::size_t idx = 0; idx < zbuf.size(); ++idx) {
    if (!std::isfinite(zbuf[idx])) continue;
    double z = zbuf[idx];
    if (options.depth_noise_mm > 0.0) z += depth_noise(rng);
    z = std::clamp(z, 1.0, static_cast<double>(kMaxDepthMm));
    out.depth.depth[idx] = static_cast<float>(z);
    Hsv c = out.labels[idx] == static_cast<std::uint8_t>(Label::Object) ? options.colors.object
                                                                        : options.colors.skin;
    if (options.colors.hue_noise_deg > 0.0) c.h = std::fmod(c.h + hue_noise(rng) + 360.0, 360.0);
    const auto rgb = hsv_to_rgb(c);
    std::copy(rgb.begin(), rgb.end(), &out.color.rgb[idx * 3]);
  }
  return out;
}

RenderedFrame render_frame(const SceneModel& scene, const KinematicModel& kin, const PoseVector& pose,
                           const CameraModel& camera, const RenderOptions& options) {
  const PosedScene posed = pose_scene_full(scene, kin, pose);
  GaussianMixture spheres = posed.mixture;
  if (!options.render_object) spheres.resize(posed.hand_count);
  std::optional<std::array<Vec3, 2>> arm;
  if (options.forearm.enabled) {
    const Rigid& wrist = posed.skeleton.bones[0];
    arm = std::array<Vec3, 2>{wrist.apply(Vec3(0.0, options.forearm.start, 0.0)),
                              wrist.apply(Vec3(0.0, options.forearm.start + options.forearm.length, 0.0))};
  }
  return render_spheres(spheres, camera, options, arm);
}

// ---------------------------------------------------------------------------

Mat3 viewpoint_rotation(Viewpoint v) {
  const double angle = v == Viewpoint::Front    ? 0.0
                       : v == Viewpoint::Back   ? std::numbers::pi
                       : v == Viewpoint::Thumb  ? 0.5 * std::numbers::pi
                                                : -0.5 * std::numbers::pi;
  return Eigen::AngleAxisd(angle, Vec3::UnitY()).toRotationMatrix();
}

bool hand_object_intersect(const GaussianMixture& posed, int hand_count, double tolerance) {
  for (std::size_t l = hand_count; l < posed.size(); ++l)
    for (int k = 0; k < hand_count; ++k)
      if ((posed[k].mean - posed[l].mean).norm() < posed[k].sigma + posed[l].sigma - tolerance)
        return true;
  return false;
}

TrainingSample generate_training_sample(const SceneModel& scene, const KinematicModel& kin,
                                        const TrainingSetOptions& options, std::uint64_t index,
                                        std::optional<Viewpoint> viewpoint) {
  if (!(options.max_distance >= options.min_distance) || !(options.min_distance > 0.0))
    throw ConfigError("invalid training distance range");
  std::mt19937_64 rng(mix_seed(options.seed, index));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Viewpoint bucket = viewpoint.value_or(static_cast<Viewpoint>(index % kViewpointCount));
  const auto limits = joint_limits(kin);
  constexpr int kMaxPoseDraws = 1000;

  TrainingSample sample;
  sample.viewpoint = bucket;
  for (int draw = 1; draw <= kMaxPoseDraws; ++draw) {
    PoseVector pose = PoseVector::Zero();
    for (int k = 0; k < kArticulationDofs; ++k)
      pose[kArticulationBegin + k] = limits[k].first + unit(rng) * (limits[k].second - limits[k].first);
    const double angle = options.rotation_jitter_deg * kDeg * unit(rng);
    const Mat3 R = exp_so3(angle * random_unit(rng)) * viewpoint_rotation(bucket);
    set_rotation(pose, kHandRotation, R);
    const Vec3 centre((2.0 * unit(rng) - 1.0) * options.lateral_jitter,
                      (2.0 * unit(rng) - 1.0) * options.lateral_jitter,
                      options.min_distance + unit(rng) * (options.max_distance - options.min_distance));
    pose.segment<3>(kHandTranslation) = centre - R * Vec3(0.0, -80.0, 0.0);
    if (select_viewpoint(pose, kin) != bucket) continue;

    bool placed = !options.render.render_object;
    if (!placed) {
      const GaussianMixture hand = pose_scene(scene, kin, pose);
      const Vec3 thumb = hand[scene.fingertips[0]].mean;
      for (int p = 0; p < options.placements_per_pose && !placed; ++p) {
        const int other = 1 + static_cast<int>(unit(rng) * 4.0) % 4;
        const Vec3 tip = hand[scene.fingertips[other]].mean;
        pose.segment<3>(kObjectTranslation) = thumb + unit(rng) * (tip - thumb);
        set_rotation(pose, kObjectRotation, random_rotation(rng));
        const GaussianMixture all = pose_scene(scene, kin, pose);
        placed = !hand_object_intersect(all, scene.hand_count(), options.overlap_tolerance);
      }
    }
    if (!placed) continue;
    sample.pose = pose;
    sample.attempts = draw;
    RenderOptions render = options.render;
    render.seed = mix_seed(options.render.seed ^ options.seed, index);
    sample.frame = render_frame(scene, kin, pose, options.camera, render);
    return sample;
  }
  throw ConfigError("training sample rejected on every draw; geometry is degenerate");
}

std::vector<TrainingSample> generate_training_set(const SceneModel& scene, const KinematicModel& kin,
                                                  int count, const TrainingSetOptions& options) {
  if (count < 1) throw InvalidInput("training set size must be >= 1");
  std::vector<TrainingSample> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) out.push_back(generate_training_sample(scene, kin, options, i));
  return out;
}

TrainingImage to_training_image(const RenderedFrame& frame, int layer) {
  if (layer != 1 && layer != 2) throw InvalidInput("layer must be 1 or 2");
  const int W = frame.depth.width, H = frame.depth.height;
  int u0 = W, u1 = -1, v0 = H, v1 = -1;
  auto keep = [&](std::size_t i) {
    return frame.depth.depth[i] > 0.0f && frame.labels[i] != static_cast<std::uint8_t>(Label::Object);
  };
  for (int v = 0; v < H; ++v)
    for (int u = 0; u < W; ++u)
      if (keep(static_cast<std::size_t>(v) * W + u)) {
        u0 = std::min(u0, u);
        u1 = std::max(u1, u);
        v0 = std::min(v0, v);
        v1 = std::max(v1, v);
      }
  TrainingImage im;
  if (u1 < 0) {
    im.width = im.height = 1;
    im.depth = {0.0f};
    im.labels = {kIgnoreLabel};
    return im;
  }
  im.width = u1 - u0 + 1;
  im.height = v1 - v0 + 1;
  im.depth.assign(static_cast<std::size_t>(im.width) * im.height, 0.0f);
  im.labels.assign(im.depth.size(), kIgnoreLabel);
  for (int v = v0; v <= v1; ++v)
    for (int u = u0; u <= u1; ++u) {
      const std::size_t src = static_cast<std::size_t>(v) * W + u;
      const std::size_t dst = static_cast<std::size_t>(v - v0) * im.width + (u - u0);
      if (!keep(src)) continue;
      im.depth[dst] = frame.depth.depth[src];
      const std::uint8_t gt = frame.labels[src];
      if (layer == 1)
        im.labels[dst] = gt == kArmCode ? kLayer1Arm : kLayer1Hand;
      else if (gt < kLayer2Background)
        im.labels[dst] = gt;
    }
  return im;
}

std::vector<TrainingImage> make_training_images(const SceneModel& scene, const KinematicModel& kin,
                                                const TrainingSetOptions& options, int count,
                                                int layer, std::optional<Viewpoint> viewpoint,
                                                int threads) {
  if (count < 1) throw InvalidInput("training set size must be >= 1");
  std::vector<TrainingImage> out(count);
  parallel_for(static_cast<std::size_t>(count), threads, [&](std::size_t i) {
    out[i] = to_training_image(generate_training_sample(scene, kin, options, i, viewpoint).frame, layer);
  });
  return out;
}

// ---------------------------------------------------------------------------

PoseVector interpolate_keyframes(const std::vector<Keyframe>& keys, double frame) {
  if (keys.empty()) throw InvalidInput("no keyframes");
  for (std::size_t i = 1; i < keys.size(); ++i)
    if (!(keys[i].frame > keys[i - 1].frame)) throw InvalidInput("keyframes must be strictly increasing");
  if (keys.size() == 1 || frame <= keys.front().frame) return keys.front().pose;
  if (frame >= keys.back().frame) return keys.back().pose;
  std::size_t k = 0;
  while (keys[k + 1].frame < frame) ++k;
  auto tangent = [&](std::size_t i) -> PoseVector {
    const std::size_t lo = i == 0 ? 0 : i - 1;
    const std::size_t hi = std::min(keys.size() - 1, i + 1);
    return (keys[hi].pose - keys[lo].pose) / (keys[hi].frame - keys[lo].frame);
  };
  const double h = keys[k + 1].frame - keys[k].frame;
  const double s = (frame - keys[k].frame) / h;
  const double s2 = s * s, s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s, h01 = -2 * s3 + 3 * s2,
               h11 = s3 - s2;
  return h00 * keys[k].pose + h10 * h * tangent(k) + h01 * keys[k + 1].pose + h11 * h * tangent(k + 1);
}

LandmarkSet ground_truth_landmarks(const SceneModel& scene, const KinematicModel& kin,
                                   const PoseVector& pose, const RenderedFrame& frame) {
  const PosedScene posed = pose_scene_full(scene, kin, pose);
  LandmarkSet out;
  out.fingertips = fingertip_positions(scene, posed.mixture);
  out.object = object_landmark_positions(scene, posed.skeleton);
  const Intrinsics& K = frame.depth.intrinsics;
  auto visible = [&](const Vec3& p, double tolerance) {
    if (p.z() <= 0.0) return false;
    const Vec2 px = project(p, K);
    const int u = static_cast<int>(std::lround(px.x())), v = static_cast<int>(std::lround(px.y()));
    if (u < 0 || v < 0 || u >= frame.depth.width || v >= frame.depth.height) return false;
    const float d = frame.depth.at(u, v);
    return d <= 0.0f || d >= p.z() - tolerance;
  };
  for (int k = 0; k < kFingertips; ++k)
    out.fingertip_visible[k] = visible(out.fingertips[k], scene.hand[scene.fingertips[k]].sigma + 3.0);
  for (int k = 0; k < kObjectLandmarks; ++k) out.object_visible[k] = visible(out.object[k], 20.0);
  return out;
}

SyntheticSequence generate_sequence(const SceneModel& scene, const KinematicModel& kin,
                                    const std::vector<Keyframe>& keys, const CameraModel& camera,
                                    int length, const RenderOptions& options, int threads) {
  if (keys.size() < 2) throw InvalidInput("a sequence needs at least two keyframes");
  if (length < 1) throw InvalidInput("sequence length must be >= 1");
  SyntheticSequence seq;
  seq.camera = camera;
  seq.frames.resize(length);
  seq.poses.resize(length);
  seq.landmarks.resize(length);
  parallel_for(static_cast<std::size_t>(length), threads, [&](std::size_t f) {
    seq.poses[f] = interpolate_keyframes(keys, static_cast<double>(f));
    RenderOptions o = options;
    o.seed = mix_seed(options.seed, f);
    seq.frames[f] = render_frame(scene, kin, seq.poses[f], camera, o);
    seq.frames[f].depth.timestamp = static_cast<double>(f) / 30.0;
    seq.landmarks[f] = ground_truth_landmarks(scene, kin, seq.poses[f], seq.frames[f]);
  });
  return seq;
}

double min_contact_margin(const SceneModel& scene, const KinematicModel& kin, const PoseVector& pose) {
  const GaussianMixture posed = pose_scene(scene, kin, pose);
  double best = std::numeric_limits<double>::infinity();
  for (int k : scene.fingertips)
    for (std::size_t l = scene.hand_count(); l < posed.size(); ++l)
      best = std::min(best, (posed[k].mean - posed[l].mean).norm() - posed[k].sigma - posed[l].sigma);
  return best;
}

std::vector<Keyframe> grasp_trajectory(const SceneModel& scene, const KinematicModel& kin,
                                       const PoseVector& start, int length) {
  if (length < 2) throw InvalidInput("grasp trajectory needs at least two frames");
  PoseVector end = start;
  for (int f = 0; f < 5; ++f) {
    const int base = kArticulationBegin + 4 * f;
    const bool thumb = f == 0;
    end[base + 1] = (thumb ? 30.0 : 45.0) * kDeg;
    end[base + 2] = (thumb ? 30.0 : 55.0) * kDeg;
    end[base + 3] = (thumb ? 20.0 : 35.0) * kDeg;
  }
  end.segment<3>(kHandTranslation) += Vec3(15.0, -10.0, 0.0);
  end = clamp_to_limits(kin, end);

  // Park the object just beyond the closed index fingertip so it ends in contact.
  const PosedScene posed = pose_scene_full(scene, kin, end);
  const int tip = scene.fingertips[1];
  const Vec3 tip_pos = posed.mixture[tip].mean;
  Vec3 palm = Vec3::Zero();
  for (int i = 0; i < 9; ++i) palm += posed.mixture[i].mean / 9.0;
  const Vec3 out_dir = (tip_pos - palm).normalized();
  const Mat3 R = posed.skeleton.hand_global.R;
  auto margin = [&](double s) {
    const Vec3 centre = tip_pos + s * out_dir;
    double best = std::numeric_limits<double>::infinity();
    for (const Gaussian& g : scene.object)
      best = std::min(best, (R * g.mean + centre - tip_pos).norm() - 0.8 * (g.sigma + scene.hand[tip].sigma));
    return best;
  };
  double s = 0.0;
  while (margin(s) < 0.0 && s < 400.0) s += 0.25;
  PoseVector obj = start;
  obj.segment<3>(kObjectTranslation) = tip_pos + s * out_dir;
  set_rotation(obj, kObjectRotation, R);
  PoseVector first = start, last = end;
  first.tail<kObjectDofs>() = obj.tail<kObjectDofs>();
  last.tail<kObjectDofs>() = obj.tail<kObjectDofs>();
  return {{0.0, first}, {static_cast<double>(length - 1), last}};
}

std::vector<Keyframe> occlusion_sweep_trajectory(const SceneModel& scene, const KinematicModel& kin,
                                                 const PoseVector& start, int length) {
  if (length < 2) throw InvalidInput("sweep trajectory needs at least two frames");
  const PosedScene posed = pose_scene_full(scene, kin, start);
  // Centre of the four non-thumb fingers.
  Vec3 fingers = Vec3::Zero();
  int n = 0;
  for (int i = 10 + 4; i < scene.hand_count(); ++i, ++n) fingers += posed.mixture[i].mean;
  fingers /= std::max(1, n);
  const Mat3 R = posed.skeleton.hand_global.R * Eigen::AngleAxisd(0.5 * std::numbers::pi, Vec3::UnitX()).toRotationMatrix();

  PoseVector first = start, last = start;
  first.segment<3>(kObjectTranslation) = fingers + Vec3(130.0, 0.0, -75.0);
  last.segment<3>(kObjectTranslation) = fingers + Vec3(-130.0, 0.0, -75.0);
  set_rotation(first, kObjectRotation, R);
  set_rotation(last, kObjectRotation, R);
  for (int f = 1; f < 5; ++f) last[kArticulationBegin + 4 * f + 1] += 25.0 * kDeg;
  last = clamp_to_limits(kin, last);
  return {{0.0, first}, {static_cast<double>(length - 1), last}};
}

}  // namespace hotrack

// ---------------------------------------------------------------------------

namespace hotrack {

AnnotationSet sequence_annotations(const SyntheticSequence& seq) {
  AnnotationSet set;
  set.frames.resize(seq.landmarks.size());
  for (std::size_t f = 0; f < seq.landmarks.size(); ++f) {
    FrameAnnotation& a = set.frames[f];
    const LandmarkSet& l = seq.landmarks[f];
    a.frame = static_cast<int>(f);
    a.fingertips = l.fingertips;
    a.fingertip_visible = l.fingertip_visible;
    a.object = l.object;
    a.object_visible = l.object_visible;
  }
  return set;
}

std::filesystem::path write_sequence(const SyntheticSequence& seq, const SceneModel& scene,
                                     const KinematicModel& kin, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir / "frames", ec);
  if (ec) throw InvalidInput("cannot create " + (dir / "frames").string() + ": " + ec.message());
  SequenceManifest manifest;
  manifest.camera = "camera.json";
  write_camera(seq.camera, dir / manifest.camera);
  for (std::size_t f = 0; f < seq.frames.size(); ++f) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "%05zu", f);
    ManifestEntry e;
    e.depth = fs::path("frames") / (std::string("depth_") + stem + ".pgm");
    e.color = fs::path("frames") / (std::string("color_") + stem + ".ppm");
    e.labels = fs::path("frames") / (std::string("labels_") + stem + ".pgm");
    e.timestamp = seq.frames[f].depth.timestamp;
    write_depth_pgm(seq.frames[f].depth, dir / e.depth);
    write_color_ppm(seq.frames[f].color, dir / e.color);
    write_gray_pgm(seq.frames[f].depth.width, seq.frames[f].depth.height, seq.frames[f].labels,
                   dir / e.labels);
    manifest.frames.push_back(std::move(e));
  }
  write_manifest(manifest, dir / "manifest.json");
  save_annotations(sequence_annotations(seq), dir / "annotations.json");
  std::vector<FramePrediction> truth;
  truth.reserve(seq.poses.size());
  for (std::size_t f = 0; f < seq.poses.size(); ++f)
    truth.push_back(predict_landmarks(scene, kin, seq.poses[f], static_cast<int>(f)));
  save_trajectory(truth, dir / "ground_truth.json");
  return dir / "manifest.json";
}

namespace {

// Two-layer output compared with the rendered labels over valid, non-object
// pixels. Forearm pixels count as background.
void accumulate_cascade(const ForestSet& forests, const KinematicModel& kin, const TrainingSample& sample,
                        AccuracyReport& acc) {
  const RenderedFrame& fr = sample.frame;
  const auto object_code = static_cast<std::uint8_t>(Label::Object);
  const auto background_code = static_cast<std::uint8_t>(Label::Background);
  std::vector<std::uint8_t> mask(fr.depth.size(), 0);
  DepthFrame hand_depth = fr.depth;
  for (std::size_t i = 0; i < fr.depth.size(); ++i)
    if (fr.labels[i] == object_code) {
      mask[i] = 1;
      hand_depth.depth[i] = 0.0f;
    }
  const Viewpoint vp = select_viewpoint(sample.pose, kin);
  const LabelHistogramImage hist =
      classify_pixels(forests.layer1, forests.layer2[static_cast<int>(vp)], hand_depth, mask, 1);
  if (acc.class_counts.empty()) acc.class_counts.assign(kLabelCount, 0);
  std::size_t correct = static_cast<std::size_t>(std::llround(acc.accuracy * acc.pixels));
  for (int v = 0; v < fr.depth.height; ++v)
    for (int u = 0; u < fr.depth.width; ++u) {
      const std::size_t i = static_cast<std::size_t>(v) * fr.depth.width + u;
      if (!(fr.depth.depth[i] > 0.0f) || mask[i]) continue;
      const std::uint8_t gt = fr.labels[i] == kArmCode ? background_code : fr.labels[i];
      ++acc.class_counts[gt];
      ++acc.pixels;
      if (static_cast<std::uint8_t>(hist.argmax(u, v)) == gt) ++correct;
    }
  acc.accuracy = acc.pixels ? static_cast<double>(correct) / acc.pixels : 0.0;
  if (acc.pixels)
    acc.majority_baseline =
        static_cast<double>(*std::max_element(acc.class_counts.begin(), acc.class_counts.end())) / acc.pixels;
}

}  // namespace

ForestSet train_forest_set(const SceneModel& scene, const KinematicModel& kin,
                           const TrainingSetOptions& data, const ForestSetSizes& sizes,
                           ForestParams layer1, ForestParams layer2, ForestSetReport* report) {
  if (sizes.layer1_images < 1 || sizes.layer2_images < 1 || sizes.heldout_images < 0)
    throw InvalidInput("forest training set sizes must be positive");
  const auto t0 = std::chrono::steady_clock::now();
  const int threads = std::max(layer1.threads, 1);
  TrainingSetOptions heldout = data;
  heldout.seed = mix_seed(0, data.seed ^ 0x68656c646f7574ull);

  ForestSet set;
  {
    auto images = make_training_images(scene, kin, data, sizes.layer1_images, 1, std::nullopt, threads);
    set.layer1 = train_forest(images, layer1, kLayer1Classes);
    set.layer1.layer = 1;
    if (report && sizes.heldout_images > 0) {
      auto test = make_training_images(scene, kin, heldout, sizes.heldout_images, 1, std::nullopt, threads);
      report->layer1 = evaluate_forest(set.layer1, test);
    }
  }
  for (int v = 0; v < kViewpointCount; ++v) {
    TrainingSetOptions o = data;
    o.seed = mix_seed(0, data.seed + 17 * static_cast<std::uint64_t>(v + 1));
    ForestParams p = layer2;
    p.seed = mix_seed(0, layer2.seed + static_cast<std::uint64_t>(v + 1));
    const Viewpoint vp = static_cast<Viewpoint>(v);
    auto images = make_training_images(scene, kin, o, sizes.layer2_images, 2, vp, threads);
    set.layer2[v] = train_forest(images, p, kLayer2Classes);
    set.layer2[v].layer = 2;
    set.layer2[v].viewpoint = v;
    if (report && sizes.heldout_images > 0) {
      TrainingSetOptions h = heldout;
      h.seed = mix_seed(0, heldout.seed + 17 * static_cast<std::uint64_t>(v + 1));
      auto test = make_training_images(scene, kin, h, sizes.heldout_images, 2, vp, threads);
      report->layer2[v] = evaluate_forest(set.layer2[v], test);
    }
  }
  if (report && sizes.heldout_images > 0) {
    report->cascade = {};
    TrainingSetOptions h = heldout;
    h.seed = mix_seed(0, heldout.seed + 0x636173636164ull);
    for (int i = 0; i < sizes.heldout_images; ++i)
      accumulate_cascade(set, kin, generate_training_sample(scene, kin, h, i, std::nullopt), report->cascade);
  }
  if (report)
    report->seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return set;
}

}  // namespace hotrack
