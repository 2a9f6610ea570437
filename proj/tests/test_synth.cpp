#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "hotrack/error.hpp"
#include "hotrack/image_io.hpp"
#include "hotrack/synth.hpp"
#include "test_util.hpp"

using namespace hotrack;

namespace {

CameraModel axis_camera() {
  CameraModel c;
  c.intrinsics = {285.0, 285.0, 160.0, 120.0};
  c.width = 320;
  c.height = 240;
  return c;
}

RenderOptions clean() {
  RenderOptions o;
  o.depth_noise_mm = 0.0;
  o.colors.hue_noise_deg = 0.0;
  o.forearm.enabled = false;
  return o;
}

}  // namespace

TEST(Render, SphereOnAxis) {
  Gaussian g;
  g.mean = Vec3(0, 0, 500);
  g.sigma = 50;
  g.label = Label::Palm;
  const RenderedFrame f = render_spheres({g}, axis_camera(), clean());
  EXPECT_NEAR(f.depth.at(160, 120), 450.0f, 1e-3f);
  EXPECT_EQ(f.labels[120 * 320 + 160], static_cast<std::uint8_t>(Label::Palm));
  EXPECT_FALSE(f.depth.valid(0, 0));
  EXPECT_EQ(f.labels[0], static_cast<std::uint8_t>(Label::Background));
}

TEST(Render, EmptyScene) {
  const RenderedFrame f = render_spheres({}, axis_camera(), clean());
  for (std::size_t i = 0; i < f.depth.size(); ++i) {
    EXPECT_EQ(f.depth.depth[i], 0.0f);
    EXPECT_EQ(f.labels[i], static_cast<std::uint8_t>(Label::Background));
  }
}

// Each foreground pixel lies on the surface of some sphere, with that
// sphere's label, and no sphere is hit nearer along the ray.
TEST(Render, RandomScenesHitSphereSurfaces) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> xy(-80, 80), z(350, 700), s(10, 40);
  const CameraModel cam = axis_camera();
  for (int scene = 0; scene < 5; ++scene) {
    GaussianMixture m(8);
    for (std::size_t i = 0; i < m.size(); ++i) {
      m[i].mean = Vec3(xy(rng), xy(rng), z(rng));
      m[i].sigma = s(rng);
      m[i].label = static_cast<Label>(i % 7);
    }
    const RenderedFrame f = render_spheres(m, cam, clean());
    int foreground = 0;
    for (int v = 0; v < cam.height; v += 3)
      for (int u = 0; u < cam.width; u += 3) {
        const Vec3 ray = pixel_ray(Vec2(u, v), cam.intrinsics);
        double nearest = 1e300;
        int who = -1;
        for (std::size_t i = 0; i < m.size(); ++i) {
          const double b = ray.dot(m[i].mean);
          const double disc = b * b - (m[i].mean.squaredNorm() - m[i].sigma * m[i].sigma);
          if (disc < 0) continue;
          const double t = b - std::sqrt(disc);
          if (t > 0 && t < nearest) {
            nearest = t;
            who = static_cast<int>(i);
          }
        }
        const float d = f.depth.at(u, v);
        if (who < 0) {
          EXPECT_EQ(d, 0.0f);
          continue;
        }
        ++foreground;
        const Vec3 p = backproject(Vec2(u, v), d, cam.intrinsics);
        EXPECT_NEAR((p - m[who].mean).norm(), m[who].sigma, 1e-2);
        EXPECT_GE(d, m[who].mean.z() - m[who].sigma - 1e-3);
        EXPECT_LE(d, m[who].mean.z() + m[who].sigma + 1e-3);
        EXPECT_EQ(f.labels[v * cam.width + u], static_cast<std::uint8_t>(m[who].label));
      }
    EXPECT_GT(foreground, 0);
  }
}

TEST(Render, FrameColoursAndLabels) {
  const SceneModel& scene = test::scene();
  const RenderedFrame f =
      render_frame(scene, test::kin(), default_synth_pose(), default_synth_camera(), clean());
  int object = 0, hand = 0;
  for (int v = 0; v < f.depth.height; ++v)
    for (int u = 0; u < f.depth.width; ++u) {
      const std::uint8_t l = f.labels[v * f.depth.width + u];
      ASSERT_EQ(f.depth.valid(u, v), l != static_cast<std::uint8_t>(Label::Background));
      if (!f.depth.valid(u, v)) continue;
      const std::uint8_t* c = f.color.pixel(u, v);
      const Hsv hsv = rgb_to_hsv(c[0], c[1], c[2]);
      if (l == static_cast<std::uint8_t>(Label::Object)) {
        ++object;
        EXPECT_NEAR(hsv.h, 120.0, 1.0);
      } else {
        ++hand;
        EXPECT_NEAR(hsv.h, 20.0, 1.0);
      }
    }
  EXPECT_GT(object, 100);
  EXPECT_GT(hand, 1000);
}

TEST(Render, ClusteredLeavesStayNearTheModel) {
  const SceneModel& scene = test::scene();
  const PoseVector pose = default_synth_pose();
  const RenderedFrame f = render_frame(scene, test::kin(), pose, default_synth_camera(), clean());
  std::vector<std::uint8_t> mask(f.depth.size());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = f.depth.depth[i] > 0.0f;
  const auto leaves = quadtree_cluster(f.depth, mask);
  const GaussianMixture posed = pose_scene(scene, test::kin(), pose);
  ASSERT_FALSE(leaves.empty());
  for (const QuadLeaf& leaf : leaves) {
    bool near = false;
    for (const Gaussian& g : posed) near = near || (leaf.mean - g.mean).norm() <= 2.0 * g.sigma;
    EXPECT_TRUE(near) << "leaf at " << leaf.x << "," << leaf.y;
  }
}

TEST(Render, NoiseIsSeeded) {
  RenderOptions o;
  o.seed = 5;
  const auto a = render_frame(test::scene(), test::kin(), default_synth_pose(), default_synth_camera(), o);
  const auto b = render_frame(test::scene(), test::kin(), default_synth_pose(), default_synth_camera(), o);
  EXPECT_EQ(a.depth.depth, b.depth.depth);
  EXPECT_EQ(a.color.rgb, b.color.rgb);
  o.seed = 6;
  const auto c = render_frame(test::scene(), test::kin(), default_synth_pose(), default_synth_camera(), o);
  EXPECT_NE(a.depth.depth, c.depth.depth);
}

// --- training data ---------------------------------------------------------------

TEST(TrainingData, DeterministicAndValid) {
  const SceneModel& scene = test::scene();
  const auto& kin = test::kin();
  TrainingSetOptions o;
  o.seed = 99;
  const auto a = generate_training_set(scene, kin, 8, o);
  const auto b = generate_training_set(scene, kin, 8, o);
  for (int i = 0; i < 8; ++i) {
    EXPECT_EQ(a[i].pose, b[i].pose);
    EXPECT_EQ(a[i].frame.depth.depth, b[i].frame.depth.depth);
    EXPECT_EQ(a[i].frame.labels, b[i].frame.labels);
    EXPECT_EQ(a[i].frame.color.rgb, b[i].frame.color.rgb);
    EXPECT_EQ(a[i].viewpoint, static_cast<Viewpoint>(i % kViewpointCount));
    EXPECT_EQ(select_viewpoint(a[i].pose, kin), a[i].viewpoint);

    const GaussianMixture posed = pose_scene(scene, kin, a[i].pose);
    EXPECT_FALSE(hand_object_intersect(posed, scene.hand_count(), o.overlap_tolerance));

    // Joint angles inside the limits.
    const auto lim = joint_limits(kin);
    for (int k = 0; k < kArticulationDofs; ++k) {
      EXPECT_GE(a[i].pose[kArticulationBegin + k], lim[k].first);
      EXPECT_LE(a[i].pose[kArticulationBegin + k], lim[k].second);
    }

    // Object origin on the segment from the thumb tip to some other fingertip.
    const Vec3 obj = a[i].pose.segment<3>(kObjectTranslation);
    const Vec3 thumb = posed[scene.fingertips[0]].mean;
    bool on_segment = false;
    for (int f = 1; f < kFingertips; ++f) {
      const Vec3 d = posed[scene.fingertips[f]].mean - thumb;
      const double t = (obj - thumb).dot(d) / d.squaredNorm();
      on_segment = on_segment ||
                   (t >= -1e-9 && t <= 1 + 1e-9 && (thumb + t * d - obj).norm() < 1e-6);
    }
    EXPECT_TRUE(on_segment) << "sample " << i;
  }
}

TEST(TrainingData, SingleSampleIndependentOfSetSize) {
  TrainingSetOptions o;
  const auto set = generate_training_set(test::scene(), test::kin(), 3, o);
  const TrainingSample s = generate_training_sample(test::scene(), test::kin(), o, 2);
  EXPECT_EQ(s.pose, set[2].pose);
}

TEST(TrainingData, DegenerateGeometryIsConfigError) {
  TrainingSetOptions o;
  o.overlap_tolerance = -1e9;  // every placement intersects
  EXPECT_THROW(generate_training_sample(test::scene(), test::kin(), o, 0), ConfigError);
  o = {};
  o.min_distance = 600;
  o.max_distance = 500;
  EXPECT_THROW(generate_training_sample(test::scene(), test::kin(), o, 0), ConfigError);
  EXPECT_THROW(generate_training_set(test::scene(), test::kin(), 0, {}), InvalidInput);
}

TEST(TrainingData, TrainingImageLayers) {
  TrainingSetOptions o;
  const TrainingSample s = generate_training_sample(test::scene(), test::kin(), o, 0);
  const TrainingImage l1 = to_training_image(s.frame, 1);
  const TrainingImage l2 = to_training_image(s.frame, 2);
  EXPECT_EQ(l1.width, l2.width);
  EXPECT_EQ(l1.depth, l2.depth);
  int hand = 0;
  for (std::size_t i = 0; i < l1.labels.size(); ++i) {
    const std::uint8_t a = l1.labels[i], b = l2.labels[i];
    if (l1.depth[i] <= 0.0f) {
      EXPECT_EQ(a, kIgnoreLabel);
      continue;
    }
    EXPECT_TRUE(a == kLayer1Hand || a == kLayer1Arm);
    if (a == kLayer1Hand) {
      ++hand;
      EXPECT_LT(b, kLayer2Background);
    } else {
      EXPECT_EQ(b, kIgnoreLabel);
    }
  }
  EXPECT_GT(hand, 0);
  EXPECT_THROW(to_training_image(s.frame, 3), InvalidInput);
}

// --- sequences -------------------------------------------------------------------

TEST(Sequence, InterpolationMidpointAndClamp) {
  std::mt19937_64 rng(1);
  const PoseVector a = test::random_pose(rng), b = test::random_pose(rng);
  const std::vector<Keyframe> keys{{0.0, a}, {10.0, b}};
  EXPECT_LT((interpolate_keyframes(keys, 5.0) - 0.5 * (a + b)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(interpolate_keyframes(keys, -3.0), a);
  EXPECT_EQ(interpolate_keyframes(keys, 12.0), b);
  EXPECT_EQ(interpolate_keyframes(keys, 10.0), b);
}

TEST(Sequence, ConstantTrajectoryGivesIdenticalFrames) {
  const PoseVector p = default_synth_pose();
  const SyntheticSequence seq = generate_sequence(test::scene(), test::kin(), {{0, p}, {4, p}},
                                                  default_synth_camera(), 5, clean());
  ASSERT_EQ(seq.frames.size(), 5u);
  for (std::size_t f = 1; f < 5; ++f) {
    EXPECT_EQ(seq.poses[f], seq.poses[0]);
    EXPECT_EQ(seq.frames[f].depth.depth, seq.frames[0].depth.depth);
    EXPECT_EQ(seq.frames[f].labels, seq.frames[0].labels);
  }
  const FramePrediction truth = predict_landmarks(test::scene(), test::kin(), p, 0);
  for (int k = 0; k < kFingertips; ++k)
    EXPECT_LT((seq.landmarks[0].fingertips[k] - truth.fingertips[k]).norm(), 1e-9);
}

TEST(Sequence, GraspTriggersContactWithBoundedMotion) {
  const SceneModel& scene = test::scene();
  const int n = 100;
  const auto keys = grasp_trajectory(scene, test::kin(), default_synth_pose(), n);
  double min_margin = 1e300;
  PoseVector prev = interpolate_keyframes(keys, 0);
  for (int f = 0; f < n; ++f) {
    const PoseVector p = interpolate_keyframes(keys, f);
    min_margin = std::min(min_margin, min_contact_margin(scene, test::kin(), p));
    const PoseVector d = (p - prev).cwiseAbs();
    for (int i = 0; i < kPoseDofs; ++i) {
      const bool translation = (i >= kHandTranslation && i < kHandTranslation + 3) ||
                               (i >= kObjectTranslation && i < kObjectTranslation + 3);
      EXPECT_LT(d[i], translation ? 10.0 : 5.0 * std::numbers::pi / 180.0) << "frame " << f << " dof " << i;
    }
    prev = p;
  }
  EXPECT_LT(min_margin, 0.0);
  EXPECT_GT(min_contact_margin(scene, test::kin(), interpolate_keyframes(keys, 0)), 0.0);
}

TEST(Sequence, SweepOccludesFingers) {
  const SceneModel& scene = test::scene();
  const int n = 60;
  const auto keys = occlusion_sweep_trajectory(scene, test::kin(), default_synth_pose(), n);
  const SyntheticSequence seq =
      generate_sequence(scene, test::kin(), keys, default_synth_camera(), n, clean());
  int hidden = 0;
  for (const LandmarkSet& l : seq.landmarks)
    for (bool v : l.fingertip_visible) hidden += !v;
  EXPECT_GT(hidden, 0);
}

TEST(Sequence, WriteAndReadBack) {
  const PoseVector p = default_synth_pose();
  const SyntheticSequence seq = generate_sequence(test::scene(), test::kin(), {{0, p}, {2, p}},
                                                  default_synth_camera(), 3);
  const auto dir = std::filesystem::temp_directory_path() / "hotrack_seq_test";
  std::filesystem::remove_all(dir);
  const auto manifest_path = write_sequence(seq, test::scene(), test::kin(), dir);
  const SequenceManifest manifest = read_manifest(manifest_path);
  ASSERT_EQ(manifest.frames.size(), 3u);
  const CameraModel cam = read_camera(manifest.camera);
  const SequenceFrame f = load_sequence_frame(manifest, cam, 1);
  ASSERT_EQ(f.depth.size(), seq.frames[1].depth.size());
  for (std::size_t i = 0; i < f.depth.size(); ++i)
    EXPECT_NEAR(f.depth.depth[i], seq.frames[1].depth.depth[i], 0.5f);
  EXPECT_EQ(f.color.rgb, seq.frames[1].color.rgb);

  const AnnotationSet ann = load_annotations(dir / "annotations.json");
  const AnnotationSet want = sequence_annotations(seq);
  ASSERT_EQ(ann.frames.size(), want.frames.size());
  for (std::size_t i = 0; i < ann.frames.size(); ++i)
    for (int k = 0; k < kFingertips; ++k) {
      EXPECT_EQ(ann.frames[i].fingertip_visible[k], want.frames[i].fingertip_visible[k]);
      EXPECT_LT((ann.frames[i].fingertips[k] - want.frames[i].fingertips[k]).norm(), 1e-9);
    }
  const auto gt = load_trajectory(dir / "ground_truth.json");
  ASSERT_EQ(gt.size(), 3u);
  EXPECT_LT((gt[2].pose - seq.poses[2]).cwiseAbs().maxCoeff(), 1e-12);
  std::filesystem::remove_all(dir);
}
