#include <benchmark/benchmark.h>

#include "hotrack/config.hpp"
#include "hotrack/depth_input.hpp"
#include "hotrack/energy.hpp"
#include "hotrack/gradcheck.hpp"
#include "hotrack/synth.hpp"
#include "hotrack/tracker.hpp"

using namespace hotrack;

namespace {

const LoadedScene& model() {
  static const LoadedScene m = load_scene(RunConfig{});
  return m;
}

const RenderedFrame& frame() {
  static const RenderedFrame f = render_frame(model().scene, model().hand.kinematics, default_synth_pose(),
                                              default_synth_camera(), RenderOptions{});
  return f;
}

void BM_GaussianOverlap(benchmark::State& state) {
  const Vec3 a(1, 2, 3), b(4, 0, -2);
  for (auto _ : state) benchmark::DoNotOptimize(gaussian_overlap(a, 10.0, b, 12.0));
}
BENCHMARK(BM_GaussianOverlap);

void BM_EnergyEvaluate(benchmark::State& state) {
  const auto& kin = model().hand.kinematics;
  const GradCheckState s = random_gradcheck_state(kin, model().scene, 1, static_cast<int>(state.range(0)));
  const EnergyFunction e(kin, model().scene, s.data, s.model_weights, s.temporal, s.contacts, EnergyWeights{});
  for (auto _ : state) benchmark::DoNotOptimize(e.evaluate(Objective::Label, s.pose));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_EnergyEvaluate)->Arg(60)->Arg(200)->Unit(benchmark::kMicrosecond);

void BM_QuadtreeCluster(benchmark::State& state) {
  const DepthFrame& d = frame().depth;
  std::vector<std::uint8_t> mask(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) mask[i] = d.depth[i] > 0.0f;
  for (auto _ : state) benchmark::DoNotOptimize(quadtree_cluster(d, mask));
}
BENCHMARK(BM_QuadtreeCluster)->Unit(benchmark::kMicrosecond);

void BM_TrackFrame(benchmark::State& state) {
  const TrackerModel tm{&model().hand.kinematics, &model().scene, nullptr};
  const TrackerState s = TrackerState::initial(default_synth_pose(), model().scene);
  for (auto _ : state) benchmark::DoNotOptimize(track_frame(s, frame().color, frame().depth, tm, TrackerConfig{}));
}
BENCHMARK(BM_TrackFrame)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
