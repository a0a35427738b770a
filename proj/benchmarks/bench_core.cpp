// Micro benchmarks for the hot paths of a trial and of training.

#include <benchmark/benchmark.h>

#include <span>

#include "vw/appld.hpp"
#include "vw/bclearn.hpp"
#include "vw/harness.hpp"
#include "vw/rng.hpp"

using namespace vw;

namespace {

const Course& medium() {
  static const Course c = [] {
    CourseSpec spec;
    spec.difficulty = Difficulty::Medium;
    spec.seed = 7;
    return make_course(spec);
  }();
  return c;
}

VehicleState pose_on(const Course& c, const VehicleGeometry& g) {
  VehicleState s = spawn(c.map, g, 1.5, 0.65, 0.3);
  s.camera_tilt = -0.4;
  return s;
}

void BM_RenderDepth(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const VehicleGeometry g = VehicleGeometry::v6w();
  const VehicleState s = pose_on(medium(), g);
  for (auto _ : state) benchmark::DoNotOptimize(render_depth(medium().map, s, g, side, side));
  state.SetItemsProcessed(state.iterations() * side * side);
}
BENCHMARK(BM_RenderDepth)->Arg(32)->Arg(64)->Unit(benchmark::kMicrosecond);

void BM_FitChassis(benchmark::State& state) {
  const VehicleGeometry g = state.range(0) == 6 ? VehicleGeometry::v6w() : VehicleGeometry::v4w();
  Rng rng(1);
  for (auto _ : state) {
    const double x = rng.uniform(0.5, 2.6), y = rng.uniform(0.4, 0.9), yaw = rng.uniform(-3.1, 3.1);
    benchmark::DoNotOptimize(fit_chassis(medium().map, x, y, yaw, g));
  }
}
BENCHMARK(BM_FitChassis)->Arg(4)->Arg(6);

void BM_Step(benchmark::State& state) {
  const VehicleGeometry g = VehicleGeometry::v6w();
  const VehicleState s0 = pose_on(medium(), g);
  const Action a{0.5, 0.1, true, true, true};
  for (auto _ : state) benchmark::DoNotOptimize(step(s0, a, medium().map, g));
}
BENCHMARK(BM_Step);

std::vector<BcSample> batch(const BcArch& arch, int n) {
  Rng rng(3);
  std::vector<BcSample> out(n);
  for (auto& s : out) {
    s.x.resize(static_cast<std::size_t>(arch.input_side) * arch.input_side);
    for (double& v : s.x) v = rng.uniform(0.05, 1.0);
    s.a = {rng.uniform(-1, 1), rng.uniform(-0.35, 0.35)};
  }
  return out;
}

void BM_BcForward(benchmark::State& state) {
  const BcArch arch;
  const BcParams p = init_params(arch, 1);
  const auto b = batch(arch, 1);
  for (auto _ : state) benchmark::DoNotOptimize(forward(p, b[0].x));
}
BENCHMARK(BM_BcForward)->Unit(benchmark::kMicrosecond);

void BM_BcGradient(benchmark::State& state) {
  const BcArch arch;
  const BcParams p = init_params(arch, 1);
  const auto b = batch(arch, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(bc_gradient(p, b));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BcGradient)->Arg(1)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_SegmentSeries(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(5);
  std::vector<std::array<double, 2>> series(n);
  for (int i = 0; i < n; ++i) {
    const int regime = 3 * i / n;
    series[i] = {0.2 + 0.15 * regime + 0.02 * rng.normal(), 0.1 * regime + 0.02 * rng.normal()};
  }
  for (auto _ : state) benchmark::DoNotOptimize(segment_series(series));
}
BENCHMARK(BM_SegmentSeries)->Arg(600)->Arg(2400)->Unit(benchmark::kMillisecond);

void BM_ReplayLoss(benchmark::State& state) {
  std::vector<DataFrame> frames(400);
  for (std::size_t k = 0; k < frames.size(); ++k) {
    frames[k].t = static_cast<double>(k) * kTick;
    frames[k].g.dx = (k / 60) % 2 ? 0.0 : 0.3;
    frames[k].v = 0.5;
  }
  const RbParams p;
  for (auto _ : state) benchmark::DoNotOptimize(replay_loss(frames, p));
}
BENCHMARK(BM_ReplayLoss)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
