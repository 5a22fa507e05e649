#include <benchmark/benchmark.h>

#include <random>

#include "slotbench/experiment.hpp"

namespace slotbench {
namespace {

void BM_Compose(benchmark::State& state) {
  Pose2 a{0.1, 0.2, 0.3};
  const Pose2 b{-0.01, 0.02, 0.001};
  for (auto _ : state) {
    a = compose(a, b);
    benchmark::DoNotOptimize(a);
  }
}
BENCHMARK(BM_Compose);

void BM_StepLowlevelFree(benchmark::State& state) {
  const PlateShape plate;
  const SimConfig sim;
  const WorldGeometry world = spawn_world(LayoutConfig{}, plate);
  BodyState s{{0.0, 0.5, 0.0}, {}};
  const Pose2 target{0.0, 0.45, 0.0};
  for (auto _ : state) {
    s = step_lowlevel(s, target, plate, world, sim).state;
    benchmark::DoNotOptimize(s);
  }
}
BENCHMARK(BM_StepLowlevelFree);

void BM_StepLowlevelContact(benchmark::State& state) {
  const PlateShape plate;
  const SimConfig sim;
  const WorldGeometry world = spawn_world(LayoutConfig{}, plate, 0);
  // Pressed onto the blocker top.
  const double z = world.blocker->max_z() + plate.half_height + plate.grasp_offset.z() - 5e-4;
  const BodyState s{{world.slot_centers_x[0], z, 0.0}, {}};
  const Pose2 target{world.slot_centers_x[0], z - 0.05, 0.0};
  for (auto _ : state) {
    StepOutput out = step_lowlevel(s, target, plate, world, sim);
    benchmark::DoNotOptimize(out);
  }
}
BENCHMARK(BM_StepLowlevelContact);

void BM_EnvStep(benchmark::State& state) {
  InsertionEnv env(EnvConfig{}, SimConfig{}, LayoutConfig{}, PlateShape{});
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uint64_t seed = 0;
  env.reset(seed);
  for (auto _ : state) {
    if (!env.episode_active()) env.reset(++seed);
    StepResult r = env.step({u(rng), u(rng), u(rng)});
    benchmark::DoNotOptimize(r);
  }
}
BENCHMARK(BM_EnvStep);

void BM_MlpForwardBackward(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  Mlp net(MlpSpec{120, {256, 256}, 1});
  std::mt19937_64 rng(2);
  net.initialize(rng);
  const Matrix x = Matrix::Random(120, batch);
  const Matrix g = Matrix::Ones(1, batch);
  std::vector<double> grad(net.spec().param_count(), 0.0);
  MlpCache cache;
  for (auto _ : state) {
    Matrix y = mlp_forward(net, x, &cache);
    Matrix dx = mlp_backward(net, cache, g, grad);
    benchmark::DoNotOptimize(y);
    benchmark::DoNotOptimize(dx);
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_MlpForwardBackward)->Arg(1)->Arg(256);

}  // namespace
}  // namespace slotbench

BENCHMARK_MAIN();
