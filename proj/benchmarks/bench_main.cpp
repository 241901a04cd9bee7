#include <benchmark/benchmark.h>

#include <random>

#include "ktraj/density.hpp"
#include "ktraj/geometry.hpp"
#include "ktraj/nufft.hpp"
#include "ktraj/phantom.hpp"
#include "ktraj/projector.hpp"
#include "ktraj/sampling.hpp"

using namespace ktraj;

namespace {

std::vector<Point2> desk_points() {
  const auto b = constraint_bounds(HardwareLimits{}, ImagingGeometry(64, 0.23));
  return adc_interpolate(radial_init(8, 64, 0.9, &b), 5);
}

NufftBackend backend(int64_t i) { return i == 0 ? NufftBackend::direct : NufftBackend::gridding; }

void BM_NufftForward(benchmark::State& state) {
  const auto pts = desk_points();
  const NufftOperator op(64, pts, {.backend = backend(state.range(0))});
  const auto x = shepp_logan(64, 1);
  for (auto _ : state) benchmark::DoNotOptimize(op.forward(x));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(pts.size()));
}
BENCHMARK(BM_NufftForward)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

void BM_NufftAdjoint(benchmark::State& state) {
  const auto pts = desk_points();
  const NufftOperator op(64, pts, {.backend = backend(state.range(0))});
  const auto y = op.forward(shepp_logan(64, 1));
  for (auto _ : state) benchmark::DoNotOptimize(op.adjoint(y));
}
BENCHMARK(BM_NufftAdjoint)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

void BM_PositionVjp(benchmark::State& state) {
  const auto pts = desk_points();
  const NufftOperator op(64, pts);
  const auto x = shepp_logan(64, 1);
  const auto y = op.forward(x);
  for (auto _ : state) benchmark::DoNotOptimize(op.position_vjp_forward(x, y));
}
BENCHMARK(BM_PositionVjp)->Unit(benchmark::kMicrosecond);

void BM_DensityWeights(benchmark::State& state) {
  const auto pts = desk_points();
  for (auto _ : state) benchmark::DoNotOptimize(pipe_weights(pts, 64));
}
BENCHMARK(BM_DensityWeights)->Unit(benchmark::kMillisecond);

void BM_ProjectShot(benchmark::State& state) {
  const int ns = static_cast<int>(state.range(0));
  const auto b = constraint_bounds(HardwareLimits{}, ImagingGeometry(64, 0.23));
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Point2> shot(static_cast<std::size_t>(ns));
  for (auto& p : shot) p = {u(rng), u(rng)};
  for (auto _ : state) benchmark::DoNotOptimize(project_shot(shot, b));
}
BENCHMARK(BM_ProjectShot)->Arg(16)->Arg(64)->Arg(512)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
