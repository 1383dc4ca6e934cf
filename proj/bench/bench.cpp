// Serial reference kernels against the OpenMP ones.
#include <benchmark/benchmark.h>

#include "spdebridge/reference.hpp"

using namespace spdebridge;

namespace {

const SpectralModel& model(std::size_t J) {
  static const SpectralModel m =
      build_model(CovarianceSpec::white(), ObservationSpec::scaled_identity(1.0), 256, 1.0);
  static const SpectralModel small = m.truncated(64);
  return J == 256 ? m : small;
}

void BM_BridgeSerial(benchmark::State& state) {
  const TimeGrid g = TimeGrid::uniform(1.0, 65);
  const BridgeTarget t = BridgeTarget::zero(256);
  for (auto _ : state) benchmark::DoNotOptimize(reference::sample_bridge(model(256), t, g, state.range(0), 1));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_BridgeOpenMP(benchmark::State& state) {
  const TimeGrid g = TimeGrid::uniform(1.0, 65);
  const BridgeTarget t = BridgeTarget::zero(256);
  for (auto _ : state) benchmark::DoNotOptimize(sample_bridge(model(256), t, g, state.range(0), 1));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_FemBridgeSerial(benchmark::State& state) {
  const FemSystem sys = assemble(1.0 / 16);
  const TimeGrid g = TimeGrid::uniform(1.0, 17);
  const BridgeTarget t = BridgeTarget::zero(64);
  for (auto _ : state)
    benchmark::DoNotOptimize(reference::sample_bridge_fem(sys, model(64), t, 1.0, g, state.range(0), 1));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_FemBridgeOpenMP(benchmark::State& state) {
  const FemSystem sys = assemble(1.0 / 16);
  const TimeGrid g = TimeGrid::uniform(1.0, 17);
  const BridgeTarget t = BridgeTarget::zero(64);
  for (auto _ : state) benchmark::DoNotOptimize(sample_bridge_fem(sys, model(64), t, 1.0, g, state.range(0), 1));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_BridgeSerial)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BridgeOpenMP)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_FemBridgeSerial)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FemBridgeOpenMP)->Arg(256)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
