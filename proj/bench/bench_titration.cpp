#include <benchmark/benchmark.h>

#include <cmath>

#include "titration/scenario.hpp"

using namespace titration;

namespace {

std::vector<Avatar> population(std::size_t n) {
  PopulationTargets t;
  t.n = n;
  return generate_population(t, 42);
}

void BM_ScenarioParallel(benchmark::State& state) {
  const auto pop = population(static_cast<std::size_t>(state.range(0)));
  const auto spec = ScenarioSpec::preset("RHC-3", 8);
  for (auto _ : state) benchmark::DoNotOptimize(run_scenario(spec, pop, {}, 7));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_ScenarioSerial(benchmark::State& state) {
  const auto pop = population(static_cast<std::size_t>(state.range(0)));
  const auto spec = ScenarioSpec::preset("RHC-3", 8);
  for (auto _ : state) benchmark::DoNotOptimize(run_scenario_serial(spec, pop, {}, 7));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_MapEstimate(benchmark::State& state) {
  const auto drug = drugs::degludec();
  const Subject subject{90};
  ObservationLog log;
  const auto days = static_cast<int>(state.range(0));
  for (int d = 0; d < days; ++d) {
    const Minutes t = d * kMinutesPerDay + 420;
    log.add_reading(t, 95.0 + 85.0 * std::exp(-d / 60.0) + 8.0 * ((d * 7) % 5 - 2));
    log.add_dose({t, std::min(40.0, 2.0 + d)});
  }
  for (auto _ : state) benchmark::DoNotOptimize(map_estimate(log, {}, drug, subject));
}

void BM_RhcRecommend(benchmark::State& state) {
  const auto drug = drugs::degludec();
  const Subject subject{90};
  std::vector<DoseEvent> history;
  for (int d = 0; d < 60; ++d) history.push_back({d * kMinutesPerDay, 30.0});
  const TitrationConfig config;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        rhc_recommend({200, 4, 0.15}, {}, config, history, 30.0, 60 * kMinutesPerDay, drug, subject));
  }
}

}  // namespace

BENCHMARK(BM_ScenarioParallel)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ScenarioSerial)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MapEstimate)->Arg(30)->Arg(180)->Arg(364)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_RhcRecommend)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
