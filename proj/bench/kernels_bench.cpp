// Serial reference vs OpenMP kernel timings on a synthetic slot table.

#include <benchmark/benchmark.h>

#include "ridehail/ensemble.hpp"
#include "ridehail/gbdt.hpp"
#include "ridehail/relieff.hpp"
#include "ridehail/synthgen.hpp"

using namespace ridehail;

namespace {

const Dataset& table() {
  static const Dataset data = [] {
    const auto city = generate_requests(CityProfile::make_default(12), 7, 1);
    return aggregate_to_slots(city.requests, city.params, &city.conditions);
  }();
  return data;
}

Execution mode(const benchmark::State& state) {
  return state.range(0) == 0 ? Execution::Serial : Execution::Parallel;
}

void BM_Presort(benchmark::State& state) {
  const auto& d = table();
  for (auto _ : state) benchmark::DoNotOptimize(PresortedData(d, mode(state)));
}

void BM_TreeFit(benchmark::State& state) {
  const auto& d = table();
  for (auto _ : state) benchmark::DoNotOptimize(fit_tree(d, d.target(), TreeConfig{}, mode(state)));
}

void BM_TreePredict(benchmark::State& state) {
  const auto& d = table();
  const auto tree = fit_tree(d, d.target(), TreeConfig{});
  for (auto _ : state) benchmark::DoNotOptimize(tree.predict_all(d, mode(state)));
}

void BM_Bagging(benchmark::State& state) {
  const auto& d = table();
  EnsembleConfig cfg;
  cfg.n_trees = 8;
  for (auto _ : state) benchmark::DoNotOptimize(fit_bagged(d, d.target(), cfg, mode(state)));
}

void BM_ForestPredict(benchmark::State& state) {
  const auto& d = table();
  EnsembleConfig cfg;
  cfg.n_trees = 20;
  const auto rf = fit_random_forest(d, d.target(), cfg);
  for (auto _ : state) benchmark::DoNotOptimize(rf.predict_all(d, mode(state)));
}

void BM_Boosting(benchmark::State& state) {
  const auto& d = table();
  GBDTConfig cfg;
  cfg.iterations = 10;
  for (auto _ : state) benchmark::DoNotOptimize(fit_gbdt(d, d.target(), cfg, nullptr, mode(state)));
}

void BM_RReliefF(benchmark::State& state) {
  const auto& d = table();
  RReliefFConfig cfg;
  cfg.m = 500;
  for (auto _ : state) benchmark::DoNotOptimize(rrelieff_weights(d, cfg, mode(state)));
}

}  // namespace

// Argument 0 = serial reference, 1 = OpenMP.
BENCHMARK(BM_Presort)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TreeFit)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TreePredict)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Bagging)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ForestPredict)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Boosting)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RReliefF)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
