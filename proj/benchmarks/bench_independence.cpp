#include <benchmark/benchmark.h>

#include "bandfit/independence.hpp"

using namespace bandfit;

static void BM_RrtFull(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const GainSet truth{{3, 4, 5, 2, 3}};
  rrt::RrtOptions options;
  options.allow_over_budget = true;
  for (auto _ : state) {
    benchmark::DoNotOptimize(rrt::run_rrt(n, 5, truth, rrt::RrtMode::full(), options));
  }
  state.counters["pairs"] = static_cast<double>(rrt::full_pair_count(n, 5));
}
BENCHMARK(BM_RrtFull)->Arg(5)->Arg(8)->Unit(benchmark::kMillisecond);

static void BM_RrtSampled(benchmark::State& state) {
  const GainSet truth{{3, 4, 5, 2, 3}};
  const auto pairs = static_cast<std::uint64_t>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(rrt::run_rrt(8, 5, truth, rrt::RrtMode::sampled(pairs, 2024)));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RrtSampled)->Arg(1'000'000)->Arg(10'000'000)->Unit(benchmark::kMillisecond);
