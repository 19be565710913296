#include <algorithm>
#include <random>

#include <benchmark/benchmark.h>

#include "bandfit/preference_model.hpp"

using namespace bandfit;
using namespace bandfit::pref;

namespace {

std::vector<Comparison> episode_data(int m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Comparison> all;
  for (int a = 1; a <= 8; ++a)
    for (int b = a + 1; b <= 8; ++b) all.push_back({a, b, (a - 4) * (a - 4) < (b - 4) * (b - 4) ? 1 : -1});
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(static_cast<std::size_t>(m));
  return all;
}

}  // namespace

static void BM_LaplaceMode(benchmark::State& state) {
  const auto data = episode_data(static_cast<int>(state.range(0)), 1);
  const Matrix K = kernel_matrix(8, 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(laplace_mode(K, data, 0.5, Vector::Zero(8)));
  }
}
BENCHMARK(BM_LaplaceMode)->Arg(4)->Arg(16)->Arg(28)->Unit(benchmark::kMicrosecond);

static void BM_FitHyperparams(benchmark::State& state) {
  const auto data = episode_data(static_cast<int>(state.range(0)), 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_hyperparams(data, 8, HyperBounds{}, Hyperparams{}));
  }
}
BENCHMARK(BM_FitHyperparams)->Arg(4)->Arg(16)->Arg(28)->Unit(benchmark::kMillisecond);
