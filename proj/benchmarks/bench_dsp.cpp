#include <vector>

#include <benchmark/benchmark.h>

#include "bandfit/dsp.hpp"

using namespace bandfit;

static void BM_DesignGainFilter(benchmark::State& state) {
  const BandConfig config;
  const std::vector<double> gains{10.0, 5.0, 21.0, 21.0, 22.0};
  for (auto _ : state) {
    benchmark::DoNotOptimize(dsp::design_gain_filter(gains, config, dsp::kDefaultSampleRate));
  }
}
BENCHMARK(BM_DesignGainFilter)->Unit(benchmark::kMicrosecond);

static void BM_ApplyGains(benchmark::State& state) {
  const BandConfig config;
  const std::vector<double> gains{10.0, 5.0, 21.0, 21.0, 22.0};
  const dsp::AudioClip clip = dsp::synthetic_speech(3, 3.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(dsp::apply_gains_db(clip, gains, config));
  }
}
BENCHMARK(BM_ApplyGains)->Unit(benchmark::kMillisecond);
