#include "bandfit/simulation.hpp"

#include <algorithm>
#include <cmath>

#include "bandfit/random.hpp"

namespace bandfit::sim {

BandConfig single_band_config(int n_levels) {
  if (n_levels < 2) throw ConfigError("need at least two levels");
  BandConfig c;
  c.band_edges_hz = {0.0, 8000.0};
  c.n_levels = n_levels;
  c.level_to_db.clear();
  for (int i = 0; i < n_levels; ++i) c.level_to_db.push_back(12.0 - 3.0 * i);
  return c;
}

SingleBandRun run_single_band(const SingleBandOptions& options, std::uint64_t seed) {
  if (!(options.noise_sigma >= 0.0) || !std::isfinite(options.noise_sigma)) {
    throw ConfigError("noise_sigma must be finite and >= 0");
  }
  Rng rng(seed);
  SingleBandRun run;
  run.seed = seed;
  for (int i = 0; i < options.n_levels; ++i) run.true_utility.push_back(uniform01(rng));
  run.true_best = static_cast<int>(std::max_element(run.true_utility.begin(),
                                                    run.true_utility.end()) -
                                   run.true_utility.begin()) + 1;

  orch::Orchestrator o =
      orch::Orchestrator::create(single_band_config(options.n_levels), options.episodes,
                                 options.per_episode, rng(), options.trainer);
  while (!o.complete()) {
    if (o.episode_pending()) {
      o.finish_episode();
      continue;
    }
    const orch::Presentation p = o.next_comparison();
    const double diff = run.true_utility[static_cast<std::size_t>(p.a.levels[0] - 1)] -
                        run.true_utility[static_cast<std::size_t>(p.b.levels[0] - 1)];
    orch::Choice c;
    if (diff == 0.0) {
      c = orch::Choice::Same;
    } else if (options.noise_sigma == 0.0) {
      c = diff > 0.0 ? orch::Choice::A : orch::Choice::B;
    } else {
      const double p_a = pref::normal_cdf(diff / (std::sqrt(2.0) * options.noise_sigma));
      c = uniform01(rng) < p_a ? orch::Choice::A : orch::Choice::B;
    }
    run.same_responses += c == orch::Choice::Same;
    o.record_feedback(p.id, c);
  }

  const orch::BandModel& band = o.state().bands[0];
  run.estimate.assign(band.f.data(), band.f.data() + band.f.size());
  run.estimated_best = pref::best_level(band.f);
  run.lambda = band.hp.lambda;
  run.sigma = band.hp.sigma;
  return run;
}

std::uint64_t study_run_seed(std::uint64_t seed, int run) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(run), 0x73696e67u};
  Rng mix(seq);
  return mix();
}

SingleBandReport run_single_band_study(const SingleBandOptions& options, int runs,
                                       std::uint64_t seed) {
  if (runs < 1) throw ConfigError("runs must be positive");
  SingleBandReport report;
  for (int r = 0; r < runs; ++r) {
    report.runs.push_back(run_single_band(options, study_run_seed(seed, r)));
    report.agreements += report.runs.back().estimated_best == report.runs.back().true_best;
  }
  return report;
}

}  // namespace bandfit::sim
