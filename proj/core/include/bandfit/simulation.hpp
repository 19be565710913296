#pragma once

// Single-band convergence study: a noise-free or probit-noisy simulated
// listener with a random utility vector answers a full comparison schedule,
// and the final posterior mode is compared against the true argmax.

#include <cstdint>
#include <vector>

#include "bandfit/orchestrator.hpp"

namespace bandfit::sim {

struct SingleBandOptions {
  int n_levels = 8;
  int episodes = 7;
  int per_episode = 4;
  // Probit noise on the utility difference; 0 answers deterministically.
  double noise_sigma = 0.0;
  orch::TrainerOptions trainer;
};

struct SingleBandRun {
  std::uint64_t seed = 0;
  std::vector<double> true_utility;  // uniform on [0, 1)
  std::vector<double> estimate;      // final posterior mode
  int true_best = 0;
  int estimated_best = 0;
  double lambda = 0.0;
  double sigma = 0.0;
  int same_responses = 0;
};

// One band, 1-based levels; a level map is generated for any n_levels.
BandConfig single_band_config(int n_levels);

SingleBandRun run_single_band(const SingleBandOptions& options, std::uint64_t seed);

struct SingleBandReport {
  std::vector<SingleBandRun> runs;
  int agreements = 0;
  double agreement_rate() const {
    return runs.empty() ? 0.0 : static_cast<double>(agreements) / runs.size();
  }
};

// Seed of run r in a study seeded with `seed`.
std::uint64_t study_run_seed(std::uint64_t seed, int run);

SingleBandReport run_single_band_study(const SingleBandOptions& options, int runs,
                                       std::uint64_t seed);

}  // namespace bandfit::sim
