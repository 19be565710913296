#pragma once

// Drives one independent preference learner per frequency band from a single
// stream of paired-comparison feedback.
//
// Each presentation pairs two gain sets that differ in every band: band b
// carries the level pair at the cursor of that band's own shuffled schedule.
// One response is credited to every band. After every `per_episode`
// responses the caller runs finish_episode(), which refits each band's
// posterior mode and hyperparameters on all comparisons seen so far.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bandfit/band_config.hpp"
#include "bandfit/errors.hpp"
#include "bandfit/preference_model.hpp"

namespace bandfit::orch {

// Ordered for presentation: `first` goes into gain set A, `second` into B.
struct LevelPair {
  int first = 1;
  int second = 2;

  bool operator==(const LevelPair&) const = default;
};

struct PairSchedule {
  std::vector<std::vector<LevelPair>> per_band;
  int episodes = 7;
  int per_episode = 4;

  int bands() const { return static_cast<int>(per_band.size()); }
  int total_pairs() const { return episodes * per_episode; }
};

// Independent seeded permutation of all n(n-1)/2 level pairs per band, each
// with a seeded A/B orientation. A band's permutation depends only on
// (seed, band index). Throws ConfigError unless
// episodes * per_episode == n(n-1)/2.
PairSchedule build_schedule(int n_levels, int episodes, int per_episode, int bands,
                            std::uint64_t seed);

enum class Choice { A, B, Same };

std::string_view to_string(Choice c);
// Accepts "A", "B", "Same" (also "1", "2", "0"). Throws DomainError otherwise.
Choice parse_choice(std::string_view s);

struct Presentation {
  int id = 0;
  GainSet a;
  GainSet b;
};

struct FeedbackRecord {
  int presentation_id = 0;
  std::vector<LevelPair> pairs;
  Choice choice = Choice::Same;
  std::int64_t timestamp_ms = 0;

  bool operator==(const FeedbackRecord&) const = default;
};

struct BandModel {
  pref::Vector f;
  pref::Hyperparams hp;
  pref::ComparisonSet data;
};

struct SessionState {
  std::vector<BandModel> bands;
  int cursor = 0;
  int episodes_finished = 0;
  std::vector<FeedbackRecord> log;
};

struct TrainerOptions {
  pref::HyperBounds bounds;
  pref::Hyperparams initial_hp{1.0, 1.0};
  pref::HyperFitOptions fit;
  pref::LaplaceOptions laplace;
  // Recompute the mode under the freshly fitted hyperparameters so the
  // stored (f, lambda, sigma) are mutually consistent.
  bool refit_mode_after_hyperparams = true;
};

struct FittingResult {
  GainSet personalized_levels;
  std::vector<double> personalized_gains_db;
};

// Raised by finish_episode when some bands failed to update. Bands not listed
// were updated normally.
class BandFitError : public NumericalError {
 public:
  BandFitError(const std::string& what, std::vector<int> failed_bands)
      : NumericalError(what), failed_bands_(std::move(failed_bands)) {}
  const std::vector<int>& failed_bands() const noexcept { return failed_bands_; }

 private:
  std::vector<int> failed_bands_;
};

class Orchestrator {
 public:
  Orchestrator(BandConfig config, PairSchedule schedule, TrainerOptions options = {});

  // Validates the config and builds the schedule from it.
  static Orchestrator create(const BandConfig& config, int episodes, int per_episode,
                             std::uint64_t seed, TrainerOptions options = {});

  const BandConfig& config() const { return config_; }
  const PairSchedule& schedule() const { return schedule_; }
  const SessionState& state() const { return state_; }
  const TrainerOptions& options() const { return options_; }

  bool schedule_exhausted() const { return state_.cursor >= schedule_.total_pairs(); }
  // True when the cursor has crossed an episode boundary not yet processed.
  bool episode_pending() const;
  // Every pair presented and every episode processed.
  bool complete() const;

  // Throws SessionComplete once the schedule is exhausted and StateError
  // while an episode update is pending.
  Presentation next_comparison() const;

  // Throws OrderingError unless id equals the cursor, StateError while an
  // episode update is pending. A and B credit every band with d = +1 / -1
  // respectively; Same is logged only.
  void record_feedback(int id, Choice choice, std::int64_t timestamp_ms = 0);

  // Throws StateError when no episode boundary is pending.
  void finish_episode();

  // Per band: best level of the final mode, gain = prescription + offset,
  // optionally clamped. Throws StateError before completion.
  FittingResult personalized_gains(std::span<const double> prescription_db,
                                   std::optional<std::span<const double>> floor_db = {},
                                   std::optional<std::span<const double>> ceiling_db = {}) const;

 private:
  BandConfig config_;
  PairSchedule schedule_;
  TrainerOptions options_;
  SessionState state_;
};

}  // namespace bandfit::orch
