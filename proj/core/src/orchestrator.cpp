#include "bandfit/orchestrator.hpp"

#include <algorithm>
#include <string>

#include "bandfit/random.hpp"

namespace bandfit::orch {

PairSchedule build_schedule(int n_levels, int episodes, int per_episode, int bands,
                            std::uint64_t seed) {
  if (n_levels < 2 || episodes < 1 || per_episode < 1 || bands < 1) {
    throw ConfigError("schedule dimensions must be positive");
  }
  const int pairs = n_levels * (n_levels - 1) / 2;
  if (episodes * per_episode != pairs) {
    throw ConfigError(std::to_string(episodes) + " episodes x " +
                      std::to_string(per_episode) + " comparisons does not cover " +
                      std::to_string(pairs) + " level pairs");
  }

  PairSchedule schedule;
  schedule.episodes = episodes;
  schedule.per_episode = per_episode;
  schedule.per_band.reserve(static_cast<std::size_t>(bands));
  for (int b = 0; b < bands; ++b) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed),
                      static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(b), 0x62616e64u};
    Rng rng(seq);
    std::vector<LevelPair> list;
    list.reserve(static_cast<std::size_t>(pairs));
    for (int i = 1; i <= n_levels; ++i) {
      for (int j = i + 1; j <= n_levels; ++j) list.push_back({i, j});
    }
    shuffle(std::span<LevelPair>(list), rng);
    for (auto& p : list) {
      if (uniform_index(rng, 2) == 1) std::swap(p.first, p.second);
    }
    schedule.per_band.push_back(std::move(list));
  }
  return schedule;
}

std::string_view to_string(Choice c) {
  switch (c) {
    case Choice::A:
      return "A";
    case Choice::B:
      return "B";
    case Choice::Same:
      return "Same";
  }
  return "Same";
}

Choice parse_choice(std::string_view s) {
  if (s == "A" || s == "a" || s == "1") return Choice::A;
  if (s == "B" || s == "b" || s == "2") return Choice::B;
  if (s == "Same" || s == "same" || s == "0") return Choice::Same;
  throw DomainError("unknown choice '" + std::string(s) + "'");
}

Orchestrator::Orchestrator(BandConfig config, PairSchedule schedule,
                           TrainerOptions options)
    : config_(std::move(config)),
      schedule_(std::move(schedule)),
      options_(std::move(options)) {
  config_.validate();
  options_.bounds.validate();
  if (schedule_.bands() != config_.bands()) {
    throw ConfigError("schedule has " + std::to_string(schedule_.bands()) +
                      " bands, config has " + std::to_string(config_.bands()));
  }
  const int pairs = config_.n_levels * (config_.n_levels - 1) / 2;
  const auto n = static_cast<std::size_t>(config_.n_levels);
  for (const auto& band : schedule_.per_band) {
    if (static_cast<int>(band.size()) != schedule_.total_pairs() ||
        schedule_.total_pairs() != pairs) {
      throw ConfigError("schedule does not cover every level pair");
    }
    std::vector<bool> seen(n * n, false);
    for (const auto& p : band) {
      if (p.first < 1 || p.second < 1 || p.first > config_.n_levels ||
          p.second > config_.n_levels || p.first == p.second) {
        throw ConfigError("schedule contains an invalid level pair");
      }
      const auto lo = static_cast<std::size_t>(std::min(p.first, p.second) - 1);
      const auto hi = static_cast<std::size_t>(std::max(p.first, p.second) - 1);
      if (seen[lo * n + hi]) throw ConfigError("schedule repeats a level pair");
      seen[lo * n + hi] = true;
    }
  }
  if (!options_.bounds.contains(options_.initial_hp)) {
    throw ConfigError("initial hyperparameters outside bounds");
  }
  state_.bands.resize(static_cast<std::size_t>(config_.bands()));
  for (auto& band : state_.bands) {
    band.f = pref::Vector::Zero(config_.n_levels);
    band.hp = options_.initial_hp;
  }
}

Orchestrator Orchestrator::create(const BandConfig& config, int episodes,
                                  int per_episode, std::uint64_t seed,
                                  TrainerOptions options) {
  config.validate();
  return Orchestrator(config,
                      build_schedule(config.n_levels, episodes, per_episode,
                                     config.bands(), seed),
                      std::move(options));
}

bool Orchestrator::episode_pending() const {
  return state_.episodes_finished < state_.cursor / schedule_.per_episode;
}

bool Orchestrator::complete() const {
  return schedule_exhausted() && state_.episodes_finished == schedule_.episodes;
}

Presentation Orchestrator::next_comparison() const {
  if (schedule_exhausted()) throw SessionComplete("all comparisons have been presented");
  if (episode_pending()) throw StateError("episode update pending");
  Presentation p;
  p.id = state_.cursor;
  const auto bands = static_cast<std::size_t>(schedule_.bands());
  p.a.levels.resize(bands);
  p.b.levels.resize(bands);
  for (std::size_t b = 0; b < bands; ++b) {
    const auto& pair = schedule_.per_band[b][static_cast<std::size_t>(state_.cursor)];
    p.a.levels[b] = pair.first;
    p.b.levels[b] = pair.second;
  }
  return p;
}

void Orchestrator::record_feedback(int id, Choice choice, std::int64_t timestamp_ms) {
  if (schedule_exhausted()) throw SessionComplete("all comparisons have been presented");
  if (episode_pending()) throw StateError("episode update pending");
  if (id != state_.cursor) {
    throw OrderingError("feedback for presentation " + std::to_string(id) +
                        " but current presentation is " + std::to_string(state_.cursor));
  }
  FeedbackRecord rec;
  rec.presentation_id = id;
  rec.choice = choice;
  rec.timestamp_ms = timestamp_ms;
  rec.pairs.reserve(state_.bands.size());
  for (std::size_t b = 0; b < state_.bands.size(); ++b) {
    const auto& pair = schedule_.per_band[b][static_cast<std::size_t>(id)];
    rec.pairs.push_back(pair);
    if (choice == Choice::Same) continue;
    state_.bands[b].data.push_back(
        {pair.first, pair.second, choice == Choice::A ? 1 : -1});
  }
  state_.log.push_back(std::move(rec));
  ++state_.cursor;
}

void Orchestrator::finish_episode() {
  if (!episode_pending()) throw StateError("no completed episode to process");

  std::vector<int> failed;
  std::string messages;
  for (std::size_t b = 0; b < state_.bands.size(); ++b) {
    auto& band = state_.bands[b];
    try {
      const int n = config_.n_levels;
      pref::Vector f = pref::laplace_mode(pref::kernel_matrix(n, band.hp.lambda),
                                          band.data, band.hp.sigma, band.f,
                                          options_.laplace);
      const pref::Hyperparams hp = pref::fit_hyperparams(
          band.data, n, options_.bounds, band.hp, options_.fit);
      if (options_.refit_mode_after_hyperparams) {
        f = pref::laplace_mode(pref::kernel_matrix(n, hp.lambda), band.data, hp.sigma,
                               f, options_.laplace);
      }
      band.f = std::move(f);
      band.hp = hp;
    } catch (const bandfit::Error& e) {
      failed.push_back(static_cast<int>(b));
      messages += " band " + std::to_string(b) + ": " + e.what() + ";";
    }
  }
  ++state_.episodes_finished;
  if (!failed.empty()) {
    throw BandFitError("episode update failed for" + messages, std::move(failed));
  }
}

FittingResult Orchestrator::personalized_gains(
    std::span<const double> prescription_db,
    std::optional<std::span<const double>> floor_db,
    std::optional<std::span<const double>> ceiling_db) const {
  if (!complete()) throw StateError("training is not complete");
  const auto bands = state_.bands.size();
  if (prescription_db.size() != bands) throw DomainError("prescription length != bands");
  if (floor_db && floor_db->size() != bands) throw DomainError("floor length != bands");
  if (ceiling_db && ceiling_db->size() != bands) {
    throw DomainError("ceiling length != bands");
  }

  FittingResult out;
  out.personalized_levels.levels.reserve(bands);
  out.personalized_gains_db.reserve(bands);
  for (std::size_t b = 0; b < bands; ++b) {
    const int level = pref::best_level(state_.bands[b].f);
    double gain = prescription_db[b] + config_.db(level);
    if (floor_db) gain = std::max(gain, (*floor_db)[b]);
    if (ceiling_db) gain = std::min(gain, (*ceiling_db)[b]);
    out.personalized_levels.levels.push_back(level);
    out.personalized_gains_db.push_back(gain);
  }
  return out;
}

}  // namespace bandfit::orch
