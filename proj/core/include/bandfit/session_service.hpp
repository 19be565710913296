#pragma once

// Fitting sessions as a service: lifecycle, stimulus rendering, feedback
// intake, state and results. Each session is event-sourced into a JSON-lines
// log (see event_log.hpp) and can be rebuilt from it after a restart.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bandfit/band_config.hpp"
#include "bandfit/dsp.hpp"
#include "bandfit/errors.hpp"
#include "bandfit/event_log.hpp"
#include "bandfit/orchestrator.hpp"

namespace bandfit::service {

class SessionNotFound : public Error {
 public:
  using Error::Error;
};

struct SimulatedUser {
  enum class Truth { GainSet, Utilities };
  Truth truth = Truth::GainSet;
  GainSet gain_set;                            // Truth::GainSet
  std::vector<std::vector<double>> utilities;  // Truth::Utilities, [band][level - 1]
  // Probit response noise on the summed utility difference (Utilities only).
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
};

struct SessionConfig {
  BandConfig bands;
  std::vector<double> prescription_db;
  std::optional<std::vector<double>> floor_db;
  std::optional<std::vector<double>> ceiling_db;
  int episodes = 7;
  int per_episode = 4;
  std::uint64_t seed = 0;
  // Directory of mono PCM16 WAV sentences; empty selects synthetic speech.
  std::string corpus_dir;
  // PCM16 WAV babble; empty selects synthetic babble.
  std::string noise_file;
  double snr_db = 5.0;
  double clip_seconds = 2.5;
  int sample_rate_hz = dsp::kDefaultSampleRate;
  // RMS of the speech-plus-noise mixture before amplification.
  double presentation_level_dbfs = -40.0;
  std::optional<SimulatedUser> simulated;

  // Throws ConfigError.
  void validate() const;
};

nlohmann::json to_json(const SessionConfig& config);
// Missing keys take their defaults. Throws ConfigError on bad types or values.
SessionConfig session_config_from_json(const nlohmann::json& j);

// Noise-free unless noise_sigma > 0; ties give Same. Deterministic in
// (user.seed, presentation id).
orch::Choice simulated_choice(const SimulatedUser& user, const orch::Presentation& p);

enum class SessionStatus { Active, Complete };

struct RenderedPair {
  int presentation_id = 0;
  orch::Presentation presentation;
  int sentence = -1;  // corpus index, -1 for synthetic speech
  std::vector<std::uint8_t> wav_a;
  std::vector<std::uint8_t> wav_b;
};

struct FeedbackAck {
  int presentation_id = 0;
  bool episode_completed = false;
  std::vector<int> failed_bands;
  SessionStatus status = SessionStatus::Active;
};

struct SimulatedStep {
  orch::Choice choice = orch::Choice::Same;
  FeedbackAck ack;
};

struct ServiceOptions {
  // Session logs live here as <id>.jsonl; empty keeps everything in memory.
  std::filesystem::path data_dir;
  std::function<std::int64_t()> clock;  // ms; defaults to the system clock
  orch::TrainerOptions trainer;
};

class SessionManager {
 public:
  // Loads and replays every log found in data_dir.
  explicit SessionManager(ServiceOptions options = {});
  ~SessionManager();
  SessionManager(const SessionManager&) = delete;
  SessionManager& operator=(const SessionManager&) = delete;

  std::string create_session(const SessionConfig& config);
  std::vector<std::string> session_ids() const;

  // Idempotent until feedback for the presentation arrives. Throws
  // SessionComplete when no pairs remain.
  RenderedPair next_pair(const std::string& id);
  // Audio of the current presentation; side is 'a' or 'b'.
  std::vector<std::uint8_t> audio(const std::string& id, int presentation_id, char side);

  // OrderingError for anything but the current presentation, SessionComplete
  // once finished. The event is on disk before this returns.
  FeedbackAck post_feedback(const std::string& id, int presentation_id, orch::Choice choice);

  // Simulated sessions only (StateError otherwise): answer and post.
  SimulatedStep simulated_user_step(const std::string& id);

  nlohmann::json state(const std::string& id) const;
  // Throws StateError while the session is active.
  nlohmann::json result(const std::string& id) const;
  std::string events_jsonl(const std::string& id) const;
  SessionStatus status(const std::string& id) const;

  // Rebuilds a session from its log without registering it.
  static nlohmann::json replay_state(const std::string& jsonl,
                                     const orch::TrainerOptions& trainer = {});
  static nlohmann::json replay_result(const std::string& jsonl,
                                      const orch::TrainerOptions& trainer = {});

 private:
  struct Session;
  std::shared_ptr<Session> find(const std::string& id) const;
  std::int64_t now() const;

  ServiceOptions options_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_id_ = 1;
};

std::string_view to_string(SessionStatus s);

}  // namespace bandfit::service
