#include "bandfit/session_service.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>

#include "bandfit/independence.hpp"
#include "bandfit/preference_model.hpp"
#include "bandfit/random.hpp"
#include "bandfit/wav.hpp"

namespace bandfit::service {
namespace {

using nlohmann::json;

enum SeedTag : std::uint32_t {
  kCorpusRotation = 0x636f7270,
  kSentence = 0x73656e74,
  kBabble = 0x6261626c,
  kNoiseOffset = 0x6e6f6973,
  kResponse = 0x75736572,
};

std::uint64_t derive_seed(std::uint64_t seed, SeedTag tag, std::uint64_t k) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(k),
                    static_cast<std::uint32_t>(k >> 32)};
  Rng rng(seq);
  return rng();
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j[key].is_null()) return fallback;
  try {
    return j[key].get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config field '") + key + "' has the wrong type");
  }
}

std::vector<double> to_vector(const json& j, const char* key) {
  if (!j.is_array()) throw ConfigError(std::string("config field '") + key + "' must be an array");
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number()) {
      throw ConfigError(std::string("config field '") + key + "' must hold numbers");
    }
    out.push_back(v.get<double>());
  }
  return out;
}

bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

std::string_view choice_name(orch::Choice c) { return orch::to_string(c); }

json pairs_json(const std::vector<orch::LevelPair>& pairs) {
  json out = json::array();
  for (const auto& p : pairs) out.push_back({p.first, p.second});
  return out;
}

json state_json(const std::string& id, const SessionConfig& config,
                const orch::Orchestrator& o) {
  const auto& st = o.state();
  const int total = o.schedule().total_pairs();
  json bands = json::array();
  for (std::size_t b = 0; b < st.bands.size(); ++b) {
    const auto& band = st.bands[b];
    json f = json::array();
    for (Eigen::Index i = 0; i < band.f.size(); ++i) f.push_back(band.f[i]);
    bands.push_back({{"band", b},
                     {"f", f},
                     {"lambda", band.hp.lambda},
                     {"sigma", band.hp.sigma},
                     {"comparisons", band.data.size()},
                     {"best_level", pref::best_level(band.f)}});
  }
  int a = 0, bcount = 0, same = 0;
  for (const auto& rec : st.log) {
    if (rec.choice == orch::Choice::A) ++a;
    else if (rec.choice == orch::Choice::B) ++bcount;
    else ++same;
  }
  return {{"id", id},
          {"status", o.complete() ? "complete" : "active"},
          {"cursor", st.cursor},
          {"total_pairs", total},
          {"episodes", o.schedule().episodes},
          {"per_episode", o.schedule().per_episode},
          {"episodes_finished", st.episodes_finished},
          {"progress", static_cast<double>(st.cursor) / total},
          {"n_levels", config.bands.n_levels},
          {"simulated", config.simulated.has_value()},
          {"responses", {{"A", a}, {"B", bcount}, {"Same", same}}},
          {"bands", bands}};
}

json result_json(const std::string& id, const SessionConfig& config,
                 const orch::Orchestrator& o) {
  std::optional<std::span<const double>> floor;
  std::optional<std::span<const double>> ceiling;
  if (config.floor_db) floor = std::span<const double>(*config.floor_db);
  if (config.ceiling_db) ceiling = std::span<const double>(*config.ceiling_db);
  const orch::FittingResult r = o.personalized_gains(config.prescription_db, floor, ceiling);
  std::vector<double> offsets;
  for (int level : r.personalized_levels.levels) offsets.push_back(config.bands.db(level));
  return {{"id", id},
          {"personalized_levels", r.personalized_levels.levels},
          {"personalized_gains_db", r.personalized_gains_db},
          {"prescription_db", config.prescription_db},
          {"offsets_db", offsets}};
}

// Records one response and runs the episode update at a boundary. Shared by
// live sessions and replay so both follow the same path.
FeedbackAck apply_feedback(orch::Orchestrator& o, int presentation_id, orch::Choice choice,
                           std::int64_t ts_ms) {
  o.record_feedback(presentation_id, choice, ts_ms);
  FeedbackAck ack;
  ack.presentation_id = presentation_id;
  if (o.episode_pending()) {
    ack.episode_completed = true;
    try {
      o.finish_episode();
    } catch (const orch::BandFitError& e) {
      ack.failed_bands = e.failed_bands();
    }
  }
  ack.status = o.complete() ? SessionStatus::Complete : SessionStatus::Active;
  return ack;
}

std::vector<std::filesystem::path> corpus_files(const std::string& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (ext == ".wav") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

dsp::AudioClip load_clip(const std::filesystem::path& path, int sample_rate_hz) {
  dsp::AudioClip clip;
  try {
    clip = wav::read(path);
  } catch (const FormatError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  if (clip.sample_rate_hz != sample_rate_hz) {
    throw ConfigError(path.string() + ": sample rate " + std::to_string(clip.sample_rate_hz) +
                      " Hz, session runs at " + std::to_string(sample_rate_hz) + " Hz");
  }
  if (dsp::rms(clip.samples) == 0.0) throw ConfigError(path.string() + ": silent audio");
  return clip;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

void SessionConfig::validate() const {
  bands.validate();
  const auto B = static_cast<std::size_t>(bands.bands());
  if (prescription_db.size() != B) {
    throw ConfigError("prescription has " + std::to_string(prescription_db.size()) +
                      " values for " + std::to_string(B) + " bands");
  }
  if (!all_finite(prescription_db)) throw ConfigError("prescription must be finite");
  if (floor_db && (floor_db->size() != B || !all_finite(*floor_db))) {
    throw ConfigError("floor_db must hold one finite value per band");
  }
  if (ceiling_db && (ceiling_db->size() != B || !all_finite(*ceiling_db))) {
    throw ConfigError("ceiling_db must hold one finite value per band");
  }
  if (floor_db && ceiling_db) {
    for (std::size_t b = 0; b < B; ++b) {
      if ((*floor_db)[b] > (*ceiling_db)[b]) throw ConfigError("floor above ceiling");
    }
  }
  const int pairs = bands.n_levels * (bands.n_levels - 1) / 2;
  if (episodes < 1 || per_episode < 1 || episodes * per_episode != pairs) {
    throw ConfigError("episodes x per_episode must equal " + std::to_string(pairs));
  }
  if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity()) {
    throw ConfigError("snr_db must be a number or +inf");
  }
  if (!(clip_seconds > 0.0 && clip_seconds <= 60.0)) {
    throw ConfigError("clip_seconds must be in (0, 60]");
  }
  if (sample_rate_hz <= 0) throw ConfigError("sample_rate_hz must be positive");
  for (double c : bands.centers_hz()) {
    if (c >= 0.5 * sample_rate_hz) throw ConfigError("band centres must lie below Nyquist");
  }
  if (!std::isfinite(presentation_level_dbfs) || presentation_level_dbfs > 0.0) {
    throw ConfigError("presentation_level_dbfs must be finite and <= 0");
  }
  if (!corpus_dir.empty()) {
    if (!std::filesystem::is_directory(corpus_dir)) {
      throw ConfigError("corpus directory not found: " + corpus_dir);
    }
    if (corpus_files(corpus_dir).empty()) {
      throw ConfigError("corpus directory has no .wav files: " + corpus_dir);
    }
  }
  if (!noise_file.empty() && !std::filesystem::is_regular_file(noise_file)) {
    throw ConfigError("noise file not found: " + noise_file);
  }
  if (simulated) {
    const auto& u = *simulated;
    if (u.truth == SimulatedUser::Truth::GainSet) {
      if (u.gain_set.levels.size() != B) throw ConfigError("truth gain set has wrong length");
      for (int l : u.gain_set.levels) {
        if (l < 1 || l > bands.n_levels) throw ConfigError("truth level out of range");
      }
    } else {
      if (u.utilities.size() != B) throw ConfigError("truth utilities need one row per band");
      for (const auto& row : u.utilities) {
        if (row.size() != static_cast<std::size_t>(bands.n_levels) || !all_finite(row)) {
          throw ConfigError("truth utilities need one finite value per level");
        }
      }
    }
    if (!(u.noise_sigma >= 0.0) || !std::isfinite(u.noise_sigma)) {
      throw ConfigError("noise_sigma must be finite and >= 0");
    }
  }
}

json to_json(const SessionConfig& c) {
  json j = {{"band_edges_hz", c.bands.band_edges_hz},
            {"n_levels", c.bands.n_levels},
            {"level_to_db", c.bands.level_to_db},
            {"prescription_db", c.prescription_db},
            {"episodes", c.episodes},
            {"per_episode", c.per_episode},
            {"seed", c.seed},
            {"corpus_dir", c.corpus_dir},
            {"noise_file", c.noise_file},
            {"clip_seconds", c.clip_seconds},
            {"sample_rate_hz", c.sample_rate_hz},
            {"presentation_level_dbfs", c.presentation_level_dbfs}};
  if (std::isinf(c.snr_db)) {
    j["snr_db"] = "inf";
  } else {
    j["snr_db"] = c.snr_db;
  }
  if (c.floor_db) j["floor_db"] = *c.floor_db;
  if (c.ceiling_db) j["ceiling_db"] = *c.ceiling_db;
  if (c.simulated) {
    const auto& u = *c.simulated;
    json s = {{"noise_sigma", u.noise_sigma}, {"seed", u.seed}};
    if (u.truth == SimulatedUser::Truth::GainSet) {
      s["truth_gain_set"] = u.gain_set.levels;
    } else {
      s["truth_utilities"] = u.utilities;
    }
    j["mode"] = "simulated";
    j["simulated"] = s;
  } else {
    j["mode"] = "human";
  }
  return j;
}

SessionConfig session_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("session config must be a JSON object");
  static const std::set<std::string> known{
      "band_edges_hz", "n_levels",     "level_to_db",    "prescription_db",
      "floor_db",      "ceiling_db",   "episodes",       "per_episode",
      "seed",          "corpus_dir",   "noise_file",     "snr_db",
      "clip_seconds",  "sample_rate_hz", "presentation_level_dbfs", "mode",
      "simulated"};
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw ConfigError("unknown config field '" + k + "'");
  }

  SessionConfig c;
  if (j.contains("band_edges_hz")) c.bands.band_edges_hz = to_vector(j["band_edges_hz"], "band_edges_hz");
  c.bands.n_levels = get_or(j, "n_levels", c.bands.n_levels);
  if (j.contains("level_to_db")) c.bands.level_to_db = to_vector(j["level_to_db"], "level_to_db");
  if (!j.contains("prescription_db")) throw ConfigError("prescription_db is required");
  c.prescription_db = to_vector(j["prescription_db"], "prescription_db");
  if (j.contains("floor_db") && !j["floor_db"].is_null()) c.floor_db = to_vector(j["floor_db"], "floor_db");
  if (j.contains("ceiling_db") && !j["ceiling_db"].is_null()) {
    c.ceiling_db = to_vector(j["ceiling_db"], "ceiling_db");
  }
  c.episodes = get_or(j, "episodes", c.episodes);
  c.per_episode = get_or(j, "per_episode", c.per_episode);
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
  c.corpus_dir = get_or<std::string>(j, "corpus_dir", c.corpus_dir);
  c.noise_file = get_or<std::string>(j, "noise_file", c.noise_file);
  if (j.contains("snr_db") && j["snr_db"].is_string()) {
    if (j["snr_db"] != "inf") throw ConfigError("snr_db must be a number or \"inf\"");
    c.snr_db = std::numeric_limits<double>::infinity();
  } else {
    c.snr_db = get_or(j, "snr_db", c.snr_db);
  }
  c.clip_seconds = get_or(j, "clip_seconds", c.clip_seconds);
  c.sample_rate_hz = get_or(j, "sample_rate_hz", c.sample_rate_hz);
  c.presentation_level_dbfs = get_or(j, "presentation_level_dbfs", c.presentation_level_dbfs);

  const std::string mode = get_or<std::string>(j, "mode", j.contains("simulated") ? "simulated" : "human");
  if (mode == "simulated") {
    if (!j.contains("simulated") || !j["simulated"].is_object()) {
      throw ConfigError("simulated mode needs a 'simulated' object");
    }
    const json& s = j["simulated"];
    SimulatedUser u;
    const bool has_set = s.contains("truth_gain_set");
    const bool has_util = s.contains("truth_utilities");
    if (has_set == has_util) {
      throw ConfigError("simulated mode needs exactly one of truth_gain_set, truth_utilities");
    }
    try {
      if (has_set) {
        u.truth = SimulatedUser::Truth::GainSet;
        u.gain_set.levels = s["truth_gain_set"].get<std::vector<int>>();
      } else {
        u.truth = SimulatedUser::Truth::Utilities;
        u.utilities = s["truth_utilities"].get<std::vector<std::vector<double>>>();
      }
    } catch (const json::exception&) {
      throw ConfigError("simulated truth has the wrong type");
    }
    u.noise_sigma = get_or(s, "noise_sigma", 0.0);
    u.seed = get_or<std::uint64_t>(s, "seed", c.seed);
    c.simulated = std::move(u);
  } else if (mode != "human") {
    throw ConfigError("mode must be 'human' or 'simulated'");
  }
  c.validate();
  return c;
}

orch::Choice simulated_choice(const SimulatedUser& user, const orch::Presentation& p) {
  if (user.truth == SimulatedUser::Truth::GainSet) {
    switch (rrt::oracle_prefer(p.a, p.b, user.gain_set)) {
      case rrt::Outcome::First:
        return orch::Choice::A;
      case rrt::Outcome::Second:
        return orch::Choice::B;
      case rrt::Outcome::Tie:
        return orch::Choice::Same;
    }
  }
  if (p.a.levels.size() != user.utilities.size() || p.b.levels.size() != user.utilities.size()) {
    throw DomainError("presentation does not match the simulated user's bands");
  }
  double diff = 0.0;
  for (std::size_t b = 0; b < user.utilities.size(); ++b) {
    const auto& row = user.utilities[b];
    diff += row.at(static_cast<std::size_t>(p.a.levels[b] - 1)) -
            row.at(static_cast<std::size_t>(p.b.levels[b] - 1));
  }
  if (diff == 0.0) return orch::Choice::Same;
  if (user.noise_sigma == 0.0) return diff > 0.0 ? orch::Choice::A : orch::Choice::B;
  Rng rng(derive_seed(user.seed, kResponse, static_cast<std::uint64_t>(p.id)));
  const double p_a = pref::normal_cdf(diff / (std::sqrt(2.0) * user.noise_sigma));
  return uniform01(rng) < p_a ? orch::Choice::A : orch::Choice::B;
}

std::string_view to_string(SessionStatus s) {
  return s == SessionStatus::Complete ? "complete" : "active";
}

// ---------------------------------------------------------------------------
// Sessions

struct SessionManager::Session {
  Session(std::string session_id, SessionConfig cfg, const orch::TrainerOptions& trainer,
          EventLog event_log)
      : id(std::move(session_id)),
        config(std::move(cfg)),
        orchestrator(orch::Orchestrator::create(config.bands, config.episodes,
                                                config.per_episode, config.seed, trainer)),
        log(std::move(event_log)) {}

  void load_media() {
    if (!config.corpus_dir.empty()) {
      for (const auto& f : corpus_files(config.corpus_dir)) {
        corpus.push_back(load_clip(f, config.sample_rate_hz));
      }
      rotation.resize(corpus.size());
      for (std::size_t i = 0; i < rotation.size(); ++i) rotation[i] = i;
      Rng rng(derive_seed(config.seed, kCorpusRotation, 0));
      shuffle(std::span<std::size_t>(rotation), rng);
    }
    if (!config.noise_file.empty()) {
      noise = load_clip(config.noise_file, config.sample_rate_hz);
    } else {
      noise = dsp::synthetic_babble(derive_seed(config.seed, kBabble, 0), 4.0,
                                    config.sample_rate_hz);
    }
  }

  FeedbackAck post(int presentation_id, orch::Choice choice, std::int64_t ts);

  RenderedPair render(const orch::Presentation& p) const {
    RenderedPair out;
    out.presentation_id = p.id;
    out.presentation = p;
    const auto k = static_cast<std::uint64_t>(p.id);
    dsp::AudioClip sentence;
    if (!corpus.empty()) {
      out.sentence = static_cast<int>(rotation[k % rotation.size()]);
      sentence = corpus[static_cast<std::size_t>(out.sentence)];
    } else {
      sentence = dsp::synthetic_speech(derive_seed(config.seed, kSentence, k),
                                       config.clip_seconds, config.sample_rate_hz);
    }
    const dsp::AudioClip clean = dsp::fit_length(sentence, config.clip_seconds);
    dsp::AudioClip mixed =
        dsp::mix_noise(clean, noise, config.snr_db, derive_seed(config.seed, kNoiseOffset, k));
    const double level = std::pow(10.0, config.presentation_level_dbfs / 20.0);
    const double scale = level / dsp::rms(mixed.samples);
    for (auto& v : mixed.samples) v *= scale;
    mixed.guard_gain = 1.0;
    out.wav_a = wav::encode(dsp::apply_gain_set(mixed, p.a, config.prescription_db, config.bands));
    out.wav_b = wav::encode(dsp::apply_gain_set(mixed, p.b, config.prescription_db, config.bands));
    return out;
  }

  const std::string id;
  const SessionConfig config;
  orch::Orchestrator orchestrator;
  EventLog log;
  std::mutex mutex;
  std::vector<dsp::AudioClip> corpus;
  std::vector<std::size_t> rotation;
  dsp::AudioClip noise;
  std::optional<RenderedPair> cached;
};

FeedbackAck SessionManager::Session::post(int presentation_id, orch::Choice choice,
                                          std::int64_t ts) {
  orch::Orchestrator& o = orchestrator;
  if (o.schedule_exhausted()) throw SessionComplete("session is complete");
  if (presentation_id != o.state().cursor) {
    throw OrderingError("feedback for presentation " + std::to_string(presentation_id) +
                        " but current presentation is " + std::to_string(o.state().cursor));
  }
  std::vector<orch::LevelPair> pairs;
  for (const auto& band : o.schedule().per_band) {
    pairs.push_back(band[static_cast<std::size_t>(presentation_id)]);
  }
  log.append("feedback", ts,
               {{"presentation_id", presentation_id},
                {"choice", choice_name(choice)},
                {"pairs", pairs_json(pairs)}});
  FeedbackAck ack = apply_feedback(o, presentation_id, choice, ts);
  cached.reset();
  if (ack.episode_completed) {
    json hp = json::array();
    for (const auto& band : o.state().bands) hp.push_back({band.hp.lambda, band.hp.sigma});
    log.append("episode_finished", ts,
                 {{"episode", o.state().episodes_finished},
                  {"failed_bands", ack.failed_bands},
                  {"hyperparams", hp}});
  }
  return ack;
}

namespace {

struct Replayed {
  std::string id;
  SessionConfig config;
  std::vector<json> feedback;
};

Replayed parse_log(const std::vector<json>& events) {
  if (events.empty() || events[0]["type"] != "session_created") {
    throw FormatError("event log must start with session_created");
  }
  Replayed r;
  try {
    r.id = events[0].at("session_id").get<std::string>();
    r.config = session_config_from_json(events[0].at("config"));
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad session_created event: ") + e.what());
  }
  for (std::size_t i = 1; i < events.size(); ++i) {
    if (events[i]["type"] == "feedback") r.feedback.push_back(events[i]);
  }
  return r;
}

void replay_feedback(orch::Orchestrator& o, const std::vector<json>& feedback) {
  for (const auto& ev : feedback) {
    try {
      apply_feedback(o, ev.at("presentation_id").get<int>(),
                     orch::parse_choice(ev.at("choice").get<std::string>()),
                     ev.at("ts_ms").get<std::int64_t>());
    } catch (const json::exception& e) {
      throw FormatError(std::string("bad feedback event: ") + e.what());
    }
  }
}

}  // namespace

SessionManager::SessionManager(ServiceOptions options) : options_(std::move(options)) {
  if (options_.data_dir.empty()) return;
  std::filesystem::create_directories(options_.data_dir);
  std::vector<std::filesystem::path> logs;
  for (const auto& entry : std::filesystem::directory_iterator(options_.data_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") {
      logs.push_back(entry.path());
    }
  }
  std::sort(logs.begin(), logs.end());
  for (const auto& path : logs) {
    EventLog log(path);
    Replayed r = parse_log(log.events());
    auto s = std::make_shared<Session>(r.id, r.config, options_.trainer, std::move(log));
    s->load_media();
    replay_feedback(s->orchestrator, r.feedback);
    unsigned long long n = 0;
    if (std::sscanf(r.id.c_str(), "session-%llu", &n) == 1) {
      next_id_ = std::max<std::uint64_t>(next_id_, n + 1);
    }
    sessions_.emplace(r.id, std::move(s));
  }
}

SessionManager::~SessionManager() = default;

std::int64_t SessionManager::now() const {
  if (options_.clock) return options_.clock();
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::shared_ptr<SessionManager::Session> SessionManager::find(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw SessionNotFound("no session '" + id + "'");
  return it->second;
}

std::string SessionManager::create_session(const SessionConfig& config) {
  config.validate();
  std::string id;
  {
    std::lock_guard lock(mutex_);
    char buf[32];
    std::snprintf(buf, sizeof buf, "session-%06llu",
                  static_cast<unsigned long long>(next_id_++));
    id = buf;
  }
  EventLog log = options_.data_dir.empty() ? EventLog()
                                           : EventLog(options_.data_dir / (id + ".jsonl"));
  auto s = std::make_shared<Session>(id, config, options_.trainer, std::move(log));
  s->load_media();
  s->log.append("session_created", now(), {{"session_id", id}, {"config", to_json(config)}});
  std::lock_guard lock(mutex_);
  sessions_.emplace(id, std::move(s));
  return id;
}

std::vector<std::string> SessionManager::session_ids() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> ids;
  for (const auto& [id, s] : sessions_) ids.push_back(id);
  return ids;
}

RenderedPair SessionManager::next_pair(const std::string& id) {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  const orch::Presentation p = s->orchestrator.next_comparison();
  if (!s->cached || s->cached->presentation_id != p.id) s->cached = s->render(p);
  return *s->cached;
}

std::vector<std::uint8_t> SessionManager::audio(const std::string& id, int presentation_id,
                                                char side) {
  if (side != 'a' && side != 'b') throw DomainError("audio side must be 'a' or 'b'");
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  const orch::Presentation p = s->orchestrator.next_comparison();
  if (p.id != presentation_id) {
    throw SessionNotFound("presentation " + std::to_string(presentation_id) +
                          " is not current");
  }
  if (!s->cached || s->cached->presentation_id != p.id) s->cached = s->render(p);
  return side == 'a' ? s->cached->wav_a : s->cached->wav_b;
}


FeedbackAck SessionManager::post_feedback(const std::string& id, int presentation_id,
                                          orch::Choice choice) {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  return s->post(presentation_id, choice, now());
}

SimulatedStep SessionManager::simulated_user_step(const std::string& id) {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  if (!s->config.simulated) throw StateError("session is not in simulated mode");
  const orch::Presentation p = s->orchestrator.next_comparison();
  SimulatedStep step;
  step.choice = simulated_choice(*s->config.simulated, p);
  step.ack = s->post(p.id, step.choice, now());
  return step;
}

json SessionManager::state(const std::string& id) const {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  return state_json(s->id, s->config, s->orchestrator);
}

json SessionManager::result(const std::string& id) const {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  if (!s->orchestrator.complete()) throw StateError("session is still active");
  return result_json(s->id, s->config, s->orchestrator);
}

std::string SessionManager::events_jsonl(const std::string& id) const {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  return s->log.to_jsonl();
}

SessionStatus SessionManager::status(const std::string& id) const {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  return s->orchestrator.complete() ? SessionStatus::Complete : SessionStatus::Active;
}

json SessionManager::replay_state(const std::string& jsonl,
                                  const orch::TrainerOptions& trainer) {
  const Replayed r = parse_log(EventLog::parse(jsonl));
  orch::Orchestrator o = orch::Orchestrator::create(r.config.bands, r.config.episodes,
                                                    r.config.per_episode, r.config.seed, trainer);
  replay_feedback(o, r.feedback);
  return state_json(r.id, r.config, o);
}

json SessionManager::replay_result(const std::string& jsonl,
                                   const orch::TrainerOptions& trainer) {
  const Replayed r = parse_log(EventLog::parse(jsonl));
  orch::Orchestrator o = orch::Orchestrator::create(r.config.bands, r.config.episodes,
                                                    r.config.per_episode, r.config.seed, trainer);
  replay_feedback(o, r.feedback);
  if (!o.complete()) throw StateError("logged session is not complete");
  return result_json(r.id, r.config, o);
}

}  // namespace bandfit::service
