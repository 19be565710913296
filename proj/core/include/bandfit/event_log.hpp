#pragma once

// Append-only JSON-lines session log.
//
// Every line is one JSON object with at least
//   "schema": "bandfit.session-event", "version": 1,
//   "seq": <0-based line number>, "type": <event type>, "ts_ms": <int>.
// Event types:
//   session_created   "session_id", "config"
//   feedback          "presentation_id", "choice" (A|B|Same),
//                     "pairs" ([[level_a, level_b], ...] per band)
//   episode_finished  "episode", "failed_bands", "hyperparams" ([[lambda, sigma], ...])
// Replay needs only session_created and feedback; episode_finished is audit.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace bandfit::service {

inline constexpr const char* kEventSchema = "bandfit.session-event";
inline constexpr int kEventSchemaVersion = 1;

class EventLog {
 public:
  // In-memory only.
  EventLog() = default;
  // Appends to `path`, creating it if needed. Existing lines are loaded.
  explicit EventLog(std::filesystem::path path);

  // Stamps schema, version and seq, then writes and flushes one line.
  // Returns the stamped event.
  nlohmann::json append(std::string type, std::int64_t ts_ms, nlohmann::json fields);

  const std::vector<nlohmann::json>& events() const { return events_; }
  const std::optional<std::filesystem::path>& path() const { return path_; }

  // One compact JSON object per line, each terminated by '\n'.
  std::string to_jsonl() const;

  // Throws FormatError on malformed lines, unknown schema/version or a seq gap.
  static std::vector<nlohmann::json> parse(const std::string& jsonl);
  static std::vector<nlohmann::json> read(const std::filesystem::path& path);

 private:
  std::optional<std::filesystem::path> path_;
  std::vector<nlohmann::json> events_;
};

}  // namespace bandfit::service
