#include "bandfit/event_log.hpp"

#include <fstream>
#include <sstream>

#include "bandfit/errors.hpp"

namespace bandfit::service {

EventLog::EventLog(std::filesystem::path path) : path_(std::move(path)) {
  if (std::filesystem::exists(*path_)) events_ = read(*path_);
}

nlohmann::json EventLog::append(std::string type, std::int64_t ts_ms,
                                nlohmann::json fields) {
  nlohmann::json ev = nlohmann::json::object();
  ev["schema"] = kEventSchema;
  ev["version"] = kEventSchemaVersion;
  ev["seq"] = events_.size();
  ev["type"] = std::move(type);
  ev["ts_ms"] = ts_ms;
  for (auto& [k, v] : fields.items()) ev[k] = v;

  if (path_) {
    std::ofstream out(*path_, std::ios::app | std::ios::binary);
    if (!out) throw Error("cannot open event log " + path_->string());
    out << ev.dump() << '\n';
    out.flush();
    if (!out) throw Error("cannot write event log " + path_->string());
  }
  events_.push_back(ev);
  return ev;
}

std::string EventLog::to_jsonl() const {
  std::string out;
  for (const auto& ev : events_) {
    out += ev.dump();
    out += '\n';
  }
  return out;
}

std::vector<nlohmann::json> EventLog::parse(const std::string& jsonl) {
  std::vector<nlohmann::json> events;
  std::istringstream in(jsonl);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json ev;
    try {
      ev = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("event log line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!ev.is_object() || ev.value("schema", "") != kEventSchema) {
      throw FormatError("event log line " + std::to_string(lineno) + ": unknown schema");
    }
    if (ev.value("version", 0) != kEventSchemaVersion) {
      throw FormatError("event log line " + std::to_string(lineno) +
                        ": unsupported version");
    }
    if (!ev.contains("seq") || ev["seq"] != events.size() || !ev.contains("type")) {
      throw FormatError("event log line " + std::to_string(lineno) + ": bad sequence");
    }
    events.push_back(std::move(ev));
  }
  return events;
}

std::vector<nlohmann::json> EventLog::read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open event log " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

}  // namespace bandfit::service
