#include "bandfit/http_server.hpp"

#include <httplib.h>

namespace bandfit::service {
namespace {

using nlohmann::json;

void send_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const char* kind, const std::string& msg) {
  send_json(res, {{"error", kind}, {"message", msg}}, status);
}

// Maps library exceptions onto HTTP status codes.
template <typename F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const SessionNotFound& e) {
      send_error(res, 404, "not_found", e.what());
    } catch (const SessionComplete& e) {
      send_error(res, 409, "session_complete", e.what());
    } catch (const OrderingError& e) {
      send_error(res, 409, "ordering", e.what());
    } catch (const StateError& e) {
      send_error(res, 409, "state", e.what());
    } catch (const ConfigError& e) {
      send_error(res, 400, "config", e.what());
    } catch (const DomainError& e) {
      send_error(res, 400, "domain", e.what());
    } catch (const json::exception& e) {
      send_error(res, 400, "parse", e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "internal", e.what());
    }
  };
}

json parse_body(const httplib::Request& req) {
  json j = json::parse(req.body);
  if (!j.is_object()) throw DomainError("request body must be a JSON object");
  return j;
}

json ack_json(const FeedbackAck& ack) {
  return {{"presentation_id", ack.presentation_id},
          {"episode_completed", ack.episode_completed},
          {"failed_bands", ack.failed_bands},
          {"status", to_string(ack.status)}};
}

}  // namespace

struct HttpServer::Impl {
  explicit Impl(SessionManager& s) : sessions(s) { routes(); }

  void routes() {
    server.Get("/health", guarded([](const auto&, auto& res) {
      send_json(res, {{"status", "ok"}});
    }));

    server.Post("/sessions", guarded([this](const auto& req, auto& res) {
      const std::string id = sessions.create_session(session_config_from_json(parse_body(req)));
      send_json(res, {{"id", id}}, 201);
    }));

    server.Get("/sessions", guarded([this](const auto&, auto& res) {
      send_json(res, {{"sessions", sessions.session_ids()}});
    }));

    server.Get(R"(/sessions/([^/]+)/next-pair)", guarded([this](const auto& req, auto& res) {
      const std::string id = req.matches[1];
      const RenderedPair p = sessions.next_pair(id);
      const std::string base = "/sessions/" + id + "/audio/" + std::to_string(p.presentation_id);
      send_json(res, {{"presentation_id", p.presentation_id},
                      {"a", {{"levels", p.presentation.a.levels}, {"audio", base + "/a"}}},
                      {"b", {{"levels", p.presentation.b.levels}, {"audio", base + "/b"}}},
                      {"sentence", p.sentence}});
    }));

    server.Get(R"(/sessions/([^/]+)/audio/(\d+)/([ab]))",
               guarded([this](const auto& req, auto& res) {
                 const auto bytes = sessions.audio(req.matches[1], std::stoi(req.matches[2]),
                                                   req.matches[3].str()[0]);
                 res.set_content(reinterpret_cast<const char*>(bytes.data()), bytes.size(),
                                 "audio/wav");
               }));

    server.Post(R"(/sessions/([^/]+)/feedback)", guarded([this](const auto& req, auto& res) {
      const json body = parse_body(req);
      const int pid = body.at("presentation_id").template get<int>();
      const auto choice = orch::parse_choice(body.at("choice").template get<std::string>());
      send_json(res, ack_json(sessions.post_feedback(req.matches[1], pid, choice)));
    }));

    server.Post(R"(/sessions/([^/]+)/simulate-step)",
                guarded([this](const auto& req, auto& res) {
                  const SimulatedStep step = sessions.simulated_user_step(req.matches[1]);
                  json out = ack_json(step.ack);
                  out["choice"] = orch::to_string(step.choice);
                  send_json(res, out);
                }));

    server.Get(R"(/sessions/([^/]+)/state)", guarded([this](const auto& req, auto& res) {
      send_json(res, sessions.state(req.matches[1]));
    }));

    server.Get(R"(/sessions/([^/]+)/result)", guarded([this](const auto& req, auto& res) {
      send_json(res, sessions.result(req.matches[1]));
    }));

    server.Get(R"(/sessions/([^/]+)/events)", guarded([this](const auto& req, auto& res) {
      res.set_content(sessions.events_jsonl(req.matches[1]), "application/x-ndjson");
    }));
  }

  SessionManager& sessions;
  httplib::Server server;
};

HttpServer::HttpServer(SessionManager& sessions) : impl_(std::make_unique<Impl>(sessions)) {}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw Error("cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw Error("cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

void HttpServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace bandfit::service
