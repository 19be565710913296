#pragma once

// JSON-over-HTTP front end for SessionManager.
//
//   GET  /health
//   POST /sessions                           body: session config  -> {"id": ...}
//   GET  /sessions                           -> {"sessions": [...]}
//   GET  /sessions/{id}/next-pair            -> presentation + audio URLs
//   GET  /sessions/{id}/audio/{pid}/{a|b}    -> audio/wav
//   POST /sessions/{id}/feedback             body: {"presentation_id", "choice"}
//   POST /sessions/{id}/simulate-step
//   GET  /sessions/{id}/state
//   GET  /sessions/{id}/result
//   GET  /sessions/{id}/events               -> application/x-ndjson
//
// Errors are {"error": <kind>, "message": <text>} with status 400 (bad input),
// 404 (unknown session or presentation), 409 (out of order, complete,
// or still active) or 500.

#include <memory>
#include <string>

#include "bandfit/session_service.hpp"

namespace bandfit::service {

class HttpServer {
 public:
  explicit HttpServer(SessionManager& sessions);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Port 0 picks a free port. Returns the bound port; throws Error on failure.
  int bind(const std::string& host, int port);
  // Blocks until stop().
  void listen();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace bandfit::service
