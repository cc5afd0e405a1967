#pragma once

// HTTP/JSON front end over SessionManager.
//
//   POST /sessions                          create (admin token if configured)
//   GET  /sessions/{id}/state               role-scoped projection
//   POST /sessions/{id}/opinions            {"text"}
//   POST /sessions/{id}/critiques           {"text", "target"?}
//   POST /sessions/{id}/rankings            {"order": [[ids], ...] | [ids]}
//   POST /sessions/{id}/final-preference    {"choice": "initial" | "revised"}
//   POST /sessions/{id}/advance             facilitator
//   GET  /sessions/{id}/events              text/event-stream
//   GET  /sessions/{id}/analytics
//   POST /hierarchies                       {"spec", "population"}
//   GET  /hierarchies/{id}
//
// Tokens go in "Authorization: Bearer <token>" (or ?token= for the event
// stream). Mutations accept a "request_id" field; repeating it returns the
// original result.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "concord/mediator/backend.hpp"
#include "concord/service/manager.hpp"

namespace httplib {
class Server;
}

namespace concord::service {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path data_dir = "concord-data";
  mediator::MediatorBackendConfig backend;
  std::optional<std::string> admin_token;
  bool logical_clock = false;

  // CONCORD_BIND (host:port), CONCORD_DATA_DIR, CONCORD_BACKEND_ENDPOINT,
  // CONCORD_BACKEND_TOKEN_ENV, CONCORD_ADMIN_TOKEN.
  static ServiceConfig from_env();
};

// Maps library errors onto HTTP statuses.
int http_status(const Error& error);

class Server {
 public:
  explicit Server(SessionManager& manager);
  ~Server();

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Returns the bound port (an ephemeral one when port is 0), or -1.
  int bind(const std::string& host, int port);
  // Blocks until stop().
  bool listen();
  void stop();
  bool wait_until_ready() const;

 private:
  void routes();

  SessionManager& manager_;
  std::unique_ptr<httplib::Server> http_;
};

}  // namespace concord::service
