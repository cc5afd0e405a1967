#include "concord/service/server.hpp"

#include <cstdlib>

#include <httplib.h>

#include "concord/ballots/io.hpp"
#include "concord/mediator/embedder.hpp"

namespace concord::service {

using nlohmann::json;

namespace {

std::optional<std::string> env(const char* name) {
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

json error_body(const Error& e) {
  json body{{"error", {{"code", to_string(e.code())}, {"message", e.what()}}}};
  if (const auto* p = dynamic_cast<const PhaseError*>(&e)) body["error"]["phase"] = p->phase();
  return body;
}

void send(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

json outcome_json(const SessionId& id, const protocol::CommandOutcome& o) {
  return json{{"session", id.str()}, {"phase", to_string(o.phase)}, {"sequence", o.sequence}};
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    auto doc = json::parse(req.body);
    if (!doc.is_object()) throw ValidationError("request body must be a JSON object");
    return doc;
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("malformed JSON body: ") + e.what());
  }
}

std::optional<std::string> request_id(const json& body) {
  if (!body.contains("request_id")) return std::nullopt;
  if (!body.at("request_id").is_string()) throw ValidationError("request_id must be a string");
  return body.at("request_id").get<std::string>();
}

std::string bearer(const httplib::Request& req) {
  const auto header = req.get_header_value("Authorization");
  constexpr std::string_view prefix = "Bearer ";
  if (header.rfind(prefix, 0) == 0) return header.substr(prefix.size());
  if (req.has_param("token")) return req.get_param_value("token");
  return "";
}

std::optional<std::string> optional_bearer(const httplib::Request& req) {
  auto token = bearer(req);
  if (token.empty()) return std::nullopt;
  return token;
}

std::string text_field(const json& body, const char* key) {
  if (!body.contains(key) || !body.at(key).is_string()) {
    throw ValidationError(std::string("field '") + key + "' must be a string");
  }
  return body.at(key).get<std::string>();
}

template <class F>
httplib::Server::Handler guarded(F handler) {
  return [handler](const httplib::Request& req, httplib::Response& res) {
    try {
      handler(req, res);
    } catch (const StalledError& e) {
      json body = error_body(e);
      body["error"]["stall"] = {{"phase", to_string(e.stall().phase)}, {"attempts", e.stall().attempts}};
      body["phase"] = to_string(e.outcome().phase);
      body["sequence"] = e.outcome().sequence;
      res.set_header("Retry-After", "5");
      send(res, 503, body);
    } catch (const Error& e) {
      if (http_status(e) == 503) res.set_header("Retry-After", "5");
      send(res, http_status(e), error_body(e));
    } catch (const json::exception& e) {
      send(res, 400, error_body(ValidationError(e.what())));
    } catch (const std::exception& e) {
      send(res, 500, json{{"error", {{"code", "internal"}, {"message", e.what()}}}});
    }
  };
}

}  // namespace

ServiceConfig ServiceConfig::from_env() {
  ServiceConfig c;
  if (auto bind = env("CONCORD_BIND")) {
    const auto colon = bind->rfind(':');
    if (colon == std::string::npos) throw ValidationError("CONCORD_BIND must be host:port");
    c.host = bind->substr(0, colon);
    try {
      c.port = std::stoi(bind->substr(colon + 1));
    } catch (const std::exception&) {
      throw ValidationError("CONCORD_BIND has a bad port");
    }
  }
  if (auto dir = env("CONCORD_DATA_DIR")) c.data_dir = *dir;
  if (auto endpoint = env("CONCORD_BACKEND_ENDPOINT")) {
    c.backend.kind = mediator::MediatorBackendConfig::Kind::remote;
    c.backend.remote.endpoint = *endpoint;
  }
  if (auto name = env("CONCORD_BACKEND_TOKEN_ENV")) c.backend.remote.token_env = *name;
  c.admin_token = env("CONCORD_ADMIN_TOKEN");
  return c;
}

int http_status(const Error& e) {
  switch (e.code()) {
    case ErrorCode::validation: return 400;
    case ErrorCode::authorization: return dynamic_cast<const ForbiddenError*>(&e) ? 403 : 401;
    case ErrorCode::phase:
    case ErrorCode::conflict: return 409;
    case ErrorCode::not_found: return 404;
    case ErrorCode::backend:
    case ErrorCode::protocol:
    case ErrorCode::generation_exhausted: return 503;
    case ErrorCode::corruption: return dynamic_cast<const QuarantinedError*>(&e) ? 410 : 500;
    case ErrorCode::analytics:
    case ErrorCode::undefined_influence: return 422;
  }
  return 500;
}

Server::Server(SessionManager& manager) : manager_(manager), http_(std::make_unique<httplib::Server>()) { routes(); }

Server::~Server() { stop(); }

int Server::bind(const std::string& host, int port) {
  if (port == 0) return http_->bind_to_any_port(host);
  return http_->bind_to_port(host, port) ? port : -1;
}

bool Server::listen() { return http_->listen_after_bind(); }

void Server::stop() {
  if (http_ && http_->is_running()) http_->stop();
}

bool Server::wait_until_ready() const {
  http_->wait_until_ready();
  return http_->is_running();
}

void Server::routes() {
  auto& m = manager_;
  auto session_id = [](const httplib::Request& req) { return SessionId(req.matches[1].str()); };

  http_->Post("/sessions", guarded([&m](const httplib::Request& req, httplib::Response& res) {
    m.check_admin(optional_bearer(req));
    json body = parse_body(req);
    auto rid = request_id(body);
    body.erase("request_id");
    auto created = m.create(protocol::session_config_from_json(body), rid);
    json tokens = json::object();
    for (const auto& [p, t] : created.participant_tokens) tokens[p.str()] = t;
    json out = outcome_json(created.id, created.outcome);
    out["facilitator_token"] = created.facilitator_token;
    out["participant_tokens"] = tokens;
    send(res, 201, out);
  }));

  http_->Get(R"(/sessions/([^/]+)/state)", guarded([&m, session_id](const httplib::Request& req, httplib::Response& res) {
    const auto id = session_id(req);
    send(res, 200, m.project(id, m.authenticate(id, bearer(req))));
  }));

  http_->Post(R"(/sessions/([^/]+)/opinions)",
              guarded([&m, session_id](const httplib::Request& req, httplib::Response& res) {
                const auto id = session_id(req);
                const auto caller = m.authenticate(id, bearer(req));
                const json body = parse_body(req);
                send(res, 200, outcome_json(id, m.submit_opinion(id, caller, text_field(body, "text"), request_id(body))));
              }));

  http_->Post(R"(/sessions/([^/]+)/critiques)",
              guarded([&m, session_id](const httplib::Request& req, httplib::Response& res) {
                const auto id = session_id(req);
                const auto caller = m.authenticate(id, bearer(req));
                const json body = parse_body(req);
                std::optional<CandidateId> target;
                if (body.contains("target")) target = CandidateId(text_field(body, "target"));
                send(res, 200,
                     outcome_json(id, m.submit_critique(id, caller, text_field(body, "text"), target, request_id(body))));
              }));

  http_->Post(R"(/sessions/([^/]+)/rankings)",
              guarded([&m, session_id](const httplib::Request& req, httplib::Response& res) {
                const auto id = session_id(req);
                const auto caller = m.authenticate(id, bearer(req));
                const json body = parse_body(req);
                if (!body.contains("order") || !body.at("order").is_array()) {
                  throw ValidationError("field 'order' must be an array");
                }
                json order = json::array();
                for (const auto& item : body.at("order")) order.push_back(item.is_string() ? json::array({item}) : item);
                auto ranking = ballots::ranking_from_json(json{{"order", order}});
                send(res, 200, outcome_json(id, m.submit_ranking(id, caller, std::move(ranking), request_id(body))));
              }));

  http_->Post(R"(/sessions/([^/]+)/final-preference)",
              guarded([&m, session_id](const httplib::Request& req, httplib::Response& res) {
                const auto id = session_id(req);
                const auto caller = m.authenticate(id, bearer(req));
                const json body = parse_body(req);
                const auto choice = protocol::final_choice_from_string(text_field(body, "choice"));
                send(res, 200, outcome_json(id, m.record_final_preference(id, caller, choice, request_id(body))));
              }));

  http_->Post(R"(/sessions/([^/]+)/advance)",
              guarded([&m, session_id](const httplib::Request& req, httplib::Response& res) {
                const auto id = session_id(req);
                const auto caller = m.authenticate(id, bearer(req));
                const json body = parse_body(req);
                send(res, 200, outcome_json(id, m.advance(id, caller, request_id(body))));
              }));

  http_->Get(R"(/sessions/([^/]+)/analytics)",
             guarded([&m, session_id](const httplib::Request& req, httplib::Response& res) {
               const auto id = session_id(req);
               send(res, 200, m.analytics(id, m.authenticate(id, bearer(req))));
             }));

  http_->Get(R"(/sessions/([^/]+)/events)", guarded([&m, session_id](const httplib::Request& req, httplib::Response& res) {
    const auto id = session_id(req);
    m.authenticate(id, bearer(req));
    uint64_t after = 0;
    const auto last = req.has_header("Last-Event-ID") ? req.get_header_value("Last-Event-ID")
                                                      : req.get_param_value("after");
    if (!last.empty()) {
      try {
        after = std::stoull(last);
      } catch (const std::exception&) {
        throw ValidationError("bad event cursor '" + last + "'");
      }
    }
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider("text/event-stream", [&m, id, after](size_t, httplib::DataSink& sink) mutable {
      if (!sink.is_writable()) return false;
      bool closed = false;
      auto notes = m.wait_notifications(id, after, std::chrono::milliseconds(250), closed);
      for (const auto& n : notes) {
        const json data{{"sequence", n.sequence}, {"kind", n.kind}, {"phase", n.phase}};
        const std::string frame =
            "id: " + std::to_string(n.sequence) + "\nevent: " + n.kind + "\ndata: " + data.dump() + "\n\n";
        if (!sink.write(frame.data(), frame.size())) return false;
        after = n.sequence;
      }
      if (closed) sink.done();
      return true;
    });
  }));

  http_->Post("/hierarchies", guarded([&m](const httplib::Request& req, httplib::Response& res) {
    m.check_admin(optional_bearer(req));
    const json body = parse_body(req);
    json spec_doc = body.at("spec");
    auto population = hierarchy::population_from_json(body.at("population"), spec_doc.value("seed", uint64_t{0}));
    auto& members = population.members;
    auto& agents = population.agents;
    if (!spec_doc.contains("total_participants")) spec_doc["total_participants"] = members.size();
    auto spec = hierarchy::hierarchy_spec_from_json(spec_doc);
    const auto id = m.start_hierarchy(spec, std::move(members), std::move(agents), request_id(body));
    send(res, 202, json{{"id", id}, {"status", "running"}});
  }));

  http_->Get(R"(/hierarchies/([^/]+))", guarded([&m](const httplib::Request& req, httplib::Response& res) {
    auto doc = m.hierarchy_status(req.matches[1].str());
    send(res, doc.value("status", "") == "running" ? 202 : 200, doc);
  }));
}

}  // namespace concord::service
