#include "concord/service/manager.hpp"

#include <algorithm>
#include <random>

#include "concord/analytics/analytics.hpp"
#include "concord/ballots/io.hpp"
#include "concord/core/fs.hpp"

namespace concord::service {

using nlohmann::json;
using protocol::CommandOutcome;
using protocol::Phase;
using protocol::Session;
using protocol::SessionState;

struct SessionManager::Entry {
  SessionId id;
  protocol::SerialQueue queue;
  std::optional<Session> session;
  // State folded over the persisted prefix only; gives each notification
  // the phase right after its event.
  SessionState shadow;
  size_t persisted = 0;
  std::string facilitator_token;
  std::map<std::string, ParticipantId> participant_tokens;
  std::optional<std::string> broken;

  std::mutex notify_mu;
  std::condition_variable notify_cv;
  std::vector<Notification> notes;
  bool closed = false;
};

struct SessionManager::Job {
  std::thread worker;
  std::mutex mu;
  std::string status = "running";
  json document;
  hierarchy::HierarchySpec spec;
  std::vector<hierarchy::Member> population;
  std::vector<std::unique_ptr<protocol::ParticipantAgent>> agents;
};

namespace {

json statement_json(const mediator::Statement& s) {
  return json{{"id", s.id.str()}, {"text", s.text}, {"provenance", mediator::to_string(s.provenance)}};
}

std::string random_hex(size_t bytes) {
  static thread_local std::random_device device;
  static const char* digits = "0123456789abcdef";
  std::string out;
  for (size_t i = 0; i < bytes; ++i) {
    const auto b = device() & 0xffu;
    out += digits[b >> 4];
    out += digits[b & 0xf];
  }
  return out;
}

bool is_backend_failure(const Error& e) {
  return e.code() == ErrorCode::backend || e.code() == ErrorCode::protocol ||
         e.code() == ErrorCode::generation_exhausted;
}

void strip_leaf_text(json& node) {
  if (!node.is_object()) return;
  if (node.value("kind", "") == "opinion") node.erase("text");
  if (node.contains("children")) {
    for (auto& child : node["children"]) strip_leaf_text(child);
  }
}

}  // namespace

SessionManager::SessionManager(SessionStore& store, mediator::MediatorBackend& backend, ServiceOptions options)
    : store_(store), backend_(backend), options_(std::move(options)) {}

SessionManager::~SessionManager() { wait_hierarchies(); }

std::string SessionManager::new_token() const {
  return options_.token_source ? options_.token_source() : random_hex(16);
}

std::string SessionManager::new_id() const { return options_.id_source ? options_.id_source() : "s-" + random_hex(6); }

void SessionManager::check_admin(const std::optional<std::string>& token) const {
  if (!options_.admin_token) return;
  if (!token) throw Error(ErrorCode::authorization, "admin token required");
  if (*token != *options_.admin_token) throw ForbiddenError("admin token does not match");
}

RecoveryReport SessionManager::recover_all() {
  RecoveryReport report;
  for (const auto& id : store_.list()) load(id, report);
  return report;
}

void SessionManager::load(const SessionId& id, RecoveryReport& report) {
  auto entry = std::make_shared<Entry>();
  entry->id = id;
  try {
    auto stored = store_.load(id);
    if (stored.events.empty()) {
      // creation was interrupted before its first event; nobody holds a token
      store_.discard(id);
      report.discarded.push_back(id);
      return;
    }
    protocol::SessionOptions so{options_.clock, options_.generation};
    entry->session.emplace(Session::recover(stored.events, so));
    for (const auto& e : stored.events) {
      protocol::apply(entry->shadow, e);
      entry->notes.push_back({e.sequence, std::string(to_string(e.kind)), std::string(to_string(entry->shadow.phase))});
    }
    entry->persisted = stored.events.size();
    entry->facilitator_token = stored.meta.at("facilitator_token").get<std::string>();
    for (const auto& [p, token] : stored.meta.at("participant_tokens").items()) {
      entry->participant_tokens[token.get<std::string>()] = ParticipantId(p);
    }
    if (stored.meta.contains("request_id")) {
      std::lock_guard lock(mu_);
      created_by_request_[stored.meta.at("request_id").get<std::string>()] = id;
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::corruption && e.code() != ErrorCode::validation) throw;
    store_.quarantine(id, e.what());
    std::lock_guard lock(mu_);
    quarantined_[id] = e.what();
    report.quarantined.emplace_back(id, e.what());
    return;
  } catch (const json::exception& e) {
    store_.quarantine(id, std::string("meta.json: ") + e.what());
    std::lock_guard lock(mu_);
    quarantined_[id] = e.what();
    report.quarantined.emplace_back(id, e.what());
    return;
  }
  // Settled events, and backend work the crash interrupted.
  persist(*entry);
  drive_backend(*entry);
  persist(*entry);
  if (auto snap = store_.read_snapshot(id); !snap) {
    store_.write_snapshot(id, json{{"schema", kStateSchema},
                                   {"sequence", entry->session->state().sequence},
                                   {"state", protocol::to_json(entry->session->state())}});
  }
  {
    std::lock_guard lock(mu_);
    entries_[id] = entry;
  }
  report.recovered.push_back(id);
}

std::shared_ptr<SessionManager::Entry> SessionManager::find(const SessionId& id) const {
  std::lock_guard lock(mu_);
  if (auto q = quarantined_.find(id); q != quarantined_.end()) {
    throw QuarantinedError("session '" + id.str() + "' is quarantined: " + q->second);
  }
  auto it = entries_.find(id);
  if (it == entries_.end()) throw Error(ErrorCode::not_found, "no session '" + id.str() + "'");
  return it->second;
}

std::vector<SessionId> SessionManager::sessions() const {
  std::lock_guard lock(mu_);
  std::vector<SessionId> out;
  for (const auto& [id, e] : entries_) out.push_back(id);
  return out;
}

void SessionManager::persist(Entry& entry) {
  const auto& events = entry.session->events();
  if (entry.persisted == events.size()) return;
  std::span<const SessionEvent> fresh(events.data() + entry.persisted, events.size() - entry.persisted);
  try {
    store_.append(entry.id, fresh);
  } catch (...) {
    entry.broken = "storage failure while appending events";
    throw;
  }
  std::vector<Notification> notes;
  for (const auto& e : fresh) {
    protocol::apply(entry.shadow, e);
    notes.push_back({e.sequence, std::string(to_string(e.kind)), std::string(to_string(entry.shadow.phase))});
  }
  entry.persisted = events.size();
  try {
    store_.write_snapshot(entry.id, json{{"schema", kStateSchema},
                                         {"sequence", entry.shadow.sequence},
                                         {"state", protocol::to_json(entry.shadow)}});
  } catch (...) {
    // the log is already durable; a stale snapshot is rebuilt on load
    entry.broken = "storage failure while writing the snapshot";
    throw;
  }
  {
    std::lock_guard lock(entry.notify_mu);
    for (auto& n : notes) entry.notes.push_back(std::move(n));
    entry.closed = entry.shadow.phase == Phase::closed;
  }
  entry.notify_cv.notify_all();
}

void SessionManager::drive_backend(Entry& entry) {
  auto& session = *entry.session;
  while (session.needs_backend()) {
    try {
      session.step(backend_);
    } catch (const Error& e) {
      if (!is_backend_failure(e)) throw;
      return;
    }
  }
}

template <class F>
CommandOutcome SessionManager::mutate(const SessionId& id, F&& command) {
  auto entry = find(id);
  return entry->queue.run([&]() -> CommandOutcome {
    if (entry->broken) throw Error(ErrorCode::backend, "session storage unavailable: " + *entry->broken);
    auto& session = *entry->session;
    // Work a previous request left stalled goes first.
    drive_backend(*entry);
    CommandOutcome outcome;
    try {
      outcome = command(session);
    } catch (...) {
      persist(*entry);
      throw;
    }
    drive_backend(*entry);
    persist(*entry);
    if (session.stall()) throw StalledError(session.outcome(), *session.stall());
    return session.outcome().sequence > outcome.sequence ? session.outcome() : outcome;
  });
}

Created SessionManager::create(const protocol::SessionConfig& config, const std::optional<std::string>& request_id) {
  config.validate();
  if (request_id) {
    std::lock_guard lock(mu_);
    if (auto it = created_by_request_.find(*request_id); it != created_by_request_.end()) {
      auto entry = entries_.at(it->second);
      Created again{it->second, {}, entry->facilitator_token, {}};
      for (const auto& [token, p] : entry->participant_tokens) again.participant_tokens[p] = token;
      again.outcome = entry->queue.run([&] { return entry->session->outcome(); });
      return again;
    }
  }
  auto entry = std::make_shared<Entry>();
  entry->id = SessionId(new_id());
  entry->facilitator_token = new_token();
  json tokens = json::object();
  for (const auto& p : config.participants) {
    auto token = new_token();
    entry->participant_tokens[token] = p;
    tokens[p.str()] = token;
  }
  json meta{{"id", entry->id.str()}, {"facilitator_token", entry->facilitator_token}, {"participant_tokens", tokens}};
  if (request_id) meta["request_id"] = *request_id;
  store_.create(entry->id, meta);
  entry->session.emplace(Session::create(config, {options_.clock, options_.generation}, request_id));
  persist(*entry);
  {
    std::lock_guard lock(mu_);
    entries_[entry->id] = entry;
    if (request_id) created_by_request_[*request_id] = entry->id;
  }
  Created created{entry->id, entry->session->outcome(), entry->facilitator_token, {}};
  for (const auto& [token, p] : entry->participant_tokens) created.participant_tokens[p] = token;
  return created;
}

Caller SessionManager::authenticate(const SessionId& id, const std::string& token) const {
  auto entry = find(id);
  if (token.empty()) throw Error(ErrorCode::authorization, "missing token");
  if (token == entry->facilitator_token) return Caller{Role::facilitator, std::nullopt};
  if (auto it = entry->participant_tokens.find(token); it != entry->participant_tokens.end()) {
    return Caller{Role::participant, it->second};
  }
  throw Error(ErrorCode::authorization, "token is not valid for this session");
}

void SessionManager::require_participant(const Caller& caller) {
  if (caller.role != Role::participant || !caller.participant) {
    throw ForbiddenError("only participants can submit");
  }
}

void SessionManager::require_facilitator(const Caller& caller) {
  if (caller.role != Role::facilitator) throw ForbiddenError("facilitator token required");
}

CommandOutcome SessionManager::submit_opinion(const SessionId& id, const Caller& caller, const std::string& text,
                                              const std::optional<std::string>& request_id) {
  require_participant(caller);
  return mutate(id, [&](Session& s) { return s.submit_opinion(*caller.participant, text, request_id); });
}

CommandOutcome SessionManager::submit_critique(const SessionId& id, const Caller& caller, const std::string& text,
                                               const std::optional<CandidateId>& target,
                                               const std::optional<std::string>& request_id) {
  require_participant(caller);
  return mutate(id, [&](Session& s) {
    CandidateId t = target ? *target : CandidateId("");
    if (!target) {
      if (const auto* w = s.state().latest_winner()) t = w->id;
    }
    return s.submit_critique(*caller.participant, t, text, request_id);
  });
}

CommandOutcome SessionManager::submit_ranking(const SessionId& id, const Caller& caller, ballots::Ranking ranking,
                                              const std::optional<std::string>& request_id) {
  require_participant(caller);
  ranking.participant = *caller.participant;
  return mutate(id, [&](Session& s) { return s.submit_ranking(*caller.participant, ranking, request_id); });
}

CommandOutcome SessionManager::record_final_preference(const SessionId& id, const Caller& caller,
                                                       protocol::FinalChoice choice,
                                                       const std::optional<std::string>& request_id) {
  require_participant(caller);
  return mutate(id, [&](Session& s) { return s.record_final_preference(*caller.participant, choice, request_id); });
}

CommandOutcome SessionManager::advance(const SessionId& id, const Caller& caller,
                                       const std::optional<std::string>& request_id) {
  require_facilitator(caller);
  return mutate(id, [&](Session& s) {
    // mutate() already retried any stalled backend work; if it is still
    // pending, do not also skip the phase
    if (s.needs_backend()) return s.outcome();
    return s.advance(protocol::AdvanceReason::facilitator, request_id);
  });
}

json SessionManager::project(const SessionId& id, const Caller& caller) {
  auto entry = find(id);
  return entry->queue.run([&]() -> json {
    const auto& session = *entry->session;
    const auto& st = session.state();
    const auto& cfg = st.config;
    json participants = json::array();
    for (const auto& p : cfg.participants) participants.push_back(p.str());
    json doc{{"schema", kStateSchema},
             {"session", id.str()},
             {"phase", to_string(st.phase)},
             {"sequence", st.sequence},
             {"round", st.round},
             {"question", cfg.question},
             {"participants", participants},
             {"k", cfg.k},
             {"rounds", cfg.rounds},
             {"role", caller.role == Role::facilitator ? "facilitator" : "participant"}};
    const bool human = cfg.election.kind == protocol::ElectionMode::Kind::human_vote;
    json mode{{"kind", human ? "human_vote" : "simulated"}};
    if (human) mode["top_m"] = cfg.election.top_m;
    doc["election_mode"] = mode;

    const auto pending = st.pending();
    doc["progress"] = {{"expected", cfg.participants.size()}, {"pending", pending.size()}};
    if (caller.role == Role::facilitator) {
      json ids = json::array();
      for (const auto& p : pending) ids.push_back(p.str());
      doc["pending_participants"] = ids;
    }

    json published = json::array();
    for (const auto& e : st.elections) {
      json item{{"round", e.round}};
      if (e.slate_published()) {
        json slate = json::array();
        for (const auto& cid : e.slate) {
          auto it = std::find_if(e.candidates.begin(), e.candidates.end(),
                                 [&](const auto& c) { return c.id == cid; });
          if (it != e.candidates.end()) slate.push_back(statement_json(*it));
        }
        item["slate"] = slate;
      }
      item["winner"] = e.winner ? statement_json(*e.winner) : json(nullptr);
      if (e.winner || e.slate_published()) published.push_back(item);
    }
    doc["published"] = published;

    if (caller.participant) {
      const auto& me = *caller.participant;
      json own{{"participant", me.str()}};
      const auto* op = st.opinion_of(me);
      own["opinion"] = op ? json(op->text) : json(nullptr);
      json critiques = json::array();
      for (const auto& c : st.critiques) {
        if (c.author == me) critiques.push_back({{"round", c.round}, {"target", c.target.str()}, {"text", c.text}});
      }
      own["critiques"] = critiques;
      json rankings = json::array();
      for (const auto& e : st.elections) {
        for (const auto& r : e.human) {
          if (r.participant == me) rankings.push_back({{"round", e.round}, {"ranking", ballots::to_json(r)}});
        }
      }
      own["rankings"] = rankings;
      own["final_preference"] = nullptr;
      for (const auto& [p, choice] : st.final_preferences) {
        if (p == me) own["final_preference"] = to_string(choice);
      }
      doc["you"] = own;
      const bool owes = std::find(pending.begin(), pending.end(), me) != pending.end();
      std::string action;
      if (owes) {
        switch (st.phase) {
          case Phase::collecting_opinions: action = "opinion"; break;
          case Phase::collecting_critiques: action = "critique"; break;
          case Phase::final_preference: action = "final_preference"; break;
          default: action = st.awaiting_human_rankings() ? "ranking" : ""; break;
        }
      }
      doc["awaiting"] = action.empty() ? json(nullptr) : json(action);
    }

    if (const auto& stall = session.stall()) {
      doc["stall"] = {{"phase", to_string(stall->phase)}, {"message", stall->message}, {"attempts", stall->attempts}};
    } else {
      doc["stall"] = nullptr;
    }

    if (st.phase == Phase::closed) {
      json closed = json::object();
      if (const auto* f = st.final_statement()) closed["final_statement"] = statement_json(*f);
      if (st.tally) closed["tally"] = {{"initial", st.tally->initial}, {"revised", st.tally->revised}};
      json absences = json::array();
      for (const auto& a : st.absences) {
        json who = json::array();
        for (const auto& p : a.participants) who.push_back(p.str());
        absences.push_back({{"phase", to_string(a.phase)}, {"round", a.round}, {"participants", who}});
      }
      closed["absences"] = absences;
      doc["closed"] = closed;
      if (cfg.disclose_after_close) {
        json opinions = json::array();
        for (const auto& o : st.opinions) opinions.push_back(o.text);
        json critiques = json::array();
        for (const auto& c : st.critiques) critiques.push_back({{"round", c.round}, {"text", c.text}});
        doc["disclosed"] = {{"opinions", opinions}, {"critiques", critiques}};
      }
    }
    return doc;
  });
}

json SessionManager::analytics(const SessionId& id, const Caller& caller) {
  auto entry = find(id);
  return entry->queue.run([&]() -> json {
    const auto& st = entry->session->state();
    if (caller.role != Role::facilitator && st.phase != Phase::closed) {
      throw ForbiddenError("analytics are available to participants once the session is closed");
    }
    return analytics::session_analytics(st);
  });
}

std::vector<Notification> SessionManager::wait_notifications(const SessionId& id, uint64_t after,
                                                             std::chrono::milliseconds timeout, bool& closed) {
  auto entry = find(id);
  std::unique_lock lock(entry->notify_mu);
  auto ready = [&] { return (!entry->notes.empty() && entry->notes.back().sequence > after) || entry->closed; };
  entry->notify_cv.wait_for(lock, timeout, ready);
  std::vector<Notification> out;
  for (const auto& n : entry->notes) {
    if (n.sequence > after) out.push_back(n);
  }
  closed = entry->closed;
  return out;
}

std::vector<SessionEvent> SessionManager::events(const SessionId& id) {
  auto entry = find(id);
  return entry->queue.run([&] {
    const auto& all = entry->session->events();
    return std::vector<SessionEvent>(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(entry->persisted));
  });
}

std::string SessionManager::start_hierarchy(const hierarchy::HierarchySpec& spec,
                                            std::vector<hierarchy::Member> population,
                                            std::vector<std::unique_ptr<protocol::ParticipantAgent>> agents,
                                            const std::optional<std::string>& request_id) {
  spec.validate();
  if (population.size() != spec.total_participants) {
    throw ValidationError("population has " + std::to_string(population.size()) + " members, spec expects " +
                          std::to_string(spec.total_participants));
  }
  std::lock_guard lock(jobs_mu_);
  if (request_id) {
    if (auto it = jobs_by_request_.find(*request_id); it != jobs_by_request_.end()) return it->second;
  }
  const std::string id = "h-" + (options_.id_source ? options_.id_source() : random_hex(6));
  auto job = std::make_shared<Job>();
  job->spec = spec;
  job->population = std::move(population);
  job->agents = std::move(agents);
  jobs_[id] = job;
  if (request_id) jobs_by_request_[*request_id] = id;
  job->worker = std::thread([this, job, id] {
    json doc;
    std::string status;
    try {
      hierarchy::RunOptions run;
      run.parallelism = options_.hierarchy_parallelism;
      if (options_.hierarchy_dir) run.log_dir = *options_.hierarchy_dir / id / "logs";
      auto result = hierarchy::run_hierarchy(job->spec, job->population, backend_, run);
      doc = hierarchy::manifest(job->spec, result);
      if (!job->spec.session.disclose_after_close && doc.contains("provenance")) strip_leaf_text(doc["provenance"]);
      status = result.status == hierarchy::HierarchyResult::Status::complete ? "complete" : "aborted";
    } catch (const std::exception& e) {
      status = "failed";
      doc = json{{"error", e.what()}};
    }
    doc["id"] = id;
    doc["status"] = status;
    if (options_.hierarchy_dir) write_file_atomic(*options_.hierarchy_dir / id / "manifest.json", doc.dump(2) + "\n");
    std::lock_guard l(job->mu);
    job->status = status;
    job->document = std::move(doc);
  });
  return id;
}

json SessionManager::hierarchy_status(const std::string& id) {
  std::shared_ptr<Job> job;
  {
    std::lock_guard lock(jobs_mu_);
    if (auto it = jobs_.find(id); it != jobs_.end()) job = it->second;
  }
  if (!job) {
    if (options_.hierarchy_dir && id.find('/') == std::string::npos && id.find("..") == std::string::npos) {
      const auto path = *options_.hierarchy_dir / id / "manifest.json";
      if (std::filesystem::exists(path)) return json::parse(read_file(path));
    }
    throw Error(ErrorCode::not_found, "no hierarchy '" + id + "'");
  }
  std::lock_guard l(job->mu);
  if (job->status == "running") return json{{"id", id}, {"status", "running"}};
  return job->document;
}

void SessionManager::wait_hierarchies() {
  std::vector<std::shared_ptr<Job>> jobs;
  {
    std::lock_guard lock(jobs_mu_);
    for (auto& [id, job] : jobs_) jobs.push_back(job);
  }
  for (auto& job : jobs) {
    if (job->worker.joinable()) job->worker.join();
  }
}

}  // namespace concord::service
