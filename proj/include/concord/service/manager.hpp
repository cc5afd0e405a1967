#pragma once

// Live sessions behind the HTTP layer: token checks, per-session serialized
// mutation, persistence before acknowledgement, role-scoped projections and
// change notifications. Usable without a server, which is how the crash and
// transcript tests drive it.

#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "concord/core/error.hpp"
#include "concord/hierarchy/hierarchy.hpp"
#include "concord/protocol/serial_queue.hpp"
#include "concord/protocol/session.hpp"
#include "concord/service/store.hpp"

namespace concord::service {

inline constexpr std::string_view kStateSchema = "concord.state/v1";

// A token was presented but does not allow the action (HTTP 403). Plain
// Error(authorization) means no valid token at all (HTTP 401).
class ForbiddenError : public Error {
 public:
  explicit ForbiddenError(const std::string& message) : Error(ErrorCode::authorization, message) {}
};

// The session exists on disk but failed recovery and is not served.
class QuarantinedError : public Error {
 public:
  explicit QuarantinedError(const std::string& message) : Error(ErrorCode::corruption, message) {}
};

// The backend failed after the command's own events were stored. Retrying
// with the same request id is safe.
class StalledError : public Error {
 public:
  StalledError(protocol::CommandOutcome outcome, protocol::Stall stall)
      : Error(ErrorCode::backend, stall.message), outcome_(outcome), stall_(std::move(stall)) {}
  const protocol::CommandOutcome& outcome() const noexcept { return outcome_; }
  const protocol::Stall& stall() const noexcept { return stall_; }

 private:
  protocol::CommandOutcome outcome_;
  protocol::Stall stall_;
};

enum class Role { facilitator, participant };

struct Caller {
  Role role = Role::participant;
  std::optional<ParticipantId> participant;
};

struct ServiceOptions {
  // Null means logical time in event logs.
  std::shared_ptr<protocol::Clock> clock;
  mediator::GenerationOptions generation;
  // Overridable for reproducible tests; default is the OS random device.
  std::function<std::string()> token_source;
  std::function<std::string()> id_source;
  // When set, creating sessions and hierarchies requires it.
  std::optional<std::string> admin_token;
  // Where hierarchy runs keep their manifests and logs.
  std::optional<std::filesystem::path> hierarchy_dir;
  size_t hierarchy_parallelism = 0;
};

struct Created {
  SessionId id;
  protocol::CommandOutcome outcome;
  std::string facilitator_token;
  std::map<ParticipantId, std::string> participant_tokens;
};

struct Notification {
  uint64_t sequence = 0;
  std::string kind;
  std::string phase;
};

struct RecoveryReport {
  std::vector<SessionId> recovered;
  std::vector<std::pair<SessionId, std::string>> quarantined;
  std::vector<SessionId> discarded;
};

class SessionManager {
 public:
  SessionManager(SessionStore& store, mediator::MediatorBackend& backend, ServiceOptions options = {});
  ~SessionManager();

  SessionManager(const SessionManager&) = delete;
  SessionManager& operator=(const SessionManager&) = delete;

  // Loads every stored session: replays, settles, re-issues interrupted
  // backend work and persists the result. Corrupt sessions are quarantined.
  RecoveryReport recover_all();

  void check_admin(const std::optional<std::string>& token) const;

  Created create(const protocol::SessionConfig& config, const std::optional<std::string>& request_id = {});

  Caller authenticate(const SessionId& id, const std::string& token) const;

  protocol::CommandOutcome submit_opinion(const SessionId& id, const Caller& caller, const std::string& text,
                                          const std::optional<std::string>& request_id = {});
  // Target defaults to the latest published winner.
  protocol::CommandOutcome submit_critique(const SessionId& id, const Caller& caller, const std::string& text,
                                           const std::optional<CandidateId>& target = {},
                                           const std::optional<std::string>& request_id = {});
  protocol::CommandOutcome submit_ranking(const SessionId& id, const Caller& caller, ballots::Ranking ranking,
                                          const std::optional<std::string>& request_id = {});
  protocol::CommandOutcome record_final_preference(const SessionId& id, const Caller& caller,
                                                   protocol::FinalChoice choice,
                                                   const std::optional<std::string>& request_id = {});
  // Facilitator only: retries stalled backend work if there is any,
  // otherwise advances the waiting phase.
  protocol::CommandOutcome advance(const SessionId& id, const Caller& caller,
                                   const std::optional<std::string>& request_id = {});

  // What `caller` may see. Before Closed nobody sees another participant's
  // opinion or critique text; after Closed only if the config discloses.
  nlohmann::json project(const SessionId& id, const Caller& caller);

  // Facilitator any time, participants once Closed.
  nlohmann::json analytics(const SessionId& id, const Caller& caller);

  // Notifications with sequence > after; waits up to `timeout` for one.
  // `closed` is set once the session is Closed and everything was returned.
  std::vector<Notification> wait_notifications(const SessionId& id, uint64_t after,
                                               std::chrono::milliseconds timeout, bool& closed);

  // Full stored log, for tests and export.
  std::vector<SessionEvent> events(const SessionId& id);
  std::vector<SessionId> sessions() const;

  // Hierarchy jobs run on their own thread. Members without an agent only
  // contribute their opinion.
  std::string start_hierarchy(const hierarchy::HierarchySpec& spec, std::vector<hierarchy::Member> population,
                              std::vector<std::unique_ptr<protocol::ParticipantAgent>> agents,
                              const std::optional<std::string>& request_id = {});
  // {"status": running|complete|aborted|failed, ...manifest}
  nlohmann::json hierarchy_status(const std::string& id);
  void wait_hierarchies();

 private:
  struct Entry;
  struct Job;

  std::shared_ptr<Entry> find(const SessionId& id) const;
  template <class F>
  protocol::CommandOutcome mutate(const SessionId& id, F&& command);
  void persist(Entry& entry);
  void drive_backend(Entry& entry);
  void load(const SessionId& id, RecoveryReport& report);
  static void require_participant(const Caller& caller);
  static void require_facilitator(const Caller& caller);
  std::string new_token() const;
  std::string new_id() const;

  SessionStore& store_;
  mediator::MediatorBackend& backend_;
  ServiceOptions options_;

  mutable std::mutex mu_;
  std::map<SessionId, std::shared_ptr<Entry>> entries_;
  std::map<SessionId, std::string> quarantined_;
  std::map<std::string, SessionId> created_by_request_;

  std::mutex jobs_mu_;
  std::map<std::string, std::shared_ptr<Job>> jobs_;
  std::map<std::string, std::string> jobs_by_request_;
};

}  // namespace concord::service
