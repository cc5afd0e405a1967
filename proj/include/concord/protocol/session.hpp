#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "concord/mediator/backend.hpp"
#include "concord/mediator/generation.hpp"
#include "concord/protocol/state.hpp"

namespace concord::protocol {

enum class AdvanceReason { complete, deadline, facilitator };

std::string_view to_string(AdvanceReason reason);

struct SessionOptions {
  // Null means logical time.
  std::shared_ptr<Clock> clock;
  mediator::GenerationOptions generation;
};

// Set when backend work for the current phase failed; the phase is unchanged
// and the same call may be retried.
struct Stall {
  Phase phase = Phase::collecting_opinions;
  std::string message;
  int attempts = 0;
};

// Command side of one deliberation. Every command validates, appends its
// events, and then settles: automatic consequences (completion advances,
// elections over recorded rankings, closing) are appended too. Not
// thread-safe; callers serialize access per session.
class Session {
 public:
  static Session create(SessionConfig config, SessionOptions options = {},
                        const std::optional<std::string>& request_id = std::nullopt);

  // Rebuilds a session from its log and settles any automatic step a crash
  // interrupted.
  static Session recover(std::vector<SessionEvent> log, SessionOptions options = {});

  const SessionState& state() const noexcept { return state_; }
  const std::vector<SessionEvent>& events() const noexcept { return events_; }
  Phase phase() const noexcept { return state_.phase; }
  const std::optional<Stall>& stall() const noexcept { return stall_; }

  CommandOutcome submit_opinion(const ParticipantId& participant, const std::string& text,
                                const std::optional<std::string>& request_id = std::nullopt);
  CommandOutcome submit_critique(const ParticipantId& participant, const CandidateId& target,
                                 const std::string& text,
                                 const std::optional<std::string>& request_id = std::nullopt);
  // human_vote mode only; the ranking must order exactly the published slate.
  CommandOutcome submit_ranking(const ParticipantId& participant, ballots::Ranking ranking,
                                const std::optional<std::string>& request_id = std::nullopt);
  CommandOutcome record_final_preference(const ParticipantId& participant, FinalChoice choice,
                                         const std::optional<std::string>& request_id = std::nullopt);

  // Deadline or facilitator advance of a waiting phase. Proceeds with the
  // submissions present, of which there must be at least one.
  CommandOutcome advance(AdvanceReason reason,
                         const std::optional<std::string>& request_id = std::nullopt);

  // Backend work: candidate generation in Generating*, predicted rankings in
  // Ranking*. Backend failures leave the phase unchanged, set stall(), and
  // rethrow.
  CommandOutcome generate(mediator::MediatorBackend& backend);
  CommandOutcome run_election(mediator::MediatorBackend& backend);

  // Whatever backend work the current phase needs, if any.
  bool needs_backend() const;
  CommandOutcome step(mediator::MediatorBackend& backend);

  CommandOutcome outcome() const { return {state_.phase, state_.sequence}; }

 private:
  explicit Session(SessionOptions options) : options_(std::move(options)) {}

  class RequestScope;

  void append(EventKind kind, nlohmann::json payload);
  void settle();
  void advance_phase(AdvanceReason reason);
  void publish_winner(AdvanceReason reason);
  void close(AdvanceReason reason);
  std::optional<CommandOutcome> replayed(const std::optional<std::string>& request_id) const;
  void require_member(const ParticipantId& participant) const;
  void require_phase(Phase phase, std::string_view action) const;
  template <class F>
  auto with_stall(F&& work);

  SessionOptions options_;
  SessionState state_;
  std::vector<SessionEvent> events_;
  std::optional<Stall> stall_;
  std::optional<std::string> request_id_;
};

}  // namespace concord::protocol
