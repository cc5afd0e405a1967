#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "concord/ballots/ballots.hpp"
#include "concord/mediator/statement.hpp"
#include "concord/protocol/config.hpp"
#include "concord/protocol/events.hpp"

namespace concord::protocol {

using mediator::Critique;
using mediator::Statement;

// One candidate generation plus the election over it. Round 0 is the initial
// election; round r >= 1 follows the r-th critique round.
struct Election {
  int round = 0;
  uint64_t request_seed = 0;
  std::string backend_id;
  std::vector<Statement> candidates;
  // Predicted scores and rankings for every participant with an opinion.
  ballots::ScoreMatrix predicted_scores;
  std::vector<ballots::Ranking> predicted;
  // human_vote mode: the published top_m candidates and the rankings of them.
  std::vector<CandidateId> slate;
  std::vector<ballots::Ranking> human;
  std::optional<Statement> winner;
  ballots::Ranking collective;
  // Participants whose predicted ranking stood in for a missing human one.
  std::vector<ParticipantId> fallback;

  bool rankings_recorded() const { return !predicted.empty(); }
  bool slate_published() const { return !slate.empty(); }
};

struct Absence {
  Phase phase = Phase::collecting_opinions;
  int round = 0;
  std::vector<ParticipantId> participants;
};

struct Tally {
  size_t initial = 0;
  size_t revised = 0;
};

// Result of a mutating command: where the session stands afterwards.
struct CommandOutcome {
  Phase phase = Phase::collecting_opinions;
  uint64_t sequence = 0;
};

struct SessionState {
  SessionConfig config;
  Phase phase = Phase::collecting_opinions;
  uint64_t sequence = 0;
  int64_t timestamp = 0;
  // Current critique round, 1-based; 0 before the first critique phase.
  int round = 0;
  std::vector<Statement> opinions;
  std::vector<Critique> critiques;
  std::vector<Election> elections;
  std::vector<std::pair<ParticipantId, FinalChoice>> final_preferences;
  std::vector<Absence> absences;
  std::optional<Tally> tally;
  std::optional<CandidateId> final_statement_id;
  std::map<std::string, CommandOutcome> requests;

  const Statement* opinion_of(const ParticipantId& p) const;
  const Election* current_election() const;
  const Statement* initial_winner() const;
  // Most recent published winner of any round.
  const Statement* latest_winner() const;
  // The session's output: the initial winner when there are no critique
  // rounds, otherwise the final-preference majority (ties go to the revision).
  const Statement* final_statement() const;
  std::vector<Critique> critiques_for_round(int round) const;
  // Roster members who still owe a submission in the current phase.
  std::vector<ParticipantId> pending() const;
  // pending().empty(), without building the list.
  bool all_submitted() const;
  bool awaiting_human_rankings() const;
};

// Folds one event into the state. Anything the state machine could not have
// produced (sequence gap, out-of-phase event, malformed payload) raises
// CorruptionError.
void apply(SessionState& state, const SessionEvent& event);

// Deterministic fold from the session_created record.
SessionState replay(std::span<const SessionEvent> events);

nlohmann::json to_json(const SessionState& state);
nlohmann::json to_json(const Election& election);

}  // namespace concord::protocol
