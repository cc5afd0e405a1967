#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "concord/ballots/ballots.hpp"
#include "concord/core/ids.hpp"

namespace concord::protocol {

enum class Phase {
  collecting_opinions,
  generating_initial,
  ranking_initial,
  published_initial_winner,
  collecting_critiques,
  generating_revised,
  ranking_revised,
  published_revised_winner,
  final_preference,
  closed,
};

// PascalCase names, e.g. "CollectingOpinions".
std::string_view to_string(Phase phase);
Phase phase_from_string(std::string_view name);

// Phases where the session waits on participants rather than the backend.
bool is_collecting(Phase phase);

enum class FinalChoice { initial_winner, revised_winner };

std::string_view to_string(FinalChoice choice);
FinalChoice final_choice_from_string(std::string_view name);

struct ElectionMode {
  enum class Kind { simulated, human_vote };
  Kind kind = Kind::simulated;
  // Size of the published slate in human_vote mode.
  size_t top_m = 0;

  static ElectionMode simulated() { return {}; }
  static ElectionMode human_vote(size_t top_m) { return {Kind::human_vote, top_m}; }

  friend bool operator==(const ElectionMode&, const ElectionMode&) = default;
};

struct SessionConfig {
  std::string question;
  std::vector<ParticipantId> participants;
  size_t k = 32;
  ElectionMode election;
  int rounds = 1;
  // Budget for each waiting phase unless overridden in `deadlines`.
  std::chrono::seconds round_budget{15 * 60};
  std::map<Phase, std::chrono::seconds> deadlines;
  uint64_t seed = 0;
  ballots::TiebreakRule tiebreak;
  // Reveal individual opinions and critiques once Closed.
  bool disclose_after_close = false;

  void validate() const;

  std::chrono::seconds deadline_for(Phase phase) const;
  bool has_participant(const ParticipantId& p) const;

  friend bool operator==(const SessionConfig&, const SessionConfig&) = default;
};

nlohmann::json to_json(const SessionConfig& config);
SessionConfig session_config_from_json(const nlohmann::json& doc);

}  // namespace concord::protocol
