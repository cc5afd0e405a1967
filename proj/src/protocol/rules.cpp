#include "rules.hpp"

#include <algorithm>
#include <set>

#include "concord/core/error.hpp"

namespace concord::protocol {

std::optional<Phase> next_phase(const SessionState& state) {
  switch (state.phase) {
    case Phase::collecting_opinions: return Phase::generating_initial;
    case Phase::generating_initial: return Phase::ranking_initial;
    case Phase::ranking_initial: return Phase::published_initial_winner;
    case Phase::published_initial_winner:
      if (state.config.rounds == 0) return std::nullopt;
      return Phase::collecting_critiques;
    case Phase::collecting_critiques: return Phase::generating_revised;
    case Phase::generating_revised: return Phase::ranking_revised;
    case Phase::ranking_revised: return Phase::published_revised_winner;
    case Phase::published_revised_winner:
      return state.round < state.config.rounds ? Phase::collecting_critiques : Phase::final_preference;
    case Phase::final_preference:
    case Phase::closed: return std::nullopt;
  }
  return std::nullopt;
}

std::optional<std::string> advance_blocker(const SessionState& state) {
  switch (state.phase) {
    case Phase::collecting_opinions:
      if (state.opinions.empty()) return "quorum not met: no opinions submitted";
      return std::nullopt;
    case Phase::collecting_critiques:
      if (state.critiques_for_round(state.round).empty()) return "quorum not met: no critiques submitted";
      return std::nullopt;
    case Phase::generating_initial:
    case Phase::generating_revised: {
      const Election* e = state.current_election();
      const size_t expected = state.phase == Phase::generating_initial ? 0 : static_cast<size_t>(state.round);
      if (e == nullptr || state.elections.size() != expected + 1) return "candidates not generated yet";
      return std::nullopt;
    }
    case Phase::ranking_initial:
    case Phase::ranking_revised: {
      const Election* e = state.current_election();
      if (e == nullptr || !e->winner) return "winner not published yet";
      return std::nullopt;
    }
    case Phase::published_initial_winner:
    case Phase::published_revised_winner: return std::nullopt;
    case Phase::final_preference: return "final preference ends by closing the session";
    case Phase::closed: return "session is closed";
  }
  return std::nullopt;
}

bool can_close(const SessionState& state) {
  if (state.phase == Phase::published_initial_winner) return state.config.rounds == 0;
  return state.phase == Phase::final_preference && !state.final_preferences.empty();
}

void check_slate_ranking(const ballots::Ranking& ranking, const std::vector<CandidateId>& slate) {
  std::set<CandidateId> want(slate.begin(), slate.end());
  std::set<CandidateId> seen;
  for (const auto& group : ranking.order) {
    if (group.empty()) throw ValidationError("ranking contains an empty tie-group");
    for (const auto& c : group) {
      if (!want.contains(c)) throw ValidationError("'" + c.str() + "' is not on the published slate");
      if (!seen.insert(c).second) throw ValidationError("'" + c.str() + "' ranked twice");
    }
  }
  if (seen.size() != want.size()) throw ValidationError("ranking must order every slate candidate");
}

}  // namespace concord::protocol
