#pragma once

// Transition rules shared by the fold and the command side.

#include <optional>
#include <string>
#include <vector>

#include "concord/protocol/state.hpp"

namespace concord::protocol {

// The only phase the session may advance to next, if any. Closing is not a
// phase advance; see can_close.
std::optional<Phase> next_phase(const SessionState& state);

// Why the session cannot leave its phase yet, or nullopt if it can.
std::optional<std::string> advance_blocker(const SessionState& state);

bool can_close(const SessionState& state);

// Throws ValidationError unless `ranking` orders exactly the slate.
void check_slate_ranking(const ballots::Ranking& ranking, const std::vector<CandidateId>& slate);

}  // namespace concord::protocol
