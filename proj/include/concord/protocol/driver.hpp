#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "concord/protocol/session.hpp"

namespace concord::protocol {

// A participant's behaviour in a driven session. Returning nullopt means the
// participant stays silent and the phase advances by deadline without them.
class ParticipantAgent {
 public:
  virtual ~ParticipantAgent() = default;

  virtual std::optional<std::string> opinion(const std::string& question) = 0;
  virtual std::optional<std::string> critique(const Statement& winner, int round) = 0;
  // Ranking of the published slate (human_vote mode).
  virtual std::optional<ballots::Ranking> rank(const std::vector<Statement>& slate) = 0;
  virtual std::optional<FinalChoice> final_preference(const Statement& initial, const Statement& revised) = 0;
};

// Fixed answers, for scripted sessions and fixtures.
class ScriptedAgent final : public ParticipantAgent {
 public:
  struct Script {
    std::optional<std::string> opinion;
    // Indexed by critique round - 1; missing entries mean silence.
    std::vector<std::optional<std::string>> critiques;
    // Slate positions best first; empty means silence.
    std::vector<size_t> slate_order;
    std::optional<FinalChoice> final_choice;
  };

  explicit ScriptedAgent(Script script) : script_(std::move(script)) {}

  std::optional<std::string> opinion(const std::string& question) override;
  std::optional<std::string> critique(const Statement& winner, int round) override;
  std::optional<ballots::Ranking> rank(const std::vector<Statement>& slate) override;
  std::optional<FinalChoice> final_preference(const Statement& initial, const Statement& revised) override;

 private:
  Script script_;
};

// Participant with a stance in the synthetic latent space. It voices the
// stance as its opinion and its critiques, ranks statements by distance, and
// prefers the nearer winner at the end (the revision on a tie).
class LatentAgent final : public ParticipantAgent {
 public:
  explicit LatentAgent(std::vector<double> stance) : stance_(std::move(stance)) {}

  const std::vector<double>& stance() const noexcept { return stance_; }

  std::optional<std::string> opinion(const std::string& question) override;
  std::optional<std::string> critique(const Statement& winner, int round) override;
  std::optional<ballots::Ranking> rank(const std::vector<Statement>& slate) override;
  std::optional<FinalChoice> final_preference(const Statement& initial, const Statement& revised) override;

 private:
  double distance_to(const Statement& s) const;

  std::vector<double> stance_;
};

using AgentMap = std::map<ParticipantId, ParticipantAgent*>;

// Runs `session` to Closed: polls agents in roster order in each waiting
// phase, advances by deadline when someone stays silent, and performs the
// backend work in between. Backend failures propagate with the session
// stalled; a phase with no submissions at all raises PhaseError.
void drive(Session& session, mediator::MediatorBackend& backend, const AgentMap& agents);

Session run_session(const SessionConfig& config, mediator::MediatorBackend& backend, const AgentMap& agents,
                    SessionOptions options = {});

}  // namespace concord::protocol
