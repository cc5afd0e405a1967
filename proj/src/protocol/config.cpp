#include "concord/protocol/config.hpp"

#include <algorithm>
#include <array>
#include <set>
#include <utility>

#include "concord/ballots/io.hpp"
#include "concord/core/error.hpp"

namespace concord::protocol {

using nlohmann::json;

namespace {

constexpr std::array<std::pair<Phase, std::string_view>, 10> kPhaseNames{{
    {Phase::collecting_opinions, "CollectingOpinions"},
    {Phase::generating_initial, "GeneratingInitial"},
    {Phase::ranking_initial, "RankingInitial"},
    {Phase::published_initial_winner, "PublishedInitialWinner"},
    {Phase::collecting_critiques, "CollectingCritiques"},
    {Phase::generating_revised, "GeneratingRevised"},
    {Phase::ranking_revised, "RankingRevised"},
    {Phase::published_revised_winner, "PublishedRevisedWinner"},
    {Phase::final_preference, "FinalPreference"},
    {Phase::closed, "Closed"},
}};

}  // namespace

std::string_view to_string(Phase phase) {
  for (const auto& [p, name] : kPhaseNames) {
    if (p == phase) return name;
  }
  return "Unknown";
}

Phase phase_from_string(std::string_view name) {
  for (const auto& [p, n] : kPhaseNames) {
    if (n == name) return p;
  }
  throw ValidationError("unknown phase '" + std::string(name) + "'");
}

bool is_collecting(Phase phase) {
  return phase == Phase::collecting_opinions || phase == Phase::collecting_critiques ||
         phase == Phase::final_preference;
}

std::string_view to_string(FinalChoice choice) {
  return choice == FinalChoice::initial_winner ? "initial_winner" : "revised_winner";
}

FinalChoice final_choice_from_string(std::string_view name) {
  if (name == "initial_winner" || name == "initial") return FinalChoice::initial_winner;
  if (name == "revised_winner" || name == "revised") return FinalChoice::revised_winner;
  throw ValidationError("final preference must be initial_winner or revised_winner, got '" +
                        std::string(name) + "'");
}

void SessionConfig::validate() const {
  if (question.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw ValidationError("session question is empty");
  }
  if (participants.empty()) throw ValidationError("session needs at least one participant");
  std::set<ParticipantId> seen;
  for (const auto& p : participants) {
    if (p.empty()) throw ValidationError("participant id is empty");
    if (!seen.insert(p).second) throw ValidationError("duplicate participant '" + p.str() + "'");
  }
  if (k == 0) throw ValidationError("candidate count k must be at least 1");
  if (election.kind == ElectionMode::Kind::human_vote) {
    if (election.top_m < 2) throw ValidationError("human_vote top_m must be at least 2");
    if (election.top_m > k) throw ValidationError("human_vote top_m exceeds candidate count k");
  }
  if (rounds < 0) throw ValidationError("rounds must be non-negative");
  if (round_budget.count() <= 0) throw ValidationError("round budget must be positive");
  for (const auto& [phase, d] : deadlines) {
    if (!is_collecting(phase) && phase != Phase::ranking_initial && phase != Phase::ranking_revised) {
      throw ValidationError("phase " + std::string(to_string(phase)) + " takes no deadline");
    }
    if (d.count() <= 0) throw ValidationError("deadline must be positive");
  }
}

std::chrono::seconds SessionConfig::deadline_for(Phase phase) const {
  auto it = deadlines.find(phase);
  return it == deadlines.end() ? round_budget : it->second;
}

bool SessionConfig::has_participant(const ParticipantId& p) const {
  return std::find(participants.begin(), participants.end(), p) != participants.end();
}

json to_json(const SessionConfig& config) {
  json participants = json::array();
  for (const auto& p : config.participants) participants.push_back(p.str());
  json mode{{"kind", config.election.kind == ElectionMode::Kind::simulated ? "simulated" : "human_vote"}};
  if (config.election.kind == ElectionMode::Kind::human_vote) mode["top_m"] = config.election.top_m;
  json deadlines = json::object();
  for (const auto& [phase, d] : config.deadlines) deadlines[std::string(to_string(phase))] = d.count();
  return json{{"question", config.question},
              {"participants", participants},
              {"k", config.k},
              {"election_mode", mode},
              {"rounds", config.rounds},
              {"round_budget_seconds", config.round_budget.count()},
              {"deadlines", deadlines},
              {"seed", config.seed},
              {"tiebreak", ballots::to_json(config.tiebreak)},
              {"disclose_after_close", config.disclose_after_close}};
}

SessionConfig session_config_from_json(const json& doc) {
  if (!doc.is_object()) throw ValidationError("session config must be a JSON object");
  SessionConfig config;
  try {
    config.question = doc.at("question").get<std::string>();
    for (const auto& p : doc.at("participants")) config.participants.emplace_back(p.get<std::string>());
    config.k = doc.value("k", config.k);
    if (doc.contains("election_mode")) {
      const json& mode = doc.at("election_mode");
      const std::string kind = mode.is_string() ? mode.get<std::string>() : mode.at("kind").get<std::string>();
      if (kind == "simulated") {
        config.election = ElectionMode::simulated();
      } else if (kind == "human_vote") {
        config.election = ElectionMode::human_vote(mode.at("top_m").get<size_t>());
      } else {
        throw ValidationError("unknown election mode '" + kind + "'");
      }
    }
    config.rounds = doc.value("rounds", config.rounds);
    config.round_budget = std::chrono::seconds(doc.value("round_budget_seconds", config.round_budget.count()));
    if (doc.contains("deadlines")) {
      for (const auto& [name, seconds] : doc.at("deadlines").items()) {
        config.deadlines[phase_from_string(name)] = std::chrono::seconds(seconds.get<int64_t>());
      }
    }
    config.seed = doc.value("seed", config.seed);
    if (doc.contains("tiebreak")) config.tiebreak = ballots::tiebreak_from_json(doc.at("tiebreak"));
    config.disclose_after_close = doc.value("disclose_after_close", false);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("session config: ") + e.what());
  }
  return config;
}

}  // namespace concord::protocol
