#include "concord/protocol/driver.hpp"

#include <algorithm>
#include <numeric>

#include "concord/core/error.hpp"
#include "concord/mediator/embedder.hpp"

namespace concord::protocol {

std::optional<std::string> ScriptedAgent::opinion(const std::string&) { return script_.opinion; }

std::optional<std::string> ScriptedAgent::critique(const Statement&, int round) {
  const size_t index = static_cast<size_t>(round - 1);
  if (round < 1 || index >= script_.critiques.size()) return std::nullopt;
  return script_.critiques[index];
}

std::optional<ballots::Ranking> ScriptedAgent::rank(const std::vector<Statement>& slate) {
  if (script_.slate_order.empty()) return std::nullopt;
  ballots::Ranking ranking;
  for (size_t i : script_.slate_order) {
    if (i >= slate.size()) throw ValidationError("scripted slate position out of range");
    ranking.order.push_back({slate[i].id});
  }
  return ranking;
}

std::optional<FinalChoice> ScriptedAgent::final_preference(const Statement&, const Statement&) {
  return script_.final_choice;
}

double LatentAgent::distance_to(const Statement& s) const {
  return mediator::euclidean_distance(stance_, mediator::position_of(s.text, stance_.size()));
}

std::optional<std::string> LatentAgent::opinion(const std::string&) { return mediator::format_position(stance_); }

std::optional<std::string> LatentAgent::critique(const Statement&, int) { return mediator::format_position(stance_); }

std::optional<ballots::Ranking> LatentAgent::rank(const std::vector<Statement>& slate) {
  std::vector<double> d;
  for (const auto& s : slate) d.push_back(distance_to(s));
  std::vector<size_t> idx(slate.size());
  std::iota(idx.begin(), idx.end(), size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return d[a] < d[b]; });
  ballots::Ranking ranking;
  for (size_t i = 0; i < idx.size(); ++i) {
    if (i > 0 && d[idx[i]] == d[idx[i - 1]]) {
      ranking.order.back().push_back(slate[idx[i]].id);
    } else {
      ranking.order.push_back({slate[idx[i]].id});
    }
  }
  return ranking;
}

std::optional<FinalChoice> LatentAgent::final_preference(const Statement& initial, const Statement& revised) {
  return distance_to(initial) < distance_to(revised) ? FinalChoice::initial_winner : FinalChoice::revised_winner;
}

namespace {

ParticipantAgent* agent_for(const AgentMap& agents, const ParticipantId& p) {
  auto it = agents.find(p);
  return it == agents.end() ? nullptr : it->second;
}

std::vector<Statement> slate_statements(const Election& e) {
  std::vector<Statement> out;
  for (const auto& id : e.slate) {
    out.push_back(*std::find_if(e.candidates.begin(), e.candidates.end(),
                                [&](const Statement& c) { return c.id == id; }));
  }
  return out;
}

}  // namespace

void drive(Session& session, mediator::MediatorBackend& backend, const AgentMap& agents) {
  while (session.phase() != Phase::closed) {
    if (session.needs_backend()) {
      session.step(backend);
      continue;
    }
    const SessionState& state = session.state();
    const Phase phase = state.phase;
    for (const auto& p : state.pending()) {
      ParticipantAgent* agent = agent_for(agents, p);
      if (agent == nullptr) continue;
      const SessionState& now = session.state();
      if (now.phase != phase) break;
      switch (phase) {
        case Phase::collecting_opinions:
          if (auto text = agent->opinion(now.config.question)) session.submit_opinion(p, *text);
          break;
        case Phase::collecting_critiques: {
          const Statement& winner = *now.latest_winner();
          if (auto text = agent->critique(winner, now.round)) session.submit_critique(p, winner.id, *text);
          break;
        }
        case Phase::ranking_initial:
        case Phase::ranking_revised:
          if (auto ranking = agent->rank(slate_statements(now.elections.back()))) {
            session.submit_ranking(p, std::move(*ranking));
          }
          break;
        case Phase::final_preference:
          if (auto choice = agent->final_preference(*now.initial_winner(), *now.latest_winner())) {
            session.record_final_preference(p, *choice);
          }
          break;
        default: break;
      }
    }
    if (session.phase() == phase) {
      session.advance(AdvanceReason::deadline);
    }
  }
}

Session run_session(const SessionConfig& config, mediator::MediatorBackend& backend, const AgentMap& agents,
                    SessionOptions options) {
  Session session = Session::create(config, std::move(options));
  drive(session, backend, agents);
  return session;
}

}  // namespace concord::protocol
