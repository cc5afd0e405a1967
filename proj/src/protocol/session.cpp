#include "concord/protocol/session.hpp"

#include <algorithm>

#include "concord/ballots/io.hpp"
#include "concord/core/error.hpp"
#include "concord/core/rng.hpp"
#include "rules.hpp"

namespace concord::protocol {

using nlohmann::json;

namespace {

json ids_to_json(const std::vector<ParticipantId>& ids) {
  json out = json::array();
  for (const auto& p : ids) out.push_back(p.str());
  return out;
}

bool is_ranking_phase(Phase phase) {
  return phase == Phase::ranking_initial || phase == Phase::ranking_revised;
}

bool is_generating_phase(Phase phase) {
  return phase == Phase::generating_initial || phase == Phase::generating_revised;
}

// Drops candidates outside `keep`, and any tie-group left empty.
ballots::Ranking restrict_to(const ballots::Ranking& ranking, const std::vector<CandidateId>& keep) {
  ballots::Ranking out{ranking.participant, {}};
  for (const auto& group : ranking.order) {
    ballots::TieGroup g;
    for (const auto& c : group) {
      if (std::find(keep.begin(), keep.end(), c) != keep.end()) g.push_back(c);
    }
    if (!g.empty()) out.order.push_back(std::move(g));
  }
  return out;
}

}  // namespace

std::string_view to_string(AdvanceReason reason) {
  switch (reason) {
    case AdvanceReason::complete: return "complete";
    case AdvanceReason::deadline: return "deadline";
    case AdvanceReason::facilitator: return "facilitator";
  }
  return "complete";
}

// Tags every event appended while alive with the client's request id.
class Session::RequestScope {
 public:
  RequestScope(Session& s, const std::optional<std::string>& id) : s_(s) { s_.request_id_ = id; }
  ~RequestScope() { s_.request_id_.reset(); }
  RequestScope(const RequestScope&) = delete;
  RequestScope& operator=(const RequestScope&) = delete;

 private:
  Session& s_;
};

Session Session::create(SessionConfig config, SessionOptions options,
                        const std::optional<std::string>& request_id) {
  config.validate();
  Session session(std::move(options));
  RequestScope scope(session, request_id);
  session.append(EventKind::session_created, json{{"schema", kSessionSchema}, {"config", to_json(config)}});
  return session;
}

Session Session::recover(std::vector<SessionEvent> log, SessionOptions options) {
  Session session(std::move(options));
  session.state_ = replay(log);
  session.events_ = std::move(log);
  session.settle();
  return session;
}

void Session::append(EventKind kind, json payload) {
  SessionEvent event;
  event.sequence = state_.sequence + 1;
  if (options_.clock) {
    event.timestamp = options_.clock->now_ms();
  } else {
    event.timestamp = state_.sequence == 0 ? 0 : state_.timestamp + 1;
  }
  event.kind = kind;
  event.payload = std::move(payload);
  event.request_id = request_id_;
  apply(state_, event);
  events_.push_back(std::move(event));
}

std::optional<CommandOutcome> Session::replayed(const std::optional<std::string>& request_id) const {
  if (!request_id) return std::nullopt;
  auto it = state_.requests.find(*request_id);
  if (it == state_.requests.end()) return std::nullopt;
  return it->second;
}

void Session::require_member(const ParticipantId& participant) const {
  if (!state_.config.has_participant(participant)) {
    throw Error(ErrorCode::authorization, "participant '" + participant.str() + "' is not in this session");
  }
}

void Session::require_phase(Phase phase, std::string_view action) const {
  if (state_.phase != phase) {
    throw PhaseError(std::string(to_string(state_.phase)),
                     "cannot " + std::string(action) + " in phase " + std::string(to_string(state_.phase)));
  }
}

CommandOutcome Session::submit_opinion(const ParticipantId& participant, const std::string& text,
                                       const std::optional<std::string>& request_id) {
  if (auto done = replayed(request_id)) return *done;
  require_member(participant);
  require_phase(Phase::collecting_opinions, "submit an opinion");
  if (state_.opinion_of(participant)) {
    throw Error(ErrorCode::conflict, "participant '" + participant.str() + "' already submitted an opinion");
  }
  Statement s{CandidateId("op-" + participant.str()), text, mediator::Provenance::opinion, participant, 0};
  s.validate();
  RequestScope scope(*this, request_id);
  append(EventKind::opinion_submitted, json{{"statement", mediator::to_json(s)}});
  settle();
  return outcome();
}

CommandOutcome Session::submit_critique(const ParticipantId& participant, const CandidateId& target,
                                        const std::string& text,
                                        const std::optional<std::string>& request_id) {
  if (auto done = replayed(request_id)) return *done;
  require_member(participant);
  require_phase(Phase::collecting_critiques, "submit a critique");
  for (const auto& c : state_.critiques) {
    if (c.round == state_.round && c.author == participant) {
      throw Error(ErrorCode::conflict, "participant '" + participant.str() + "' already critiqued this round");
    }
  }
  const Statement* winner = state_.latest_winner();
  if (winner == nullptr || winner->id != target) {
    throw ValidationError("critique must target the published winner, not '" + target.str() + "'");
  }
  if (mediator::normalize_text(text).empty()) throw ValidationError("critique text is empty");
  RequestScope scope(*this, request_id);
  append(EventKind::critique_submitted,
         json{{"critique", mediator::to_json(Critique{participant, target, text, state_.round})}});
  settle();
  return outcome();
}

CommandOutcome Session::submit_ranking(const ParticipantId& participant, ballots::Ranking ranking,
                                       const std::optional<std::string>& request_id) {
  if (auto done = replayed(request_id)) return *done;
  require_member(participant);
  if (state_.config.election.kind != ElectionMode::Kind::human_vote) {
    throw PhaseError(std::string(to_string(state_.phase)), "this session does not take human rankings");
  }
  if (!state_.awaiting_human_rankings()) {
    throw PhaseError(std::string(to_string(state_.phase)),
                     "no slate is open for ranking in phase " + std::string(to_string(state_.phase)));
  }
  const Election& election = state_.elections.back();
  for (const auto& r : election.human) {
    if (r.participant == participant) {
      throw Error(ErrorCode::conflict, "participant '" + participant.str() + "' already ranked this slate");
    }
  }
  ranking.participant = participant;
  check_slate_ranking(ranking, election.slate);
  RequestScope scope(*this, request_id);
  append(EventKind::rankings_recorded,
         json{{"round", election.round}, {"source", "human"}, {"ranking", ballots::to_json(ranking)}});
  settle();
  return outcome();
}

CommandOutcome Session::record_final_preference(const ParticipantId& participant, FinalChoice choice,
                                                const std::optional<std::string>& request_id) {
  if (auto done = replayed(request_id)) return *done;
  require_member(participant);
  require_phase(Phase::final_preference, "record a final preference");
  for (const auto& [p, c] : state_.final_preferences) {
    if (p == participant) {
      throw Error(ErrorCode::conflict, "participant '" + participant.str() + "' already chose");
    }
  }
  RequestScope scope(*this, request_id);
  append(EventKind::final_preference_recorded,
         json{{"participant", participant.str()}, {"choice", to_string(choice)}});
  settle();
  return outcome();
}

CommandOutcome Session::advance(AdvanceReason reason, const std::optional<std::string>& request_id) {
  if (auto done = replayed(request_id)) return *done;
  const std::string phase(to_string(state_.phase));
  RequestScope scope(*this, request_id);
  if (state_.phase == Phase::collecting_opinions || state_.phase == Phase::collecting_critiques) {
    if (auto why = advance_blocker(state_)) throw PhaseError(phase, *why);
    advance_phase(reason);
  } else if (state_.phase == Phase::final_preference) {
    if (state_.final_preferences.empty()) throw PhaseError(phase, "quorum not met: no final preferences recorded");
    close(reason);
  } else if (state_.awaiting_human_rankings()) {
    if (state_.elections.back().human.empty()) throw PhaseError(phase, "quorum not met: no rankings submitted");
    publish_winner(reason);
  } else {
    throw PhaseError(phase, "phase " + phase + " does not wait on participants");
  }
  settle();
  return outcome();
}

template <class F>
auto Session::with_stall(F&& work) {
  try {
    auto result = work();
    stall_.reset();
    return result;
  } catch (const BackendError& e) {
    stall_ = Stall{state_.phase, e.what(), e.attempts()};
    throw;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::protocol && e.code() != ErrorCode::generation_exhausted) throw;
    stall_ = Stall{state_.phase, e.what(), 1};
    throw;
  }
}

CommandOutcome Session::generate(mediator::MediatorBackend& backend) {
  if (!is_generating_phase(state_.phase)) {
    throw PhaseError(std::string(to_string(state_.phase)), "no candidate generation pending");
  }
  const bool revised = state_.phase == Phase::generating_revised;
  mediator::GenerationRequest req;
  req.question = state_.config.question;
  for (const auto& p : state_.config.participants) {
    if (const Statement* s = state_.opinion_of(p)) req.opinions.push_back(*s);
  }
  req.k = state_.config.k;
  req.round = revised ? state_.round : 0;
  req.seed = derive_seed(state_.config.seed, "generate", static_cast<uint64_t>(req.round));
  if (revised) {
    req.prior_winner = *state_.latest_winner();
    req.critiques = state_.critiques_for_round(state_.round);
  }
  auto candidates = with_stall([&] { return mediator::generate_candidates(req, backend, options_.generation); });
  json list = json::array();
  for (const auto& c : candidates) list.push_back(mediator::to_json(c));
  append(revised ? EventKind::revised_candidates_generated : EventKind::candidates_generated,
         json{{"round", req.round}, {"request_seed", req.seed}, {"backend", backend.id()}, {"candidates", list}});
  settle();
  return outcome();
}

CommandOutcome Session::run_election(mediator::MediatorBackend& backend) {
  if (!is_ranking_phase(state_.phase) || state_.elections.back().rankings_recorded()) {
    throw PhaseError(std::string(to_string(state_.phase)), "no election pending");
  }
  const Election& election = state_.elections.back();
  ballots::ScoreMatrix scores;
  for (const auto& c : election.candidates) scores.candidates.push_back(c.id);
  const uint64_t base = derive_seed(state_.config.seed, "score", static_cast<uint64_t>(election.round));
  bool all_stddev = true;
  std::vector<double> stddev;
  with_stall([&] {
    for (const auto& p : state_.config.participants) {
      const Statement* opinion = state_.opinion_of(p);
      if (opinion == nullptr) continue;
      mediator::RewardQuery query{*opinion, election.candidates, derive_seed(base, p.str())};
      auto row = mediator::predict_scores(query, backend);
      scores.participants.push_back(p);
      scores.values.insert(scores.values.end(), row.scores.begin(), row.scores.end());
      if (row.stddev.size() == row.scores.size()) {
        stddev.insert(stddev.end(), row.stddev.begin(), row.stddev.end());
      } else {
        all_stddev = false;
      }
    }
    return 0;
  });
  if (all_stddev) scores.stddev = std::move(stddev);
  auto profile = ballots::scores_to_rankings(scores);
  json rankings = json::array();
  for (const auto& r : profile.rankings) rankings.push_back(ballots::to_json(r));
  json payload{{"round", election.round},
               {"source", "predicted"},
               {"scores", ballots::to_json(scores)},
               {"rankings", rankings}};
  if (state_.config.election.kind == ElectionMode::Kind::human_vote) {
    auto order = ballots::schulze_order(profile, state_.config.tiebreak).flatten();
    order.resize(std::min(order.size(), state_.config.election.top_m));
    json slate = json::array();
    for (const auto& c : order) slate.push_back(c.str());
    payload["slate"] = slate;
  }
  append(EventKind::rankings_recorded, std::move(payload));
  settle();
  return outcome();
}

bool Session::needs_backend() const {
  if (is_generating_phase(state_.phase)) return true;
  return is_ranking_phase(state_.phase) && !state_.elections.back().rankings_recorded();
}

CommandOutcome Session::step(mediator::MediatorBackend& backend) {
  if (is_generating_phase(state_.phase)) return generate(backend);
  if (needs_backend()) return run_election(backend);
  return outcome();
}

void Session::advance_phase(AdvanceReason reason) {
  const Phase from = state_.phase;
  const Phase to = *next_phase(state_);
  append(EventKind::phase_advanced, json{{"from", to_string(from)},
                                         {"to", to_string(to)},
                                         {"reason", to_string(reason)},
                                         {"absent", ids_to_json(state_.pending())}});
}

void Session::publish_winner(AdvanceReason reason) {
  const Election& election = state_.elections.back();
  ballots::PreferenceProfile profile;
  std::vector<ParticipantId> fallback;
  if (election.slate_published()) {
    profile.candidates = election.slate;
    for (const auto& p : state_.config.participants) {
      auto human = std::find_if(election.human.begin(), election.human.end(),
                                [&](const ballots::Ranking& r) { return r.participant == p; });
      if (human != election.human.end()) {
        profile.rankings.push_back(*human);
        continue;
      }
      auto predicted = std::find_if(election.predicted.begin(), election.predicted.end(),
                                    [&](const ballots::Ranking& r) { return r.participant == p; });
      if (predicted != election.predicted.end()) {
        profile.rankings.push_back(restrict_to(*predicted, election.slate));
        fallback.push_back(p);
      }
    }
  } else {
    for (const auto& c : election.candidates) profile.candidates.push_back(c.id);
    profile.rankings = election.predicted;
  }
  ballots::Ranking order = ballots::schulze_order(profile, state_.config.tiebreak);
  const CandidateId& winner_id = order.order.front().front();
  Statement winner = *std::find_if(election.candidates.begin(), election.candidates.end(),
                                   [&](const Statement& c) { return c.id == winner_id; });
  const bool revised = election.round > 0;
  winner.provenance = revised ? mediator::Provenance::revised_winner : mediator::Provenance::initial_winner;
  append(revised ? EventKind::revised_winner_published : EventKind::winner_published,
         json{{"round", election.round},
              {"winner", mediator::to_json(winner)},
              {"order", ballots::to_json(order)},
              {"fallback", ids_to_json(fallback)},
              {"reason", to_string(reason)}});
}

void Session::close(AdvanceReason reason) {
  json payload{{"reason", to_string(reason)}, {"absent", ids_to_json(state_.pending())}};
  const Statement* final_statement = state_.initial_winner();
  if (state_.config.rounds > 0) {
    Tally tally;
    for (const auto& [p, choice] : state_.final_preferences) {
      (choice == FinalChoice::initial_winner ? tally.initial : tally.revised) += 1;
    }
    payload["tally"] = json{{"initial", tally.initial}, {"revised", tally.revised}};
    if (tally.initial <= tally.revised) final_statement = state_.latest_winner();
  }
  payload["final_statement"] = final_statement->id.str();
  append(EventKind::session_closed, std::move(payload));
}

void Session::settle() {
  for (;;) {
    switch (state_.phase) {
      case Phase::collecting_opinions:
      case Phase::collecting_critiques:
        if (!state_.all_submitted()) return;
        advance_phase(AdvanceReason::complete);
        break;
      case Phase::generating_initial:
      case Phase::generating_revised:
        if (advance_blocker(state_)) return;
        advance_phase(AdvanceReason::complete);
        break;
      case Phase::ranking_initial:
      case Phase::ranking_revised: {
        const Election& e = state_.elections.back();
        if (e.winner) {
          advance_phase(AdvanceReason::complete);
        } else if (e.rankings_recorded() && (!e.slate_published() || state_.all_submitted())) {
          publish_winner(AdvanceReason::complete);
        } else {
          return;
        }
        break;
      }
      case Phase::published_initial_winner:
        if (state_.config.rounds == 0) {
          close(AdvanceReason::complete);
        } else {
          advance_phase(AdvanceReason::complete);
        }
        break;
      case Phase::published_revised_winner: advance_phase(AdvanceReason::complete); break;
      case Phase::final_preference:
        if (!state_.all_submitted()) return;
        close(AdvanceReason::complete);
        break;
      case Phase::closed: return;
    }
  }
}

}  // namespace concord::protocol
