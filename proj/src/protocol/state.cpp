#include "concord/protocol/state.hpp"

#include <algorithm>
#include <set>

#include "concord/ballots/io.hpp"
#include "concord/core/error.hpp"
#include "rules.hpp"

namespace concord::protocol {

using nlohmann::json;

namespace {

[[noreturn]] void corrupt(const SessionEvent& event, const std::string& why) {
  throw CorruptionError("event " + std::to_string(event.sequence) + " (" +
                        std::string(to_string(event.kind)) + "): " + why);
}

void expect_phase(const SessionState& state, const SessionEvent& event, Phase phase) {
  if (state.phase != phase) {
    corrupt(event, "not allowed in phase " + std::string(to_string(state.phase)));
  }
}

void expect_member(const SessionState& state, const SessionEvent& event, const ParticipantId& p) {
  if (!state.config.has_participant(p)) corrupt(event, "participant '" + p.str() + "' not in roster");
}

std::vector<ParticipantId> ids_from_json(const json& doc) {
  std::vector<ParticipantId> out;
  for (const auto& p : doc) out.emplace_back(p.get<std::string>());
  return out;
}

json ids_to_json(const std::vector<ParticipantId>& ids) {
  json out = json::array();
  for (const auto& p : ids) out.push_back(p.str());
  return out;
}

Election& open_election(SessionState& state, const SessionEvent& event) {
  const int round = event.payload.at("round").get<int>();
  if (state.elections.empty() || state.elections.back().round != round) {
    corrupt(event, "no candidates generated for round " + std::to_string(round));
  }
  return state.elections.back();
}

void apply_generated(SessionState& state, const SessionEvent& event, bool revised) {
  expect_phase(state, event, revised ? Phase::generating_revised : Phase::generating_initial);
  const int round = event.payload.at("round").get<int>();
  const int expected = revised ? state.round : 0;
  if (round != expected || state.elections.size() != static_cast<size_t>(expected)) {
    corrupt(event, "unexpected generation round " + std::to_string(round));
  }
  Election election;
  election.round = round;
  election.request_seed = event.payload.at("request_seed").get<uint64_t>();
  election.backend_id = event.payload.at("backend").get<std::string>();
  for (const auto& c : event.payload.at("candidates")) {
    auto s = mediator::statement_from_json(c);
    s.validate();
    const auto want = revised ? mediator::Provenance::revised_candidate : mediator::Provenance::candidate;
    if (s.provenance != want) corrupt(event, "candidate '" + s.id.str() + "' has wrong provenance");
    election.candidates.push_back(std::move(s));
  }
  if (election.candidates.empty()) corrupt(event, "empty candidate set");
  state.elections.push_back(std::move(election));
}

void apply_rankings(SessionState& state, const SessionEvent& event) {
  if (state.phase != Phase::ranking_initial && state.phase != Phase::ranking_revised) {
    corrupt(event, "not allowed in phase " + std::string(to_string(state.phase)));
  }
  Election& election = open_election(state, event);
  if (election.winner) corrupt(event, "election already decided");
  const std::string source = event.payload.at("source").get<std::string>();
  if (source == "predicted") {
    if (election.rankings_recorded()) corrupt(event, "predicted rankings recorded twice");
    election.predicted_scores = ballots::score_matrix_from_json(event.payload.at("scores"));
    for (const auto& r : event.payload.at("rankings")) election.predicted.push_back(ballots::ranking_from_json(r));
    if (election.predicted.empty()) corrupt(event, "no predicted rankings");
    if (event.payload.contains("slate")) {
      for (const auto& c : event.payload.at("slate")) election.slate.emplace_back(c.get<std::string>());
    }
    const bool human = state.config.election.kind == ElectionMode::Kind::human_vote;
    if (human == election.slate.empty()) corrupt(event, "slate does not match election mode");
  } else if (source == "human") {
    if (!state.awaiting_human_rankings()) corrupt(event, "no slate awaiting human rankings");
    auto ranking = ballots::ranking_from_json(event.payload.at("ranking"));
    expect_member(state, event, ranking.participant);
    for (const auto& r : election.human) {
      if (r.participant == ranking.participant) corrupt(event, "duplicate human ranking");
    }
    check_slate_ranking(ranking, election.slate);
    election.human.push_back(std::move(ranking));
  } else {
    corrupt(event, "unknown ranking source '" + source + "'");
  }
}

void apply_winner(SessionState& state, const SessionEvent& event, bool revised) {
  expect_phase(state, event, revised ? Phase::ranking_revised : Phase::ranking_initial);
  Election& election = open_election(state, event);
  if (election.winner) corrupt(event, "winner published twice");
  if (!election.rankings_recorded()) corrupt(event, "winner before rankings");
  auto winner = mediator::statement_from_json(event.payload.at("winner"));
  const auto want = revised ? mediator::Provenance::revised_winner : mediator::Provenance::initial_winner;
  if (winner.provenance != want) corrupt(event, "winner has wrong provenance");
  auto it = std::find_if(election.candidates.begin(), election.candidates.end(),
                         [&](const Statement& c) { return c.id == winner.id; });
  if (it == election.candidates.end() || it->text != winner.text) {
    corrupt(event, "winner '" + winner.id.str() + "' is not a candidate of this round");
  }
  election.collective = ballots::ranking_from_json(event.payload.at("order"));
  if (election.collective.order.empty() || election.collective.order.front().front() != winner.id) {
    corrupt(event, "collective order does not start with the winner");
  }
  election.fallback = ids_from_json(event.payload.at("fallback"));
  election.winner = std::move(winner);
}

void apply_phase(SessionState& state, const SessionEvent& event) {
  const Phase from = phase_from_string(event.payload.at("from").get<std::string>());
  const Phase to = phase_from_string(event.payload.at("to").get<std::string>());
  if (from != state.phase) corrupt(event, "advance from a phase the session is not in");
  auto next = next_phase(state);
  if (!next || *next != to) {
    corrupt(event, "illegal transition " + std::string(to_string(from)) + " -> " + std::string(to_string(to)));
  }
  if (auto why = advance_blocker(state)) corrupt(event, *why);
  auto absent = ids_from_json(event.payload.at("absent"));
  if (!absent.empty()) state.absences.push_back(Absence{from, state.round, std::move(absent)});
  if (to == Phase::collecting_critiques) ++state.round;
  state.phase = to;
}

void apply_closed(SessionState& state, const SessionEvent& event) {
  if (!can_close(state)) corrupt(event, "session cannot close in phase " + std::string(to_string(state.phase)));
  auto absent = ids_from_json(event.payload.at("absent"));
  if (!absent.empty()) state.absences.push_back(Absence{state.phase, state.round, std::move(absent)});
  if (state.config.rounds > 0) {
    Tally tally;
    for (const auto& [p, choice] : state.final_preferences) {
      (choice == FinalChoice::initial_winner ? tally.initial : tally.revised) += 1;
    }
    const json& t = event.payload.at("tally");
    if (t.at("initial").get<size_t>() != tally.initial || t.at("revised").get<size_t>() != tally.revised) {
      corrupt(event, "tally does not match recorded preferences");
    }
    state.tally = tally;
  }
  state.phase = Phase::closed;
  const Statement* final_statement = state.final_statement();
  const auto claimed = CandidateId(event.payload.at("final_statement").get<std::string>());
  if (final_statement == nullptr || final_statement->id != claimed) {
    corrupt(event, "final statement does not match the recorded outcome");
  }
  state.final_statement_id = claimed;
}

void apply_impl(SessionState& state, const SessionEvent& event) {
  if (event.sequence != state.sequence + 1) {
    throw CorruptionError("sequence gap or duplicate: expected " + std::to_string(state.sequence + 1) +
                          ", found " + std::to_string(event.sequence));
  }
  if ((event.sequence == 1) != (event.kind == EventKind::session_created)) {
    corrupt(event, "log must start with exactly one session_created record");
  }
  const json& payload = event.payload;
  switch (event.kind) {
    case EventKind::session_created: {
      if (payload.at("schema").get<std::string>() != kSessionSchema) corrupt(event, "unsupported schema");
      state.config = session_config_from_json(payload.at("config"));
      state.config.validate();
      state.phase = Phase::collecting_opinions;
      break;
    }
    case EventKind::opinion_submitted: {
      expect_phase(state, event, Phase::collecting_opinions);
      auto s = mediator::statement_from_json(payload.at("statement"));
      s.validate();
      if (s.provenance != mediator::Provenance::opinion) corrupt(event, "statement is not an opinion");
      expect_member(state, event, *s.author);
      if (state.opinion_of(*s.author)) corrupt(event, "duplicate opinion");
      state.opinions.push_back(std::move(s));
      break;
    }
    case EventKind::candidates_generated: apply_generated(state, event, false); break;
    case EventKind::revised_candidates_generated: apply_generated(state, event, true); break;
    case EventKind::rankings_recorded: apply_rankings(state, event); break;
    case EventKind::winner_published: apply_winner(state, event, false); break;
    case EventKind::revised_winner_published: apply_winner(state, event, true); break;
    case EventKind::critique_submitted: {
      expect_phase(state, event, Phase::collecting_critiques);
      auto c = mediator::critique_from_json(payload.at("critique"));
      expect_member(state, event, c.author);
      if (c.round != state.round) corrupt(event, "critique for another round");
      const Statement* winner = state.latest_winner();
      if (winner == nullptr || c.target != winner->id) corrupt(event, "critique does not target the winner");
      for (const auto& prior : state.critiques) {
        if (prior.round == c.round && prior.author == c.author) corrupt(event, "duplicate critique");
      }
      state.critiques.push_back(std::move(c));
      break;
    }
    case EventKind::final_preference_recorded: {
      expect_phase(state, event, Phase::final_preference);
      ParticipantId p(payload.at("participant").get<std::string>());
      expect_member(state, event, p);
      for (const auto& [q, c] : state.final_preferences) {
        if (q == p) corrupt(event, "duplicate final preference");
      }
      state.final_preferences.emplace_back(p, final_choice_from_string(payload.at("choice").get<std::string>()));
      break;
    }
    case EventKind::phase_advanced: apply_phase(state, event); break;
    case EventKind::session_closed: apply_closed(state, event); break;
  }
}

}  // namespace

const Statement* SessionState::opinion_of(const ParticipantId& p) const {
  for (const auto& s : opinions) {
    if (s.author == p) return &s;
  }
  return nullptr;
}

const Election* SessionState::current_election() const {
  return elections.empty() ? nullptr : &elections.back();
}

const Statement* SessionState::initial_winner() const {
  if (elections.empty() || !elections.front().winner) return nullptr;
  return &*elections.front().winner;
}

const Statement* SessionState::latest_winner() const {
  for (auto it = elections.rbegin(); it != elections.rend(); ++it) {
    if (it->winner) return &*it->winner;
  }
  return nullptr;
}

const Statement* SessionState::final_statement() const {
  if (phase != Phase::closed) return nullptr;
  if (config.rounds == 0 || !tally || tally->initial > tally->revised) return initial_winner();
  return latest_winner();
}

std::vector<Critique> SessionState::critiques_for_round(int r) const {
  std::vector<Critique> out;
  for (const auto& c : critiques) {
    if (c.round == r) out.push_back(c);
  }
  return out;
}

std::vector<ParticipantId> SessionState::pending() const {
  std::vector<ParticipantId> out;
  for (const auto& p : config.participants) {
    bool done = true;
    switch (phase) {
      case Phase::collecting_opinions: done = opinion_of(p) != nullptr; break;
      case Phase::collecting_critiques:
        done = std::any_of(critiques.begin(), critiques.end(),
                           [&](const Critique& c) { return c.round == round && c.author == p; });
        break;
      case Phase::final_preference:
        done = std::any_of(final_preferences.begin(), final_preferences.end(),
                           [&](const auto& fp) { return fp.first == p; });
        break;
      case Phase::ranking_initial:
      case Phase::ranking_revised:
        if (awaiting_human_rankings()) {
          const auto& human = elections.back().human;
          done = std::any_of(human.begin(), human.end(), [&](const auto& r) { return r.participant == p; });
        }
        break;
      default: break;
    }
    if (!done) out.push_back(p);
  }
  return out;
}

bool SessionState::all_submitted() const {
  const size_t n = config.participants.size();
  switch (phase) {
    case Phase::collecting_opinions: return opinions.size() == n;
    case Phase::collecting_critiques: {
      const auto c = std::count_if(critiques.begin(), critiques.end(), [&](const Critique& x) { return x.round == round; });
      return static_cast<size_t>(c) == n;
    }
    case Phase::final_preference: return final_preferences.size() == n;
    case Phase::ranking_initial:
    case Phase::ranking_revised: return !awaiting_human_rankings() || elections.back().human.size() == n;
    default: return true;
  }
}

bool SessionState::awaiting_human_rankings() const {
  if (phase != Phase::ranking_initial && phase != Phase::ranking_revised) return false;
  const Election* e = current_election();
  return e != nullptr && e->slate_published() && !e->winner;
}

void apply(SessionState& state, const SessionEvent& event) {
  try {
    apply_impl(state, event);
  } catch (const CorruptionError&) {
    throw;
  } catch (const json::exception& e) {
    corrupt(event, std::string("malformed payload: ") + e.what());
  } catch (const Error& e) {
    corrupt(event, e.what());
  }
  state.sequence = event.sequence;
  state.timestamp = event.timestamp;
  if (event.request_id) state.requests[*event.request_id] = CommandOutcome{state.phase, state.sequence};
}

SessionState replay(std::span<const SessionEvent> events) {
  if (events.empty()) throw CorruptionError("empty event log");
  SessionState state;
  for (const auto& e : events) apply(state, e);
  return state;
}

json to_json(const Election& e) {
  json candidates = json::array();
  for (const auto& c : e.candidates) candidates.push_back(mediator::to_json(c));
  json predicted = json::array();
  for (const auto& r : e.predicted) predicted.push_back(ballots::to_json(r));
  json human = json::array();
  for (const auto& r : e.human) human.push_back(ballots::to_json(r));
  json slate = json::array();
  for (const auto& c : e.slate) slate.push_back(c.str());
  json doc{{"round", e.round},
           {"request_seed", e.request_seed},
           {"backend", e.backend_id},
           {"candidates", candidates},
           {"predicted_rankings", predicted},
           {"slate", slate},
           {"human_rankings", human},
           {"fallback", ids_to_json(e.fallback)}};
  doc["predicted_scores"] = e.rankings_recorded() ? ballots::to_json(e.predicted_scores) : json(nullptr);
  doc["winner"] = e.winner ? mediator::to_json(*e.winner) : json(nullptr);
  doc["collective_order"] = e.winner ? ballots::to_json(e.collective) : json(nullptr);
  return doc;
}

json to_json(const SessionState& state) {
  json opinions = json::array();
  for (const auto& s : state.opinions) opinions.push_back(mediator::to_json(s));
  json critiques = json::array();
  for (const auto& c : state.critiques) critiques.push_back(mediator::to_json(c));
  json elections = json::array();
  for (const auto& e : state.elections) elections.push_back(to_json(e));
  json prefs = json::array();
  for (const auto& [p, c] : state.final_preferences) prefs.push_back({{"participant", p.str()}, {"choice", to_string(c)}});
  json absences = json::array();
  for (const auto& a : state.absences) {
    absences.push_back({{"phase", to_string(a.phase)}, {"round", a.round}, {"participants", ids_to_json(a.participants)}});
  }
  json requests = json::object();
  for (const auto& [id, o] : state.requests) requests[id] = {{"phase", to_string(o.phase)}, {"sequence", o.sequence}};
  json doc{{"config", to_json(state.config)},
           {"phase", to_string(state.phase)},
           {"sequence", state.sequence},
           {"timestamp", state.timestamp},
           {"round", state.round},
           {"opinions", opinions},
           {"critiques", critiques},
           {"elections", elections},
           {"final_preferences", prefs},
           {"absences", absences},
           {"requests", requests}};
  doc["tally"] = state.tally ? json{{"initial", state.tally->initial}, {"revised", state.tally->revised}} : json(nullptr);
  doc["final_statement"] = state.final_statement_id ? json(state.final_statement_id->str()) : json(nullptr);
  return doc;
}

}  // namespace concord::protocol
