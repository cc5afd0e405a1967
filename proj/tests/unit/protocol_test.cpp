#include <gtest/gtest.h>

#include <fstream>
#include <sstream>
#include <thread>

#include "concord/core/error.hpp"
#include "concord/mediator/embedder.hpp"
#include "concord/protocol/serial_queue.hpp"
#include "support/oracles.hpp"
#include "support/sessions.hpp"

namespace concord::protocol {
namespace {

using mediator::SyntheticBackend;
using mediator::SyntheticConfig;
using testing::latent_cast;

SessionConfig basic_config(size_t n, int rounds = 1) {
  SessionConfig c;
  c.question = "What should the town do about parking?";
  for (size_t i = 0; i < n; ++i) c.participants.emplace_back("p" + std::to_string(i + 1));
  c.k = 6;
  c.rounds = rounds;
  c.seed = 5;
  return c;
}

std::string pos(double x) { return mediator::format_position(std::vector<double>{x}); }

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::validation;
}

class FailingBackend final : public mediator::MediatorBackend {
 public:
  std::vector<std::string> sample_statements(const mediator::GenerationRequest&) override {
    throw BackendError(3, "upstream unavailable");
  }
  mediator::ScoreRow score(const mediator::RewardQuery&) override { throw BackendError(3, "upstream unavailable"); }
  std::string id() const override { return "failing"; }
};

TEST(SessionConfigTest, Validation) {
  auto c = basic_config(5);
  EXPECT_NO_THROW(c.validate());
  auto dup = c;
  dup.participants.back() = dup.participants.front();
  EXPECT_THROW(dup.validate(), ValidationError);
  auto none = c;
  none.participants.clear();
  EXPECT_THROW(none.validate(), ValidationError);
  auto big_slate = c;
  big_slate.election = ElectionMode::human_vote(7);
  EXPECT_THROW(big_slate.validate(), ValidationError);
  auto negative = c;
  negative.rounds = -1;
  EXPECT_THROW(negative.validate(), ValidationError);
  EXPECT_THROW(Session::create(dup), ValidationError);
}

TEST(SessionConfigTest, JsonRoundTrip) {
  auto c = basic_config(3, 2);
  c.election = ElectionMode::human_vote(3);
  c.deadlines[Phase::collecting_critiques] = std::chrono::seconds(120);
  c.tiebreak = ballots::TiebreakRule::seeded_random(9);
  EXPECT_EQ(session_config_from_json(to_json(c)), c);
  EXPECT_EQ(c.deadline_for(Phase::collecting_critiques).count(), 120);
  EXPECT_EQ(c.deadline_for(Phase::collecting_opinions).count(), 900);
  EXPECT_THROW(session_config_from_json(nlohmann::json{{"question", 3}}), ValidationError);
}

TEST(SessionTest, CreateOpensOpinionSlots) {
  auto s = Session::create(basic_config(5));
  EXPECT_EQ(s.phase(), Phase::collecting_opinions);
  EXPECT_EQ(s.state().pending().size(), 5u);
  ASSERT_EQ(s.events().size(), 1u);
  EXPECT_EQ(s.events()[0].kind, EventKind::session_created);
  EXPECT_EQ(s.events()[0].payload["schema"], kSessionSchema);
}

TEST(SessionTest, OpinionRules) {
  auto s = Session::create(basic_config(5));
  EXPECT_EQ(code_of([&] { s.submit_opinion(ParticipantId("mallory"), "hi"); }), ErrorCode::authorization);
  EXPECT_EQ(code_of([&] { s.submit_opinion(ParticipantId("p1"), "   "); }), ErrorCode::validation);
  s.submit_opinion(ParticipantId("p1"), pos(0));
  EXPECT_EQ(code_of([&] { s.submit_opinion(ParticipantId("p1"), pos(1)); }), ErrorCode::conflict);
  for (int i = 2; i <= 4; ++i) s.submit_opinion(ParticipantId("p" + std::to_string(i)), pos(i));
  EXPECT_EQ(s.phase(), Phase::collecting_opinions);
  auto out = s.submit_opinion(ParticipantId("p5"), pos(5));
  EXPECT_EQ(out.phase, Phase::generating_initial);
  EXPECT_EQ(out.sequence, 7u);
  try {
    s.submit_opinion(ParticipantId("p5"), pos(5));
    FAIL();
  } catch (const PhaseError& e) {
    EXPECT_EQ(e.phase(), "GeneratingInitial");
  }
}

TEST(SessionTest, SingleVoterElectsTheirTopScoredCandidate) {
  auto c = basic_config(1);
  c.rounds = 0;
  c.k = 10;
  SyntheticBackend backend(SyntheticConfig{1, 0.3, 4});
  auto s = Session::create(c);
  s.submit_opinion(ParticipantId("p1"), pos(0.4));
  s.step(backend);
  s.step(backend);
  ASSERT_EQ(s.phase(), Phase::closed);
  const Election& e = s.state().elections[0];
  size_t best = 0;
  for (size_t j = 1; j < e.candidates.size(); ++j) {
    if (e.predicted_scores.at(0, j) > e.predicted_scores.at(0, best)) best = j;
  }
  EXPECT_EQ(e.winner->id, e.candidates[best].id);
  EXPECT_EQ(s.state().final_statement()->id, e.candidates[best].id);
}

TEST(SessionTest, SymmetricFixtureElectsTheMedianAndMatchesOracle) {
  std::vector<double> xs{-2, -1, 0, 1, 2};
  auto cast = latent_cast(xs);
  auto c = basic_config(5, 0);
  c.participants = cast.ids;
  c.k = 5;
  SyntheticBackend backend(SyntheticConfig{1, 0.0, 3, 1.0, 0.0});
  auto s = run_session(c, backend, cast.map);
  const Election& e = s.state().elections[0];
  ASSERT_EQ(e.candidates.size(), 5u);
  std::vector<double> cpos;
  for (const auto& cand : e.candidates) cpos.push_back((*mediator::parse_position(cand.text))[0]);
  std::vector<double> sorted = cpos;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(sorted, xs);
  EXPECT_EQ(*mediator::parse_position(e.winner->text), std::vector<double>{0.0});

  // Oracle: distance rankings built here, exhaustive strongest paths.
  ballots::PreferenceProfile profile;
  for (const auto& cand : e.candidates) profile.candidates.push_back(cand.id);
  for (size_t i = 0; i < xs.size(); ++i) {
    std::vector<size_t> idx{0, 1, 2, 3, 4};
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return std::abs(cpos[a] - xs[i]) < std::abs(cpos[b] - xs[i]); });
    ballots::Ranking r{cast.ids[i], {}};
    for (size_t j = 0; j < idx.size(); ++j) {
      if (j > 0 && std::abs(cpos[idx[j]] - xs[i]) == std::abs(cpos[idx[j - 1]] - xs[i])) {
        r.order.back().push_back(profile.candidates[idx[j]]);
      } else {
        r.order.push_back({profile.candidates[idx[j]]});
      }
    }
    profile.rankings.push_back(r);
  }
  EXPECT_EQ(testing::brute_schulze_winner(profile), e.winner->id);
}

TEST(SessionTest, HumanVoteUnanimityOverTheSlate) {
  auto c = basic_config(2, 0);
  c.k = 4;
  c.election = ElectionMode::human_vote(2);
  SyntheticBackend backend(SyntheticConfig{1, 0.0, 1});
  ScriptedAgent a({pos(-1), {}, {1, 0}, {}});
  ScriptedAgent b({pos(1), {}, {1, 0}, {}});
  auto s = run_session(c, backend, {{ParticipantId("p1"), &a}, {ParticipantId("p2"), &b}});
  const Election& e = s.state().elections[0];
  ASSERT_EQ(e.slate.size(), 2u);
  EXPECT_EQ(e.winner->id, e.slate[1]);
  EXPECT_TRUE(e.fallback.empty());
  ASSERT_EQ(e.human.size(), 2u);
}

TEST(SessionTest, HumanVoteSilentVoterFallsBackToPrediction) {
  auto c = basic_config(3, 0);
  c.k = 5;
  c.election = ElectionMode::human_vote(3);
  SyntheticBackend backend(SyntheticConfig{1, 0.0, 1});
  ScriptedAgent a({pos(-1), {}, {2, 1, 0}, {}});
  ScriptedAgent b({pos(0), {}, {}, {}});
  ScriptedAgent d({pos(1), {}, {0, 1, 2}, {}});
  auto s = run_session(c, backend, {{ParticipantId("p1"), &a}, {ParticipantId("p2"), &b}, {ParticipantId("p3"), &d}});
  const Election& e = s.state().elections[0];
  EXPECT_EQ(e.fallback, std::vector<ParticipantId>{ParticipantId("p2")});
  EXPECT_EQ(s.events()[s.events().size() - 3].payload["reason"], "deadline");
}

TEST(SessionTest, RankingRules) {
  auto c = basic_config(2, 0);
  c.k = 4;
  c.election = ElectionMode::human_vote(2);
  SyntheticBackend backend(SyntheticConfig{1, 0.0, 1});
  auto s = Session::create(c);
  EXPECT_EQ(code_of([&] { s.submit_ranking(ParticipantId("p1"), {}); }), ErrorCode::phase);
  s.submit_opinion(ParticipantId("p1"), pos(-1));
  s.submit_opinion(ParticipantId("p2"), pos(1));
  s.step(backend);
  s.step(backend);
  ASSERT_TRUE(s.state().awaiting_human_rankings());
  const auto slate = s.state().elections[0].slate;
  ballots::Ranking partial{{}, {{slate[0]}}};
  EXPECT_EQ(code_of([&] { s.submit_ranking(ParticipantId("p1"), partial); }), ErrorCode::validation);
  ballots::Ranking bogus{{}, {{slate[0]}, {CandidateId("zzz")}}};
  EXPECT_EQ(code_of([&] { s.submit_ranking(ParticipantId("p1"), bogus); }), ErrorCode::validation);
  ballots::Ranking tied{{}, {{slate[0], slate[1]}}};
  s.submit_ranking(ParticipantId("p1"), tied);
  EXPECT_EQ(code_of([&] { s.submit_ranking(ParticipantId("p1"), tied); }), ErrorCode::conflict);

  auto sim = Session::create(basic_config(1, 0));
  EXPECT_EQ(code_of([&] { sim.submit_ranking(ParticipantId("p1"), tied); }), ErrorCode::phase);
}

class FullSessionTest : public ::testing::Test {
 protected:
  void SetUp() override {
    s_.submit_opinion(ParticipantId("p1"), pos(-2));
    s_.submit_opinion(ParticipantId("p2"), pos(-1));
    s_.submit_opinion(ParticipantId("p3"), pos(0));
    s_.submit_opinion(ParticipantId("p4"), pos(1));
    s_.submit_opinion(ParticipantId("p5"), pos(2));
    s_.step(backend_);
    s_.step(backend_);
    ASSERT_EQ(s_.phase(), Phase::collecting_critiques);
    winner_ = s_.state().latest_winner()->id;
  }

  void critique_all() {
    for (int i = 1; i <= 5; ++i) s_.submit_critique(ParticipantId("p" + std::to_string(i)), winner_, pos(i - 3.0));
  }

  SyntheticBackend backend_{SyntheticConfig{1, 0.0, 8}};
  Session s_ = Session::create(basic_config(5));
  CandidateId winner_;
};

TEST_F(FullSessionTest, CritiqueRules) {
  EXPECT_EQ(code_of([&] { s_.submit_critique(ParticipantId("p1"), CandidateId("op-p1"), "too vague"); }),
            ErrorCode::validation);
  EXPECT_EQ(code_of([&] { s_.submit_critique(ParticipantId("p1"), winner_, " "); }), ErrorCode::validation);
  s_.submit_critique(ParticipantId("p1"), winner_, "too vague");
  EXPECT_EQ(code_of([&] { s_.submit_critique(ParticipantId("p1"), winner_, "again"); }), ErrorCode::conflict);
  EXPECT_EQ(code_of([&] { s_.submit_critique(ParticipantId("nobody"), winner_, "hi"); }), ErrorCode::authorization);
  for (int i = 2; i <= 5; ++i) s_.submit_critique(ParticipantId("p" + std::to_string(i)), winner_, "ok");
  EXPECT_EQ(s_.phase(), Phase::generating_revised);
}

TEST_F(FullSessionTest, DeadlineSkipsSilentCritics) {
  EXPECT_EQ(code_of([&] { s_.advance(AdvanceReason::deadline); }), ErrorCode::phase);
  s_.submit_critique(ParticipantId("p2"), winner_, pos(-1));
  s_.advance(AdvanceReason::deadline);
  EXPECT_EQ(s_.phase(), Phase::generating_revised);
  ASSERT_EQ(s_.state().absences.size(), 1u);
  EXPECT_EQ(s_.state().absences[0].phase, Phase::collecting_critiques);
  EXPECT_EQ(s_.state().absences[0].participants.size(), 4u);
  EXPECT_EQ(s_.state().critiques.size(), 1u);
}

TEST_F(FullSessionTest, FinalPreferenceTallies) {
  critique_all();
  s_.step(backend_);
  s_.step(backend_);
  ASSERT_EQ(s_.phase(), Phase::final_preference);
  EXPECT_EQ(code_of([&] { s_.submit_critique(ParticipantId("p1"), winner_, "late"); }), ErrorCode::phase);
  s_.record_final_preference(ParticipantId("p1"), FinalChoice::initial_winner);
  EXPECT_EQ(code_of([&] { s_.record_final_preference(ParticipantId("p1"), FinalChoice::revised_winner); }),
            ErrorCode::conflict);
  s_.record_final_preference(ParticipantId("p2"), FinalChoice::initial_winner);
  for (int i = 3; i <= 5; ++i) s_.record_final_preference(ParticipantId("p" + std::to_string(i)), FinalChoice::revised_winner);
  ASSERT_EQ(s_.phase(), Phase::closed);
  EXPECT_EQ(s_.state().tally->initial, 2u);
  EXPECT_EQ(s_.state().tally->revised, 3u);
  EXPECT_EQ(s_.state().final_statement()->provenance, mediator::Provenance::revised_winner);
}

TEST_F(FullSessionTest, UnanimousRevisedTally) {
  critique_all();
  s_.step(backend_);
  s_.step(backend_);
  for (int i = 1; i <= 5; ++i) s_.record_final_preference(ParticipantId("p" + std::to_string(i)), FinalChoice::revised_winner);
  EXPECT_EQ(s_.state().tally->initial, 0u);
  EXPECT_EQ(s_.state().tally->revised, 5u);
}

TEST_F(FullSessionTest, BackendFailureStallsWithoutCorruption) {
  critique_all();
  FailingBackend broken;
  const auto before = s_.events().size();
  EXPECT_THROW(s_.step(broken), BackendError);
  ASSERT_TRUE(s_.stall());
  EXPECT_EQ(s_.stall()->phase, Phase::generating_revised);
  EXPECT_EQ(s_.stall()->attempts, 3);
  EXPECT_EQ(s_.events().size(), before);
  EXPECT_EQ(s_.phase(), Phase::generating_revised);
  s_.step(backend_);
  EXPECT_FALSE(s_.stall());
  EXPECT_THROW(s_.step(broken), BackendError);
  EXPECT_EQ(s_.phase(), Phase::ranking_revised);
  s_.step(backend_);
  EXPECT_EQ(s_.phase(), Phase::final_preference);
}

TEST_F(FullSessionTest, RevisionSeesCritiquesAndPriorWinner) {
  critique_all();
  s_.step(backend_);
  const Election& revised = s_.state().elections[1];
  EXPECT_EQ(revised.round, 1);
  for (const auto& c : revised.candidates) {
    EXPECT_EQ(c.provenance, mediator::Provenance::revised_candidate);
    EXPECT_EQ(c.id.str().substr(0, 3), "r1-");
  }
  EXPECT_NE(revised.request_seed, s_.state().elections[0].request_seed);
}

TEST(SessionTest, ZeroRoundsEndsAfterTheInitialWinner) {
  auto cast = latent_cast({-1, 0, 1});
  auto c = basic_config(3, 0);
  c.participants = cast.ids;
  SyntheticBackend backend(SyntheticConfig{1, 0.0, 2});
  auto s = run_session(c, backend, cast.map);
  EXPECT_EQ(s.phase(), Phase::closed);
  EXPECT_FALSE(s.state().tally);
  EXPECT_EQ(s.state().final_statement()->provenance, mediator::Provenance::initial_winner);
  for (const auto& e : s.events()) {
    if (e.kind == EventKind::phase_advanced) {
      EXPECT_NE(e.payload["to"], "CollectingCritiques");
      EXPECT_NE(e.payload["to"], "FinalPreference");
    }
  }
}

TEST(SessionTest, ExactlyRoundsRevisedWinnersBeforeFinalPreference) {
  for (int rounds : {1, 2, 3}) {
    auto cast = latent_cast({-1.5, -0.2, 0.3, 0.8, 2.0});
    auto c = basic_config(5, rounds);
    c.participants = cast.ids;
    SyntheticBackend backend(SyntheticConfig{1, 0.0, 2});
    auto s = run_session(c, backend, cast.map);
    int revised = 0;
    bool final_seen = false;
    for (const auto& e : s.events()) {
      if (e.kind == EventKind::revised_winner_published) {
        EXPECT_FALSE(final_seen);
        ++revised;
      }
      if (e.kind == EventKind::phase_advanced && e.payload["to"] == "FinalPreference") final_seen = true;
    }
    EXPECT_EQ(revised, rounds);
    EXPECT_TRUE(final_seen);
    EXPECT_EQ(s.state().elections.size(), static_cast<size_t>(rounds + 1));
  }
}

TEST(SessionTest, DeadlineWithNoSubmissionsIsRefused) {
  auto s = Session::create(basic_config(3));
  EXPECT_EQ(code_of([&] { s.advance(AdvanceReason::facilitator); }), ErrorCode::phase);
  s.submit_opinion(ParticipantId("p2"), "Build more bike lanes");
  s.advance(AdvanceReason::facilitator);
  EXPECT_EQ(s.phase(), Phase::generating_initial);
  EXPECT_EQ(s.state().opinions.size(), 1u);
  EXPECT_EQ(code_of([&] { s.advance(AdvanceReason::deadline); }), ErrorCode::phase);
}

TEST(SessionTest, RequestIdsMakeCommandsIdempotent) {
  auto s = Session::create(basic_config(2));
  auto first = s.submit_opinion(ParticipantId("p1"), pos(1), "req-1");
  auto again = s.submit_opinion(ParticipantId("p1"), pos(1), "req-1");
  EXPECT_EQ(first.sequence, again.sequence);
  EXPECT_EQ(s.events().size(), 2u);
  auto last = s.submit_opinion(ParticipantId("p2"), pos(2), "req-2");
  EXPECT_EQ(last.phase, Phase::generating_initial);
  EXPECT_EQ(s.submit_opinion(ParticipantId("p2"), pos(2), "req-2").sequence, last.sequence);
  EXPECT_EQ(s.events().size(), 4u);
}

TEST(ReplayTest, CreationOnlyGivesInitialState) {
  auto s = Session::create(basic_config(4));
  auto state = replay(s.events());
  EXPECT_EQ(state.phase, Phase::collecting_opinions);
  EXPECT_EQ(to_json(state).dump(), to_json(s.state()).dump());
}

TEST(ReplayTest, LiveAndReplayAgreeByteForByte) {
  auto s = testing::run_fixture_session();
  auto a = to_json(replay(s.events())).dump();
  auto b = to_json(replay(s.events())).dump();
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, to_json(s.state()).dump());
  auto reparsed = parse_jsonl(to_jsonl(s.events()));
  EXPECT_EQ(reparsed, s.events());
  EXPECT_EQ(to_json(replay(reparsed)).dump(), a);
}

TEST(ReplayTest, RecordedFixtureMatchesLiveRun) {
  auto s = testing::run_fixture_session();
  const std::string live = to_jsonl(s.events());
  if (std::getenv("CONCORD_REGENERATE_FIXTURES")) {
    std::ofstream(testing::fixture_log_path()) << live;
  }
  std::ifstream in(testing::fixture_log_path());
  ASSERT_TRUE(in) << testing::fixture_log_path();
  std::stringstream recorded;
  recorded << in.rdbuf();
  EXPECT_EQ(recorded.str(), live);
  auto state = replay(parse_jsonl(recorded.str()));
  EXPECT_EQ(state.phase, Phase::closed);
  EXPECT_EQ(to_json(state).dump(), to_json(s.state()).dump());
}

TEST(ReplayTest, CorruptLogsAreRejected) {
  auto s = testing::run_fixture_session();
  auto log = s.events();
  auto gap = log;
  gap.erase(gap.begin() + 3);
  EXPECT_THROW(replay(gap), CorruptionError);
  auto dup = log;
  dup.insert(dup.begin() + 3, dup[3]);
  EXPECT_THROW(replay(dup), CorruptionError);
  auto tally = log;
  tally.back().payload["tally"]["initial"] = 99;
  EXPECT_THROW(replay(tally), CorruptionError);
  auto out_of_phase = std::vector<SessionEvent>(log.begin(), log.begin() + 2);
  out_of_phase.push_back(log[12]);
  out_of_phase.back().sequence = 3;
  EXPECT_THROW(replay(out_of_phase), CorruptionError);
  auto missing_create = std::vector<SessionEvent>(log.begin() + 1, log.end());
  EXPECT_THROW(replay(missing_create), CorruptionError);
  EXPECT_THROW(replay(std::vector<SessionEvent>{}), CorruptionError);
  auto bad_winner = log;
  for (auto& e : bad_winner) {
    if (e.kind == EventKind::winner_published) e.payload["winner"]["text"] = "something else";
  }
  EXPECT_THROW(replay(bad_winner), CorruptionError);
}

TEST(ReplayTest, JsonlErrorsNameTheLine) {
  try {
    parse_jsonl("{\"sequence\":1,\"timestamp\":0,\"kind\":\"session_created\",\"payload\":{}}\n{oops\n");
    FAIL();
  } catch (const CorruptionError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_jsonl(R"({"sequence":1,"timestamp":0,"kind":"party","payload":{}})"), CorruptionError);
}

TEST(RecoverTest, SettlesACommandInterruptedMidway) {
  auto full = testing::run_fixture_session().events();
  for (size_t cut = 1; cut <= full.size(); ++cut) {
    std::vector<SessionEvent> prefix(full.begin(), full.begin() + static_cast<long>(cut));
    auto s = Session::recover(prefix);
    ASSERT_LE(s.events().size(), full.size());
    for (size_t i = 0; i < s.events().size(); ++i) ASSERT_EQ(s.events()[i], full[i]) << "cut " << cut;
  }
}

TEST(DeterminismTest, SameSeedSameTranscript) {
  EXPECT_EQ(to_jsonl(testing::run_fixture_session().events()), to_jsonl(testing::run_fixture_session().events()));
  auto cast = latent_cast(testing::fixture_positions());
  auto c = testing::fixture_config(cast.ids);
  c.seed = 2025;
  SyntheticBackend backend(testing::fixture_backend_config());
  EXPECT_NE(to_jsonl(run_session(c, backend, cast.map).events()),
            to_jsonl(testing::run_fixture_session().events()));
}

TEST(SerialQueueTest, RunsTasksOneAtATimeInOrder) {
  SerialQueue q;
  std::vector<int> seen;
  std::atomic<int> running{0};
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&, t] {
      for (int i = 0; i < 100; ++i) {
        q.run([&] {
          EXPECT_EQ(running.fetch_add(1), 0);
          seen.push_back(t);
          running.fetch_sub(1);
          return 0;
        });
      }
    });
  }
  for (auto& th : threads) th.join();
  EXPECT_EQ(seen.size(), 800u);
  EXPECT_THROW(q.run([]() -> int { throw ValidationError("x"); }), ValidationError);
}

}  // namespace
}  // namespace concord::protocol
