#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "concord/core/error.hpp"
#include "concord/core/fs.hpp"
#include "concord/mediator/synthetic_backend.hpp"
#include "concord/service/manager.hpp"
#include "support/service_client.hpp"
#include "support/sessions.hpp"

namespace concord::service {
namespace {

namespace fs = std::filesystem;
using testing::FaultyStore;
using testing::ManagerClient;
using testing::SimulatedCrash;

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("concord-service-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

ServiceOptions counting_options() {
  ServiceOptions o;
  auto tokens = std::make_shared<int>(0);
  auto ids = std::make_shared<int>(0);
  o.token_source = [tokens] { return "tok" + std::to_string(++*tokens); };
  o.id_source = [ids] { return "s" + std::to_string(++*ids); };
  return o;
}

struct Fixture {
  testing::LatentCast cast = testing::latent_cast(testing::fixture_positions());
  mediator::SyntheticBackend backend{testing::fixture_backend_config()};
  protocol::SessionConfig config = testing::fixture_config(cast.ids);
};

TEST(FileStoreTest, TornTailIsTruncated) {
  TempDir dir;
  FileStore store(dir.path());
  auto log = testing::run_fixture_session().events();
  store.create(SessionId("s1"), {{"id", "s1"}});
  store.append(SessionId("s1"), std::span(log.data(), 3));
  {
    std::ofstream out(store.session_dir(SessionId("s1")) / "events.jsonl", std::ios::app);
    out << R"({"sequence":4,"timest)";
  }
  auto loaded = store.load(SessionId("s1"));
  EXPECT_EQ(loaded.events.size(), 3u);
  EXPECT_EQ(loaded.truncated_bytes, 21u);
  EXPECT_EQ(read_file(store.session_dir(SessionId("s1")) / "events.jsonl"),
            protocol::to_jsonl({log.begin(), log.begin() + 3}));
}

TEST(FileStoreTest, BrokenCompleteLineIsCorruption) {
  TempDir dir;
  FileStore store(dir.path());
  store.create(SessionId("s1"), {{"id", "s1"}});
  {
    std::ofstream out(store.session_dir(SessionId("s1")) / "events.jsonl");
    out << "{not json}\n";
  }
  EXPECT_THROW(store.load(SessionId("s1")), CorruptionError);
}

TEST(FileStoreTest, RejectsPathLikeIds) {
  TempDir dir;
  FileStore store(dir.path());
  EXPECT_THROW(store.create(SessionId("../x"), {}), ValidationError);
  EXPECT_THROW(store.create(SessionId(""), {}), ValidationError);
}

TEST(ManagerTest, LibraryRunMatchesFixtureTranscript) {
  TempDir dir;
  FileStore store(dir.path());
  Fixture f;
  SessionManager m(store, f.backend, counting_options());
  ManagerClient client(f.config, f.cast.map, false);
  const auto id = client.run(m);
  EXPECT_EQ(protocol::to_jsonl(m.events(id)), read_file(testing::fixture_log_path()));
  EXPECT_EQ(read_file(store.session_dir(id) / "events.jsonl"), read_file(testing::fixture_log_path()));
}

TEST(ManagerTest, TokensAndRoles) {
  TempDir dir;
  FileStore store(dir.path());
  Fixture f;
  SessionManager m(store, f.backend, counting_options());
  auto created = m.create(f.config);
  const auto id = created.id;
  try {
    m.authenticate(id, "nope");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::authorization);
    EXPECT_EQ(dynamic_cast<const ForbiddenError*>(&e), nullptr);
  }
  const auto fac = m.authenticate(id, created.facilitator_token);
  const auto p1 = m.authenticate(id, created.participant_tokens.at(ParticipantId("p1")));
  EXPECT_EQ(fac.role, Role::facilitator);
  EXPECT_EQ(*p1.participant, ParticipantId("p1"));
  EXPECT_THROW(m.submit_opinion(id, fac, "hello"), ForbiddenError);
  EXPECT_THROW(m.advance(id, p1), ForbiddenError);
  EXPECT_THROW(m.authenticate(SessionId("missing"), "x"), Error);
}

TEST(ManagerTest, AdminTokenGuardsCreation) {
  TempDir dir;
  FileStore store(dir.path());
  Fixture f;
  auto options = counting_options();
  options.admin_token = "root";
  SessionManager m(store, f.backend, options);
  EXPECT_NO_THROW(m.check_admin(std::string("root")));
  EXPECT_THROW(m.check_admin(std::nullopt), Error);
  EXPECT_THROW(m.check_admin(std::string("guest")), ForbiddenError);
}

TEST(ManagerTest, WrongPhaseIsPhaseError) {
  TempDir dir;
  FileStore store(dir.path());
  Fixture f;
  SessionManager m(store, f.backend, counting_options());
  auto created = m.create(f.config);
  const auto p1 = m.authenticate(created.id, created.participant_tokens.at(ParticipantId("p1")));
  try {
    m.record_final_preference(created.id, p1, protocol::FinalChoice::revised_winner);
    FAIL();
  } catch (const PhaseError& e) {
    EXPECT_EQ(e.phase(), "CollectingOpinions");
  }
}

TEST(ManagerTest, CaucusProjection) {
  TempDir dir;
  FileStore store(dir.path());
  Fixture f;
  SessionManager m(store, f.backend, counting_options());
  auto created = m.create(f.config);
  const auto id = created.id;
  const auto p1 = m.authenticate(id, created.participant_tokens.at(ParticipantId("p1")));
  const auto p2 = m.authenticate(id, created.participant_tokens.at(ParticipantId("p2")));
  m.submit_opinion(id, p1, "fund the night buses first");
  m.submit_opinion(id, p2, "cut fares before adding routes");
  const auto view = m.project(id, p1);
  EXPECT_EQ(view.at("you").at("opinion"), "fund the night buses first");
  EXPECT_EQ(view.at("awaiting"), nullptr);
  EXPECT_EQ(view.dump().find("cut fares"), std::string::npos);
  const auto fac = m.project(id, m.authenticate(id, created.facilitator_token));
  EXPECT_EQ(fac.dump().find("night buses"), std::string::npos);
  EXPECT_EQ(fac.at("progress").at("pending"), 3);
  EXPECT_EQ(fac.at("pending_participants").size(), 3u);
}

// Opinions and critiques are free text that never appears among generated
// candidates, so any leak is visible as a substring.
class SecretAgent final : public protocol::ParticipantAgent {
 public:
  explicit SecretAgent(std::string name) : name_(std::move(name)) {}
  std::optional<std::string> opinion(const std::string&) override { return "secret opinion of " + name_; }
  std::optional<std::string> critique(const mediator::Statement&, int round) override {
    return "secret critique " + std::to_string(round) + " of " + name_;
  }
  std::optional<ballots::Ranking> rank(const std::vector<mediator::Statement>&) override { return std::nullopt; }
  std::optional<protocol::FinalChoice> final_preference(const mediator::Statement&,
                                                        const mediator::Statement&) override {
    return protocol::FinalChoice::revised_winner;
  }

 private:
  std::string name_;
};

class ObservingManagerTest : public ::testing::TestWithParam<bool> {};

TEST_P(ObservingManagerTest, NoResponseLeaksOtherParticipantsText) {
  const bool disclose = GetParam();
  TempDir dir;
  FileStore store(dir.path());
  Fixture f;
  f.config.disclose_after_close = disclose;
  f.config.rounds = 2;
  SessionManager m(store, f.backend, counting_options());
  std::vector<std::unique_ptr<SecretAgent>> agents;
  protocol::AgentMap map;
  for (const auto& p : f.cast.ids) {
    agents.push_back(std::make_unique<SecretAgent>(p.str()));
    map[p] = agents.back().get();
  }
  ManagerClient client(f.config, map);
  const auto id = client.run(m);
  // Replay every prefix and inspect what each role could have seen.
  const auto log = m.events(id);
  for (size_t n = 1; n <= log.size(); ++n) {
    TempDir prefix_dir;
    FileStore prefix_store(prefix_dir.path());
    prefix_store.create(id, {{"id", id.str()},
                             {"facilitator_token", "fac"},
                             {"participant_tokens", {{"p1", "t1"}, {"p2", "t2"}, {"p3", "t3"}, {"p4", "t4"}, {"p5", "t5"}}}});
    prefix_store.append(id, std::span(log.data(), n));
    SessionManager viewer(prefix_store, f.backend, counting_options());
    viewer.recover_all();
    const bool closed = viewer.project(id, viewer.authenticate(id, "fac")).at("phase") == "Closed";
    for (int who = 0; who <= 5; ++who) {
      const auto caller = viewer.authenticate(id, who == 0 ? "fac" : "t" + std::to_string(who));
      const auto text = viewer.project(id, caller).dump();
      for (int other = 1; other <= 5; ++other) {
        if (other == who) continue;
        const auto needle = " of p" + std::to_string(other) + "\"";
        if (closed && disclose) continue;
        EXPECT_EQ(text.find(needle), std::string::npos) << "prefix " << n << " viewer " << who;
      }
    }
    if (n == log.size()) {
      const auto final_view = viewer.project(id, viewer.authenticate(id, "t1")).dump();
      EXPECT_EQ(final_view.find("secret opinion of p2") != std::string::npos, disclose);
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Disclosure, ObservingManagerTest, ::testing::Values(false, true));

TEST(ManagerTest, RequestIdsAreIdempotent) {
  TempDir dir;
  FileStore store(dir.path());
  Fixture f;
  SessionManager m(store, f.backend, counting_options());
  auto created = m.create(f.config, std::string("make"));
  auto again = m.create(f.config, std::string("make"));
  EXPECT_EQ(created.id, again.id);
  EXPECT_EQ(created.facilitator_token, again.facilitator_token);
  EXPECT_EQ(m.sessions().size(), 1u);
  const auto p1 = m.authenticate(created.id, created.participant_tokens.at(ParticipantId("p1")));
  const auto first = m.submit_opinion(created.id, p1, "position:[0.5]", std::string("r1"));
  const auto second = m.submit_opinion(created.id, p1, "position:[0.5]", std::string("r1"));
  EXPECT_EQ(first.sequence, second.sequence);
  EXPECT_EQ(m.events(created.id).size(), 2u);
  EXPECT_THROW(m.submit_opinion(created.id, p1, "position:[0.5]", std::string("r2")), Error);
}

TEST(ManagerTest, ProjectionSurvivesRestartMidCritiques) {
  TempDir dir;
  Fixture f;
  nlohmann::json before_p1, before_fac;
  SessionId id;
  std::string fac_token, p1_token;
  {
    FileStore store(dir.path());
    SessionManager m(store, f.backend, counting_options());
    auto created = m.create(f.config);
    id = created.id;
    fac_token = created.facilitator_token;
    p1_token = created.participant_tokens.at(ParticipantId("p1"));
    for (const auto& p : f.cast.ids) {
      const auto c = m.authenticate(id, created.participant_tokens.at(p));
      m.submit_opinion(id, c, *f.cast.map.at(p)->opinion(""));
    }
    for (int i = 0; i < 2; ++i) {
      const auto c = m.authenticate(id, created.participant_tokens.at(f.cast.ids[static_cast<size_t>(i)]));
      m.submit_critique(id, c, "position:[0.1]");
    }
    ASSERT_EQ(m.project(id, m.authenticate(id, fac_token)).at("phase"), "CollectingCritiques");
    before_p1 = m.project(id, m.authenticate(id, p1_token));
    before_fac = m.project(id, m.authenticate(id, fac_token));
  }
  FileStore store(dir.path());
  SessionManager m(store, f.backend, counting_options());
  auto report = m.recover_all();
  ASSERT_EQ(report.recovered.size(), 1u);
  EXPECT_EQ(m.project(id, m.authenticate(id, p1_token)), before_p1);
  EXPECT_EQ(m.project(id, m.authenticate(id, fac_token)), before_fac);
}

TEST(ManagerTest, DeletedSnapshotIsRebuiltIdentically) {
  TempDir dir;
  Fixture f;
  SessionId id;
  std::string snapshot;
  {
    FileStore store(dir.path());
    SessionManager m(store, f.backend, counting_options());
    ManagerClient client(f.config, f.cast.map);
    id = client.run(m);
    snapshot = read_file(store.session_dir(id) / "snapshot.json");
  }
  FileStore store(dir.path());
  fs::remove(store.session_dir(id) / "snapshot.json");
  SessionManager m(store, f.backend, counting_options());
  m.recover_all();
  EXPECT_EQ(read_file(store.session_dir(id) / "snapshot.json"), snapshot);
}

TEST(ManagerTest, SequenceGapIsQuarantined) {
  TempDir dir;
  Fixture f;
  SessionId id;
  {
    FileStore store(dir.path());
    SessionManager m(store, f.backend, counting_options());
    ManagerClient client(f.config, f.cast.map);
    id = client.run(m);
  }
  FileStore store(dir.path());
  const auto path = store.session_dir(id) / "events.jsonl";
  auto log = protocol::parse_jsonl(read_file(path));
  log.erase(log.begin() + 4);
  write_file_atomic(path, protocol::to_jsonl(log));
  SessionManager m(store, f.backend, counting_options());
  auto report = m.recover_all();
  ASSERT_EQ(report.quarantined.size(), 1u);
  EXPECT_TRUE(report.recovered.empty());
  EXPECT_THROW(m.authenticate(id, "x"), QuarantinedError);
  EXPECT_TRUE(fs::exists(dir.path() / "quarantine" / id.str() / "diagnostic.txt"));
  EXPECT_FALSE(fs::exists(store.session_dir(id)));
}

class FlakyGenerator final : public mediator::MediatorBackend {
 public:
  explicit FlakyGenerator(int failures) : failures_(failures) {}
  std::vector<std::string> sample_statements(const mediator::GenerationRequest& req) override {
    if (failures_-- > 0) throw BackendError(3, "model endpoint unavailable");
    return inner_.sample_statements(req);
  }
  mediator::ScoreRow score(const mediator::RewardQuery& q) override { return inner_.score(q); }
  std::string id() const override { return inner_.id(); }

 private:
  mediator::SyntheticBackend inner_{testing::fixture_backend_config()};
  int failures_;
};

TEST(ManagerTest, BackendStallIsRetryable) {
  TempDir dir;
  FileStore store(dir.path());
  Fixture f;
  FlakyGenerator flaky(1);
  SessionManager m(store, flaky, counting_options());
  auto created = m.create(f.config);
  const auto id = created.id;
  for (size_t i = 0; i + 1 < f.cast.ids.size(); ++i) {
    m.submit_opinion(id, m.authenticate(id, created.participant_tokens.at(f.cast.ids[i])),
                     *f.cast.map.at(f.cast.ids[i])->opinion(""));
  }
  const auto last = m.authenticate(id, created.participant_tokens.at(ParticipantId("p5")));
  try {
    m.submit_opinion(id, last, *f.cast.map.at(ParticipantId("p5"))->opinion(""), std::string("op5"));
    FAIL() << "expected a stall";
  } catch (const StalledError& e) {
    EXPECT_EQ(e.outcome().phase, protocol::Phase::generating_initial);
  }
  const auto fac = m.authenticate(id, created.facilitator_token);
  EXPECT_FALSE(m.project(id, fac).at("stall").is_null());
  // The opinion is stored; retrying the same request completes the backend work.
  const auto outcome = m.submit_opinion(id, last, *f.cast.map.at(ParticipantId("p5"))->opinion(""), std::string("op5"));
  EXPECT_EQ(outcome.phase, protocol::Phase::collecting_critiques);
  EXPECT_TRUE(m.project(id, fac).at("stall").is_null());
}

TEST(ManagerTest, NotificationsFollowTheLog) {
  TempDir dir;
  FileStore store(dir.path());
  Fixture f;
  SessionManager m(store, f.backend, counting_options());
  ManagerClient client(f.config, f.cast.map);
  const auto id = client.run(m);
  bool closed = false;
  auto notes = m.wait_notifications(id, 0, std::chrono::milliseconds(0), closed);
  EXPECT_TRUE(closed);
  const auto log = m.events(id);
  ASSERT_EQ(notes.size(), log.size());
  EXPECT_EQ(notes.back().phase, "Closed");
  EXPECT_EQ(notes.back().kind, "session_closed");
  auto tail = m.wait_notifications(id, log.size() - 2, std::chrono::milliseconds(0), closed);
  EXPECT_EQ(tail.size(), 2u);
}

TEST(ManagerTest, HierarchyJobProducesManifest) {
  TempDir dir;
  FileStore store(dir.path());
  mediator::SyntheticBackend backend(testing::fixture_backend_config());
  auto options = counting_options();
  options.hierarchy_dir = dir.path() / "hierarchies";
  SessionManager m(store, backend, options);
  hierarchy::HierarchySpec spec;
  spec.total_participants = 30;
  spec.branching = {5};
  spec.session.question = "q";
  spec.session.k = 6;
  spec.seed = 3;
  std::vector<hierarchy::Member> members;
  std::vector<std::unique_ptr<protocol::ParticipantAgent>> agents;
  for (int i = 0; i < 30; ++i) {
    const std::vector<double> x{i * 0.1 - 1.5};
    agents.push_back(std::make_unique<protocol::LatentAgent>(x));
    members.push_back({ParticipantId("p" + std::to_string(i + 1)), mediator::format_position(x), agents.back().get()});
  }
  const auto leaf_text = members[7].opinion;
  const auto hid = m.start_hierarchy(spec, members, std::move(agents));
  m.wait_hierarchies();
  const auto doc = m.hierarchy_status(hid);
  EXPECT_EQ(doc.at("status"), "complete") << doc.dump();
  EXPECT_TRUE(fs::exists(dir.path() / "hierarchies" / hid / "manifest.json"));
  EXPECT_EQ(doc.dump().find("\"" + leaf_text + "\""), std::string::npos);
}

// Runs the scripted session against a store that dies after `budget` bytes,
// restarts on the same directory, lets the clients carry on, and compares
// with the uninterrupted run.
TEST(CrashRecoveryTest, EveryKillPointConverges) {
  Fixture f;
  std::string reference_log;
  nlohmann::json reference_state;
  size_t total = 0;
  {
    TempDir dir;
    FaultyStore store(dir.path(), SIZE_MAX);
    SessionManager m(store, f.backend, counting_options());
    ManagerClient client(f.config, f.cast.map);
    const auto id = client.run(m);
    reference_log = protocol::to_jsonl(m.events(id));
    reference_state = protocol::to_json(protocol::replay(m.events(id)));
    total = store.written();
  }
  std::vector<size_t> points;
  for (size_t i = 0; i < 60; ++i) points.push_back(total * i / 60);
  std::mt19937_64 gen(5);
  for (int i = 0; i < 30; ++i) points.push_back(gen() % total);
  ASSERT_GE(points.size(), 50u);
  int crashed = 0;
  for (size_t budget : points) {
    TempDir dir;
    ManagerClient client(f.config, f.cast.map);
    bool died = false;
    {
      FaultyStore store(dir.path(), budget);
      SessionManager m(store, f.backend, counting_options());
      try {
        client.run(m);
      } catch (const SimulatedCrash&) {
        died = true;
      }
    }
    crashed += died ? 1 : 0;
    FileStore store(dir.path());
    SessionManager m(store, f.backend, counting_options());
    auto report = m.recover_all();
    EXPECT_TRUE(report.quarantined.empty()) << "budget " << budget;
    // Whatever survived must already be a valid state-machine prefix.
    for (const auto& sid : m.sessions()) {
      EXPECT_NO_THROW(protocol::replay(m.events(sid))) << "budget " << budget;
    }
    const auto id = client.run(m);
    const auto log = m.events(id);
    EXPECT_EQ(protocol::to_jsonl(log), reference_log) << "budget " << budget;
    EXPECT_EQ(protocol::to_json(protocol::replay(log)), reference_state) << "budget " << budget;
    EXPECT_EQ(read_file(store.session_dir(id) / "events.jsonl"), reference_log) << "budget " << budget;
  }
  EXPECT_GE(crashed, 50);
}

}  // namespace
}  // namespace concord::service
