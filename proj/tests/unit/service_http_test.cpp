#include <gtest/gtest.h>

#include <httplib.h>

#include <filesystem>
#include <thread>

#include "concord/ballots/io.hpp"
#include "concord/core/fs.hpp"
#include "concord/service/server.hpp"
#include "support/service_client.hpp"
#include "support/sessions.hpp"

namespace concord::service {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class HttpHarness {
 public:
  explicit HttpHarness(std::optional<std::string> admin = std::nullopt)
      : dir_(fs::temp_directory_path() / ("concord-http-" + std::to_string(::getpid()) + "-" + std::to_string(next()))),
        store_((fs::remove_all(dir_), dir_)),
        backend_(testing::fixture_backend_config()),
        manager_(store_, backend_, options(admin)),
        server_(manager_) {
    port_ = server_.bind("127.0.0.1", 0);
    thread_ = std::thread([this] { server_.listen(); });
    server_.wait_until_ready();
  }
  ~HttpHarness() {
    server_.stop();
    thread_.join();
    fs::remove_all(dir_);
  }

  int port() const { return port_; }
  SessionManager& manager() { return manager_; }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port_);
    c.set_read_timeout(30);
    return c;
  }

  json call(const std::string& method, const std::string& path, const std::string& token, const json& body,
            int& status) const {
    auto c = client();
    httplib::Headers headers;
    if (!token.empty()) headers.emplace("Authorization", "Bearer " + token);
    auto res = method == "GET" ? c.Get(path, headers) : c.Post(path, headers, body.dump(), "application/json");
    if (!res) throw std::runtime_error("no response for " + path);
    status = res->status;
    return json::parse(res->body);
  }

  json ok(const std::string& method, const std::string& path, const std::string& token, const json& body = {}) const {
    int status = 0;
    auto doc = call(method, path, token, body.is_null() ? json::object() : body, status);
    if (status >= 300) throw std::runtime_error(path + " -> " + std::to_string(status) + " " + doc.dump());
    return doc;
  }

 private:
  static int next() {
    static int n = 0;
    return n++;
  }
  ServiceOptions options(std::optional<std::string> admin) {
    ServiceOptions o;
    auto tokens = std::make_shared<int>(0);
    auto ids = std::make_shared<int>(0);
    o.token_source = [tokens] { return "tok" + std::to_string(++*tokens); };
    o.id_source = [ids] { return "s" + std::to_string(++*ids); };
    o.admin_token = std::move(admin);
    o.hierarchy_dir = dir_ / "hierarchies";
    return o;
  }

  fs::path dir_;
  FileStore store_;
  mediator::SyntheticBackend backend_;
  SessionManager manager_;
  Server server_;
  int port_ = -1;
  std::thread thread_;
};

json create_body(const protocol::SessionConfig& config) { return protocol::to_json(config); }

// Same loop as the in-process client, over the wire and without request ids.
std::string drive_over_http(const HttpHarness& h, const protocol::SessionConfig& config,
                            const protocol::AgentMap& agents) {
  const auto created = h.ok("POST", "/sessions", "", create_body(config));
  const std::string id = created.at("session");
  const std::string fac = created.at("facilitator_token");
  const std::string base = "/sessions/" + id;
  for (int guard = 0; guard < 1000; ++guard) {
    const auto view = h.ok("GET", base + "/state", fac);
    const std::string phase = view.at("phase");
    if (phase == "Closed") return id;
    for (const auto& p : view.at("pending_participants")) {
      const ParticipantId pid(p.get<std::string>());
      const std::string token = created.at("participant_tokens").at(pid.str());
      const auto mine = h.ok("GET", base + "/state", token);
      if (mine.at("phase") != phase || mine.at("awaiting").is_null()) continue;
      auto& agent = *agents.at(pid);
      const std::string action = mine.at("awaiting");
      const auto& published = mine.at("published");
      if (action == "opinion") {
        if (auto text = agent.opinion(config.question)) h.ok("POST", base + "/opinions", token, {{"text", *text}});
      } else if (action == "critique") {
        const auto winner = testing::statement_from_view(published.back().at("winner"));
        if (auto text = agent.critique(winner, mine.at("round").get<int>())) {
          h.ok("POST", base + "/critiques", token, {{"text", *text}});
        }
      } else if (action == "ranking") {
        std::vector<mediator::Statement> slate;
        for (const auto& s : published.back().at("slate")) slate.push_back(testing::statement_from_view(s));
        if (auto ranking = agent.rank(slate)) {
          h.ok("POST", base + "/rankings", token, ballots::to_json(*ranking));
        }
      } else if (action == "final_preference") {
        const auto a = testing::statement_from_view(published.front().at("winner"));
        const auto b = testing::statement_from_view(published.back().at("winner"));
        if (auto choice = agent.final_preference(a, b)) {
          h.ok("POST", base + "/final-preference", token,
               {{"choice", *choice == protocol::FinalChoice::initial_winner ? "initial" : "revised"}});
        }
      }
    }
    const auto after = h.ok("GET", base + "/state", fac);
    if (after.at("phase") == phase && after.at("round") == view.at("round")) h.ok("POST", base + "/advance", fac);
  }
  throw std::runtime_error("session did not close");
}

TEST(HttpServiceTest, FixtureSessionOverHttpMatchesTranscript) {
  HttpHarness h;
  auto cast = testing::latent_cast(testing::fixture_positions());
  const auto id = drive_over_http(h, testing::fixture_config(cast.ids), cast.map);
  EXPECT_EQ(protocol::to_jsonl(h.manager().events(SessionId(id))), read_file(testing::fixture_log_path()));
  const auto analytics = h.ok("GET", "/sessions/" + id + "/analytics", "tok3");
  EXPECT_EQ(analytics.at("elections").size(), 2u);
}

TEST(HttpServiceTest, ErrorStatuses) {
  HttpHarness h;
  auto cast = testing::latent_cast(testing::fixture_positions());
  const auto created = h.ok("POST", "/sessions", "", create_body(testing::fixture_config(cast.ids)));
  const std::string base = "/sessions/" + created.at("session").get<std::string>();
  const std::string p1 = created.at("participant_tokens").at("p1");
  const std::string fac = created.at("facilitator_token");
  int status = 0;
  auto doc = h.call("POST", base + "/final-preference", p1, {{"choice", "revised"}}, status);
  EXPECT_EQ(status, 409);
  EXPECT_EQ(doc.at("error").at("phase"), "CollectingOpinions");
  h.call("GET", base + "/state", "", json::object(), status);
  EXPECT_EQ(status, 401);
  h.call("GET", base + "/state", "bogus", json::object(), status);
  EXPECT_EQ(status, 401);
  h.call("POST", base + "/opinions", fac, {{"text", "x"}}, status);
  EXPECT_EQ(status, 403);
  h.call("POST", base + "/advance", p1, json::object(), status);
  EXPECT_EQ(status, 403);
  h.call("GET", "/sessions/nope/state", "x", json::object(), status);
  EXPECT_EQ(status, 404);
  h.call("POST", base + "/opinions", p1, {{"txt", "x"}}, status);
  EXPECT_EQ(status, 400);
  h.call("POST", "/sessions", "", {{"question", "q"}}, status);
  EXPECT_EQ(status, 400);
  h.call("GET", base + "/analytics", p1, json::object(), status);
  EXPECT_EQ(status, 403);
  // Before any election there is nothing to estimate yet.
  doc = h.call("GET", base + "/analytics", fac, json::object(), status);
  EXPECT_EQ(status, 200);
  EXPECT_TRUE(doc.at("elections").empty());
}

TEST(HttpServiceTest, RequestIdRepeatsOriginalResult) {
  HttpHarness h;
  auto cast = testing::latent_cast(testing::fixture_positions());
  auto body = create_body(testing::fixture_config(cast.ids));
  body["request_id"] = "c1";
  const auto a = h.ok("POST", "/sessions", "", body);
  const auto b = h.ok("POST", "/sessions", "", body);
  EXPECT_EQ(a, b);
  const std::string base = "/sessions/" + a.at("session").get<std::string>();
  const std::string p1 = a.at("participant_tokens").at("p1");
  const auto first = h.ok("POST", base + "/opinions", p1, {{"text", "position:[0.1]"}, {"request_id", "o1"}});
  const auto again = h.ok("POST", base + "/opinions", p1, {{"text", "position:[0.1]"}, {"request_id", "o1"}});
  EXPECT_EQ(first, again);
  EXPECT_EQ(h.manager().events(SessionId(a.at("session").get<std::string>())).size(), 2u);
}

TEST(HttpServiceTest, AdminTokenRequiredForCreation) {
  HttpHarness h(std::string("letmein"));
  auto cast = testing::latent_cast(testing::fixture_positions());
  const auto body = create_body(testing::fixture_config(cast.ids));
  int status = 0;
  h.call("POST", "/sessions", "", body, status);
  EXPECT_EQ(status, 401);
  h.call("POST", "/sessions", "wrong", body, status);
  EXPECT_EQ(status, 403);
  h.call("POST", "/sessions", "letmein", body, status);
  EXPECT_EQ(status, 201);
}

TEST(HttpServiceTest, EventStreamRunsToClosed) {
  HttpHarness h;
  auto cast = testing::latent_cast(testing::fixture_positions());
  const auto id = drive_over_http(h, testing::fixture_config(cast.ids), cast.map);
  const auto log = h.manager().events(SessionId(id));
  const auto fac = h.manager().authenticate(SessionId(id), "tok1");
  ASSERT_EQ(fac.role, Role::facilitator);
  auto c = h.client();
  std::string stream;
  auto res = c.Get("/sessions/" + id + "/events?token=tok2&after=3", [&](const char* data, size_t n) {
    stream.append(data, n);
    return true;
  });
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(stream.rfind("id: 4\n", 0), 0u) << stream.substr(0, 80);
  size_t frames = 0;
  for (size_t pos = 0; (pos = stream.find("\n\n", pos)) != std::string::npos; pos += 2) ++frames;
  EXPECT_EQ(frames, log.size() - 3);
  EXPECT_NE(stream.find("event: session_closed\n"), std::string::npos);
  EXPECT_NE(stream.find("\"phase\":\"Closed\""), std::string::npos);
  // Frames carry no text, so a participant stream cannot leak anything.
  EXPECT_EQ(stream.find("position:"), std::string::npos);
}

TEST(HttpServiceTest, EventStreamFollowsALiveSession) {
  HttpHarness h;
  auto cast = testing::latent_cast(testing::fixture_positions());
  const auto config = testing::fixture_config(cast.ids);
  std::string stream;
  const auto created = h.ok("POST", "/sessions", "", create_body(config));
  const std::string id = created.at("session");
  // Opened before anything happens, so every event arrives live.
  std::thread listener([&h, &stream, id] {
    auto c = h.client();
    c.Get("/sessions/" + id + "/events?token=tok1", [&](const char* data, size_t n) {
      stream.append(data, n);
      return true;
    });
  });
  const std::string base = "/sessions/" + id;
  auto token = [&](const ParticipantId& p) { return created.at("participant_tokens").at(p.str()).get<std::string>(); };
  try {
    for (const auto& p : cast.ids) h.ok("POST", base + "/opinions", token(p), {{"text", *cast.map.at(p)->opinion("")}});
    for (const auto& p : cast.ids) h.ok("POST", base + "/critiques", token(p), {{"text", "position:[0.3]"}});
    for (const auto& p : cast.ids) h.ok("POST", base + "/final-preference", token(p), {{"choice", "revised"}});
  } catch (const std::exception& e) {
    ADD_FAILURE() << e.what();
    h.manager().advance(SessionId(id), h.manager().authenticate(SessionId(id), "tok1"));
  }
  listener.join();
  EXPECT_NE(stream.find("event: session_closed\n"), std::string::npos) << stream;
  EXPECT_EQ(stream.rfind("id: 1\n", 0), 0u);
}

TEST(HttpServiceTest, HierarchyEndpoints) {
  HttpHarness h;
  json positions = json::array();
  for (int i = 0; i < 25; ++i) positions.push_back(-1.2 + 0.1 * i);
  json body{{"spec", {{"branching", {5}}, {"session", {{"question", "q"}, {"k", 6}}}, {"seed", 9}}},
            {"population", {{"positions", positions}}}};
  const auto started = h.ok("POST", "/hierarchies", "", body);
  const std::string id = started.at("id");
  json doc;
  for (int i = 0; i < 600; ++i) {
    int status = 0;
    doc = h.call("GET", "/hierarchies/" + id, "", json::object(), status);
    if (status == 200) break;
    ASSERT_EQ(status, 202);
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  EXPECT_EQ(doc.at("status"), "complete") << doc.dump();
  EXPECT_EQ(doc.at("leaf_count"), 25);
  int status = 0;
  h.call("GET", "/hierarchies/h-missing", "", json::object(), status);
  EXPECT_EQ(status, 404);
}

}  // namespace
}  // namespace concord::service
