#include "concord/hierarchy/hierarchy.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "concord/core/error.hpp"
#include "concord/core/fs.hpp"
#include "concord/core/rng.hpp"
#include "concord/mediator/embedder.hpp"

namespace concord::hierarchy {

using nlohmann::json;

namespace {

// Contributes an opinion and nothing else.
class OpinionOnlyAgent final : public protocol::ParticipantAgent {
 public:
  explicit OpinionOnlyAgent(std::string text) : text_(std::move(text)) {}
  std::optional<std::string> opinion(const std::string&) override { return text_; }
  std::optional<std::string> critique(const Statement&, int) override { return std::nullopt; }
  std::optional<ballots::Ranking> rank(const std::vector<Statement>&) override { return std::nullopt; }
  std::optional<protocol::FinalChoice> final_preference(const Statement&, const Statement&) override {
    return std::nullopt;
  }

 private:
  std::string text_;
};

std::string padded(size_t value, size_t count) {
  std::string digits = std::to_string(value);
  const size_t width = std::to_string(count == 0 ? 0 : count - 1).size();
  return std::string(width - std::min(width, digits.size()), '0') + digits;
}

bool retryable(const Error& e) {
  return e.code() == ErrorCode::backend || e.code() == ErrorCode::protocol ||
         e.code() == ErrorCode::generation_exhausted;
}

SessionRecord run_group(int level, size_t index, size_t count, const std::vector<Member>& members,
                        const HierarchySpec& spec, mediator::MediatorBackend& backend, const RunOptions& options) {
  SessionRecord record;
  record.level = level;
  record.id = SessionId("L" + std::to_string(level) + "-S" + padded(index, count));
  record.members = members;

  protocol::SessionConfig config = spec.level_config(level);
  for (const auto& m : members) config.participants.push_back(m.id);
  config.seed = count == 1 ? spec.seed : derive_seed(derive_seed(spec.seed, "level", static_cast<uint64_t>(level)), "session", index);

  std::vector<std::unique_ptr<OpinionOnlyAgent>> owned;
  protocol::AgentMap agents;
  for (const auto& m : members) {
    if (m.agent != nullptr) {
      agents[m.id] = m.agent;
    } else {
      owned.push_back(std::make_unique<OpinionOnlyAgent>(m.opinion));
      agents[m.id] = owned.back().get();
    }
  }

  std::optional<protocol::Session> session;
  while (record.attempts < spec.max_session_attempts) {
    ++record.attempts;
    try {
      if (!session) session = protocol::Session::create(config);
      protocol::drive(*session, backend, agents);
      record.error.clear();
      break;
    } catch (const Error& e) {
      record.error = e.what();
      if (!retryable(e)) break;
    }
  }
  if (session) {
    record.events = session->events();
    if (const Statement* s = session->state().final_statement()) record.winner = *s;
  }
  if (options.log_dir && !record.events.empty()) {
    record.log_path = *options.log_dir / (record.id.str() + ".jsonl");
    write_file_atomic(*record.log_path, protocol::to_jsonl(record.events));
  }
  return record;
}

double winner_dispersion(const std::vector<const Statement*>& winners) {
  if (winners.size() < 2) return 0.0;
  size_t dims = 256;
  if (auto p = mediator::parse_position(winners.front()->text)) dims = p->size();
  std::vector<std::vector<double>> pos;
  for (const auto* w : winners) pos.push_back(mediator::position_of(w->text, dims));
  double sum = 0.0;
  size_t pairs = 0;
  for (size_t i = 0; i < pos.size(); ++i) {
    for (size_t j = i + 1; j < pos.size(); ++j) {
      sum += mediator::euclidean_distance(pos[i], pos[j]);
      ++pairs;
    }
  }
  return sum / static_cast<double>(pairs);
}

LevelMetrics metrics_for(const LevelResult& level) {
  LevelMetrics m;
  m.level = level.level;
  m.sessions = level.sessions.size();
  m.succeeded = level.succeeded();
  std::vector<const Statement*> winners;
  size_t candidates = 0;
  size_t elections = 0;
  for (const auto& r : level.sessions) {
    if (r.winner) winners.push_back(&*r.winner);
    for (const auto& e : r.events) {
      if (e.kind == protocol::EventKind::candidates_generated ||
          e.kind == protocol::EventKind::revised_candidates_generated) {
        candidates += e.payload.at("candidates").size();
        ++elections;
      }
    }
  }
  m.mean_candidates = elections == 0 ? 0.0 : static_cast<double>(candidates) / static_cast<double>(elections);
  m.winner_dispersion = winner_dispersion(winners);
  return m;
}

ProvenanceNode build_tree(const SessionRecord& record, const std::map<std::string, const SessionRecord*>& by_id) {
  ProvenanceNode node{record.id.str(), record.level, record.winner->text, {}};
  for (const auto& m : record.members) {
    if (record.level == 0) {
      node.children.push_back(ProvenanceNode{m.id.str(), -1, m.opinion, {}});
    } else {
      node.children.push_back(build_tree(*by_id.at(m.id.str()), by_id));
    }
  }
  return node;
}

bool quorum_met(const LevelResult& level, double quorum) {
  const double need = std::ceil(quorum * static_cast<double>(level.sessions.size()) - 1e-9);
  return static_cast<double>(level.succeeded()) >= std::max(1.0, need);
}

}  // namespace

void HierarchySpec::validate() const {
  if (total_participants == 0) throw ValidationError("hierarchy needs at least one participant");
  if (branching.empty()) throw ValidationError("branching must list at least one group size");
  for (size_t f : branching) {
    if (f == 0) throw ValidationError("branching factors must be at least 1");
  }
  if (!(quorum > 0.0 && quorum <= 1.0)) throw ValidationError("quorum fraction must be in (0, 1]");
  if (max_session_attempts < 1) throw ValidationError("max_session_attempts must be at least 1");
  auto probe = session;
  probe.participants = {ParticipantId("probe")};
  probe.validate();
  for (const auto& [level, o] : overrides) {
    if (level < 0) throw ValidationError("level overrides must name levels >= 0");
    auto c = level_config(level);
    c.participants = {ParticipantId("probe")};
    c.validate();
  }
  // Group counts must shrink to one.
  size_t n = total_participants;
  for (int level = 0; n > 1; ++level) {
    const size_t groups = (n + group_size(level) - 1) / group_size(level);
    if (groups == n && static_cast<size_t>(level) + 1 >= branching.size()) {
      throw ValidationError("branching factor 1 cannot reduce " + std::to_string(n) + " groups to one");
    }
    n = groups;
  }
}

size_t HierarchySpec::group_size(int level) const {
  return branching[std::min(static_cast<size_t>(level), branching.size() - 1)];
}

protocol::SessionConfig HierarchySpec::level_config(int level) const {
  protocol::SessionConfig c = session;
  c.participants.clear();
  if (level > 0) c.rounds = 0;
  if (auto it = overrides.find(level); it != overrides.end()) {
    if (it->second.k) c.k = *it->second.k;
    if (it->second.rounds) c.rounds = *it->second.rounds;
    if (it->second.election) c.election = *it->second.election;
  }
  return c;
}

json to_json(const HierarchySpec& spec) {
  json session = protocol::to_json(spec.session);
  session.erase("participants");
  session.erase("seed");
  json levels = json::object();
  for (const auto& [level, o] : spec.overrides) {
    json entry = json::object();
    if (o.k) entry["k"] = *o.k;
    if (o.rounds) entry["rounds"] = *o.rounds;
    if (o.election) {
      entry["election_mode"] = o.election->kind == protocol::ElectionMode::Kind::simulated
                                   ? json{{"kind", "simulated"}}
                                   : json{{"kind", "human_vote"}, {"top_m", o.election->top_m}};
    }
    levels[std::to_string(level)] = entry;
  }
  return json{{"total_participants", spec.total_participants},
              {"branching", spec.branching},
              {"session", session},
              {"levels", levels},
              {"seed", spec.seed},
              {"quorum_fraction", spec.quorum},
              {"max_session_attempts", spec.max_session_attempts}};
}

HierarchySpec hierarchy_spec_from_json(const json& doc) {
  if (!doc.is_object()) throw ValidationError("hierarchy spec must be a JSON object");
  HierarchySpec spec;
  try {
    spec.total_participants = doc.at("total_participants").get<size_t>();
    spec.branching = doc.at("branching").get<std::vector<size_t>>();
    json session = doc.value("session", json::object());
    session["participants"] = json::array();
    if (!session.contains("question")) session["question"] = "Where can we find common ground?";
    spec.session = protocol::session_config_from_json(session);
    if (doc.contains("levels")) {
      for (const auto& [key, entry] : doc.at("levels").items()) {
        LevelOverride o;
        if (entry.contains("k")) o.k = entry.at("k").get<size_t>();
        if (entry.contains("rounds")) o.rounds = entry.at("rounds").get<int>();
        if (entry.contains("election_mode")) {
          json probe{{"question", "q"}, {"participants", json::array()}, {"election_mode", entry.at("election_mode")}};
          o.election = protocol::session_config_from_json(probe).election;
        }
        spec.overrides[std::stoi(key)] = o;
      }
    }
    spec.seed = doc.value("seed", uint64_t{0});
    spec.quorum = doc.value("quorum_fraction", spec.quorum);
    spec.max_session_attempts = doc.value("max_session_attempts", spec.max_session_attempts);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("hierarchy spec: ") + e.what());
  } catch (const std::logic_error& e) {
    throw ValidationError(std::string("hierarchy spec: bad level key: ") + e.what());
  }
  return spec;
}

std::vector<std::vector<size_t>> partition(size_t n, size_t group_size, uint64_t seed) {
  if (n == 0) throw ValidationError("cannot partition an empty population");
  if (group_size == 0) throw ValidationError("group size must be at least 1");
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  shuffle(order.begin(), order.end(), rng);
  const size_t groups = (n + group_size - 1) / group_size;
  const size_t base = n / groups;
  const size_t extra = n % groups;
  std::vector<std::vector<size_t>> out(groups);
  size_t at = 0;
  for (size_t g = 0; g < groups; ++g) {
    const size_t size = base + (g < extra ? 1 : 0);
    out[g].assign(order.begin() + static_cast<long>(at), order.begin() + static_cast<long>(at + size));
    std::sort(out[g].begin(), out[g].end());
    at += size;
  }
  return out;
}

size_t LevelResult::succeeded() const {
  return static_cast<size_t>(std::count_if(sessions.begin(), sessions.end(),
                                           [](const SessionRecord& r) { return r.succeeded(); }));
}

size_t ProvenanceNode::leaf_count() const {
  if (children.empty()) return level < 0 ? 1 : 0;
  size_t n = 0;
  for (const auto& c : children) n += c.leaf_count();
  return n;
}

size_t HierarchyResult::session_count() const {
  size_t n = 0;
  for (const auto& l : levels) n += l.sessions.size();
  return n;
}

LevelResult run_level(int level, const std::vector<std::vector<Member>>& groups, const HierarchySpec& spec,
                      mediator::MediatorBackend& backend, const RunOptions& options) {
  for (const auto& g : groups) {
    if (g.empty()) throw ValidationError("level " + std::to_string(level) + " has an empty group");
  }
  LevelResult result;
  result.level = level;
  result.sessions.resize(groups.size());
  size_t workers = options.parallelism == 0 ? std::max(1u, std::thread::hardware_concurrency()) : options.parallelism;
  workers = std::min(workers, groups.size());
  std::atomic<size_t> next{0};
  auto work = [&] {
    for (size_t i = next.fetch_add(1); i < groups.size(); i = next.fetch_add(1)) {
      result.sessions[i] = run_group(level, i, groups.size(), groups[i], spec, backend, options);
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  return result;
}

HierarchyResult run_hierarchy(const HierarchySpec& spec, const std::vector<Member>& population,
                              mediator::MediatorBackend& backend, const RunOptions& options) {
  spec.validate();
  if (population.size() != spec.total_participants) {
    throw ValidationError("population has " + std::to_string(population.size()) + " members, spec expects " +
                          std::to_string(spec.total_participants));
  }
  HierarchyResult result;
  std::vector<Member> inputs = population;
  for (int level = 0;; ++level) {
    auto parts = partition(inputs.size(), spec.group_size(level),
                           derive_seed(spec.seed, "partition", static_cast<uint64_t>(level)));
    std::vector<std::vector<Member>> groups;
    for (const auto& part : parts) {
      std::vector<Member> g;
      for (size_t i : part) g.push_back(inputs[i]);
      groups.push_back(std::move(g));
    }
    result.levels.push_back(run_level(level, groups, spec, backend, options));
    const LevelResult& done = result.levels.back();
    result.metrics.push_back(metrics_for(done));
    if (!quorum_met(done, spec.quorum)) {
      result.status = HierarchyResult::Status::aborted;
      result.message = "level " + std::to_string(level) + ": only " + std::to_string(done.succeeded()) + " of " +
                       std::to_string(done.sessions.size()) + " sessions succeeded";
      return result;
    }
    if (done.sessions.size() == 1) break;
    inputs.clear();
    for (const auto& r : done.sessions) {
      if (r.winner) inputs.push_back(Member{ParticipantId(r.id.str()), r.winner->text, nullptr});
    }
  }
  std::map<std::string, const SessionRecord*> by_id;
  for (const auto& l : result.levels) {
    for (const auto& r : l.sessions) {
      if (r.succeeded()) by_id[r.id.str()] = &r;
    }
  }
  const SessionRecord& top = result.levels.back().sessions.front();
  result.top = top.winner;
  result.tree = build_tree(top, by_id);
  return result;
}

json to_json(const ProvenanceNode& node) {
  json doc{{"id", node.id}, {"text", node.text}};
  if (node.level < 0) {
    doc["kind"] = "opinion";
    return doc;
  }
  doc["kind"] = "session";
  doc["level"] = node.level;
  json children = json::array();
  for (const auto& c : node.children) children.push_back(to_json(c));
  doc["children"] = children;
  return doc;
}

json manifest(const HierarchySpec& spec, const HierarchyResult& result) {
  json levels = json::array();
  for (size_t i = 0; i < result.levels.size(); ++i) {
    const auto& l = result.levels[i];
    const auto& m = result.metrics[i];
    json sessions = json::array();
    for (const auto& r : l.sessions) {
      json members = json::array();
      for (const auto& mem : r.members) members.push_back(mem.id.str());
      json s{{"id", r.id.str()}, {"members", members}, {"attempts", r.attempts}, {"events", r.events.size()}};
      s["winner"] = r.winner ? mediator::to_json(*r.winner) : json(nullptr);
      s["log"] = r.log_path ? json(r.log_path->string()) : json(nullptr);
      if (!r.error.empty()) s["error"] = r.error;
      sessions.push_back(s);
    }
    levels.push_back({{"level", l.level},
                      {"sessions", sessions},
                      {"metrics",
                       {{"sessions", m.sessions},
                        {"succeeded", m.succeeded},
                        {"mean_candidates", m.mean_candidates},
                        {"winner_dispersion", m.winner_dispersion}}}});
  }
  json doc{{"schema", "concord.hierarchy/v1"},
           {"spec", to_json(spec)},
           {"status", result.status == HierarchyResult::Status::complete ? "complete" : "aborted"},
           {"session_count", result.session_count()},
           {"levels", levels}};
  if (!result.message.empty()) doc["message"] = result.message;
  doc["top"] = result.top ? mediator::to_json(*result.top) : json(nullptr);
  doc["provenance"] = result.tree ? to_json(*result.tree) : json(nullptr);
  doc["leaf_count"] = result.tree ? result.tree->leaf_count() : 0;
  return doc;
}

Population population_from_json(const json& doc, uint64_t seed) {
  Population pop;
  auto add_latent = [&pop](std::vector<double> stance) {
    pop.agents.push_back(std::make_unique<protocol::LatentAgent>(stance));
    pop.members.push_back({ParticipantId("p" + std::to_string(pop.members.size() + 1)),
                           mediator::format_position(stance), pop.agents.back().get()});
  };
  if (!doc.is_object()) throw ValidationError("population must be an object");
  if (doc.contains("positions")) {
    for (const auto& p : doc.at("positions")) {
      add_latent(p.is_array() ? p.get<std::vector<double>>() : std::vector<double>{p.get<double>()});
    }
  } else if (doc.contains("opinions")) {
    for (const auto& o : doc.at("opinions")) {
      pop.members.push_back({ParticipantId(o.at("id").get<std::string>()), o.at("text").get<std::string>(), nullptr});
    }
  } else if (doc.contains("sample")) {
    const auto& s = doc.at("sample");
    const auto count = s.at("count").get<size_t>();
    const auto dims = s.value("dims", size_t{1});
    const double sd = s.value("sd", 1.0);
    if (dims == 0 || !(sd >= 0.0)) throw ValidationError("population sample needs dims >= 1 and sd >= 0");
    Rng rng(derive_seed(seed, "population"));
    for (size_t i = 0; i < count; ++i) {
      std::vector<double> x(dims);
      for (auto& v : x) v = sd * rng.normal();
      add_latent(std::move(x));
    }
  } else {
    throw ValidationError("population needs one of positions, opinions or sample");
  }
  if (pop.members.empty()) throw ValidationError("population is empty");
  return pop;
}

}  // namespace concord::hierarchy
