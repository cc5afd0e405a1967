#pragma once

// Hierarchical aggregation: participants are split into tables, each table
// runs a session, and table winners become the opinions of the next level's
// sessions until a single statement remains.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "concord/mediator/backend.hpp"
#include "concord/protocol/driver.hpp"

namespace concord::hierarchy {

using mediator::Statement;

struct LevelOverride {
  std::optional<size_t> k;
  std::optional<int> rounds;
  std::optional<protocol::ElectionMode> election;

  friend bool operator==(const LevelOverride&, const LevelOverride&) = default;
};

struct HierarchySpec {
  size_t total_participants = 0;
  // Group size per level, tables first. When the list runs out the last
  // factor repeats until one group remains.
  std::vector<size_t> branching;
  // Template for every session; its participants and seed are replaced.
  // Levels above 0 default to no critique rounds.
  protocol::SessionConfig session;
  std::map<int, LevelOverride> overrides;
  uint64_t seed = 0;
  // Fraction of a level's sessions that must succeed for the run to go on.
  double quorum = 0.9;
  int max_session_attempts = 2;

  void validate() const;
  size_t group_size(int level) const;
  protocol::SessionConfig level_config(int level) const;
};

nlohmann::json to_json(const HierarchySpec& spec);
HierarchySpec hierarchy_spec_from_json(const nlohmann::json& doc);

// Seeded uniform partition of n items into ceil(n / group_size) groups whose
// sizes differ by at most one. Each group lists item indices ascending.
std::vector<std::vector<size_t>> partition(size_t n, size_t group_size, uint64_t seed);

// One input to a session: a participant at level 0, a lower-level winner above.
struct Member {
  ParticipantId id;
  std::string opinion;
  // Optional behaviour for critiques and final preferences; without one the
  // member only contributes its opinion.
  protocol::ParticipantAgent* agent = nullptr;
};

// Members plus the agents they point at. Shared by the service and the CLI.
struct Population {
  std::vector<Member> members;
  std::vector<std::unique_ptr<protocol::ParticipantAgent>> agents;
};

// Accepted forms:
//   {"positions": [x, [x, y], ...]}              latent agents p1..pn
//   {"opinions": [{"id", "text"}, ...]}          opinion-only members
//   {"sample": {"count", "dims", "sd"}}          N(0, sd) positions drawn from
//                                                derive_seed(seed, "population")
Population population_from_json(const nlohmann::json& doc, uint64_t seed);

struct SessionRecord {
  SessionId id;
  int level = 0;
  std::vector<Member> members;
  std::optional<Statement> winner;
  std::vector<protocol::SessionEvent> events;
  int attempts = 0;
  std::string error;
  std::optional<std::filesystem::path> log_path;

  bool succeeded() const { return winner.has_value(); }
};

struct LevelResult {
  int level = 0;
  std::vector<SessionRecord> sessions;

  size_t succeeded() const;
};

struct RunOptions {
  // 0 means one worker per hardware thread.
  size_t parallelism = 0;
  // When set, each session's event log is written to <dir>/<session id>.jsonl.
  std::optional<std::filesystem::path> log_dir;
};

// Runs one session per group, concurrently up to the parallelism cap, with
// seeds derived from the spec seed (the top-level session uses the spec seed
// itself). Failed sessions are retried up to max_session_attempts.
LevelResult run_level(int level, const std::vector<std::vector<Member>>& groups, const HierarchySpec& spec,
                      mediator::MediatorBackend& backend, const RunOptions& options = {});

struct ProvenanceNode {
  // Session id for aggregation nodes, participant id for leaves.
  std::string id;
  // -1 for leaf opinions.
  int level = -1;
  std::string text;
  std::vector<ProvenanceNode> children;

  size_t leaf_count() const;
};

struct LevelMetrics {
  int level = 0;
  size_t sessions = 0;
  size_t succeeded = 0;
  double mean_candidates = 0.0;
  // Mean pairwise latent distance between the level's winners.
  double winner_dispersion = 0.0;
};

struct HierarchyResult {
  enum class Status { complete, aborted };
  Status status = Status::complete;
  std::string message;
  std::vector<LevelResult> levels;
  std::vector<LevelMetrics> metrics;
  std::optional<Statement> top;
  std::optional<ProvenanceNode> tree;

  size_t session_count() const;
};

// Level-by-level run with a barrier between levels. If a level falls short of
// the quorum the run stops and the completed levels are returned with status
// aborted.
HierarchyResult run_hierarchy(const HierarchySpec& spec, const std::vector<Member>& population,
                              mediator::MediatorBackend& backend, const RunOptions& options = {});

nlohmann::json to_json(const ProvenanceNode& node);
// Manifest: spec, sessions per level with log paths, provenance tree, metrics.
nlohmann::json manifest(const HierarchySpec& spec, const HierarchyResult& result);

}  // namespace concord::hierarchy
