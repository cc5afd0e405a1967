#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "concord/core/ids.hpp"

namespace concord::mediator {

enum class Provenance { opinion, candidate, initial_winner, revised_candidate, revised_winner };

std::string_view to_string(Provenance p);
Provenance provenance_from_string(std::string_view text);

inline bool is_winner(Provenance p) {
  return p == Provenance::initial_winner || p == Provenance::revised_winner;
}

struct Statement {
  CandidateId id;
  std::string text;
  Provenance provenance = Provenance::candidate;
  std::optional<ParticipantId> author;
  int round = 0;

  // Non-empty normalized text; opinions carry an author, nothing else does.
  void validate() const;

  friend bool operator==(const Statement&, const Statement&) = default;
};

struct Critique {
  ParticipantId author;
  CandidateId target;
  std::string text;
  int round = 0;

  friend bool operator==(const Critique&, const Critique&) = default;
};

inline constexpr size_t kDefaultCandidateCount = 32;

struct GenerationRequest {
  std::string question;
  std::vector<Statement> opinions;
  std::optional<Statement> prior_winner;
  std::vector<Critique> critiques;
  size_t k = kDefaultCandidateCount;
  uint64_t seed = 0;
  // Round the generated candidates belong to; 0 is the opinion round.
  int round = 0;

  bool is_revision() const { return prior_winner.has_value(); }
  void validate() const;
};

struct RewardQuery {
  Statement participant_opinion;
  std::vector<Statement> candidates;
  uint64_t seed = 0;

  void validate() const;
};

// One row of a score matrix: predicted agreement per candidate, optionally
// with a per-entry standard deviation.
struct ScoreRow {
  std::vector<double> scores;
  std::vector<double> stddev;
};

// Trims, collapses internal whitespace runs to one space, lowercases ASCII.
std::string normalize_text(std::string_view text);

nlohmann::json to_json(const Statement& s);
Statement statement_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const Critique& c);
Critique critique_from_json(const nlohmann::json& doc);

}  // namespace concord::mediator
