#pragma once

// Outcome metrics over transcripts: how much each opinion shaped a winner,
// how divided a group is, and whether revision shifts weight to minorities.

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "concord/mediator/embedder.hpp"
#include "concord/mediator/generation.hpp"
#include "concord/protocol/state.hpp"

namespace concord::analytics {

using mediator::Embedder;
using mediator::Statement;

enum class Faction { majority, minority };

std::string_view to_string(Faction f);
Faction faction_from_string(std::string_view name);

inline constexpr std::string_view kInfluenceMethod = "simplex-nnls-ridge-v1";

// Weights w >= 0 with sum 1 minimising ||A w - b||^2 + lambda ||w||^2, where
// the columns of A are `basis` and lambda is 1e-6 of the mean squared column
// norm (so the result is invariant to uniform rescaling and unique).
std::vector<double> simplex_least_squares(const std::vector<std::vector<double>>& basis,
                                          const std::vector<double>& target);

struct LabeledOpinion {
  Statement statement;
  Faction faction = Faction::majority;
};

struct InfluenceReport {
  std::vector<CandidateId> opinions;
  std::vector<Faction> factions;
  std::vector<double> weights;
  double majority_weight = 0.0;
  double minority_weight = 0.0;
  // Distance between the winner embedding and its reconstruction.
  double residual = 0.0;
  std::string method{kInfluenceMethod};
  std::string embedder_id;
};

// Raises Error(undefined_influence) when every opinion embeds to the same
// vector, and ValidationError for fewer than two opinions.
InfluenceReport influence_weights(const std::vector<LabeledOpinion>& opinions, const Statement& winner,
                                  const Embedder& embedder);

// Two-means split of the opinion embeddings; the larger cluster is the
// majority (the one holding the first opinion on a tie).
std::vector<Faction> cluster_factions(const std::vector<Statement>& opinions, const Embedder& embedder);

// LatentEmbedder when every text is a position of the same dimension,
// otherwise the default hashing embedder.
std::unique_ptr<Embedder> choose_embedder(const std::vector<std::string>& texts);

struct RatingScale {
  double min = 0.0;
  double max = 10.0;
};

using Ratings = std::map<ParticipantId, double>;

struct DivisionReport {
  double pre = 0.0;
  double post = 0.0;
  double delta = 0.0;
  size_t participants = 0;
};

// Mean absolute difference over unordered participant pairs (0 for one).
double dispersion(const std::vector<double>& ratings);

DivisionReport division_index(const Ratings& pre, const Ratings& post, const RatingScale& scale = {});

struct Transcript {
  std::string label;
  protocol::SessionState state;
  // Missing participants are labeled by clustering.
  std::map<ParticipantId, Faction> factions;
};

struct SessionShift {
  std::string label;
  double initial_minority = 0.0;
  double revised_minority = 0.0;
  double shift = 0.0;
};

struct AuditReport {
  std::vector<SessionShift> sessions;
  std::vector<std::pair<std::string, std::string>> skipped;
  double mean_shift = 0.0;
  std::string method{kInfluenceMethod};
};

// Minority weight on the initial winner versus the last revised winner, per
// session; sessions without a revision or with undefined influence are
// skipped with a note.
AuditReport minority_weighting_audit(const std::vector<Transcript>& transcripts,
                                     const Embedder* embedder = nullptr);

// Diversity and influence for each election in one session.
nlohmann::json session_analytics(const protocol::SessionState& state,
                                 const std::map<ParticipantId, Faction>& factions = {},
                                 const Embedder* embedder = nullptr);

nlohmann::json to_json(const InfluenceReport& report);
nlohmann::json to_json(const DivisionReport& report);
nlohmann::json to_json(const AuditReport& report);

}  // namespace concord::analytics
