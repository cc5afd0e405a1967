#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "concord/mediator/backend.hpp"
#include "concord/mediator/embedder.hpp"

namespace concord::mediator {

struct GenerationOptions {
  // Drop a candidate whose embedding lies within this distance of an earlier
  // kept candidate. Off by default; requires `embedder`.
  std::optional<double> near_duplicate_threshold;
  const Embedder* embedder = nullptr;
};

// Samples candidates from the backend, drops exact duplicates (after
// normalize_text, first occurrence kept), keeps at most k, and tags them with
// fresh ids "r<round>-c<index>" and candidate / revised_candidate provenance.
std::vector<Statement> generate_candidates(const GenerationRequest& req, MediatorBackend& backend,
                                           const GenerationOptions& options = {});

ScoreRow predict_scores(const RewardQuery& query, MediatorBackend& backend);

struct DiversityReport {
  // Index into the opinion list of each candidate's nearest opinion.
  std::vector<size_t> nearest_opinion;
  // Fraction of candidates assigned to each opinion.
  std::vector<double> coverage;
  // Mean pairwise embedding distance between candidates (0 for one candidate).
  double dispersion = 0.0;
  // Shannon entropy of `coverage` divided by log(#opinions); 0 with one opinion.
  double coverage_entropy = 0.0;
  std::string embedder_id;
};

DiversityReport candidate_diversity(const std::vector<Statement>& candidates,
                                    const std::vector<Statement>& opinions, const Embedder& embedder);

nlohmann::json to_json(const DiversityReport& report);

}  // namespace concord::mediator
