#pragma once

#include <span>
#include <vector>

#include "concord/mediator/backend.hpp"

namespace concord::mediator {

// Deterministic stand-in for the language models. Statements are points in a
// latent space rendered as canonical position texts (see format_position);
// free text is placed by its hashing embedding.
//
// Generation, with pool = opinions (+ prior winner and critique positions on
// revision) and centroid = mean of the pool:
//   * restatements: r = min(#opinions, ceil(k * restatement_share)) opinions
//     (all of them, or a seeded sample) are restated as
//       x + t * (centroid - x),  t = min(centroid_pull, 0.5 * nn(x) / |centroid - x|)
//     where nn(x) is the distance to the nearest distinct pool point, so every
//     restatement stays closer to its own opinion than to any other.
//   * mixtures: the remaining k - r are convex combinations of the pool with
//     Dirichlet(1) weights.
// Scoring: -|opinion - candidate| plus noise * N(0, 1), seeded per
// (query seed, opinion id, candidate id); stddev reported as `noise`.
class SyntheticBackend final : public MediatorBackend {
 public:
  explicit SyntheticBackend(SyntheticConfig config);

  std::vector<std::string> sample_statements(const GenerationRequest& req) override;
  ScoreRow score(const RewardQuery& query) override;
  std::string id() const override;

  const SyntheticConfig& config() const { return config_; }

  // Latent positions that sample_statements would render, in order.
  std::vector<std::vector<double>> sample_positions(const GenerationRequest& req) const;

 private:
  SyntheticConfig config_;
};

}  // namespace concord::mediator
