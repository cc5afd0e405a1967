#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "concord/mediator/statement.hpp"

namespace concord::mediator {

// Generative model plus personalized reward model. Implementations must be
// safe for concurrent calls; they keep only per-request state.
class MediatorBackend {
 public:
  virtual ~MediatorBackend() = default;

  // Raw candidate texts for a request, before deduplication. May return more
  // or fewer than req.k.
  virtual std::vector<std::string> sample_statements(const GenerationRequest& req) = 0;

  // Predicted agreement of the query's participant with each candidate.
  virtual ScoreRow score(const RewardQuery& query) = 0;

  virtual std::string id() const = 0;
};

struct SyntheticConfig {
  size_t dims = 1;
  double noise = 0.0;
  uint64_t seed = 0;
  // Fraction of k spent on restatements of individual opinions; the rest are
  // random convex mixtures.
  double restatement_share = 0.5;
  // How far a restatement moves from its opinion toward the group centroid.
  double centroid_pull = 0.1;
};

struct RemoteConfig {
  std::string endpoint;
  // Name of the environment variable holding the bearer token.
  std::string token_env = "CONCORD_BACKEND_TOKEN";
  std::filesystem::path template_dir = "templates";
  int max_attempts = 3;
  std::chrono::milliseconds timeout{30000};
  int max_tokens = 512;
};

struct MediatorBackendConfig {
  enum class Kind { synthetic, remote };
  Kind kind = Kind::synthetic;
  SyntheticConfig synthetic;
  RemoteConfig remote;

  void validate() const;
};

std::unique_ptr<MediatorBackend> make_backend(const MediatorBackendConfig& config);

nlohmann::json to_json(const MediatorBackendConfig& config);
MediatorBackendConfig backend_config_from_json(const nlohmann::json& doc);

}  // namespace concord::mediator
