#pragma once

#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "concord/mediator/backend.hpp"

namespace concord::mediator {

// Versioned prompt template loaded from "<dir>/<id>.txt". Placeholders are
// written {{name}}.
class PromptTemplate {
 public:
  static PromptTemplate load(const std::filesystem::path& dir, const std::string& id);
  PromptTemplate(std::string id, std::string text);

  const std::string& id() const { return id_; }
  const std::vector<std::string>& placeholders() const { return placeholders_; }

  // Throws ValidationError when a placeholder has no value.
  std::string render(const std::map<std::string, std::string>& variables) const;

 private:
  std::string id_;
  std::string text_;
  std::vector<std::string> placeholders_;
};

inline constexpr const char* kGenerateInitialTemplate = "generate_initial.v1";
inline constexpr const char* kGenerateRevisionTemplate = "generate_revision.v1";
inline constexpr const char* kRewardScoreTemplate = "reward_score.v1";

// Client for a chat-style text completion endpoint.
//
// Request:  POST <endpoint>  {"template_id", "variables", "seed", "max_tokens"}
//           where variables holds the named template inputs plus "prompt",
//           the locally rendered template.
// Response: {"text": "..."}
//
// Generation issues k requests (seed = derived per index). Scoring issues
// one request per candidate and reads the first number in the reply, which
// must lie in [0, 10]; an unparsable reply is re-requested once.
class RemoteBackend final : public MediatorBackend {
 public:
  explicit RemoteBackend(RemoteConfig config);

  std::vector<std::string> sample_statements(const GenerationRequest& req) override;
  ScoreRow score(const RewardQuery& query) override;
  std::string id() const override { return "remote:" + config_.endpoint; }

  // Sends one request with bounded retries; returns the "text" field.
  std::string complete(const std::string& template_id, const std::map<std::string, std::string>& variables,
                       uint64_t seed);

 private:
  RemoteConfig config_;
  std::string host_;
  std::string path_;
  std::map<std::string, PromptTemplate> templates_;
};

// Parses the first decimal number in `text`; nullopt if none or outside [0, 10].
std::optional<double> parse_rating(std::string_view text);

}  // namespace concord::mediator
