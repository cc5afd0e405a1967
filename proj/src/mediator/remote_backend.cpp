#include "concord/mediator/remote_backend.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <httplib.h>

#include "concord/core/error.hpp"
#include "concord/core/rng.hpp"

namespace concord::mediator {

using nlohmann::json;

PromptTemplate::PromptTemplate(std::string id, std::string text) : id_(std::move(id)), text_(std::move(text)) {
  size_t pos = 0;
  while ((pos = text_.find("{{", pos)) != std::string::npos) {
    size_t end = text_.find("}}", pos + 2);
    if (end == std::string::npos) throw ValidationError("template '" + id_ + "' has an unterminated placeholder");
    std::string name = text_.substr(pos + 2, end - pos - 2);
    if (std::find(placeholders_.begin(), placeholders_.end(), name) == placeholders_.end()) {
      placeholders_.push_back(name);
    }
    pos = end + 2;
  }
}

PromptTemplate PromptTemplate::load(const std::filesystem::path& dir, const std::string& id) {
  std::ifstream in(dir / (id + ".txt"), std::ios::binary);
  if (!in) throw ValidationError("prompt template '" + id + "' not found in " + dir.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return PromptTemplate(id, buf.str());
}

std::string PromptTemplate::render(const std::map<std::string, std::string>& variables) const {
  std::string out;
  size_t pos = 0;
  for (;;) {
    size_t open = text_.find("{{", pos);
    if (open == std::string::npos) break;
    size_t close = text_.find("}}", open + 2);
    std::string name = text_.substr(open + 2, close - open - 2);
    auto it = variables.find(name);
    if (it == variables.end()) throw ValidationError("template '" + id_ + "' needs a value for {{" + name + "}}");
    out.append(text_, pos, open - pos);
    out += it->second;
    pos = close + 2;
  }
  out.append(text_, pos, std::string::npos);
  return out;
}

std::optional<double> parse_rating(std::string_view text) {
  for (size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if ((c >= '0' && c <= '9') || (c == '.' && i + 1 < text.size() && text[i + 1] >= '0' && text[i + 1] <= '9')) {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(text.data() + i, text.data() + text.size(), v);
      if (ec != std::errc()) return std::nullopt;
      if (i > 0 && text[i - 1] == '-') return std::nullopt;
      if (v < 0.0 || v > 10.0) return std::nullopt;
      return v;
    }
  }
  return std::nullopt;
}

RemoteBackend::RemoteBackend(RemoteConfig config) : config_(std::move(config)) {
  if (config_.endpoint.empty()) throw ValidationError("remote backend requires an endpoint");
  if (config_.max_attempts < 1) throw ValidationError("remote backend needs max_attempts >= 1");
  // scheme://host[:port][/path]
  const std::string& url = config_.endpoint;
  size_t scheme_end = url.find("://");
  if (scheme_end == std::string::npos || url.substr(0, scheme_end) != "http") {
    throw ValidationError("remote endpoint must be an http:// URL: " + url);
  }
  size_t path_start = url.find('/', scheme_end + 3);
  host_ = url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
  for (const char* id : {kGenerateInitialTemplate, kGenerateRevisionTemplate, kRewardScoreTemplate}) {
    templates_.emplace(id, PromptTemplate::load(config_.template_dir, id));
  }
}

std::string RemoteBackend::complete(const std::string& template_id,
                                    const std::map<std::string, std::string>& variables, uint64_t seed) {
  const PromptTemplate& tmpl = templates_.at(template_id);
  json vars(variables);
  vars["prompt"] = tmpl.render(variables);
  const std::string body = json{{"template_id", template_id}, {"variables", vars}, {"seed", seed},
                                {"max_tokens", config_.max_tokens}}
                               .dump();

  httplib::Headers headers;
  if (const char* token = std::getenv(config_.token_env.c_str()); token != nullptr && *token != '\0') {
    headers.emplace("Authorization", std::string("Bearer ") + token);
  }

  std::string last_error;
  for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
    httplib::Client client(host_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    auto res = client.Post(path_, headers, body, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    json reply = json::parse(res->body, nullptr, false);
    if (reply.is_discarded() || !reply.is_object() || !reply.contains("text") || !reply["text"].is_string()) {
      throw ProtocolError(res->body, "malformed response from " + config_.endpoint);
    }
    return reply["text"].get<std::string>();
  }
  throw BackendError(config_.max_attempts, "remote backend " + config_.endpoint + " failed after " +
                                               std::to_string(config_.max_attempts) + " attempts: " + last_error);
}

namespace {

std::string join_opinions(const std::vector<Statement>& opinions) {
  std::string out;
  for (size_t i = 0; i < opinions.size(); ++i) {
    out += "Opinion " + std::to_string(i + 1) + ": " + opinions[i].text + "\n";
  }
  return out;
}

std::string join_critiques(const std::vector<Critique>& critiques) {
  std::string out;
  for (size_t i = 0; i < critiques.size(); ++i) {
    out += "Critique " + std::to_string(i + 1) + ": " + critiques[i].text + "\n";
  }
  return out;
}

}  // namespace

std::vector<std::string> RemoteBackend::sample_statements(const GenerationRequest& req) {
  std::map<std::string, std::string> vars{{"question", req.question}, {"opinions", join_opinions(req.opinions)}};
  std::string tmpl = kGenerateInitialTemplate;
  if (req.is_revision()) {
    tmpl = kGenerateRevisionTemplate;
    vars["prior_winner"] = req.prior_winner->text;
    vars["critiques"] = join_critiques(req.critiques);
  }
  std::vector<std::string> out;
  out.reserve(req.k);
  for (size_t i = 0; i < req.k; ++i) out.push_back(complete(tmpl, vars, derive_seed(req.seed, "remote/generate", i)));
  return out;
}

ScoreRow RemoteBackend::score(const RewardQuery& query) {
  ScoreRow row;
  for (size_t i = 0; i < query.candidates.size(); ++i) {
    std::map<std::string, std::string> vars{{"opinions", query.participant_opinion.text},
                                            {"statement", query.candidates[i].text}};
    std::optional<double> rating;
    std::string reply;
    for (int attempt = 0; attempt < 2 && !rating; ++attempt) {
      reply = complete(kRewardScoreTemplate, vars, derive_seed(query.seed, "remote/score", i * 2 + attempt));
      rating = parse_rating(reply);
    }
    if (!rating) {
      throw BackendError(2, "unparsable rating from " + config_.endpoint + ": '" + reply + "'");
    }
    row.scores.push_back(*rating);
  }
  return row;
}

}  // namespace concord::mediator
