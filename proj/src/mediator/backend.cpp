#include "concord/mediator/backend.hpp"

#include "concord/core/error.hpp"
#include "concord/mediator/remote_backend.hpp"
#include "concord/mediator/synthetic_backend.hpp"

namespace concord::mediator {

using nlohmann::json;

void MediatorBackendConfig::validate() const {
  if (kind == Kind::remote && remote.endpoint.empty()) throw ValidationError("remote backend requires an endpoint");
  if (kind == Kind::synthetic && synthetic.dims < 1) throw ValidationError("synthetic backend needs dims >= 1");
}

std::unique_ptr<MediatorBackend> make_backend(const MediatorBackendConfig& config) {
  config.validate();
  if (config.kind == MediatorBackendConfig::Kind::remote) return std::make_unique<RemoteBackend>(config.remote);
  return std::make_unique<SyntheticBackend>(config.synthetic);
}

json to_json(const MediatorBackendConfig& config) {
  if (config.kind == MediatorBackendConfig::Kind::remote) {
    const auto& r = config.remote;
    return json{{"kind", "remote"},
                {"endpoint", r.endpoint},
                {"token_env", r.token_env},
                {"template_dir", r.template_dir.string()},
                {"max_attempts", r.max_attempts},
                {"timeout_ms", r.timeout.count()},
                {"max_tokens", r.max_tokens}};
  }
  const auto& s = config.synthetic;
  return json{{"kind", "synthetic"},
              {"dims", s.dims},
              {"noise", s.noise},
              {"seed", s.seed},
              {"restatement_share", s.restatement_share},
              {"centroid_pull", s.centroid_pull}};
}

MediatorBackendConfig backend_config_from_json(const json& doc) {
  MediatorBackendConfig config;
  const std::string kind = doc.value("kind", "synthetic");
  if (kind == "remote") {
    config.kind = MediatorBackendConfig::Kind::remote;
    auto& r = config.remote;
    r.endpoint = doc.value("endpoint", "");
    r.token_env = doc.value("token_env", r.token_env);
    r.template_dir = doc.value("template_dir", r.template_dir.string());
    r.max_attempts = doc.value("max_attempts", r.max_attempts);
    r.timeout = std::chrono::milliseconds(doc.value("timeout_ms", static_cast<int64_t>(r.timeout.count())));
    r.max_tokens = doc.value("max_tokens", r.max_tokens);
  } else if (kind == "synthetic") {
    auto& s = config.synthetic;
    s.dims = doc.value("dims", s.dims);
    s.noise = doc.value("noise", s.noise);
    s.seed = doc.value("seed", s.seed);
    s.restatement_share = doc.value("restatement_share", s.restatement_share);
    s.centroid_pull = doc.value("centroid_pull", s.centroid_pull);
  } else {
    throw ValidationError("unknown backend kind '" + kind + "'");
  }
  config.validate();
  return config;
}

}  // namespace concord::mediator
