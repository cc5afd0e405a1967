#include "cli.hpp"

#include <pthread.h>
#include <signal.h>

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <thread>

#include "concord/analytics/analytics.hpp"
#include "concord/ballots/ballots.hpp"
#include "concord/ballots/io.hpp"
#include "concord/core/error.hpp"
#include "concord/core/fs.hpp"
#include "concord/core/rng.hpp"
#include "concord/hierarchy/hierarchy.hpp"
#include "concord/kernels/kernels.hpp"
#include "concord/mediator/backend.hpp"
#include "concord/protocol/driver.hpp"
#include "concord/service/server.hpp"
#include "concord/simulation/simulation.hpp"

namespace concord::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int exit_code(const Error& e) {
  switch (e.code()) {
    case ErrorCode::backend:
    case ErrorCode::protocol:
    case ErrorCode::generation_exhausted: return 3;
    case ErrorCode::corruption: return 4;
    default: return 2;
  }
}

void require_file(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw ValidationError(path.string() + ": no such file");
}

void require_output(const fs::path& path) {
  const auto parent = path.parent_path();
  if (!parent.empty() && !fs::is_directory(parent)) {
    throw ValidationError(path.string() + ": directory " + parent.string() + " does not exist");
  }
}

// nlohmann reports byte offsets; people want lines.
json read_json(const fs::path& path) {
  require_file(path);
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    const size_t upto = std::min(e.byte == 0 ? 0 : e.byte - 1, text.size());
    size_t line = 1, col = 1;
    for (size_t i = 0; i < upto; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::string what = e.what();
    // drop nlohmann's own "at line L, column C" preamble, we print ours
    if (auto pos = what.find(": syntax error"); pos != std::string::npos) what = what.substr(pos + 2);
    throw ValidationError(path.string() + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + what);
  }
}

template <class F>
auto with_path(const fs::path& path, F parse) -> decltype(parse()) {
  try {
    return parse();
  } catch (const Error& e) {
    if (e.code() != ErrorCode::validation) throw;
    throw ValidationError(path.string() + ": " + e.what());
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::string order_text(const ballots::Ranking& r) {
  std::string out;
  for (const auto& group : r.order) {
    if (!out.empty()) out += " > ";
    for (size_t i = 0; i < group.size(); ++i) out += (i ? " = " : "") + group[i].str();
  }
  return out;
}

std::vector<protocol::SessionEvent> read_transcript(const fs::path& input) {
  const fs::path path = fs::is_directory(input) ? input / "events.jsonl" : input;
  require_file(path);
  try {
    return protocol::parse_jsonl(read_file(path));
  } catch (const CorruptionError& e) {
    throw CorruptionError(path.string() + ": " + e.what());
  }
}

// ---- run-session ---------------------------------------------------------

struct Cast {
  std::vector<std::unique_ptr<protocol::ParticipantAgent>> agents;
  protocol::AgentMap map;
  std::vector<ParticipantId> ids;
};

Cast cast_from_json(const json& doc) {
  const json& list = doc.is_array() ? doc : doc.at("participants");
  Cast cast;
  for (const auto& p : list) {
    ParticipantId id(p.at("id").get<std::string>());
    if (cast.map.count(id)) throw ValidationError("participant '" + id.str() + "' listed twice");
    if (p.contains("position")) {
      const auto& x = p.at("position");
      cast.agents.push_back(std::make_unique<protocol::LatentAgent>(
          x.is_array() ? x.get<std::vector<double>>() : std::vector<double>{x.get<double>()}));
    } else {
      protocol::ScriptedAgent::Script script;
      if (p.contains("opinion")) script.opinion = p.at("opinion").get<std::string>();
      for (const auto& c : p.value("critiques", json::array())) {
        script.critiques.push_back(c.is_null() ? std::nullopt : std::optional(c.get<std::string>()));
      }
      script.slate_order = p.value("ranking", std::vector<size_t>{});
      if (p.contains("final_preference")) {
        script.final_choice = protocol::final_choice_from_string(p.at("final_preference").get<std::string>());
      }
      cast.agents.push_back(std::make_unique<protocol::ScriptedAgent>(std::move(script)));
    }
    cast.map[id] = cast.agents.back().get();
    cast.ids.push_back(id);
  }
  return cast;
}

mediator::MediatorBackendConfig backend_config(const json& doc, const std::string& kind,
                                               const std::string& endpoint) {
  auto config = doc.is_null() ? mediator::MediatorBackendConfig{} : mediator::backend_config_from_json(doc);
  if (kind == "remote") config.kind = mediator::MediatorBackendConfig::Kind::remote;
  if (kind == "synthetic") config.kind = mediator::MediatorBackendConfig::Kind::synthetic;
  if (!endpoint.empty()) config.remote.endpoint = endpoint;
  config.validate();
  return config;
}

struct SessionArgs {
  std::string config, opinions, out, backend, endpoint;
  std::optional<uint64_t> seed;
};

int run_session(const SessionArgs& a, std::ostream& out) {
  require_file(a.config);
  require_file(a.opinions);
  require_output(a.out);
  json doc = read_json(a.config);
  auto cast = with_path(a.opinions, [&] { return cast_from_json(read_json(a.opinions)); });
  const json backend_doc = doc.contains("backend") ? doc.at("backend") : json();
  doc.erase("backend");
  if (!doc.contains("participants")) {
    doc["participants"] = json::array();
    for (const auto& p : cast.ids) doc["participants"].push_back(p.str());
  }
  auto config = with_path(a.config, [&] { return protocol::session_config_from_json(doc); });
  auto bconf = with_path(a.config, [&] { return backend_config(backend_doc, a.backend, a.endpoint); });
  if (a.seed) {
    config.seed = derive_seed(*a.seed, "session");
    bconf.synthetic.seed = derive_seed(*a.seed, "backend");
  }
  for (const auto& p : config.participants) {
    if (!cast.map.count(p)) throw ValidationError(a.opinions + ": no entry for participant '" + p.str() + "'");
  }
  auto backend = mediator::make_backend(bconf);
  const auto session = protocol::run_session(config, *backend, cast.map);
  write_file_atomic(a.out, protocol::to_jsonl(session.events()));
  const auto& st = session.state();
  if (const auto* f = st.final_statement()) out << "winner: " << f->text << "\n";
  if (st.tally) out << "final preferences: initial " << st.tally->initial << ", revised " << st.tally->revised << "\n";
  out << "events: " << session.events().size() << " -> " << a.out << "\n";
  return 0;
}

// ---- run-hierarchy -------------------------------------------------------

struct HierarchyArgs {
  std::string spec, out, log_dir;
  size_t parallelism = 0;
  std::optional<uint64_t> seed;
};

int run_hierarchy(const HierarchyArgs& a, std::ostream& out) {
  require_file(a.spec);
  require_output(a.out);
  const json doc = read_json(a.spec);
  json spec_doc = with_path(a.spec, [&] { return doc.at("spec"); });
  if (a.seed) spec_doc["seed"] = derive_seed(*a.seed, "hierarchy");
  auto population = with_path(a.spec, [&] {
    return hierarchy::population_from_json(doc.at("population"), spec_doc.value("seed", uint64_t{0}));
  });
  if (!spec_doc.contains("total_participants")) spec_doc["total_participants"] = population.members.size();
  const auto spec = with_path(a.spec, [&] {
    auto s = hierarchy::hierarchy_spec_from_json(spec_doc);
    s.validate();
    return s;
  });
  auto bconf = with_path(a.spec, [&] { return backend_config(doc.value("backend", json()), "", ""); });
  if (a.seed) bconf.synthetic.seed = derive_seed(*a.seed, "backend");
  auto backend = mediator::make_backend(bconf);
  hierarchy::RunOptions options;
  options.parallelism = a.parallelism;
  if (!a.log_dir.empty()) options.log_dir = fs::path(a.log_dir);
  const auto result = hierarchy::run_hierarchy(spec, population.members, *backend, options);
  write_file_atomic(a.out, hierarchy::manifest(spec, result).dump(2) + "\n");
  for (const auto& m : result.metrics) {
    out << "level " << m.level << ": " << m.succeeded << "/" << m.sessions << " sessions\n";
  }
  out << "sessions: " << result.session_count() << "\n";
  if (result.top) out << "top: " << result.top->text << "\n";
  if (result.status == hierarchy::HierarchyResult::Status::aborted) {
    throw Error(ErrorCode::backend, "hierarchy aborted: " + result.message);
  }
  return 0;
}

// ---- simulate ------------------------------------------------------------

struct SimulateArgs {
  std::string experiment, out;
  size_t parallelism = 0;
  std::optional<uint64_t> seed;
};

int simulate(const SimulateArgs& a, std::ostream& out) {
  require_file(a.experiment);
  require_output(a.out);
  auto config = with_path(a.experiment, [&] { return simulation::experiment_config_from_json(read_json(a.experiment)); });
  if (a.seed) {
    config.seed = *a.seed;
    config.backend.seed = derive_seed(*a.seed, "backend");
  }
  config.validate();
  const auto report = simulation::run_experiment(config, {a.parallelism});
  write_file_atomic(a.out, simulation::to_json(report).dump(2) + "\n");
  out << "replications: " << report.completed << "/" << report.replications.size() << "\n";
  out << "skew: mean " << report.skew.mean << ", sd " << report.skew.sd << ", nonzero " << report.nonzero_skew_fraction
      << "\n";
  out << "distance to median: mean " << report.distance_to_median.mean << "\n";
  out << "division delta: mean " << report.division_delta.mean << "\n";
  return report.complete ? 0 : 3;
}

// ---- analyze -------------------------------------------------------------

struct AnalyzeArgs {
  std::vector<std::string> transcripts;
  std::string factions, ratings, out;
};

int analyze(const AnalyzeArgs& a, std::ostream& out) {
  if (a.transcripts.empty() && a.ratings.empty()) throw ValidationError("nothing to analyze");
  for (const auto& t : a.transcripts) {
    if (!fs::is_directory(t)) require_file(t);
  }
  if (!a.factions.empty()) require_file(a.factions);
  if (!a.ratings.empty()) require_file(a.ratings);
  if (!a.out.empty()) require_output(a.out);

  std::map<ParticipantId, analytics::Faction> factions;
  if (!a.factions.empty()) {
    with_path(a.factions, [&] {
      for (const auto& [p, f] : read_json(a.factions).items()) {
        factions[ParticipantId(p)] = analytics::faction_from_string(f.get<std::string>());
      }
      return 0;
    });
  }

  json report = json::object();
  json sessions = json::array();
  std::vector<analytics::Transcript> transcripts;
  for (const auto& t : a.transcripts) {
    const auto events = read_transcript(t);
    protocol::SessionState state;
    try {
      state = protocol::replay(events);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::backend) throw;
      throw CorruptionError(t + ": " + e.what());
    }
    std::map<ParticipantId, analytics::Faction> mine;
    for (const auto& p : state.config.participants) {
      if (auto it = factions.find(p); it != factions.end()) mine[p] = it->second;
    }
    sessions.push_back({{"label", t}, {"analytics", analytics::session_analytics(state, mine)}});
    transcripts.push_back({t, std::move(state), std::move(mine)});
  }
  if (!transcripts.empty()) {
    report["sessions"] = sessions;
    const auto audit = analytics::minority_weighting_audit(transcripts);
    report["audit"] = analytics::to_json(audit);
    out << "sessions: " << transcripts.size() << ", audited " << audit.sessions.size() << ", mean minority shift "
        << audit.mean_shift << "\n";
  }
  if (!a.ratings.empty()) {
    const auto division = with_path(a.ratings, [&] {
      const json doc = read_json(a.ratings);
      analytics::RatingScale scale;
      if (doc.contains("scale")) {
        scale.min = doc.at("scale").at("min").get<double>();
        scale.max = doc.at("scale").at("max").get<double>();
      }
      analytics::Ratings pre, post;
      for (const auto& [p, r] : doc.at("pre").items()) pre[ParticipantId(p)] = r.get<double>();
      for (const auto& [p, r] : doc.at("post").items()) post[ParticipantId(p)] = r.get<double>();
      return analytics::division_index(pre, post, scale);
    });
    report["division"] = analytics::to_json(division);
    out << "division: pre " << division.pre << ", post " << division.post << ", delta " << division.delta << "\n";
  }
  if (!a.out.empty()) {
    write_file_atomic(a.out, report.dump(2) + "\n");
  } else {
    out << report.dump(2) << "\n";
  }
  return 0;
}

// ---- elect ---------------------------------------------------------------

struct ElectArgs {
  std::string profile, method = "schulze", tiebreak, out;
  double trim = 0.1;
};

int elect(const ElectArgs& a, std::ostream& out) {
  require_file(a.profile);
  if (!a.out.empty()) require_output(a.out);
  const auto profile = with_path(a.profile, [&] {
    auto p = ballots::profile_from_json(read_json(a.profile));
    p.validate();
    return p;
  });
  const ballots::TiebreakRule tiebreak = a.tiebreak.empty() ? ballots::TiebreakRule{} : ballots::parse_tiebreak(a.tiebreak);
  ballots::Ranking order;
  json report{{"method", a.method}, {"tiebreak", ballots::to_json(tiebreak)}};
  if (a.method == "schulze") {
    const auto result = ballots::schulze(profile, tiebreak);
    order = result.order;
    if (auto cw = ballots::condorcet_winner(profile)) report["condorcet_winner"] = cw->str();
  } else if (a.method == "borda") {
    order = ballots::borda_order(profile, tiebreak);
  } else {
    if (!(a.trim >= 0.0 && a.trim < 0.5)) throw ValidationError("--trim must be in [0, 0.5)");
    order = ballots::robust_aggregate(profile, a.trim, tiebreak);
    report["trim"] = a.trim;
  }
  report["order"] = ballots::to_json(order).at("order");
  report["winner"] = order.order.front().front().str();
  out << "order: " << order_text(order) << "\n";
  out << "winner: " << order.order.front().front().str() << "\n";
  if (!a.out.empty()) write_file_atomic(a.out, report.dump(2) + "\n");
  return 0;
}

// ---- serve ---------------------------------------------------------------

struct ServeArgs {
  std::string bind, data_dir, admin_token, backend, endpoint;
};

int serve(const ServeArgs& a, std::ostream& out) {
  auto config = service::ServiceConfig::from_env();
  if (!a.bind.empty()) {
    const auto colon = a.bind.rfind(':');
    if (colon == std::string::npos) throw ValidationError("--bind must be host:port");
    config.host = a.bind.substr(0, colon);
    try {
      config.port = std::stoi(a.bind.substr(colon + 1));
    } catch (const std::exception&) {
      throw ValidationError("--bind has a bad port");
    }
  }
  if (!a.data_dir.empty()) config.data_dir = a.data_dir;
  if (!a.admin_token.empty()) config.admin_token = a.admin_token;
  if (a.backend == "remote") config.backend.kind = mediator::MediatorBackendConfig::Kind::remote;
  if (a.backend == "synthetic") config.backend.kind = mediator::MediatorBackendConfig::Kind::synthetic;
  if (!a.endpoint.empty()) config.backend.remote.endpoint = a.endpoint;
  config.backend.validate();

  auto backend = mediator::make_backend(config.backend);
  service::FileStore store(config.data_dir);
  service::ServiceOptions options;
  options.admin_token = config.admin_token;
  options.hierarchy_dir = config.data_dir / "hierarchies";
  if (!config.logical_clock) options.clock = std::make_shared<protocol::SystemClock>();
  service::SessionManager manager(store, *backend, options);
  const auto report = manager.recover_all();
  out << "recovered " << report.recovered.size() << " sessions";
  if (!report.quarantined.empty()) out << ", quarantined " << report.quarantined.size();
  if (!report.discarded.empty()) out << ", discarded " << report.discarded.size() << " incomplete";
  out << "\n";

  service::Server server(manager);
  const int port = server.bind(config.host, config.port);
  if (port < 0) throw ValidationError("cannot bind " + config.host + ":" + std::to_string(config.port));
  out << "listening on " << config.host << ":" << port << std::endl;

  // SIGINT/SIGTERM are taken synchronously by a watcher thread; httplib's
  // stop() is not safe from a signal handler.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  std::thread watcher([&server, set] {
    int sig = 0;
    sigwait(&set, &sig);
    server.stop();
  });
  watcher.detach();
  server.listen();
  manager.wait_hierarchies();
  out << "stopped\n";
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"concord: mediated group deliberation, elections, hierarchies and analytics"};
  app.require_subcommand(1, 1);
  std::string simd;
  app.add_option("--simd", simd, "kernel variant: auto, scalar, avx2 or neon")
      ->check(CLI::IsMember({"auto", "scalar", "avx2", "neon"}));

  ElectArgs ea;
  auto* elect_cmd = app.add_subcommand("elect", "aggregate the rankings in a profile file");
  elect_cmd->add_option("profile", ea.profile, "profile JSON")->required();
  elect_cmd->add_option("--method", ea.method, "schulze, borda or trimmed")
      ->check(CLI::IsMember({"schulze", "borda", "trimmed"}));
  elect_cmd->add_option("--tiebreak", ea.tiebreak, "lexicographic, candidate_order or random:<seed>");
  elect_cmd->add_option("--trim", ea.trim, "fraction trimmed from each end (trimmed method)");
  elect_cmd->add_option("-o,--out", ea.out, "JSON report");

  SessionArgs sa;
  uint64_t session_seed = 0;
  auto* session_cmd = app.add_subcommand("run-session", "run one scripted session to Closed");
  session_cmd->add_option("config", sa.config, "session config JSON")->required();
  session_cmd->add_option("opinions", sa.opinions, "participants JSON")->required();
  session_cmd->add_option("-o,--out", sa.out, "transcript (JSON lines)")->required();
  session_cmd->add_option("--backend", sa.backend, "synthetic or remote")
      ->check(CLI::IsMember({"synthetic", "remote"}));
  session_cmd->add_option("--endpoint", sa.endpoint, "remote backend URL");
  auto* session_seed_opt = session_cmd->add_option("--seed", session_seed, "root seed");

  HierarchyArgs ha;
  uint64_t hierarchy_seed = 0;
  auto* hierarchy_cmd = app.add_subcommand("run-hierarchy", "run a hierarchy of sessions");
  hierarchy_cmd->add_option("spec", ha.spec, "JSON with spec, population and optional backend")->required();
  hierarchy_cmd->add_option("-o,--out", ha.out, "manifest JSON")->required();
  hierarchy_cmd->add_option("--log-dir", ha.log_dir, "directory for per-session event logs");
  hierarchy_cmd->add_option("-j,--parallelism", ha.parallelism, "concurrent sessions (0 = hardware threads)");
  auto* hierarchy_seed_opt = hierarchy_cmd->add_option("--seed", hierarchy_seed, "root seed");

  SimulateArgs ma;
  uint64_t simulate_seed = 0;
  auto* simulate_cmd = app.add_subcommand("simulate", "run a strategic-behaviour experiment");
  simulate_cmd->add_option("experiment", ma.experiment, "experiment JSON")->required();
  simulate_cmd->add_option("-o,--out", ma.out, "report JSON")->required();
  simulate_cmd->add_option("-j,--parallelism", ma.parallelism, "concurrent replications (0 = hardware threads)");
  auto* simulate_seed_opt = simulate_cmd->add_option("--seed", simulate_seed, "root seed");

  AnalyzeArgs aa;
  auto* analyze_cmd = app.add_subcommand("analyze", "influence, audit and division reports");
  analyze_cmd->add_option("transcripts", aa.transcripts, "transcripts or service session directories");
  analyze_cmd->add_option("--factions", aa.factions, "JSON map participant -> majority|minority");
  analyze_cmd->add_option("--ratings", aa.ratings, "JSON with pre and post ratings");
  analyze_cmd->add_option("-o,--out", aa.out, "report JSON (default: standard output)");

  ServeArgs va;
  auto* serve_cmd = app.add_subcommand("serve", "HTTP service; CONCORD_* variables apply, flags win");
  serve_cmd->add_option("--bind", va.bind, "host:port");
  serve_cmd->add_option("--data-dir", va.data_dir, "session storage root");
  serve_cmd->add_option("--admin-token", va.admin_token, "required for creating sessions and hierarchies");
  serve_cmd->add_option("--backend", va.backend, "synthetic or remote")->check(CLI::IsMember({"synthetic", "remote"}));
  serve_cmd->add_option("--endpoint", va.endpoint, "remote backend URL");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (!simd.empty()) kernels::select_isa(simd);
    if (*elect_cmd) return elect(ea, out);
    if (*session_cmd) {
      if (*session_seed_opt) sa.seed = session_seed;
      return run_session(sa, out);
    }
    if (*hierarchy_cmd) {
      if (*hierarchy_seed_opt) ha.seed = hierarchy_seed;
      return run_hierarchy(ha, out);
    }
    if (*simulate_cmd) {
      if (*simulate_seed_opt) ma.seed = simulate_seed;
      return simulate(ma, out);
    }
    if (*analyze_cmd) return analyze(aa, out);
    if (*serve_cmd) return serve(va, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e);
  } catch (const json::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace concord::cli
