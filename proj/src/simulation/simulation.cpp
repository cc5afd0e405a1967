#include "concord/simulation/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>

#include "concord/core/error.hpp"
#include "concord/core/rng.hpp"
#include "concord/mediator/embedder.hpp"
#include "concord/mediator/synthetic_backend.hpp"

namespace concord::simulation {

using nlohmann::json;

namespace {

void require_finite(const std::vector<double>& v, const std::string& what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw ValidationError(what + " must be finite");
  }
}

double distance(const std::vector<double>& a, const std::vector<double>& b) {
  return mediator::euclidean_distance(a, b);
}

// Linear-interpolation quantile of sorted values.
double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<size_t>(std::floor(pos));
  const size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::vector<double> coordinate_median(const std::vector<SyntheticParticipant>& pop) {
  const size_t d = pop.front().latent.size();
  std::vector<double> out(d);
  for (size_t r = 0; r < d; ++r) {
    std::vector<double> xs;
    for (const auto& p : pop) xs.push_back(p.latent[r]);
    std::sort(xs.begin(), xs.end());
    out[r] = quantile(xs, 0.5);
  }
  return out;
}

// Root of the mean per-coordinate variance (population form).
double population_sd(const std::vector<SyntheticParticipant>& pop, const std::vector<double>& mean) {
  double total = 0.0;
  for (const auto& p : pop) {
    for (size_t r = 0; r < mean.size(); ++r) total += (p.latent[r] - mean[r]) * (p.latent[r] - mean[r]);
  }
  return std::sqrt(total / static_cast<double>(pop.size() * mean.size()));
}

json policy_json(const StrategyPolicy& p) {
  return std::visit(
      [](const auto& v) -> json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Sincere>) {
          return json{{"kind", "sincere"}};
        } else if constexpr (std::is_same_v<T, Exaggerate>) {
          return json{{"kind", "exaggerate"}, {"factor", v.factor}};
        } else {
          return json{{"kind", "anchor"}, {"target", v.target}};
        }
      },
      p);
}

StrategyPolicy policy_from_json(const json& doc) {
  const std::string kind = doc.at("kind").get<std::string>();
  if (kind == "sincere") return Sincere{};
  if (kind == "exaggerate") return Exaggerate{doc.at("factor").get<double>()};
  if (kind == "anchor") {
    const auto& t = doc.at("target");
    return Anchor{t.is_array() ? t.get<std::vector<double>>() : std::vector<double>{t.get<double>()}};
  }
  throw ValidationError("unknown policy kind '" + kind + "'");
}

void validate_policy(const StrategyPolicy& p, size_t dims) {
  if (const auto* e = std::get_if<Exaggerate>(&p)) {
    if (!std::isfinite(e->factor) || e->factor < 1.0) throw ValidationError("exaggerate factor must be finite and >= 1");
  }
  if (const auto* a = std::get_if<Anchor>(&p)) {
    if (a->target.size() != dims) throw ValidationError("anchor target has the wrong dimension");
    require_finite(a->target, "anchor target");
  }
}

struct Outcome {
  std::vector<double> winner;
  std::optional<protocol::SessionState> state;
};

Outcome deliberate(const ExperimentConfig& config, const std::vector<SyntheticParticipant>& pop,
                   const std::vector<std::vector<double>>& reports, uint64_t rep_seed, int index) {
  auto backend_config = config.backend;
  backend_config.dims = config.population.dims;
  backend_config.seed = derive_seed(config.backend.seed, "replication", static_cast<uint64_t>(index));
  mediator::SyntheticBackend backend(backend_config);

  std::vector<std::unique_ptr<protocol::LatentAgent>> agents;
  for (const auto& r : reports) agents.push_back(std::make_unique<protocol::LatentAgent>(r));

  Outcome out;
  const mediator::Statement* final_statement = nullptr;
  std::optional<protocol::Session> session;
  hierarchy::HierarchyResult result;
  if (config.deliberation.kind == Deliberation::Kind::flat) {
    auto session_config = config.deliberation.session;
    session_config.participants.clear();
    protocol::AgentMap map;
    for (size_t i = 0; i < pop.size(); ++i) {
      session_config.participants.push_back(pop[i].id);
      map[pop[i].id] = agents[i].get();
    }
    session_config.seed = derive_seed(rep_seed, "session");
    session.emplace(protocol::run_session(session_config, backend, map));
    final_statement = session->state().final_statement();
    out.state = session->state();
  } else {
    auto spec = config.deliberation.hierarchy;
    spec.total_participants = pop.size();
    spec.seed = derive_seed(rep_seed, "hierarchy");
    std::vector<hierarchy::Member> members;
    for (size_t i = 0; i < pop.size(); ++i) {
      members.push_back({pop[i].id, mediator::format_position(reports[i]), agents[i].get()});
    }
    hierarchy::RunOptions options;
    options.parallelism = 1;
    result = hierarchy::run_hierarchy(spec, members, backend, options);
    if (result.status != hierarchy::HierarchyResult::Status::complete) {
      throw Error(ErrorCode::protocol, "hierarchy aborted: " + result.message);
    }
    if (result.top) final_statement = &*result.top;
  }
  if (final_statement == nullptr) throw Error(ErrorCode::protocol, "deliberation ended without a statement");
  out.winner = mediator::position_of(final_statement->text, config.population.dims);
  return out;
}

double to_rating(double x, double mean, double sd, const analytics::RatingScale& scale) {
  const double spread = sd > 0.0 ? sd : 1.0;
  const double unit = std::clamp(0.5 + (x - mean) / (6.0 * spread), 0.0, 1.0);
  return scale.min + unit * (scale.max - scale.min);
}

}  // namespace

std::string policy_name(const StrategyPolicy& p) { return policy_json(p).at("kind").get<std::string>(); }

void PopulationSpec::validate() const {
  if (size < 1) throw ValidationError("population size must be at least 1");
  if (dims < 1) throw ValidationError("population dims must be at least 1");
  if (!std::isfinite(expressiveness) || expressiveness < 0.0) throw ValidationError("expressiveness must be >= 0");
  if (factions.empty()) {
    if (distribution == Distribution::normal && !(sd >= 0.0 && std::isfinite(mean) && std::isfinite(sd))) {
      throw ValidationError("normal distribution needs finite mean and sd >= 0");
    }
    if (distribution == Distribution::uniform && !(std::isfinite(low) && std::isfinite(high) && low <= high)) {
      throw ValidationError("uniform distribution needs low <= high");
    }
    return;
  }
  double total = 0.0;
  for (const auto& f : factions) {
    if (f.name.empty()) throw ValidationError("faction needs a name");
    if (!(f.share >= 0.0) || !std::isfinite(f.share)) throw ValidationError("faction share must be >= 0");
    if (f.center.size() != dims) throw ValidationError("faction '" + f.name + "' center has the wrong dimension");
    require_finite(f.center, "faction center");
    if (!(f.spread >= 0.0) || !std::isfinite(f.spread)) throw ValidationError("faction spread must be >= 0");
    total += f.share;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ValidationError("faction shares must sum to 1");
}

std::vector<size_t> faction_counts(const std::vector<double>& shares, size_t n) {
  std::vector<size_t> counts(shares.size());
  std::vector<double> remainder(shares.size());
  size_t assigned = 0;
  for (size_t i = 0; i < shares.size(); ++i) {
    const double exact = shares[i] * static_cast<double>(n);
    counts[i] = static_cast<size_t>(std::floor(exact + 1e-9));
    remainder[i] = exact - static_cast<double>(counts[i]);
    assigned += counts[i];
  }
  std::vector<size_t> order(shares.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return remainder[a] > remainder[b]; });
  for (size_t i = 0; assigned < n; ++i, ++assigned) ++counts[order[i % order.size()]];
  return counts;
}

std::vector<SyntheticParticipant> spawn_population(const PopulationSpec& spec, uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  std::vector<SyntheticParticipant> pop;
  auto add = [&](std::vector<double> latent, std::string faction) {
    SyntheticParticipant p;
    p.id = ParticipantId("p" + std::to_string(pop.size() + 1));
    p.latent = std::move(latent);
    p.expressiveness = spec.expressiveness;
    p.faction = std::move(faction);
    pop.push_back(std::move(p));
  };
  if (spec.factions.empty()) {
    for (size_t i = 0; i < spec.size; ++i) {
      std::vector<double> x(spec.dims);
      for (double& v : x) {
        v = spec.distribution == PopulationSpec::Distribution::normal ? spec.mean + spec.sd * rng.normal()
                                                                      : spec.low + (spec.high - spec.low) * rng.uniform();
      }
      add(std::move(x), "");
    }
    return pop;
  }
  std::vector<double> shares;
  for (const auto& f : spec.factions) shares.push_back(f.share);
  const auto counts = faction_counts(shares, spec.size);
  for (size_t f = 0; f < spec.factions.size(); ++f) {
    for (size_t i = 0; i < counts[f]; ++i) {
      std::vector<double> x = spec.factions[f].center;
      for (double& v : x) v += spec.factions[f].spread * rng.normal();
      add(std::move(x), spec.factions[f].name);
    }
  }
  return pop;
}

std::vector<double> population_mean(const std::vector<SyntheticParticipant>& population) {
  if (population.empty()) return {};
  std::vector<double> mean(population.front().latent.size(), 0.0);
  for (const auto& p : population) {
    for (size_t r = 0; r < mean.size(); ++r) mean[r] += p.latent[r];
  }
  for (double& m : mean) m /= static_cast<double>(population.size());
  return mean;
}

std::vector<double> report_opinion(const SyntheticParticipant& p, const std::vector<double>& anchor,
                                   const std::vector<double>& noise) {
  std::vector<double> out = std::visit(
      [&](const auto& policy) -> std::vector<double> {
        using T = std::decay_t<decltype(policy)>;
        if constexpr (std::is_same_v<T, Sincere>) {
          return p.latent;
        } else if constexpr (std::is_same_v<T, Exaggerate>) {
          std::vector<double> x(p.latent.size());
          for (size_t r = 0; r < x.size(); ++r) x[r] = policy.factor * (p.latent[r] - anchor[r]) + anchor[r];
          return x;
        } else {
          return policy.target;
        }
      },
      p.policy);
  for (size_t r = 0; r < out.size(); ++r) out[r] += p.expressiveness * noise[r];
  return out;
}

void ExperimentConfig::validate() const {
  population.validate();
  if (replications < 1) throw ValidationError("replications must be at least 1");
  if (!std::isfinite(persuasion) || persuasion < 0.0 || persuasion > 1.0) {
    throw ValidationError("persuasion must be in [0, 1]");
  }
  if (!(scale.min < scale.max)) throw ValidationError("rating scale must have min < max");
  if (backend.noise < 0.0) throw ValidationError("backend noise must be >= 0");
  size_t counted = 0;
  for (const auto& s : strategies) {
    validate_policy(s.policy, population.dims);
    for (const auto& id : s.participants) {
      const auto& name = id.str();
      const bool known = name.size() > 1 && name[0] == 'p' &&
                         std::all_of(name.begin() + 1, name.end(), [](char c) { return std::isdigit(c); }) &&
                         std::stoul(name.substr(1)) >= 1 && std::stoul(name.substr(1)) <= population.size;
      if (!known) throw ValidationError("strategy names unknown participant '" + name + "'");
    }
    counted += s.count + s.participants.size();
  }
  if (counted > population.size) throw ValidationError("more strategists than participants");
  if (deliberation.kind == Deliberation::Kind::hierarchy) {
    auto spec = deliberation.hierarchy;
    spec.total_participants = population.size;
    spec.validate();
  }
}

ExperimentConfig experiment_config_from_json(const json& doc) {
  if (!doc.is_object()) throw ValidationError("experiment config must be a JSON object");
  ExperimentConfig c;
  try {
    const json pop = doc.value("population", json::object());
    auto& p = c.population;
    p.size = pop.value("size", p.size);
    p.dims = pop.value("dims", p.dims);
    p.expressiveness = pop.value("expressiveness", p.expressiveness);
    if (pop.contains("distribution")) {
      const auto& d = pop.at("distribution");
      const std::string kind = d.value("kind", "normal");
      if (kind == "normal") {
        p.distribution = PopulationSpec::Distribution::normal;
        p.mean = d.value("mean", p.mean);
        p.sd = d.value("sd", p.sd);
      } else if (kind == "uniform") {
        p.distribution = PopulationSpec::Distribution::uniform;
        p.low = d.value("low", p.low);
        p.high = d.value("high", p.high);
      } else {
        throw ValidationError("unknown distribution '" + kind + "'");
      }
    }
    for (const auto& f : pop.value("factions", json::array())) {
      FactionSpec spec;
      spec.name = f.at("name").get<std::string>();
      spec.share = f.at("share").get<double>();
      const auto& center = f.at("center");
      spec.center = center.is_array() ? center.get<std::vector<double>>() : std::vector<double>{center.get<double>()};
      spec.spread = f.value("spread", spec.spread);
      p.factions.push_back(spec);
    }

    const json del = doc.value("deliberation", json{{"kind", "flat"}});
    const std::string kind = del.value("kind", "flat");
    if (kind == "flat") {
      json session = del.value("session", json::object());
      session["participants"] = json::array();
      if (!session.contains("question")) session["question"] = "Where can we find common ground?";
      c.deliberation.kind = Deliberation::Kind::flat;
      c.deliberation.session = protocol::session_config_from_json(session);
    } else if (kind == "hierarchy") {
      json h = del.at("hierarchy");
      h["total_participants"] = p.size;
      c.deliberation.kind = Deliberation::Kind::hierarchy;
      c.deliberation.hierarchy = hierarchy::hierarchy_spec_from_json(h);
    } else {
      throw ValidationError("unknown deliberation kind '" + kind + "'");
    }

    json backend = doc.value("backend", json::object());
    if (backend.value("kind", "synthetic") != "synthetic") {
      throw ValidationError("experiments run against the synthetic backend only");
    }
    c.backend = mediator::backend_config_from_json(backend).synthetic;

    for (const auto& s : doc.value("strategies", json::array())) {
      StrategyAssignment a;
      a.policy = policy_from_json(s.at("policy"));
      for (const auto& id : s.value("participants", json::array())) a.participants.emplace_back(id.get<std::string>());
      a.count = s.value("count", size_t{0});
      c.strategies.push_back(std::move(a));
    }
    c.persuasion = doc.value("persuasion", c.persuasion);
    if (doc.contains("rating_scale")) {
      c.scale.min = doc.at("rating_scale").at("min").get<double>();
      c.scale.max = doc.at("rating_scale").at("max").get<double>();
    }
    c.replications = doc.value("replications", c.replications);
    c.seed = doc.value("seed", c.seed);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("experiment config: ") + e.what());
  }
  c.validate();
  return c;
}

json to_json(const ExperimentConfig& c) {
  const auto& p = c.population;
  json pop{{"size", p.size}, {"dims", p.dims}, {"expressiveness", p.expressiveness}};
  if (p.factions.empty()) {
    pop["distribution"] = p.distribution == PopulationSpec::Distribution::normal
                              ? json{{"kind", "normal"}, {"mean", p.mean}, {"sd", p.sd}}
                              : json{{"kind", "uniform"}, {"low", p.low}, {"high", p.high}};
  } else {
    json factions = json::array();
    for (const auto& f : p.factions) {
      factions.push_back({{"name", f.name}, {"share", f.share}, {"center", f.center}, {"spread", f.spread}});
    }
    pop["factions"] = factions;
  }
  json del;
  if (c.deliberation.kind == Deliberation::Kind::flat) {
    json session = protocol::to_json(c.deliberation.session);
    session.erase("participants");
    session.erase("seed");
    del = {{"kind", "flat"}, {"session", session}};
  } else {
    json h = hierarchy::to_json(c.deliberation.hierarchy);
    h.erase("total_participants");
    h.erase("seed");
    del = {{"kind", "hierarchy"}, {"hierarchy", h}};
  }
  json strategies = json::array();
  for (const auto& s : c.strategies) {
    json ids = json::array();
    for (const auto& id : s.participants) ids.push_back(id.str());
    strategies.push_back({{"policy", policy_json(s.policy)}, {"participants", ids}, {"count", s.count}});
  }
  return json{{"population", pop},
              {"deliberation", del},
              {"backend",
               {{"kind", "synthetic"},
                {"noise", c.backend.noise},
                {"seed", c.backend.seed},
                {"restatement_share", c.backend.restatement_share},
                {"centroid_pull", c.backend.centroid_pull}}},
              {"strategies", strategies},
              {"persuasion", c.persuasion},
              {"rating_scale", {{"min", c.scale.min}, {"max", c.scale.max}}},
              {"replications", c.replications},
              {"seed", c.seed}};
}

Replication run_replication(const ExperimentConfig& config, int index) {
  Replication rep;
  rep.index = index;
  rep.seed = derive_seed(config.seed, "replication", static_cast<uint64_t>(index));
  auto pop = spawn_population(config.population, derive_seed(rep.seed, "population"));
  const size_t n = pop.size();
  const size_t d = config.population.dims;

  // Strategists: explicit ids first, then counted ones from a seeded shuffle
  // of whoever is left.
  std::vector<bool> taken(n, false);
  for (const auto& s : config.strategies) {
    for (const auto& id : s.participants) {
      const size_t i = std::stoul(id.str().substr(1)) - 1;
      pop[i].policy = s.policy;
      taken[i] = true;
    }
  }
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  Rng pick(derive_seed(rep.seed, "strategists"));
  shuffle(order.begin(), order.end(), pick);
  size_t cursor = 0;
  for (const auto& s : config.strategies) {
    for (size_t c = 0; c < s.count; ++c) {
      while (taken[order[cursor]]) ++cursor;
      pop[order[cursor]].policy = s.policy;
      taken[order[cursor]] = true;
    }
  }
  for (size_t i = 0; i < n; ++i) {
    if (taken[i] && !std::holds_alternative<Sincere>(pop[i].policy)) rep.strategists.push_back(pop[i].id);
  }

  const auto mean = population_mean(pop);
  Rng noise_rng(derive_seed(rep.seed, "report"));
  std::vector<std::vector<double>> strategic, sincere;
  std::vector<double> push(d, 0.0);
  for (auto& p : pop) {
    std::vector<double> z(d);
    for (double& v : z) v = noise_rng.normal();
    strategic.push_back(report_opinion(p, mean, z));
    auto honest = p;
    honest.policy = Sincere{};
    sincere.push_back(report_opinion(honest, mean, z));
    for (size_t r = 0; r < d; ++r) push[r] += strategic.back()[r] - sincere.back()[r];
  }

  try {
    auto run = deliberate(config, pop, strategic, rep.seed, index);
    auto base = deliberate(config, pop, sincere, rep.seed, index);
    rep.winner = run.winner;
    rep.baseline_winner = base.winner;
    rep.population_sd = population_sd(pop, mean);
    rep.distance_to_median = distance(rep.winner, coordinate_median(pop));

    const double shift = distance(rep.winner, rep.baseline_winner);
    double along = 0.0;
    for (size_t r = 0; r < d; ++r) along += (rep.winner[r] - rep.baseline_winner[r]) * push[r];
    const double scale = rep.population_sd > 0.0 ? rep.population_sd : 1.0;
    rep.skew = (along < 0.0 ? -shift : shift) / scale;

    std::vector<double> first;
    for (const auto& p : pop) first.push_back(p.latent[0]);
    std::sort(first.begin(), first.end());
    rep.q1 = quantile(first, 0.25);
    rep.q3 = quantile(first, 0.75);

    if (run.state) {
      std::map<std::string, size_t> sizes;
      for (const auto& p : pop) ++sizes[p.faction];
      std::string largest;
      size_t best = 0;
      for (const auto& f : config.population.factions) {
        if (sizes[f.name] > best) {
          best = sizes[f.name];
          largest = f.name;
        }
      }
      std::map<ParticipantId, analytics::Faction> labels;
      if (!config.population.factions.empty()) {
        for (const auto& p : pop) {
          labels[p.id] = p.faction == largest ? analytics::Faction::majority : analytics::Faction::minority;
        }
      }
      mediator::LatentEmbedder embedder(d);
      const auto& st = *run.state;
      std::vector<analytics::LabeledOpinion> ops;
      const auto clustered = labels.empty() ? analytics::cluster_factions(st.opinions, embedder)
                                            : std::vector<analytics::Faction>{};
      for (size_t i = 0; i < st.opinions.size(); ++i) {
        ops.push_back({st.opinions[i], labels.empty() ? clustered[i] : labels.at(*st.opinions[i].author)});
      }
      try {
        rep.influence = analytics::influence_weights(ops, *st.final_statement(), embedder);
      } catch (const Error& e) {
        rep.influence_note = e.what();
      }
    } else {
      rep.influence_note = "influence is reported for flat sessions only";
    }

    analytics::Ratings pre, post;
    const double sd0 = [&] {
      double s = 0.0;
      for (const auto& p : pop) s += (p.latent[0] - mean[0]) * (p.latent[0] - mean[0]);
      return std::sqrt(s / static_cast<double>(n));
    }();
    for (const auto& p : pop) {
      const double moved = std::lerp(p.latent[0], rep.winner[0], config.persuasion);
      pre[p.id] = to_rating(p.latent[0], mean[0], sd0, config.scale);
      post[p.id] = to_rating(moved, mean[0], sd0, config.scale);
    }
    rep.division = analytics::division_index(pre, post, config.scale);
    rep.completed = true;
  } catch (const Error& e) {
    rep.error = e.what();
  }
  return rep;
}

Summary summarize(const std::vector<double>& values) {
  Summary s;
  if (values.empty()) return s;
  s.min = *std::min_element(values.begin(), values.end());
  s.max = *std::max_element(values.begin(), values.end());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.sd = values.size() > 1 ? std::sqrt(ss / static_cast<double>(values.size() - 1)) : 0.0;
  return s;
}

ExperimentReport run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  ExperimentReport report;
  const auto count = static_cast<size_t>(config.replications);
  report.replications.resize(count);
  size_t workers = options.parallelism == 0 ? std::max(1u, std::thread::hardware_concurrency()) : options.parallelism;
  workers = std::min(workers, count);
  std::atomic<size_t> next{0};
  auto work = [&] {
    for (size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
      report.replications[i] = run_replication(config, static_cast<int>(i));
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  std::vector<double> skew, dist, delta;
  size_t nonzero = 0;
  for (const auto& r : report.replications) {
    if (!r.completed) {
      report.complete = false;
      continue;
    }
    ++report.completed;
    skew.push_back(r.skew);
    dist.push_back(r.distance_to_median);
    delta.push_back(r.division.delta);
    if (r.skew != 0.0) ++nonzero;
  }
  report.skew = summarize(skew);
  report.distance_to_median = summarize(dist);
  report.division_delta = summarize(delta);
  report.nonzero_skew_fraction =
      report.completed == 0 ? 0.0 : static_cast<double>(nonzero) / static_cast<double>(report.completed);
  return report;
}

json to_json(const ExperimentReport& report) {
  auto summary = [](const Summary& s) { return json{{"mean", s.mean}, {"sd", s.sd}, {"min", s.min}, {"max", s.max}}; };
  json reps = json::array();
  for (const auto& r : report.replications) {
    json entry{{"index", r.index}, {"seed", r.seed}, {"completed", r.completed}};
    if (!r.completed) {
      entry["error"] = r.error;
      reps.push_back(entry);
      continue;
    }
    json strategists = json::array();
    for (const auto& id : r.strategists) strategists.push_back(id.str());
    entry["strategists"] = strategists;
    entry["winner"] = r.winner;
    entry["baseline_winner"] = r.baseline_winner;
    entry["distance_to_median"] = r.distance_to_median;
    entry["population_sd"] = r.population_sd;
    entry["skew"] = r.skew;
    entry["interquartile_range"] = {r.q1, r.q3};
    entry["influence"] = r.influence ? analytics::to_json(*r.influence) : json(nullptr);
    if (!r.influence_note.empty()) entry["influence_note"] = r.influence_note;
    entry["division"] = analytics::to_json(r.division);
    reps.push_back(entry);
  }
  return json{{"complete", report.complete},
              {"completed", report.completed},
              {"replications", reps},
              {"aggregate",
               {{"skew", summary(report.skew)},
                {"nonzero_skew_fraction", report.nonzero_skew_fraction},
                {"distance_to_median", summary(report.distance_to_median)},
                {"division_delta", summary(report.division_delta)}}}};
}

}  // namespace concord::simulation
