#pragma once

// Synthetic-population experiments: participants with latent positions and a
// reporting policy take part in flat or hierarchical deliberations against the
// synthetic backend, and each strategic run is paired with an all-sincere run
// that shares every random draw.

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "concord/analytics/analytics.hpp"
#include "concord/hierarchy/hierarchy.hpp"
#include "concord/mediator/backend.hpp"

namespace concord::simulation {

struct Sincere {
  friend bool operator==(const Sincere&, const Sincere&) = default;
};
// Reports factor * (latent - anchor) + anchor, anchor = population mean.
struct Exaggerate {
  double factor = 1.0;
  friend bool operator==(const Exaggerate&, const Exaggerate&) = default;
};
// Reports the target whatever the latent position.
struct Anchor {
  std::vector<double> target;
  friend bool operator==(const Anchor&, const Anchor&) = default;
};
using StrategyPolicy = std::variant<Sincere, Exaggerate, Anchor>;

std::string policy_name(const StrategyPolicy& p);

struct SyntheticParticipant {
  ParticipantId id;
  std::vector<double> latent;
  // Stddev of the reporting noise.
  double expressiveness = 0.0;
  StrategyPolicy policy = Sincere{};
  std::string faction;
};

struct FactionSpec {
  std::string name;
  double share = 0.0;
  std::vector<double> center;
  double spread = 1.0;
};

struct PopulationSpec {
  size_t size = 5;
  size_t dims = 1;
  enum class Distribution { normal, uniform };
  // Used when no factions are given.
  Distribution distribution = Distribution::normal;
  double mean = 0.0;
  double sd = 1.0;
  double low = -1.0;
  double high = 1.0;
  std::vector<FactionSpec> factions;
  double expressiveness = 0.0;

  void validate() const;
};

// Exact faction counts by largest remainder (ties to the earlier faction).
std::vector<size_t> faction_counts(const std::vector<double>& shares, size_t n);

// Participants p1..pn, all sincere, factions in contiguous blocks.
std::vector<SyntheticParticipant> spawn_population(const PopulationSpec& spec, uint64_t seed);

std::vector<double> population_mean(const std::vector<SyntheticParticipant>& population);

// The position a participant submits. `noise` is a standard normal draw per
// dimension, taken whether or not expressiveness is zero so that runs
// differing only in policy stay aligned.
std::vector<double> report_opinion(const SyntheticParticipant& p, const std::vector<double>& anchor,
                                   const std::vector<double>& noise);

struct StrategyAssignment {
  StrategyPolicy policy;
  // Either explicit ids or a count drawn at random per replication.
  std::vector<ParticipantId> participants;
  size_t count = 0;
};

struct Deliberation {
  enum class Kind { flat, hierarchy };
  Kind kind = Kind::flat;
  // Participants and seed are filled per replication.
  protocol::SessionConfig session;
  hierarchy::HierarchySpec hierarchy;
};

struct ExperimentConfig {
  PopulationSpec population;
  Deliberation deliberation;
  mediator::SyntheticConfig backend;
  std::vector<StrategyAssignment> strategies;
  // How far each participant moves toward the final statement after the
  // session, for the post-deliberation ratings. 0 means nobody moves.
  double persuasion = 0.0;
  analytics::RatingScale scale;
  int replications = 1;
  uint64_t seed = 0;

  void validate() const;
};

ExperimentConfig experiment_config_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const ExperimentConfig& config);

struct Replication {
  int index = 0;
  uint64_t seed = 0;
  bool completed = false;
  std::string error;
  std::vector<ParticipantId> strategists;
  std::vector<double> winner;
  std::vector<double> baseline_winner;
  double distance_to_median = 0.0;
  double population_sd = 0.0;
  // Paired winner displacement over the population sd, signed positive in
  // the direction the strategists pushed their reports.
  double skew = 0.0;
  std::optional<analytics::InfluenceReport> influence;
  std::string influence_note;
  analytics::DivisionReport division;
  // Interquartile range of the first latent coordinate.
  double q1 = 0.0;
  double q3 = 0.0;
};

struct Summary {
  double mean = 0.0;
  double sd = 0.0;
  double min = 0.0;
  double max = 0.0;
};

Summary summarize(const std::vector<double>& values);

struct ExperimentReport {
  std::vector<Replication> replications;
  bool complete = true;
  size_t completed = 0;
  Summary skew;
  Summary distance_to_median;
  Summary division_delta;
  double nonzero_skew_fraction = 0.0;
};

struct RunOptions {
  // 0 means one worker per hardware thread.
  size_t parallelism = 0;
};

Replication run_replication(const ExperimentConfig& config, int index);

ExperimentReport run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

nlohmann::json to_json(const ExperimentReport& report);

}  // namespace concord::simulation
