#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "concord/core/error.hpp"
#include "concord/core/rng.hpp"
#include "concord/mediator/embedder.hpp"
#include "concord/mediator/synthetic_backend.hpp"
#include "concord/simulation/simulation.hpp"

namespace concord::simulation {
namespace {

ExperimentConfig five_person(int replications, uint64_t seed) {
  ExperimentConfig c;
  c.population.size = 5;
  c.deliberation.session.question = "Should the library open on Sundays?";
  c.deliberation.session.k = 8;
  c.deliberation.session.rounds = 1;
  c.replications = replications;
  c.seed = seed;
  return c;
}

TEST(Population, LargestRemainderCounts) {
  EXPECT_EQ(faction_counts({0.6, 0.4}, 5), (std::vector<size_t>{3, 2}));
  EXPECT_EQ(faction_counts({0.7, 0.3}, 1000), (std::vector<size_t>{700, 300}));
  EXPECT_EQ(faction_counts({1.0 / 3, 1.0 / 3, 1.0 / 3}, 10), (std::vector<size_t>{4, 3, 3}));
  EXPECT_EQ(faction_counts({0.5, 0.5}, 1), (std::vector<size_t>{1, 0}));
}

TEST(Population, MixtureIsRespectedExactly) {
  PopulationSpec spec;
  spec.size = 5;
  spec.factions = {{"majority", 0.6, {1.0}, 0.1}, {"minority", 0.4, {-1.0}, 0.1}};
  auto pop = spawn_population(spec, 3);
  ASSERT_EQ(pop.size(), 5u);
  EXPECT_EQ(std::count_if(pop.begin(), pop.end(), [](const auto& p) { return p.faction == "majority"; }), 3);
  EXPECT_EQ(pop[0].id, ParticipantId("p1"));
  EXPECT_GT(pop[0].latent[0], 0.0);
  EXPECT_LT(pop[4].latent[0], 0.0);
}

TEST(Population, SameSeedSamePopulation) {
  PopulationSpec spec;
  spec.size = 50;
  spec.dims = 2;
  auto a = spawn_population(spec, 9);
  auto b = spawn_population(spec, 9);
  auto c = spawn_population(spec, 10);
  for (size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].latent, b[i].latent);
  EXPECT_NE(a[0].latent, c[0].latent);
}

TEST(Population, RejectsBadSpecs) {
  PopulationSpec spec;
  spec.size = 0;
  EXPECT_THROW(spec.validate(), ValidationError);
  spec.size = 4;
  spec.factions = {{"a", 0.5, {0.0}, 1.0}, {"b", 0.4, {1.0}, 1.0}};
  EXPECT_THROW(spec.validate(), ValidationError);
  spec.factions = {{"a", 1.0, {0.0, 1.0}, 1.0}};
  EXPECT_THROW(spec.validate(), ValidationError);
  spec.factions.clear();
  spec.expressiveness = -1.0;
  EXPECT_THROW(spec.validate(), ValidationError);
}

TEST(Report, PolicyArithmetic) {
  SyntheticParticipant p{ParticipantId("p1"), {0.5}, 0.0, Sincere{}, ""};
  const std::vector<double> zero{0.0};
  EXPECT_EQ(report_opinion(p, zero, {0.7}), (std::vector<double>{0.5}));
  p.policy = Anchor{{3.0}};
  EXPECT_EQ(report_opinion(p, zero, {0.7}), (std::vector<double>{3.0}));
  p.policy = Exaggerate{2.0};
  EXPECT_DOUBLE_EQ(report_opinion(p, zero, {0.7})[0], 1.0);
  EXPECT_DOUBLE_EQ(report_opinion(p, {1.0}, {0.0})[0], 0.0);
  p.expressiveness = 0.5;
  p.policy = Sincere{};
  EXPECT_DOUBLE_EQ(report_opinion(p, zero, {0.7})[0], 0.85);
}

TEST(Experiment, AllSincereHasZeroSkew) {
  auto c = five_person(100, 1);
  auto report = run_experiment(c);
  ASSERT_TRUE(report.complete);
  for (const auto& r : report.replications) {
    EXPECT_EQ(r.skew, 0.0);
    EXPECT_EQ(r.winner, r.baseline_winner);
    EXPECT_TRUE(r.strategists.empty());
  }
  EXPECT_EQ(report.nonzero_skew_fraction, 0.0);
}

TEST(Experiment, SincereWinnerStaysInsideInterquartileRange) {
  auto c = five_person(120, 2);
  auto report = run_experiment(c);
  ASSERT_EQ(report.completed, 120u);
  for (const auto& r : report.replications) {
    EXPECT_GE(r.winner[0], r.q1 - 1e-12) << "replication " << r.index;
    EXPECT_LE(r.winner[0], r.q3 + 1e-12) << "replication " << r.index;
  }
}

TEST(Experiment, AnchorSkewMatchesPairedOracle) {
  auto c = five_person(30, 3);
  c.strategies.push_back({Anchor{{3.0}}, {}, 1});
  auto report = run_experiment(c);
  ASSERT_TRUE(report.complete);
  for (const auto& r : report.replications) {
    ASSERT_EQ(r.strategists.size(), 1u);
    // Recompute both sessions by hand from the same draws.
    PopulationSpec spec = c.population;
    auto pop = spawn_population(spec, derive_seed(r.seed, "population"));
    std::vector<double> mean = population_mean(pop);
    Rng noise(derive_seed(r.seed, "report"));
    std::vector<std::unique_ptr<protocol::LatentAgent>> honest, strategic;
    protocol::AgentMap honest_map, strategic_map;
    for (auto& p : pop) {
      const std::vector<double> z{noise.normal()};
      honest.push_back(std::make_unique<protocol::LatentAgent>(report_opinion(p, mean, z)));
      if (p.id == r.strategists[0]) p.policy = Anchor{{3.0}};
      strategic.push_back(std::make_unique<protocol::LatentAgent>(report_opinion(p, mean, z)));
      honest_map[p.id] = honest.back().get();
      strategic_map[p.id] = strategic.back().get();
    }
    auto config = c.deliberation.session;
    for (const auto& p : pop) config.participants.push_back(p.id);
    config.seed = derive_seed(r.seed, "session");
    auto bc = c.backend;
    bc.seed = derive_seed(c.backend.seed, "replication", static_cast<uint64_t>(r.index));
    mediator::SyntheticBackend b1(bc), b2(bc);
    auto with = protocol::run_session(config, b1, strategic_map);
    auto without = protocol::run_session(config, b2, honest_map);
    const double x = mediator::position_of(with.state().final_statement()->text, 1)[0];
    const double y = mediator::position_of(without.state().final_statement()->text, 1)[0];
    double m = 0.0, ss = 0.0;
    for (const auto& p : pop) m += p.latent[0] / 5.0;
    for (const auto& p : pop) ss += (p.latent[0] - m) * (p.latent[0] - m);
    const double sd = std::sqrt(ss / 5.0);
    const double push = 3.0 - honest[std::stoul(r.strategists[0].str().substr(1)) - 1]->stance()[0];
    const double want = (x - y) * (push >= 0 ? 1.0 : -1.0) / sd;
    EXPECT_NEAR(r.skew, want, 1e-12) << "replication " << r.index;
  }
}

TEST(Experiment, ReportsAreDeterministic) {
  auto c = five_person(10, 4);
  c.strategies.push_back({Exaggerate{2.0}, {ParticipantId("p2")}, 0});
  c.population.expressiveness = 0.1;
  const auto a = to_json(run_experiment(c, {1})).dump();
  const auto b = to_json(run_experiment(c, {8})).dump();
  const auto again = to_json(run_experiment(c)).dump();
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, again);
}

TEST(Experiment, PersuasionMovesRatings) {
  auto c = five_person(5, 5);
  auto still = run_experiment(c);
  for (const auto& r : still.replications) EXPECT_EQ(r.division.delta, 0.0);
  c.persuasion = 1.0;
  auto moved = run_experiment(c);
  for (const auto& r : moved.replications) {
    EXPECT_EQ(r.division.post, 0.0);
    EXPECT_DOUBLE_EQ(r.division.delta, -r.division.pre);
  }
}

TEST(Experiment, FactionLabelsDriveInfluence) {
  auto c = five_person(5, 6);
  c.population.factions = {{"left", 0.6, {1.0}, 0.2}, {"right", 0.4, {-1.0}, 0.2}};
  auto report = run_experiment(c);
  for (const auto& r : report.replications) {
    ASSERT_TRUE(r.influence.has_value()) << r.influence_note;
    EXPECT_NEAR(r.influence->majority_weight + r.influence->minority_weight, 1.0, 1e-9);
    EXPECT_EQ(std::count(r.influence->factions.begin(), r.influence->factions.end(), analytics::Faction::majority), 3);
  }
}

TEST(Experiment, HierarchicalDeliberation) {
  auto c = five_person(3, 7);
  c.population.size = 60;
  c.deliberation.kind = Deliberation::Kind::hierarchy;
  c.deliberation.hierarchy.branching = {6};
  c.deliberation.hierarchy.session.question = "q";
  c.deliberation.hierarchy.session.k = 6;
  c.strategies.push_back({Anchor{{4.0}}, {}, 6});
  auto report = run_experiment(c);
  ASSERT_TRUE(report.complete);
  for (const auto& r : report.replications) {
    EXPECT_EQ(r.strategists.size(), 6u);
    EXPECT_FALSE(r.influence.has_value());
  }
}

TEST(ExperimentConfig, JsonRoundTrip) {
  nlohmann::json doc = {
      {"population",
       {{"size", 5}, {"factions", {{{"name", "majority"}, {"share", 0.6}, {"center", 1.0}, {"spread", 0.2}},
                                   {{"name", "minority"}, {"share", 0.4}, {"center", {-1.0}}}}}}},
      {"deliberation", {{"kind", "flat"}, {"session", {{"k", 8}, {"rounds", 1}}}}},
      {"backend", {{"noise", 0.0}, {"seed", 4}}},
      {"strategies", {{{"policy", {{"kind", "anchor"}, {"target", 3.0}}}, {"count", 1}}}},
      {"replications", 4},
      {"seed", 12}};
  auto c = experiment_config_from_json(doc);
  EXPECT_EQ(c.population.factions.size(), 2u);
  EXPECT_EQ(c.deliberation.session.k, 8u);
  EXPECT_EQ(std::get<Anchor>(c.strategies[0].policy).target, (std::vector<double>{3.0}));
  auto again = experiment_config_from_json(to_json(c));
  EXPECT_EQ(to_json(again), to_json(c));
}

TEST(ExperimentConfig, RejectsBadConfigs) {
  EXPECT_THROW(experiment_config_from_json({{"replications", 0}}), ValidationError);
  EXPECT_THROW(experiment_config_from_json({{"strategies", {{{"policy", {{"kind", "exaggerate"}, {"factor", 0.5}}}}}}}),
               ValidationError);
  EXPECT_THROW(experiment_config_from_json({{"strategies", {{{"policy", {{"kind", "bribe"}}}}}}}), ValidationError);
  EXPECT_THROW(experiment_config_from_json({{"strategies", {{{"policy", {{"kind", "sincere"}}}, {"participants", {"p9"}}}}}}),
               ValidationError);
  EXPECT_THROW(experiment_config_from_json({{"backend", {{"kind", "remote"}}}}), ValidationError);
  EXPECT_THROW(experiment_config_from_json({{"population", {{"size", 2}}}, {"strategies", {{{"policy", {{"kind", "sincere"}}}, {"count", 3}}}}}),
               ValidationError);
}

}  // namespace
}  // namespace concord::simulation
