#include "concord/ballots/io.hpp"

#include <charconv>
#include <string>

#include "concord/core/error.hpp"

namespace concord::ballots {

using nlohmann::json;

namespace {

const json& require(const json& doc, const char* key, const char* where) {
  if (!doc.is_object() || !doc.contains(key)) {
    throw ValidationError(std::string(where) + ": missing field '" + key + "'");
  }
  return doc.at(key);
}

std::string as_string(const json& value, const char* what) {
  if (!value.is_string()) throw ValidationError(std::string(what) + " must be a string");
  return value.get<std::string>();
}

}  // namespace

Ranking ranking_from_json(const json& doc) {
  Ranking ranking;
  if (doc.contains("participant")) ranking.participant = ParticipantId(as_string(doc.at("participant"), "participant"));
  const json& order = require(doc, "order", "ranking");
  if (!order.is_array()) throw ValidationError("ranking order must be an array of tie-groups");
  for (const auto& group : order) {
    if (!group.is_array()) throw ValidationError("tie-group must be an array of candidate ids");
    TieGroup tie;
    for (const auto& id : group) tie.emplace_back(as_string(id, "candidate id"));
    ranking.order.push_back(std::move(tie));
  }
  return ranking;
}

json to_json(const Ranking& ranking) {
  json order = json::array();
  for (const auto& group : ranking.order) {
    json g = json::array();
    for (const auto& id : group) g.push_back(id.str());
    order.push_back(std::move(g));
  }
  return json{{"participant", ranking.participant.str()}, {"order", std::move(order)}};
}

PreferenceProfile profile_from_json(const json& doc) {
  PreferenceProfile profile;
  const json& candidates = require(doc, "candidates", "profile");
  if (!candidates.is_array()) throw ValidationError("profile candidates must be an array");
  for (const auto& id : candidates) profile.candidates.emplace_back(as_string(id, "candidate id"));
  const json& rankings = require(doc, "rankings", "profile");
  if (!rankings.is_array()) throw ValidationError("profile rankings must be an array");
  for (const auto& r : rankings) profile.rankings.push_back(ranking_from_json(r));
  return profile;
}

json to_json(const PreferenceProfile& profile) {
  json candidates = json::array();
  for (const auto& id : profile.candidates) candidates.push_back(id.str());
  json rankings = json::array();
  for (const auto& r : profile.rankings) rankings.push_back(to_json(r));
  return json{{"candidates", std::move(candidates)}, {"rankings", std::move(rankings)}};
}

ScoreMatrix score_matrix_from_json(const json& doc) {
  ScoreMatrix scores;
  for (const auto& p : require(doc, "participants", "scores")) scores.participants.emplace_back(as_string(p, "participant"));
  for (const auto& c : require(doc, "candidates", "scores")) scores.candidates.emplace_back(as_string(c, "candidate id"));
  for (const auto& row : require(doc, "values", "scores")) {
    for (const auto& v : row) scores.values.push_back(v.get<double>());
  }
  if (doc.contains("stddev")) {
    for (const auto& row : doc.at("stddev")) {
      for (const auto& v : row) scores.stddev.push_back(v.get<double>());
    }
  }
  return scores;
}

json to_json(const ScoreMatrix& scores) {
  json participants = json::array();
  for (const auto& p : scores.participants) participants.push_back(p.str());
  json candidates = json::array();
  for (const auto& c : scores.candidates) candidates.push_back(c.str());
  const size_t nc = scores.candidates.size();
  auto rows = [&](const std::vector<double>& flat) {
    json out = json::array();
    for (size_t p = 0; p < scores.participants.size(); ++p) {
      out.push_back(json(std::vector<double>(flat.begin() + static_cast<ptrdiff_t>(p * nc),
                                             flat.begin() + static_cast<ptrdiff_t>((p + 1) * nc))));
    }
    return out;
  };
  json doc{{"participants", std::move(participants)}, {"candidates", std::move(candidates)},
           {"values", rows(scores.values)}};
  if (scores.has_uncertainty()) doc["stddev"] = rows(scores.stddev);
  return doc;
}

TiebreakRule parse_tiebreak(std::string_view text) {
  if (text == "lexicographic") return TiebreakRule::lexicographic();
  if (text == "candidate_order") return TiebreakRule::candidate_order();
  if (text.starts_with("random:")) {
    std::string_view digits = text.substr(7);
    uint64_t seed = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), seed);
    if (ec == std::errc() && ptr == digits.data() + digits.size()) return TiebreakRule::seeded_random(seed);
  }
  throw ValidationError("unknown tiebreak rule '" + std::string(text) +
                        "' (expected lexicographic, candidate_order or random:<seed>)");
}

TiebreakRule tiebreak_from_json(const json& doc) {
  if (doc.is_string()) return parse_tiebreak(doc.get<std::string>());
  const std::string kind = as_string(require(doc, "kind", "tiebreak"), "tiebreak kind");
  if (kind == "seeded_random") return TiebreakRule::seeded_random(doc.value("seed", uint64_t{0}));
  return parse_tiebreak(kind);
}

json to_json(const TiebreakRule& rule) {
  switch (rule.kind()) {
    case TiebreakRule::Kind::lexicographic: return json{{"kind", "lexicographic"}};
    case TiebreakRule::Kind::candidate_order: return json{{"kind", "candidate_order"}};
    case TiebreakRule::Kind::seeded_random: return json{{"kind", "seeded_random"}, {"seed", rule.seed()}};
  }
  return json{};
}

}  // namespace concord::ballots
