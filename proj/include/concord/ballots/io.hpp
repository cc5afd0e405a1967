#pragma once

#include <nlohmann/json.hpp>

#include "concord/ballots/ballots.hpp"

namespace concord::ballots {

// Profile file format:
//   {"candidates": ["c1", ...],
//    "rankings": [{"participant": "p1", "order": [["c2"], ["c1", "c3"]]}, ...]}
PreferenceProfile profile_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const PreferenceProfile& profile);

Ranking ranking_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const Ranking& ranking);

ScoreMatrix score_matrix_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const ScoreMatrix& scores);

TiebreakRule tiebreak_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const TiebreakRule& rule);

// "lexicographic", "candidate_order", "random:<seed>"
TiebreakRule parse_tiebreak(std::string_view text);

}  // namespace concord::ballots
