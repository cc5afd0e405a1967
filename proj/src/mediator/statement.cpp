#include "concord/mediator/statement.hpp"

#include <cctype>

#include "concord/core/error.hpp"

namespace concord::mediator {

using nlohmann::json;

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::opinion: return "opinion";
    case Provenance::candidate: return "candidate";
    case Provenance::initial_winner: return "initial_winner";
    case Provenance::revised_candidate: return "revised_candidate";
    case Provenance::revised_winner: return "revised_winner";
  }
  return "candidate";
}

Provenance provenance_from_string(std::string_view text) {
  for (Provenance p : {Provenance::opinion, Provenance::candidate, Provenance::initial_winner,
                       Provenance::revised_candidate, Provenance::revised_winner}) {
    if (to_string(p) == text) return p;
  }
  throw ValidationError("unknown statement provenance '" + std::string(text) + "'");
}

std::string normalize_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

void Statement::validate() const {
  if (id.empty()) throw ValidationError("statement has an empty id");
  if (normalize_text(text).empty()) {
    throw ValidationError("statement '" + id.str() + "' has empty text");
  }
  if (provenance == Provenance::opinion && !author) {
    throw ValidationError("opinion '" + id.str() + "' has no author");
  }
  if (provenance != Provenance::opinion && author) {
    throw ValidationError("statement '" + id.str() + "' is not an opinion but names an author");
  }
  if (round < 0) throw ValidationError("statement '" + id.str() + "' has a negative round");
}

void GenerationRequest::validate() const {
  if (k < 1) throw ValidationError("candidate count k must be at least 1");
  if (opinions.empty()) throw ValidationError("generation needs at least one opinion");
  for (const auto& op : opinions) {
    op.validate();
    if (op.provenance != Provenance::opinion) {
      throw ValidationError("generation input '" + op.id.str() + "' is not an opinion");
    }
  }
  if (!critiques.empty() && !prior_winner) {
    throw ValidationError("critiques given without the winning statement they target");
  }
  if (prior_winner) {
    prior_winner->validate();
    if (!is_winner(prior_winner->provenance)) {
      throw ValidationError("prior winner '" + prior_winner->id.str() + "' is not a winner statement");
    }
  }
  for (const auto& c : critiques) {
    if (normalize_text(c.text).empty()) throw ValidationError("critique by '" + c.author.str() + "' is empty");
    if (c.target != prior_winner->id) {
      throw ValidationError("critique by '" + c.author.str() + "' targets '" + c.target.str() +
                            "', which is not the winning statement");
    }
  }
}

void RewardQuery::validate() const {
  participant_opinion.validate();
  if (participant_opinion.provenance != Provenance::opinion) {
    throw ValidationError("reward query opinion must have opinion provenance");
  }
  if (candidates.empty()) throw ValidationError("reward query has no candidates");
  for (const auto& c : candidates) c.validate();
}

json to_json(const Statement& s) {
  json doc{{"id", s.id.str()}, {"text", s.text}, {"provenance", to_string(s.provenance)}, {"round", s.round}};
  doc["author"] = s.author ? json(s.author->str()) : json(nullptr);
  return doc;
}

Statement statement_from_json(const json& doc) {
  Statement s;
  s.id = CandidateId(doc.at("id").get<std::string>());
  s.text = doc.at("text").get<std::string>();
  s.provenance = provenance_from_string(doc.at("provenance").get<std::string>());
  s.round = doc.value("round", 0);
  if (doc.contains("author") && !doc.at("author").is_null()) {
    s.author = ParticipantId(doc.at("author").get<std::string>());
  }
  return s;
}

json to_json(const Critique& c) {
  return json{{"author", c.author.str()}, {"target", c.target.str()}, {"text", c.text}, {"round", c.round}};
}

Critique critique_from_json(const json& doc) {
  return Critique{ParticipantId(doc.at("author").get<std::string>()),
                  CandidateId(doc.at("target").get<std::string>()), doc.at("text").get<std::string>(),
                  doc.value("round", 0)};
}

}  // namespace concord::mediator
