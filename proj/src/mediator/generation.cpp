#include "concord/mediator/generation.hpp"

#include <cmath>
#include <string>
#include <unordered_set>

#include "concord/core/error.hpp"

namespace concord::mediator {

namespace {

std::string candidate_id(int round, size_t index, size_t k) {
  std::string digits = std::to_string(index);
  const size_t width = std::to_string(k > 0 ? k - 1 : 0).size();
  if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
  return "r" + std::to_string(round) + "-c" + digits;
}

}  // namespace

std::vector<Statement> generate_candidates(const GenerationRequest& req, MediatorBackend& backend,
                                           const GenerationOptions& options) {
  req.validate();
  if (options.near_duplicate_threshold && options.embedder == nullptr) {
    throw ValidationError("near-duplicate filtering needs an embedder");
  }
  std::vector<std::string> raw = backend.sample_statements(req);

  std::unordered_set<std::string> seen;
  std::vector<std::vector<double>> kept_embeddings;
  std::vector<std::string> kept;
  for (auto& text : raw) {
    if (kept.size() == req.k) break;
    std::string key = normalize_text(text);
    if (key.empty() || !seen.insert(key).second) continue;
    if (options.near_duplicate_threshold) {
      auto e = options.embedder->embed(text);
      bool near = false;
      for (const auto& other : kept_embeddings) {
        if (euclidean_distance(e, other) <= *options.near_duplicate_threshold) {
          near = true;
          break;
        }
      }
      if (near) continue;
      kept_embeddings.push_back(std::move(e));
    }
    kept.push_back(std::move(text));
  }
  if (kept.empty()) {
    throw Error(ErrorCode::generation_exhausted,
                "backend '" + backend.id() + "' produced no usable candidates");
  }

  const Provenance provenance = req.is_revision() ? Provenance::revised_candidate : Provenance::candidate;
  std::vector<Statement> out;
  out.reserve(kept.size());
  for (size_t i = 0; i < kept.size(); ++i) {
    out.push_back(Statement{CandidateId(candidate_id(req.round, i, req.k)), std::move(kept[i]), provenance,
                            std::nullopt, req.round});
  }
  return out;
}

ScoreRow predict_scores(const RewardQuery& query, MediatorBackend& backend) {
  query.validate();
  ScoreRow row = backend.score(query);
  if (row.scores.size() != query.candidates.size()) {
    throw ProtocolError("", "backend '" + backend.id() + "' returned " + std::to_string(row.scores.size()) +
                                " scores for " + std::to_string(query.candidates.size()) + " candidates");
  }
  for (double s : row.scores) {
    if (!std::isfinite(s)) throw ProtocolError("", "backend '" + backend.id() + "' returned a non-finite score");
  }
  if (!row.stddev.empty() && row.stddev.size() != row.scores.size()) {
    throw ProtocolError("", "backend '" + backend.id() + "' returned mismatched uncertainty");
  }
  return row;
}

DiversityReport candidate_diversity(const std::vector<Statement>& candidates,
                                    const std::vector<Statement>& opinions, const Embedder& embedder) {
  if (candidates.empty() || opinions.empty()) {
    throw ValidationError("diversity needs at least one candidate and one opinion");
  }
  std::vector<std::vector<double>> op_vec, cand_vec;
  try {
    for (const auto& o : opinions) op_vec.push_back(embedder.embed(o.text));
    for (const auto& c : candidates) cand_vec.push_back(embedder.embed(c.text));
  } catch (const std::exception& e) {
    throw Error(ErrorCode::analytics, std::string("embedder failed: ") + e.what());
  }

  DiversityReport report;
  report.embedder_id = embedder.model_id();
  report.coverage.assign(opinions.size(), 0.0);
  for (const auto& c : cand_vec) {
    size_t best = 0;
    double best_d = euclidean_distance(c, op_vec[0]);
    for (size_t o = 1; o < op_vec.size(); ++o) {
      double d = euclidean_distance(c, op_vec[o]);
      if (d < best_d) {
        best_d = d;
        best = o;
      }
    }
    report.nearest_opinion.push_back(best);
    report.coverage[best] += 1.0;
  }
  for (double& c : report.coverage) c /= static_cast<double>(candidates.size());

  if (cand_vec.size() > 1) {
    double total = 0.0;
    size_t pairs = 0;
    for (size_t i = 0; i < cand_vec.size(); ++i) {
      for (size_t j = i + 1; j < cand_vec.size(); ++j, ++pairs) total += euclidean_distance(cand_vec[i], cand_vec[j]);
    }
    report.dispersion = total / static_cast<double>(pairs);
  }
  if (opinions.size() > 1) {
    double h = 0.0;
    for (double c : report.coverage) {
      if (c > 0.0) h -= c * std::log(c);
    }
    report.coverage_entropy = h / std::log(static_cast<double>(opinions.size()));
  }
  return report;
}

nlohmann::json to_json(const DiversityReport& report) {
  return nlohmann::json{{"nearest_opinion", report.nearest_opinion},
                        {"coverage", report.coverage},
                        {"dispersion", report.dispersion},
                        {"coverage_entropy", report.coverage_entropy},
                        {"embedder", report.embedder_id}};
}

}  // namespace concord::mediator
