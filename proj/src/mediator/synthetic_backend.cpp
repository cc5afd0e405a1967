#include "concord/mediator/synthetic_backend.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "concord/core/error.hpp"
#include "concord/core/rng.hpp"
#include "concord/mediator/embedder.hpp"

namespace concord::mediator {

SyntheticBackend::SyntheticBackend(SyntheticConfig config) : config_(config) {
  if (config_.dims < 1) throw ValidationError("synthetic backend needs dims >= 1");
  if (!(config_.noise >= 0.0) || !std::isfinite(config_.noise)) {
    throw ValidationError("synthetic noise must be finite and >= 0");
  }
  if (!(config_.restatement_share >= 0.0 && config_.restatement_share <= 1.0)) {
    throw ValidationError("restatement_share must lie in [0, 1]");
  }
  if (!(config_.centroid_pull >= 0.0 && config_.centroid_pull <= 1.0)) {
    throw ValidationError("centroid_pull must lie in [0, 1]");
  }
}

std::string SyntheticBackend::id() const {
  return "synthetic-v1/d" + std::to_string(config_.dims);
}

std::vector<std::vector<double>> SyntheticBackend::sample_positions(const GenerationRequest& req) const {
  const size_t dims = config_.dims;
  std::vector<std::vector<double>> opinions;
  for (const auto& op : req.opinions) opinions.push_back(position_of(op.text, dims));
  std::vector<std::vector<double>> pool = opinions;
  if (req.prior_winner) pool.push_back(position_of(req.prior_winner->text, dims));
  for (const auto& c : req.critiques) {
    if (auto p = parse_position(c.text)) {
      p->resize(dims, 0.0);
      pool.push_back(std::move(*p));
    }
  }

  std::vector<double> centroid(dims, 0.0);
  for (const auto& p : pool) {
    for (size_t d = 0; d < dims; ++d) centroid[d] += p[d];
  }
  for (double& c : centroid) c /= static_cast<double>(pool.size());

  Rng rng(derive_seed(derive_seed(config_.seed, "synthetic/generate"), "request", req.seed));

  const size_t n = opinions.size();
  const size_t wanted = static_cast<size_t>(std::ceil(static_cast<double>(req.k) * config_.restatement_share));
  const size_t restated = std::min(n, wanted);
  std::vector<size_t> chosen(n);
  std::iota(chosen.begin(), chosen.end(), size_t{0});
  if (restated < n) {
    // partial Fisher-Yates, then restore input order
    for (size_t i = 0; i < restated; ++i) std::swap(chosen[i], chosen[i + rng.below(n - i)]);
    chosen.resize(restated);
    std::sort(chosen.begin(), chosen.end());
  }

  std::vector<std::vector<double>> out;
  out.reserve(req.k);
  for (size_t i : chosen) {
    const auto& x = opinions[i];
    double to_centroid = euclidean_distance(x, centroid);
    double nearest = std::numeric_limits<double>::infinity();
    for (size_t j = 0; j < pool.size(); ++j) {
      // coincident points (a critique repeating its opinion) are the same point
      const double dist = euclidean_distance(x, pool[j]);
      if (j == i || dist == 0.0) continue;
      nearest = std::min(nearest, dist);
    }
    double t = 0.0;
    if (to_centroid > 0.0) t = std::min(config_.centroid_pull, 0.5 * nearest / to_centroid);
    std::vector<double> c(dims);
    for (size_t d = 0; d < dims; ++d) c[d] = x[d] + t * (centroid[d] - x[d]);
    out.push_back(std::move(c));
  }

  std::vector<double> w(pool.size());
  while (out.size() < req.k) {
    double total = 0.0;
    for (double& v : w) total += (v = rng.exponential());
    std::vector<double> c(dims, 0.0);
    for (size_t j = 0; j < pool.size(); ++j) {
      const double weight = w[j] / total;
      for (size_t d = 0; d < dims; ++d) c[d] += weight * pool[j][d];
    }
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<std::string> SyntheticBackend::sample_statements(const GenerationRequest& req) {
  std::vector<std::string> texts;
  for (const auto& p : sample_positions(req)) texts.push_back(format_position(p));
  return texts;
}

ScoreRow SyntheticBackend::score(const RewardQuery& query) {
  const auto opinion = position_of(query.participant_opinion.text, config_.dims);
  const uint64_t base = derive_seed(derive_seed(config_.seed, "synthetic/score"), "query", query.seed);
  ScoreRow row;
  row.scores.reserve(query.candidates.size());
  for (const auto& cand : query.candidates) {
    double s = -euclidean_distance(opinion, position_of(cand.text, config_.dims));
    if (config_.noise > 0.0) {
      Rng rng(derive_seed(base, query.participant_opinion.id.str() + "|" + cand.id.str()));
      s += config_.noise * rng.normal();
    }
    row.scores.push_back(s);
  }
  row.stddev.assign(row.scores.size(), config_.noise);
  return row;
}

}  // namespace concord::mediator
