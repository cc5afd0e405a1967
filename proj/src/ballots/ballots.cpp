#include "concord/ballots/ballots.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <unordered_map>

#include "concord/core/error.hpp"
#include "concord/core/rng.hpp"
#include "concord/kernels/kernels.hpp"

namespace concord::ballots {
namespace {

constexpr size_t npos = static_cast<size_t>(-1);

std::string describe(const Ranking& ranking, size_t index) {
  return "ranking #" + std::to_string(index) + " (participant '" + ranking.participant.str() + "')";
}

std::unordered_map<CandidateId, size_t> index_map(std::span<const CandidateId> candidates) {
  std::unordered_map<CandidateId, size_t> map;
  map.reserve(candidates.size());
  for (size_t i = 0; i < candidates.size(); ++i) map.emplace(candidates[i], i);
  return map;
}

std::vector<int32_t> positions_with(const std::unordered_map<CandidateId, size_t>& index,
                                    const Ranking& ranking, size_t n) {
  std::vector<int32_t> pos(n, -1);
  for (size_t g = 0; g < ranking.order.size(); ++g) {
    for (const auto& id : ranking.order[g]) {
      auto it = index.find(id);
      if (it != index.end()) pos[it->second] = static_cast<int32_t>(g);
    }
  }
  return pos;
}

// Picks from `pool` the index with the lowest tiebreak priority.
size_t first_by_priority(std::span<const size_t> pool, std::span<const size_t> priority) {
  return *std::min_element(pool.begin(), pool.end(),
                           [&](size_t a, size_t b) { return priority[a] < priority[b]; });
}

}  // namespace

std::vector<CandidateId> Ranking::flatten() const {
  std::vector<CandidateId> out;
  for (const auto& group : order) out.insert(out.end(), group.begin(), group.end());
  return out;
}

bool Ranking::is_strict() const {
  return std::all_of(order.begin(), order.end(), [](const TieGroup& g) { return g.size() == 1; });
}

void PreferenceProfile::validate() const {
  if (candidates.empty()) throw ValidationError("profile has no candidates");
  if (rankings.empty()) throw ValidationError("profile has no rankings");
  auto index = index_map(candidates);
  if (index.size() != candidates.size()) throw ValidationError("profile candidate ids are not unique");
  for (const auto& id : candidates) {
    if (id.empty()) throw ValidationError("profile contains an empty candidate id");
  }
  for (size_t r = 0; r < rankings.size(); ++r) {
    const Ranking& ranking = rankings[r];
    std::vector<int> seen(candidates.size(), 0);
    for (const auto& group : ranking.order) {
      if (group.empty()) throw ValidationError(describe(ranking, r) + " has an empty tie-group");
      for (const auto& id : group) {
        auto it = index.find(id);
        if (it == index.end()) {
          throw ValidationError(describe(ranking, r) + " names unknown candidate '" + id.str() + "'");
        }
        if (++seen[it->second] > 1) {
          throw ValidationError(describe(ranking, r) + " lists candidate '" + id.str() + "' twice");
        }
      }
    }
    for (size_t c = 0; c < candidates.size(); ++c) {
      if (seen[c] == 0) {
        throw ValidationError(describe(ranking, r) + " is missing candidate '" + candidates[c].str() + "'");
      }
    }
  }
}

size_t PreferenceProfile::index_of(const CandidateId& id) const {
  auto it = std::find(candidates.begin(), candidates.end(), id);
  return it == candidates.end() ? npos : static_cast<size_t>(it - candidates.begin());
}

std::vector<int32_t> tie_group_positions(const PreferenceProfile& profile, size_t ranking) {
  return positions_with(index_map(profile.candidates), profile.rankings.at(ranking),
                        profile.candidates.size());
}

std::vector<size_t> TiebreakRule::priorities(std::span<const CandidateId> candidates) const {
  std::vector<size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), size_t{0});
  switch (kind_) {
    case Kind::lexicographic:
      std::stable_sort(order.begin(), order.end(),
                       [&](size_t a, size_t b) { return candidates[a] < candidates[b]; });
      break;
    case Kind::candidate_order:
      break;
    case Kind::seeded_random: {
      Rng rng(derive_seed(seed_, "tiebreak"));
      shuffle(order.begin(), order.end(), rng);
      break;
    }
  }
  // order lists candidate indices best first; invert into priorities.
  std::vector<size_t> priority(candidates.size());
  for (size_t rank = 0; rank < order.size(); ++rank) priority[order[rank]] = rank;
  return priority;
}

void ScoreMatrix::validate() const {
  if (participants.empty() || candidates.empty()) throw ValidationError("score matrix is empty");
  if (values.size() != participants.size() * candidates.size()) {
    throw ValidationError("score matrix dimensions do not match participants x candidates");
  }
  if (!stddev.empty() && stddev.size() != values.size()) {
    throw ValidationError("uncertainty matrix dimensions do not match scores");
  }
  for (size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw ValidationError("non-finite score for participant '" +
                            participants[i / candidates.size()].str() + "', candidate '" +
                            candidates[i % candidates.size()].str() + "'");
    }
  }
  for (double sd : stddev) {
    if (!std::isfinite(sd) || sd < 0.0) throw ValidationError("score stddev must be finite and >= 0");
  }
}

PairwiseMatrix pairwise_matrix(const PreferenceProfile& profile) {
  profile.validate();
  const size_t n = profile.candidates.size();
  const auto index = index_map(profile.candidates);
  PairwiseMatrix d(n);
  for (const auto& ranking : profile.rankings) {
    auto pos = positions_with(index, ranking, n);
    kernels::accumulate_pairwise(pos, d.data());
  }
  return d;
}

SchulzeResult schulze(const PreferenceProfile& profile, const TiebreakRule& tiebreak) {
  PairwiseMatrix d = pairwise_matrix(profile);
  const size_t n = d.size();

  std::vector<int32_t> p(n * n, 0);
  for (size_t x = 0; x < n; ++x) {
    for (size_t y = 0; y < n; ++y) {
      if (x != y && d(x, y) > d(y, x)) p[x * n + y] = d(x, y);
    }
  }
  kernels::widest_path(p, n);

  const auto priority = tiebreak.priorities(profile.candidates);
  std::vector<size_t> remaining(n);
  std::iota(remaining.begin(), remaining.end(), size_t{0});
  Ranking order{kCollective, {}};
  order.order.reserve(n);
  while (!remaining.empty()) {
    std::vector<size_t> unbeaten;
    for (size_t x : remaining) {
      bool beaten = std::any_of(remaining.begin(), remaining.end(),
                                [&](size_t y) { return p[y * n + x] > p[x * n + y]; });
      if (!beaten) unbeaten.push_back(x);
    }
    // The beat relation is a strict partial order, so unbeaten is never empty.
    size_t pick = first_by_priority(unbeaten, priority);
    order.order.push_back({profile.candidates[pick]});
    remaining.erase(std::find(remaining.begin(), remaining.end(), pick));
  }
  return SchulzeResult{std::move(d), std::move(p), std::move(order)};
}

Ranking schulze_order(const PreferenceProfile& profile, const TiebreakRule& tiebreak) {
  return schulze(profile, tiebreak).order;
}

std::optional<CandidateId> condorcet_winner(const PreferenceProfile& profile) {
  PairwiseMatrix d = pairwise_matrix(profile);
  const size_t n = d.size();
  for (size_t x = 0; x < n; ++x) {
    bool beats_all = true;
    for (size_t y = 0; y < n && beats_all; ++y) {
      if (y != x && d(x, y) <= d(y, x)) beats_all = false;
    }
    if (beats_all) return profile.candidates[x];
  }
  return std::nullopt;
}

PreferenceProfile scores_to_rankings(const ScoreMatrix& scores,
                                     const std::optional<TiebreakRule>& strict) {
  scores.validate();
  const size_t n = scores.candidates.size();
  std::vector<size_t> priority;
  if (strict) priority = strict->priorities(scores.candidates);

  PreferenceProfile profile{scores.candidates, {}};
  profile.rankings.reserve(scores.participants.size());
  for (size_t p = 0; p < scores.participants.size(); ++p) {
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return scores.at(p, a) > scores.at(p, b); });
    Ranking ranking{scores.participants[p], {}};
    for (size_t i = 0; i < n;) {
      size_t j = i;
      while (j < n && scores.at(p, order[j]) == scores.at(p, order[i])) ++j;
      std::vector<size_t> group(order.begin() + static_cast<ptrdiff_t>(i),
                                order.begin() + static_cast<ptrdiff_t>(j));
      if (strict) {
        std::sort(group.begin(), group.end(), [&](size_t a, size_t b) { return priority[a] < priority[b]; });
        for (size_t c : group) ranking.order.push_back({scores.candidates[c]});
      } else {
        TieGroup tie;
        for (size_t c : group) tie.push_back(scores.candidates[c]);
        ranking.order.push_back(std::move(tie));
      }
      i = j;
    }
    profile.rankings.push_back(std::move(ranking));
  }
  return profile;
}

CandidateId welfare_select(const ScoreMatrix& scores, Welfare functional, const TiebreakRule& tiebreak) {
  scores.validate();
  const size_t n = scores.candidates.size();
  std::vector<double> value(n);
  for (size_t c = 0; c < n; ++c) {
    double acc = functional == Welfare::utilitarian ? 0.0 : std::numeric_limits<double>::infinity();
    for (size_t p = 0; p < scores.participants.size(); ++p) {
      acc = functional == Welfare::utilitarian ? acc + scores.at(p, c) : std::min(acc, scores.at(p, c));
    }
    value[c] = acc;
  }
  const double best = *std::max_element(value.begin(), value.end());
  std::vector<size_t> pool;
  for (size_t c = 0; c < n; ++c) {
    if (value[c] == best) pool.push_back(c);
  }
  return scores.candidates[first_by_priority(pool, tiebreak.priorities(scores.candidates))];
}

PreferenceProfile expected_rank_aggregate(const ScoreMatrix& scores, size_t samples, uint64_t seed) {
  scores.validate();
  if (samples == 0) throw ValidationError("expected_rank_aggregate needs at least one sample");
  const size_t np = scores.participants.size();
  const size_t nc = scores.candidates.size();
  constexpr double kMax = std::numeric_limits<double>::max();

  Rng rng(seed);
  std::vector<uint64_t> rank_sum(np * nc, 0);
  std::vector<double> draw(nc);
  for (size_t s = 0; s < samples; ++s) {
    for (size_t p = 0; p < np; ++p) {
      for (size_t c = 0; c < nc; ++c) {
        const size_t i = p * nc + c;
        const double sd = scores.has_uncertainty() ? scores.stddev[i] : 0.0;
        draw[c] = std::clamp(scores.values[i] + sd * rng.normal(), -kMax, kMax);
      }
      for (size_t c = 0; c < nc; ++c) {
        uint64_t rank = 1;
        for (size_t o = 0; o < nc; ++o) rank += draw[o] > draw[c] ? 1 : 0;
        rank_sum[p * nc + c] += rank;
      }
    }
  }

  PreferenceProfile profile{scores.candidates, {}};
  for (size_t p = 0; p < np; ++p) {
    std::vector<size_t> order(nc);
    std::iota(order.begin(), order.end(), size_t{0});
    const uint64_t* sums = rank_sum.data() + p * nc;
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return sums[a] < sums[b]; });
    Ranking ranking{scores.participants[p], {}};
    for (size_t i = 0; i < nc; ++i) {
      if (i > 0 && sums[order[i]] == sums[order[i - 1]]) {
        ranking.order.back().push_back(scores.candidates[order[i]]);
      } else {
        ranking.order.push_back({scores.candidates[order[i]]});
      }
    }
    profile.rankings.push_back(std::move(ranking));
  }
  return profile;
}

Ranking robust_aggregate(const PreferenceProfile& profile, double trim_fraction,
                         const TiebreakRule& tiebreak) {
  profile.validate();
  if (!(trim_fraction >= 0.0 && trim_fraction < 0.5)) {
    throw ValidationError("trim fraction must lie in [0, 0.5)");
  }
  const size_t n = profile.candidates.size();
  const size_t voters = profile.rankings.size();
  const size_t trim = static_cast<size_t>(std::floor(trim_fraction * static_cast<double>(voters)));
  if (voters <= 2 * trim) throw ValidationError("trimming removes every voter");

  const auto index = index_map(profile.candidates);
  // Positions are doubled so that averaged tie positions stay integral.
  std::vector<std::vector<int64_t>> twice_position(n);
  for (const auto& ranking : profile.rankings) {
    int64_t before = 0;
    for (const auto& group : ranking.order) {
      const int64_t size = static_cast<int64_t>(group.size());
      const int64_t twice_avg = 2 * before + size + 1;
      for (const auto& id : group) twice_position[index.at(id)].push_back(twice_avg);
      before += size;
    }
  }
  std::vector<int64_t> kept_sum(n, 0);
  for (size_t c = 0; c < n; ++c) {
    auto& v = twice_position[c];
    std::sort(v.begin(), v.end());
    kept_sum[c] = std::accumulate(v.begin() + static_cast<ptrdiff_t>(trim),
                                  v.end() - static_cast<ptrdiff_t>(trim), int64_t{0});
  }
  const auto priority = tiebreak.priorities(profile.candidates);
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (kept_sum[a] != kept_sum[b]) return kept_sum[a] < kept_sum[b];
    return priority[a] < priority[b];
  });
  Ranking out{kCollective, {}};
  for (size_t c : order) out.order.push_back({profile.candidates[c]});
  return out;
}

}  // namespace concord::ballots
