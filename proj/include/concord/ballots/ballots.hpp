#pragma once

// Social-choice core: rankings with ties, pairwise preference counts, Schulze
// elections, welfare-functional selection, and uncertainty-aware / trimmed
// rank aggregation. Everything here is a pure function of its arguments.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "concord/core/ids.hpp"

namespace concord::ballots {

using TieGroup = std::vector<CandidateId>;

// A ballot: tie-groups of candidates, best first.
struct Ranking {
  ParticipantId participant;
  std::vector<TieGroup> order;

  friend bool operator==(const Ranking&, const Ranking&) = default;

  // Flattened order; only meaningful when every tie-group is a singleton.
  std::vector<CandidateId> flatten() const;
  bool is_strict() const;
};

struct PreferenceProfile {
  std::vector<CandidateId> candidates;
  std::vector<Ranking> rankings;

  // Throws ValidationError naming the offending ranking.
  void validate() const;

  // Index of a candidate in `candidates`, or npos.
  size_t index_of(const CandidateId& id) const;
};

// For each candidate index, the 0-based index of the tie-group holding it.
std::vector<int32_t> tie_group_positions(const PreferenceProfile& profile, size_t ranking);

class PairwiseMatrix {
 public:
  explicit PairwiseMatrix(size_t n) : n_(n), counts_(n * n, 0) {}

  size_t size() const noexcept { return n_; }
  int32_t operator()(size_t x, size_t y) const { return counts_[x * n_ + y]; }
  std::span<const int32_t> data() const noexcept { return counts_; }
  std::span<int32_t> data() noexcept { return counts_; }

  friend bool operator==(const PairwiseMatrix&, const PairwiseMatrix&) = default;

 private:
  size_t n_;
  std::vector<int32_t> counts_;
};

class TiebreakRule {
 public:
  enum class Kind {
    lexicographic,    // by CandidateId text
    candidate_order,  // by position in the candidate list (label independent)
    seeded_random,    // seeded permutation of candidate positions
  };

  TiebreakRule() = default;
  static TiebreakRule lexicographic() { return TiebreakRule(Kind::lexicographic, 0); }
  static TiebreakRule candidate_order() { return TiebreakRule(Kind::candidate_order, 0); }
  static TiebreakRule seeded_random(uint64_t seed) { return TiebreakRule(Kind::seeded_random, seed); }

  Kind kind() const noexcept { return kind_; }
  uint64_t seed() const noexcept { return seed_; }

  // priority[i] for each candidate index; lower wins a tie. A permutation.
  std::vector<size_t> priorities(std::span<const CandidateId> candidates) const;

  friend bool operator==(const TiebreakRule&, const TiebreakRule&) = default;

 private:
  TiebreakRule(Kind kind, uint64_t seed) : kind_(kind), seed_(seed) {}

  Kind kind_ = Kind::lexicographic;
  uint64_t seed_ = 0;
};

// Predicted agreement of each participant with each candidate, row-major by
// participant. `stddev` is either empty or the same shape as `values`.
struct ScoreMatrix {
  std::vector<ParticipantId> participants;
  std::vector<CandidateId> candidates;
  std::vector<double> values;
  std::vector<double> stddev;

  double at(size_t participant, size_t candidate) const {
    return values[participant * candidates.size() + candidate];
  }
  bool has_uncertainty() const noexcept { return !stddev.empty(); }

  void validate() const;
};

enum class Welfare { utilitarian, rawlsian };

struct SchulzeResult {
  PairwiseMatrix pairwise;
  // Strongest-path strengths, row-major over candidate indices.
  std::vector<int32_t> strength;
  // Strict collective order, winner first.
  Ranking order;

  const CandidateId& winner() const { return order.order.front().front(); }
};

inline const ParticipantId kCollective{"collective"};

PairwiseMatrix pairwise_matrix(const PreferenceProfile& profile);

SchulzeResult schulze(const PreferenceProfile& profile, const TiebreakRule& tiebreak = {});

Ranking schulze_order(const PreferenceProfile& profile, const TiebreakRule& tiebreak = {});

std::optional<CandidateId> condorcet_winner(const PreferenceProfile& profile);

// Descending score per participant; equal scores share a tie-group unless
// `strict` is given, in which case tie-groups are split by that rule.
PreferenceProfile scores_to_rankings(const ScoreMatrix& scores,
                                     const std::optional<TiebreakRule>& strict = std::nullopt);

CandidateId welfare_select(const ScoreMatrix& scores, Welfare functional,
                           const TiebreakRule& tiebreak = {});

// Monte Carlo average rank under independent normal perturbation of every
// score (sd from `scores.stddev`, zero when absent). Draw order: for each
// sample, for each participant, for each candidate, one Rng::normal().
PreferenceProfile expected_rank_aggregate(const ScoreMatrix& scores, size_t samples,
                                          uint64_t seed);

// Trimmed mean of rank positions per candidate (ties take their average
// position); floor(trim_fraction * voters) extremes dropped on each side.
Ranking robust_aggregate(const PreferenceProfile& profile, double trim_fraction,
                         const TiebreakRule& tiebreak = {});

// Mean-rank ordering; robust_aggregate with no trimming.
inline Ranking borda_order(const PreferenceProfile& profile, const TiebreakRule& tiebreak = {}) {
  return robust_aggregate(profile, 0.0, tiebreak);
}

}  // namespace concord::ballots
