#pragma once

#include <map>
#include <optional>

#include "prefroute/core.hpp"

namespace prefroute {

struct WeightingScheme {
  enum class Kind { Uniform, Exponential };
  Kind kind = Kind::Uniform;
  // Exponential only: weight 2^(-k/half_life) where k counts qualifying
  // records back from `upto` (most recent k = 0).
  int half_life = 8;

  static WeightingScheme uniform() { return {Kind::Uniform, 8}; }
  static WeightingScheme exponential(int half_life) { return {Kind::Exponential, half_life}; }
};

struct DayFilter {
  // Empty = allday; otherwise only records on this weekday qualify.
  std::optional<Weekday> weekday;

  static DayFilter allday() { return {}; }
  static DayFilter on(Weekday d) { return {d}; }
  bool matches(Weekday d) const { return !weekday || *weekday == d; }
};

// Weighted arc frequencies f[s][r] over records with timestamp < upto
// that pass the filter. Empty qualifying history gives a zero matrix.
Mat transition_counts(const HistoryDataset& history, const DayFilter& filter,
                      const WeightingScheme& w, int upto);

// Row-normalized counts. Rows with no mass fall back to the uniform
// distribution over non-self universe stops.
TransitionMatrix markov_probabilities(const Mat& counts);

// Row s is the softmax of -d[s][u] over u != s.
TransitionMatrix distance_probabilities(const DistanceMatrix& d);

// Convex combination omega * p_markov + (1 - omega) * p_dist.
TransitionMatrix mix(const TransitionMatrix& p_markov, const TransitionMatrix& p_dist,
                     double omega);

// Per-day Markov matrices (weekday-filtered, uniform weights) computed
// lazily from prefix counts; matrix for day t uses records strictly
// before t. Shared by neural feature building and prediction fallback.
class MarkovCache {
 public:
  explicit MarkovCache(const HistoryDataset& history) : history_(&history) {}

  const TransitionMatrix& weekday_matrix_before(int t, Weekday d);

 private:
  const HistoryDataset* history_;
  std::map<std::pair<int, int>, TransitionMatrix> cache_;
};

}  // namespace prefroute
