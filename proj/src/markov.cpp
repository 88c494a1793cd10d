#include "prefroute/markov.hpp"

#include <algorithm>
#include <cmath>

namespace prefroute {

Mat transition_counts(const HistoryDataset& history, const DayFilter& filter,
                      const WeightingScheme& w, int upto) {
  const std::size_t n = history.universe_size();
  Mat f = Mat::square(n);

  std::vector<const DayRecord*> qualifying;
  for (const auto& rec : history.records) {
    if (rec.instance.timestamp >= upto) break;
    if (filter.matches(rec.instance.weekday)) qualifying.push_back(&rec);
  }

  const std::size_t count = qualifying.size();
  for (std::size_t i = 0; i < count; ++i) {
    double weight = 1.0;
    if (w.kind == WeightingScheme::Kind::Exponential) {
      const double k = static_cast<double>(count - 1 - i);  // most recent gets k=0
      weight = std::exp2(-k / static_cast<double>(w.half_life));
    }
    for (const auto& [s, r] : arcs_of(qualifying[i]->routing)) {
      f(static_cast<std::size_t>(s), static_cast<std::size_t>(r)) += weight;
    }
  }
  return f;
}

TransitionMatrix markov_probabilities(const Mat& counts) {
  const std::size_t n = counts.rows();
  TransitionMatrix p = Mat::square(n);
  for (std::size_t s = 0; s < n; ++s) {
    double total = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      if (r != s) total += counts(s, r);
    }
    if (total > 0.0) {
      for (std::size_t r = 0; r < n; ++r) {
        if (r != s) p(s, r) = counts(s, r) / total;
      }
    } else if (n > 1) {
      const double u = 1.0 / static_cast<double>(n - 1);
      for (std::size_t r = 0; r < n; ++r) {
        if (r != s) p(s, r) = u;
      }
    }
  }
  return p;
}

TransitionMatrix distance_probabilities(const DistanceMatrix& d) {
  const std::size_t n = d.rows();
  TransitionMatrix p = Mat::square(n);
  for (std::size_t s = 0; s < n; ++s) {
    double max_logit = -std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < n; ++r) {
      if (r != s) max_logit = std::max(max_logit, -d(s, r));
    }
    if (!std::isfinite(max_logit)) continue;  // 1x1 universe
    double z = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      if (r != s) z += std::exp(-d(s, r) - max_logit);
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r != s) p(s, r) = std::exp(-d(s, r) - max_logit) / z;
    }
  }
  return p;
}

TransitionMatrix mix(const TransitionMatrix& p_markov, const TransitionMatrix& p_dist,
                     double omega) {
  if (omega < 0.0 || omega > 1.0) {
    throw ValidationError("mixing weight must lie in [0,1], got " + std::to_string(omega));
  }
  if (!p_markov.same_shape(p_dist)) {
    throw ValidationError("cannot mix transition matrices of different shapes");
  }
  TransitionMatrix out(p_markov.rows(), p_markov.cols());
  for (std::size_t i = 0; i < out.data().size(); ++i) {
    out.data()[i] = omega * p_markov.data()[i] + (1.0 - omega) * p_dist.data()[i];
  }
  return out;
}

const TransitionMatrix& MarkovCache::weekday_matrix_before(int t, Weekday d) {
  auto key = std::make_pair(t, static_cast<int>(d));
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  Mat counts = transition_counts(*history_, DayFilter::on(d), WeightingScheme::uniform(), t);
  auto [pos, inserted] = cache_.emplace(key, markov_probabilities(counts));
  return pos->second;
}

}  // namespace prefroute
