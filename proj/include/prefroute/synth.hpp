#pragma once

#include <cstdint>

#include "prefroute/core.hpp"

namespace prefroute {

// Stand-in for proprietary delivery data: planar stops, weekday-specific
// ground-truth preferences, realized routings solved on those
// preferences with multiplicative cost noise.
struct SynthConfig {
  int universe_size = 73;  // customers; the depot is added on top
  int mean_active = 31;
  int vehicles_mean = 8;
  int weeks = 39;
  // 0 = one shared preference structure, 1 = fully weekday-determined
  // instances and preferences.
  double weekday_pattern_strength = 0.8;
  double noise = 0.2;  // multiplicative jitter on arc costs
  std::uint64_t seed = 1;
};

HistoryDataset synth_generate(const SynthConfig& cfg);

// Ground-truth weekday preference matrices (exposed for tests).
std::vector<TransitionMatrix> synth_ground_truth(const SynthConfig& cfg);

}  // namespace prefroute
