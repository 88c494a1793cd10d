#include "prefroute/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iostream>
#include <numeric>
#include <random>

#include "prefroute/markov.hpp"
#include "prefroute/solver.hpp"

namespace prefroute {

namespace {

constexpr double kCoordRange = 20.0;  // km
constexpr double kDistanceScale = 2.0;
constexpr double kFillTarget = 0.8;
constexpr int kBaseDemandMax = 5;

void check_config(const SynthConfig& cfg) {
  if (cfg.universe_size < 2) throw ValidationError("universe_size must be >= 2");
  if (cfg.mean_active < 1 || cfg.mean_active >= cfg.universe_size) {
    throw ValidationError("mean_active must lie in [1, universe_size)");
  }
  if (cfg.vehicles_mean < 1) throw ValidationError("vehicles_mean must be >= 1");
  if (cfg.weeks < 1) throw ValidationError("weeks must be >= 1");
  if (cfg.weekday_pattern_strength < 0.0 || cfg.weekday_pattern_strength > 1.0) {
    throw ValidationError("weekday_pattern_strength must lie in [0,1]");
  }
  if (cfg.noise < 0.0 || cfg.noise > 1.0) throw ValidationError("noise must lie in [0,1]");
}

DistanceMatrix random_coordinates(const SynthConfig& cfg) {
  std::mt19937_64 rng(cfg.seed * 0x100000001b3ULL + 7);
  std::uniform_real_distribution<double> coord(0.0, kCoordRange);
  const std::size_t n = static_cast<std::size_t>(cfg.universe_size) + 1;
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = coord(rng);
    y[i] = coord(rng);
  }
  DistanceMatrix d = Mat::square(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) d(i, j) = std::hypot(x[i] - x[j], y[i] - y[j]);
    }
  }
  return d;
}

// Weekday preferences come from the same geometry seen through a random
// relabeling of the stops: every pair keeps a weekday-specific affinity
// no matter which subset is active that day.
std::vector<std::size_t> random_permutation(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

// First-fit-decreasing packing into m bins; success guarantees a
// feasible m-tour split (bins can always be subdivided down to m).
bool ffd_feasible(const RoutingInstance& inst, int m, int capacity) {
  std::vector<int> demands;
  for (const auto& [s, q] : inst.demands) demands.push_back(q);
  std::sort(demands.rbegin(), demands.rend());
  std::vector<int> loads(static_cast<std::size_t>(m), 0);
  for (int q : demands) {
    int best = -1;
    for (std::size_t b = 0; b < loads.size(); ++b) {
      if (loads[b] + q <= capacity && (best < 0 || loads[b] < loads[best])) {
        best = static_cast<int>(b);
      }
    }
    if (best < 0) return false;
    loads[best] += q;
  }
  return true;
}

std::uint64_t hash_instance(std::uint64_t seed, const RoutingInstance& inst) {
  std::uint64_t h = seed ^ 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  };
  mix(static_cast<std::uint64_t>(static_cast<int>(inst.weekday)));
  mix(static_cast<std::uint64_t>(inst.vehicle_count));
  mix(static_cast<std::uint64_t>(inst.capacity));
  for (const auto& [s, q] : inst.demands) {
    mix(static_cast<std::uint64_t>(s) << 32 | static_cast<std::uint64_t>(q));
  }
  return h;
}

}  // namespace

std::vector<TransitionMatrix> synth_ground_truth(const SynthConfig& cfg) {
  check_config(cfg);
  const std::size_t n = static_cast<std::size_t>(cfg.universe_size) + 1;
  const double rho = cfg.weekday_pattern_strength;

  const DistanceMatrix d = random_coordinates(cfg);
  Mat scaled = d;
  for (auto& v : scaled.data()) v /= kDistanceScale;
  const TransitionMatrix base = distance_probabilities(scaled);

  std::mt19937_64 rng(cfg.seed * 0x9e3779b97f4a7c15ULL + 13);
  std::vector<TransitionMatrix> out;
  for (int wd = 0; wd < 7; ++wd) {
    const auto perm = random_permutation(n, rng);
    Mat warped = Mat::square(n);
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t r = 0; r < n; ++r) {
        warped(s, r) = d(perm[s], perm[r]) / kDistanceScale;
      }
    }
    const TransitionMatrix weekday_pref = distance_probabilities(warped);
    TransitionMatrix p = Mat::square(n);
    for (std::size_t i = 0; i < p.data().size(); ++i) {
      p.data()[i] = (1.0 - rho) * base.data()[i] + rho * weekday_pref.data()[i];
    }
    out.push_back(std::move(p));
  }
  return out;
}

HistoryDataset synth_generate(const SynthConfig& cfg) {
  check_config(cfg);
  const std::size_t n = static_cast<std::size_t>(cfg.universe_size) + 1;
  const double rho = cfg.weekday_pattern_strength;

  HistoryDataset h;
  h.stops.push_back({0, "depot"});
  for (int s = 1; s < static_cast<int>(n); ++s) {
    h.stops.push_back({s, "stop_" + std::to_string(s)});
  }
  h.distance = random_coordinates(cfg);
  const auto ground_truth = synth_ground_truth(cfg);

  const double activity_rate =
      static_cast<double>(cfg.mean_active) / static_cast<double>(cfg.universe_size);

  // Weekday-deterministic activity sets, base activity rates, and fixed
  // demands; the pattern strength interpolates towards them.
  std::mt19937_64 setup_rng(cfg.seed * 0x2545f4914f6cdd1dULL + 29);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<std::array<char, 7>> weekday_active(n);
  std::vector<std::array<int, 7>> weekday_demand(n);
  std::vector<double> base_rate(n, 0.0);
  for (std::size_t s = 1; s < n; ++s) {
    base_rate[s] = std::clamp(activity_rate + 0.2 * (uni(setup_rng) - 0.5), 0.05, 0.95);
    for (int d = 0; d < 7; ++d) {
      weekday_active[s][d] = uni(setup_rng) < activity_rate ? 1 : 0;
      weekday_demand[s][d] = 1 + static_cast<int>(uni(setup_rng) * kBaseDemandMax);
    }
  }
  for (int d = 0; d < 7; ++d) {
    bool any = false;
    for (std::size_t s = 1; s < n; ++s) any = any || weekday_active[s][d];
    if (!any) weekday_active[1 + static_cast<std::size_t>(d) % (n - 1)][d] = 1;
  }

  // Pass 1: demands per day.
  std::mt19937_64 day_rng(cfg.seed * 0xda942042e4dd58b5ULL + 31);
  std::vector<RoutingInstance> instances;
  int max_demand = 0;
  for (int week = 0; week < cfg.weeks; ++week) {
    for (int d = 0; d < 7; ++d) {
      RoutingInstance inst;
      inst.timestamp = week * 7 + d;
      inst.weekday = static_cast<Weekday>(d);
      for (std::size_t s = 1; s < n; ++s) {
        const double p_active =
            (1.0 - rho) * base_rate[s] + rho * (weekday_active[s][d] ? 1.0 : 0.0);
        if (uni(day_rng) >= p_active) continue;
        int q = weekday_demand[s][d];
        if (rho < 1.0) {
          q += static_cast<int>(uni(day_rng) * (1.0 - rho) * kBaseDemandMax);
        }
        inst.demands.emplace_back(static_cast<int>(s), q);
        max_demand = std::max(max_demand, q);
      }
      if (inst.demands.empty()) {
        const int forced = 1 + d % (static_cast<int>(n) - 1);
        inst.demands.emplace_back(forced, weekday_demand[forced][d]);
        max_demand = std::max(max_demand, weekday_demand[forced][d]);
      }
      instances.push_back(std::move(inst));
    }
  }

  // Capacity sized for the target fleet; raised if a demand would not
  // fit into any vehicle.
  const double mean_demand = (1.0 + kBaseDemandMax) / 2.0;
  int capacity = static_cast<int>(std::ceil(cfg.mean_active * mean_demand /
                                            (kFillTarget * cfg.vehicles_mean)));
  if (capacity < max_demand) {
    std::cerr << "warning: capacity " << capacity << " cannot cover the largest demand; "
              << "scaling up to " << max_demand << "\n";
    capacity = max_demand;
  }

  // Pass 2: fleet sizes and realized routings.
  for (RoutingInstance& inst : instances) {
    inst.capacity = capacity;
    const int total = inst.total_demand();
    int m = std::max(1, static_cast<int>(std::llround(
                            total / (kFillTarget * static_cast<double>(capacity)))));
    m = std::min(m, static_cast<int>(inst.demands.size()));
    // Grow the fleet until the demands actually pack; m = |active| always
    // does since every demand fits one vehicle.
    while (m * capacity < total || !ffd_feasible(inst, m, capacity)) ++m;
    inst.vehicle_count = m;

    // Solver seed derives from the instance content, so identical
    // instances (pattern strength 1) reproduce identical routings.
    CostMatrix cost = cost_from_probabilities(ground_truth[static_cast<int>(inst.weekday)], 1e-6);
    const std::uint64_t inst_seed = hash_instance(cfg.seed, inst);
    if (cfg.noise > 0.0) {
      std::mt19937_64 noise_rng(inst_seed ^ 0x94d049bb133111ebULL);
      std::uniform_real_distribution<double> jitter(-1.0, 1.0);
      std::vector<int> nodes = inst.active_stops();
      nodes.insert(nodes.begin(), kDepot);
      for (int s : nodes) {
        for (int r : nodes) {
          if (s == r) continue;
          cost(static_cast<std::size_t>(s), static_cast<std::size_t>(r)) *=
              1.0 + cfg.noise * jitter(noise_rng);
        }
      }
    }
    SolveOptions opts;
    opts.backend = Backend::Auto;
    opts.heuristic_iters = 20000;
    opts.seed = inst_seed;
    const SolveReport solved = solve_cost(cost, inst, opts);

    h.records.push_back({inst, solved.routing});
  }

  validate_history(h);
  return h;
}

}  // namespace prefroute
