#pragma once

#include <cstdint>

#include "prefroute/core.hpp"

namespace prefroute {

enum class Backend { Exact, Heuristic, Auto };

struct SolveOptions {
  Backend backend = Backend::Auto;
  // Smoothing added to probabilities before taking logs; matches the
  // neural module's default so objectives are comparable.
  double epsilon = 1e-6;
  // Heuristic budget: iterations win over wall time when nonzero, which
  // keeps solves deterministic.
  std::int64_t heuristic_iters = 0;
  int heuristic_time_ms = 2000;
  std::uint64_t seed = 1;
  // Instance sizes up to this use the exact backend under Auto.
  int exact_size_limit = 12;
};

struct SolveReport {
  Routing routing;
  double objective = 0.0;
  bool optimal = false;
  std::int64_t nodes_explored = 0;
  double wall_time_ms = 0.0;
  double distance_km = 0.0;  // filled when a distance matrix is known
};

// Cost c[s][r] = -log(p[s][r] + eps) over the full universe, +inf on the
// diagonal.
CostMatrix cost_from_probabilities(const TransitionMatrix& p, double eps);

// Minimize the summed arc costs over all feasible routings of the
// instance (degree, fleet-equality, capacity constraints).
SolveReport solve_cost(const CostMatrix& cost, const RoutingInstance& inst,
                       const SolveOptions& opts = {});

// Maximum-likelihood routing: highest product of transition
// probabilities, solved as min sum of -log(p + eps).
SolveReport mle_routing(const TransitionMatrix& p, const RoutingInstance& inst,
                        const SolveOptions& opts = {});

// Distance-minimizing CVRP via the softmax distance probabilities; the
// row softmax makes -log Pr differ from the distance only by a per-row
// constant, so the argmin set coincides with min total km. Probabilities
// are strictly positive, so no smoothing is applied.
SolveReport conventional_vrp(const DistanceMatrix& d, const RoutingInstance& inst,
                             const SolveOptions& opts = {});

// Test oracle: enumerate every feasible routing (all partitions into
// exactly m nonempty ordered tours meeting capacity) and return the
// optimum. Guarded to 8 active stops.
SolveReport brute_force_routing(const TransitionMatrix& p, const RoutingInstance& inst,
                                double eps = 1e-6);
SolveReport brute_force_cost(const CostMatrix& cost, const RoutingInstance& inst);

// Every feasible routing of the instance in canonical form (used by the
// brute-force backend and by argmin-set tests).
std::vector<Routing> enumerate_feasible(const RoutingInstance& inst);

}  // namespace prefroute
