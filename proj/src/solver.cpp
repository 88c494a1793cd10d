#include "prefroute/solver.hpp"

#include "prefroute/markov.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace prefroute {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTieEps = 1e-9;

void check_instance_bounds(const RoutingInstance& inst) {
  const auto active = inst.active_stops();
  if (active.empty()) throw InfeasibleError("instance has no active stops");
  if (inst.vehicle_count > static_cast<int>(active.size())) {
    throw InfeasibleError("m=" + std::to_string(inst.vehicle_count) + " vehicles but only " +
                          std::to_string(active.size()) +
                          " active stops; empty tours are not allowed");
  }
  for (const auto& [s, q] : inst.demands) {
    if (q > inst.capacity) {
      throw InfeasibleError("demand " + std::to_string(q) + " of stop " + std::to_string(s) +
                            " exceeds Q=" + std::to_string(inst.capacity));
    }
  }
  if (inst.total_demand() > inst.vehicle_count * inst.capacity) {
    throw InfeasibleError("total demand " + std::to_string(inst.total_demand()) +
                          " exceeds fleet capacity " +
                          std::to_string(inst.vehicle_count * inst.capacity));
  }
}

// Replace the incumbent on strict improvement, or on a tie by the
// canonically smaller tour list. Both backends share this rule so they
// agree at ties.
struct Incumbent {
  double objective = kInf;
  Routing routing;
  bool found = false;

  void offer(double obj, const Routing& x) {
    if (!found || obj < objective - kTieEps) {
      objective = obj;
      routing = canonical(x);
      found = true;
    } else if (obj <= objective + kTieEps) {
      Routing cand = canonical(x);
      if (cand.tours < routing.tours) {
        routing = std::move(cand);
        objective = std::min(objective, obj);
      }
    }
  }
};

// ---------------------------------------------------------------------
// Exhaustive enumeration (oracle path; no pruning beyond feasibility).
// Tours are produced with ascending first elements so every routing
// appears exactly once, in canonical form.
// ---------------------------------------------------------------------

struct Enumerator {
  const RoutingInstance& inst;
  std::vector<int> active;
  std::vector<char> used;
  std::vector<std::vector<int>> tours;
  std::vector<int> cur;
  int cur_load = 0;
  std::vector<Routing>* out;

  explicit Enumerator(const RoutingInstance& i, std::vector<Routing>* sink)
      : inst(i), active(i.active_stops()), used(active.size(), 0), out(sink) {}

  int remaining() const {
    int r = 0;
    for (char u : used) r += (u == 0);
    return r;
  }

  void open_tour(int last_first) {
    const int closed = static_cast<int>(tours.size());
    if (closed == inst.vehicle_count) {
      if (remaining() == 0) {
        Routing x;
        x.tours = tours;
        out->push_back(std::move(x));
      }
      return;
    }
    if (remaining() < inst.vehicle_count - closed) return;
    for (std::size_t i = 0; i < active.size(); ++i) {
      if (used[i] || active[i] <= last_first) continue;
      if (inst.demand_of(active[i]) > inst.capacity) continue;
      used[i] = 1;
      cur.push_back(active[i]);
      cur_load = inst.demand_of(active[i]);
      extend(last_first);
      cur.pop_back();
      used[i] = 0;
    }
  }

  void extend(int prev_first) {
    const int closed = static_cast<int>(tours.size());
    // Close the current tour.
    tours.push_back(cur);
    std::vector<int> saved = std::move(cur);
    const int saved_load = cur_load;
    cur.clear();
    open_tour(saved.front());
    cur = std::move(saved);
    cur_load = saved_load;
    tours.pop_back();

    // Or visit one more stop.
    if (remaining() - 1 < inst.vehicle_count - closed - 1) return;
    for (std::size_t i = 0; i < active.size(); ++i) {
      if (used[i]) continue;
      const int q = inst.demand_of(active[i]);
      if (cur_load + q > inst.capacity) continue;
      used[i] = 1;
      cur.push_back(active[i]);
      cur_load += q;
      extend(prev_first);
      cur_load -= q;
      cur.pop_back();
      used[i] = 0;
    }
  }
};

// ---------------------------------------------------------------------
// Exact depth-first branch-and-bound with load propagation and an
// admissible bound from per-row minimum remaining costs.
// ---------------------------------------------------------------------

struct BranchAndBound {
  const Mat& c;
  const RoutingInstance& inst;
  std::vector<int> active;
  std::vector<int> demand;
  std::vector<char> visited;
  int unvisited = 0;
  int demand_left = 0;
  std::vector<std::vector<int>> tours;
  std::vector<int> cur;
  int cur_load = 0;
  double cost_so_far = 0.0;
  std::int64_t nodes = 0;
  Incumbent best;

  BranchAndBound(const Mat& cost, const RoutingInstance& i) : c(cost), inst(i) {
    active = i.active_stops();
    visited.assign(active.size(), 0);
    unvisited = static_cast<int>(active.size());
    for (int s : active) demand.push_back(i.demand_of(s));
    demand_left = i.total_demand();
  }

  double bound(int cur_stop, bool mid_tour) const {
    const int closed = static_cast<int>(tours.size());
    const int depot_outs = inst.vehicle_count - closed - (mid_tour ? 1 : 0);
    if (unvisited == 0) {
      if (depot_outs > 0) return kInf;
      return mid_tour ? c(cur_stop, kDepot) : 0.0;
    }
    double lb = 0.0;
    double depot_min = kInf;
    for (std::size_t i = 0; i < active.size(); ++i) {
      if (visited[i]) continue;
      const int u = active[i];
      double row_min = c(u, kDepot);
      for (std::size_t j = 0; j < active.size(); ++j) {
        if (visited[j] || j == i) continue;
        row_min = std::min(row_min, c(u, active[j]));
      }
      lb += row_min;
      depot_min = std::min(depot_min, c(kDepot, u));
    }
    if (mid_tour) {
      double cur_min = c(cur_stop, kDepot);
      for (std::size_t j = 0; j < active.size(); ++j) {
        if (!visited[j]) cur_min = std::min(cur_min, c(cur_stop, active[j]));
      }
      lb += cur_min;
    }
    if (depot_outs > 0) lb += depot_outs * depot_min;
    return lb;
  }

  bool prunable(int cur_stop, bool mid_tour) const {
    if (!best.found) return false;
    return cost_so_far + bound(cur_stop, mid_tour) > best.objective + kTieEps;
  }

  void open_tour(int last_first) {
    ++nodes;
    const int closed = static_cast<int>(tours.size());
    if (closed == inst.vehicle_count) {
      if (unvisited == 0) {
        Routing x;
        x.tours = tours;
        best.offer(routing_cost(c, x), x);
      }
      return;
    }
    if (unvisited < inst.vehicle_count - closed) return;
    if (demand_left > (inst.vehicle_count - closed) * inst.capacity) return;
    if (prunable(kDepot, false)) return;

    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < active.size(); ++i) {
      if (!visited[i] && active[i] > last_first && demand[i] <= inst.capacity) order.push_back(i);
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const double ca = c(kDepot, active[a]), cb = c(kDepot, active[b]);
      if (ca != cb) return ca < cb;
      return active[a] < active[b];
    });
    for (std::size_t i : order) {
      visited[i] = 1;
      --unvisited;
      demand_left -= demand[i];
      cur.push_back(active[i]);
      cur_load = demand[i];
      cost_so_far += c(kDepot, active[i]);
      extend(active[i]);
      cost_so_far -= c(kDepot, active[i]);
      cur.pop_back();
      demand_left += demand[i];
      ++unvisited;
      visited[i] = 0;
    }
  }

  void extend(int cur_stop) {
    ++nodes;
    if (prunable(cur_stop, true)) return;
    const int closed = static_cast<int>(tours.size());

    struct Child {
      double cost;
      int idx;  // -1 = close the tour
    };
    std::vector<Child> children;
    children.push_back({c(cur_stop, kDepot), -1});
    if (unvisited - 1 >= inst.vehicle_count - closed - 1) {
      for (std::size_t i = 0; i < active.size(); ++i) {
        if (visited[i] || cur_load + demand[i] > inst.capacity) continue;
        children.push_back({c(cur_stop, active[i]), static_cast<int>(i)});
      }
    }
    std::sort(children.begin(), children.end(), [&](const Child& a, const Child& b) {
      if (a.cost != b.cost) return a.cost < b.cost;
      return a.idx < b.idx;
    });

    for (const Child& ch : children) {
      if (ch.idx < 0) {
        cost_so_far += c(cur_stop, kDepot);
        tours.push_back(cur);
        std::vector<int> saved = std::move(cur);
        cur.clear();
        const int saved_load = cur_load;
        open_tour(saved.front());
        cur_load = saved_load;
        cur = std::move(saved);
        tours.pop_back();
        cost_so_far -= c(cur_stop, kDepot);
      } else {
        const std::size_t i = static_cast<std::size_t>(ch.idx);
        visited[i] = 1;
        --unvisited;
        demand_left -= demand[i];
        cur.push_back(active[i]);
        cur_load += demand[i];
        cost_so_far += ch.cost;
        extend(active[i]);
        cost_so_far -= ch.cost;
        cur_load -= demand[i];
        cur.pop_back();
        demand_left += demand[i];
        ++unvisited;
        visited[i] = 0;
      }
    }
  }
};

// ---------------------------------------------------------------------
// Heuristic: greedy construction (with bin-packing fallbacks), then
// destroy-and-repair improvement.
// ---------------------------------------------------------------------

struct TourState {
  std::vector<std::vector<int>> tours;
  std::vector<int> loads;
};

double state_cost(const Mat& c, const TourState& st) {
  Routing x;
  for (const auto& t : st.tours) {
    if (!t.empty()) x.tours.push_back(t);
  }
  return routing_cost(c, x);
}

bool greedy_construct(const Mat& c, const RoutingInstance& inst, TourState& out) {
  auto active = inst.active_stops();
  std::vector<char> used(active.size(), 0);
  int unvisited = static_cast<int>(active.size());
  int remaining_demand = inst.total_demand();
  out.tours.clear();
  out.loads.clear();

  for (int k = 0; k < inst.vehicle_count; ++k) {
    const int tours_after = inst.vehicle_count - k - 1;
    if (unvisited == 0) return false;
    std::size_t start = active.size();
    for (std::size_t i = 0; i < active.size(); ++i) {
      if (used[i]) continue;
      if (start == active.size() || c(kDepot, active[i]) < c(kDepot, active[start])) start = i;
    }
    std::vector<int> tour{active[start]};
    int load = inst.demand_of(active[start]);
    used[start] = 1;
    --unvisited;
    remaining_demand -= load;
    int cur = active[start];

    while (unvisited > tours_after) {
      std::size_t next = active.size();
      for (std::size_t i = 0; i < active.size(); ++i) {
        if (used[i] || load + inst.demand_of(active[i]) > inst.capacity) continue;
        if (next == active.size() || c(cur, active[i]) < c(cur, active[next])) next = i;
      }
      if (next == active.size()) break;
      // Prefer returning to the depot when that arc is cheaper and the
      // remaining tours can still absorb the leftover demand.
      if (tours_after > 0 && c(cur, kDepot) < c(cur, active[next]) &&
          remaining_demand <= tours_after * inst.capacity) {
        break;
      }
      load += inst.demand_of(active[next]);
      remaining_demand -= inst.demand_of(active[next]);
      used[next] = 1;
      --unvisited;
      cur = active[next];
      tour.push_back(cur);
    }
    out.tours.push_back(std::move(tour));
    out.loads.push_back(load);
  }
  return unvisited == 0;
}

// Exact feasibility: backtracking assignment of stops (demand-descending)
// to exactly m nonempty bins of capacity Q, with symmetry breaking over
// equal-load bins.
bool assign_bins(const RoutingInstance& inst, const std::vector<int>& stops_desc,
                 std::vector<int>& loads, std::vector<std::vector<int>>& bins, std::size_t idx) {
  const std::size_t m = bins.size();
  if (idx == stops_desc.size()) {
    for (const auto& b : bins) {
      if (b.empty()) return false;
    }
    return true;
  }
  const int s = stops_desc[idx];
  const int q = inst.demand_of(s);
  const std::size_t left = stops_desc.size() - idx;
  std::size_t empties = 0;
  for (const auto& b : bins) empties += b.empty();
  int prev_load = -1;
  for (std::size_t b = 0; b < m; ++b) {
    if (loads[b] + q > inst.capacity) continue;
    if (bins[b].empty()) {
      if (prev_load == 0) continue;  // all empty bins are interchangeable
    } else if (loads[b] == prev_load) {
      continue;
    }
    // Filling a non-empty bin may strand the empty ones.
    if (!bins[b].empty() && empties >= left) continue;
    prev_load = bins[b].empty() ? 0 : loads[b];
    bins[b].push_back(s);
    loads[b] += q;
    if (assign_bins(inst, stops_desc, loads, bins, idx + 1)) return true;
    loads[b] -= q;
    bins[b].pop_back();
  }
  return false;
}

bool packing_construct(const Mat& c, const RoutingInstance& inst, TourState& out) {
  auto stops = inst.active_stops();
  std::sort(stops.begin(), stops.end(), [&](int a, int b) {
    if (inst.demand_of(a) != inst.demand_of(b)) return inst.demand_of(a) > inst.demand_of(b);
    return a < b;
  });
  std::vector<std::vector<int>> bins(inst.vehicle_count);
  std::vector<int> loads(inst.vehicle_count, 0);
  if (!assign_bins(inst, stops, loads, bins, 0)) return false;

  out.tours.clear();
  out.loads = loads;
  for (auto& bin : bins) {
    // Order each bin greedily from the depot.
    std::vector<int> tour;
    std::vector<char> used(bin.size(), 0);
    int cur = kDepot;
    for (std::size_t step = 0; step < bin.size(); ++step) {
      std::size_t next = bin.size();
      for (std::size_t i = 0; i < bin.size(); ++i) {
        if (used[i]) continue;
        if (next == bin.size() || c(cur, bin[i]) < c(cur, bin[next])) next = i;
      }
      used[next] = 1;
      cur = bin[next];
      tour.push_back(cur);
    }
    out.tours.push_back(std::move(tour));
  }
  return true;
}

struct Insertion {
  double delta = kInf;
  double second = kInf;
  std::size_t tour = 0;
  std::size_t pos = 0;
};

Insertion best_insertion(const Mat& c, const RoutingInstance& inst, const TourState& st, int stop,
                         bool empties_only) {
  Insertion best;
  const int q = inst.demand_of(stop);
  auto offer = [&best](double delta, std::size_t ti, std::size_t pos) {
    if (delta < best.delta) {
      best.second = best.delta;
      best.delta = delta;
      best.tour = ti;
      best.pos = pos;
    } else if (delta < best.second) {
      best.second = delta;
    }
  };
  for (std::size_t ti = 0; ti < st.tours.size(); ++ti) {
    const auto& tour = st.tours[ti];
    if (empties_only && !tour.empty()) continue;
    if (st.loads[ti] + q > inst.capacity) continue;
    if (tour.empty()) {
      offer(c(kDepot, stop) + c(stop, kDepot), ti, 0);
      continue;
    }
    for (std::size_t pos = 0; pos <= tour.size(); ++pos) {
      const int prev = pos == 0 ? kDepot : tour[pos - 1];
      const int next = pos == tour.size() ? kDepot : tour[pos];
      offer(c(prev, stop) + c(stop, next) - c(prev, next), ti, pos);
    }
  }
  return best;
}

// Destroy-and-repair search with regret-2 reinsertion, a best-solution
// shake when progress stalls, and an or-opt polish pass.
class LnsSearch {
 public:
  LnsSearch(const Mat& c, const RoutingInstance& inst, std::uint64_t seed)
      : c_(c), inst_(inst), rng_(seed), active_(inst.active_stops()) {}

  bool construct(TourState& out) {
    return greedy_construct(c_, inst_, out) || packing_construct(c_, inst_, out);
  }

  void remove_stop(TourState& st, int stop, std::vector<int>& removed) {
    for (std::size_t ti = 0; ti < st.tours.size(); ++ti) {
      auto& tour = st.tours[ti];
      auto it = std::find(tour.begin(), tour.end(), stop);
      if (it != tour.end()) {
        tour.erase(it);
        st.loads[ti] -= inst_.demand_of(stop);
        removed.push_back(stop);
        return;
      }
    }
  }

  // Scatter or segment destruction of about k stops.
  std::vector<int> destroy(TourState& st, std::size_t k) {
    std::vector<int> removed;
    if (rng_() % 3 == 0) {
      // Contiguous run out of one nonempty tour.
      std::vector<std::size_t> candidates;
      for (std::size_t ti = 0; ti < st.tours.size(); ++ti) {
        if (st.tours[ti].size() >= 2) candidates.push_back(ti);
      }
      if (!candidates.empty()) {
        const std::size_t ti = candidates[rng_() % candidates.size()];
        const auto& tour = st.tours[ti];
        const std::size_t len = std::min<std::size_t>(2 + rng_() % 3, tour.size());
        const std::size_t start = rng_() % (tour.size() - len + 1);
        const std::vector<int> segment(tour.begin() + start, tour.begin() + start + len);
        for (int stop : segment) remove_stop(st, stop, removed);
        return removed;
      }
    }
    std::vector<int> pool = active_;
    std::shuffle(pool.begin(), pool.end(), rng_);
    pool.resize(std::min(k, pool.size()));
    for (int stop : pool) remove_stop(st, stop, removed);
    return removed;
  }

  // Regret-2 repair; false when some stop no longer fits.
  bool repair(TourState& st, std::vector<int> removed) {
    while (!removed.empty()) {
      std::size_t empties = 0;
      for (const auto& t : st.tours) empties += t.empty();
      const bool force_empty = empties >= removed.size();

      std::size_t pick = removed.size();
      Insertion pick_ins;
      double pick_regret = -kInf;
      for (std::size_t i = 0; i < removed.size(); ++i) {
        const Insertion ins = best_insertion(c_, inst_, st, removed[i], force_empty);
        if (!std::isfinite(ins.delta)) return false;
        const double regret = std::isfinite(ins.second) ? ins.second - ins.delta : kInf;
        if (pick == removed.size() || regret > pick_regret ||
            (regret == pick_regret && removed[i] < removed[pick])) {
          pick = i;
          pick_ins = ins;
          pick_regret = regret;
        }
      }
      auto& tour = st.tours[pick_ins.tour];
      tour.insert(tour.begin() + static_cast<std::ptrdiff_t>(pick_ins.pos), removed[pick]);
      st.loads[pick_ins.tour] += inst_.demand_of(removed[pick]);
      removed.erase(removed.begin() + static_cast<std::ptrdiff_t>(pick));
    }
    return true;
  }

  // Relocate length-1/2 segments while improvements last.
  void polish(TourState& st) {
    bool improved = true;
    while (improved) {
      improved = false;
      for (std::size_t ti = 0; ti < st.tours.size() && !improved; ++ti) {
        for (std::size_t start = 0; start < st.tours[ti].size() && !improved; ++start) {
          for (std::size_t len = 1; len <= 2 && !improved; ++len) {
            if (start + len > st.tours[ti].size()) continue;
            if (st.tours[ti].size() == len) continue;  // would empty the tour
            TourState trial = st;
            auto& from = trial.tours[ti];
            const std::vector<int> segment(from.begin() + start, from.begin() + start + len);
            int segment_load = 0;
            for (int stop : segment) segment_load += inst_.demand_of(stop);
            from.erase(from.begin() + start, from.begin() + start + len);
            trial.loads[ti] -= segment_load;

            const double base = state_cost(c_, st);
            double best_delta = -1e-12;
            TourState best_trial;
            for (std::size_t tj = 0; tj < trial.tours.size(); ++tj) {
              if (trial.loads[tj] + segment_load > inst_.capacity) continue;
              for (std::size_t pos = 0; pos <= trial.tours[tj].size(); ++pos) {
                if (tj == ti && pos == start) continue;
                TourState cand = trial;
                cand.tours[tj].insert(cand.tours[tj].begin() + static_cast<std::ptrdiff_t>(pos),
                                      segment.begin(), segment.end());
                cand.loads[tj] += segment_load;
                const double delta = state_cost(c_, cand) - base;
                if (delta < best_delta) {
                  best_delta = delta;
                  best_trial = std::move(cand);
                }
              }
            }
            if (best_delta < -1e-12) {
              st = std::move(best_trial);
              improved = true;
            }
          }
        }
      }
    }
  }

  SolveReport run(const SolveOptions& opts) {
    const auto start_time = std::chrono::steady_clock::now();
    TourState st;
    if (!construct(st)) {
      throw InfeasibleError("no feasible assignment of stops to " +
                            std::to_string(inst_.vehicle_count) + " vehicles of capacity " +
                            std::to_string(inst_.capacity));
    }
    double cur_cost = state_cost(c_, st);
    TourState best_state = st;
    double best_cost = cur_cost;

    const std::size_t n = active_.size();
    const std::size_t k_max = std::max<std::size_t>(4, n / 4);
    int stall = 0;
    std::int64_t iter = 0;
    const bool by_iters = opts.heuristic_iters > 0;
    while (n >= 2) {
      if (by_iters) {
        if (iter >= opts.heuristic_iters) break;
      } else {
        const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                                 std::chrono::steady_clock::now() - start_time)
                                 .count();
        if (elapsed >= opts.heuristic_time_ms) break;
      }
      ++iter;

      TourState trial = st;
      const std::size_t k = 2 + rng_() % (k_max - 1);
      auto removed = destroy(trial, k);
      if (!repair(trial, std::move(removed))) continue;

      const double trial_cost = state_cost(c_, trial);
      if (trial_cost < cur_cost - 1e-12) {
        st = std::move(trial);
        cur_cost = trial_cost;
        stall = 0;
        if (cur_cost < best_cost - 1e-12) {
          best_state = st;
          best_cost = cur_cost;
        }
      } else if (++stall >= 200) {
        // Shake from the incumbent: large destruction, keep the result
        // as the new current solution even when worse.
        stall = 0;
        TourState shaken = best_state;
        auto dropped = destroy(shaken, std::max<std::size_t>(k_max, n / 3));
        if (repair(shaken, std::move(dropped))) {
          st = std::move(shaken);
          cur_cost = state_cost(c_, st);
          if (cur_cost < best_cost - 1e-12) {
            best_state = st;
            best_cost = cur_cost;
          }
        }
      }
    }

    polish(best_state);

    SolveReport report;
    for (auto& t : best_state.tours) {
      if (!t.empty()) report.routing.tours.push_back(std::move(t));
    }
    report.routing = canonical(report.routing);
    report.objective = routing_cost(c_, report.routing);
    report.optimal = false;
    report.nodes_explored = iter;
    report.wall_time_ms = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - start_time)
                              .count();
    return report;
  }

 private:
  const Mat& c_;
  const RoutingInstance& inst_;
  std::mt19937_64 rng_;
  std::vector<int> active_;
};

SolveReport heuristic_solve(const Mat& c, const RoutingInstance& inst, const SolveOptions& opts) {
  LnsSearch search(c, inst, opts.seed);
  return search.run(opts);
}

}  // namespace

CostMatrix cost_from_probabilities(const TransitionMatrix& p, double eps) {
  CostMatrix c(p.rows(), p.cols());
  for (std::size_t s = 0; s < p.rows(); ++s) {
    for (std::size_t r = 0; r < p.cols(); ++r) {
      c(s, r) = s == r ? kInf : -std::log(p(s, r) + eps);
    }
  }
  return c;
}

std::vector<Routing> enumerate_feasible(const RoutingInstance& inst) {
  check_instance_bounds(inst);
  if (inst.active_stops().size() > 8) {
    throw ValidationError("instance too large for enumeration (" +
                          std::to_string(inst.active_stops().size()) + " active stops > 8)");
  }
  std::vector<Routing> out;
  Enumerator e(inst, &out);
  e.open_tour(-1);
  return out;
}

SolveReport brute_force_cost(const CostMatrix& cost, const RoutingInstance& inst) {
  const auto start_time = std::chrono::steady_clock::now();
  auto all = enumerate_feasible(inst);
  if (all.empty()) throw InfeasibleError("no feasible routing exists for the instance");
  Incumbent best;
  for (const auto& x : all) best.offer(routing_cost(cost, x), x);
  SolveReport report;
  report.routing = best.routing;
  report.objective = best.objective;
  report.optimal = true;
  report.nodes_explored = static_cast<std::int64_t>(all.size());
  report.wall_time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_time)
          .count();
  return report;
}

SolveReport brute_force_routing(const TransitionMatrix& p, const RoutingInstance& inst,
                                double eps) {
  return brute_force_cost(cost_from_probabilities(p, eps), inst);
}

SolveReport solve_cost(const CostMatrix& cost, const RoutingInstance& inst,
                       const SolveOptions& opts) {
  check_instance_bounds(inst);
  const std::size_t n_active = inst.active_stops().size();
  Backend backend = opts.backend;
  if (backend == Backend::Auto) {
    backend = n_active <= static_cast<std::size_t>(opts.exact_size_limit) ? Backend::Exact
                                                                          : Backend::Heuristic;
  }
  if (backend == Backend::Heuristic) return heuristic_solve(cost, inst, opts);

  const auto start_time = std::chrono::steady_clock::now();
  BranchAndBound bnb(cost, inst);
  TourState warm;
  if (greedy_construct(cost, inst, warm) || packing_construct(cost, inst, warm)) {
    Routing x;
    for (auto& t : warm.tours) {
      if (!t.empty()) x.tours.push_back(std::move(t));
    }
    if (static_cast<int>(x.tours.size()) == inst.vehicle_count) {
      bnb.best.offer(routing_cost(cost, x), x);
    }
  }
  bnb.open_tour(-1);
  if (!bnb.best.found) throw InfeasibleError("no feasible routing exists for the instance");

  SolveReport report;
  report.routing = bnb.best.routing;
  report.objective = bnb.best.objective;
  report.optimal = true;
  report.nodes_explored = bnb.nodes;
  report.wall_time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_time)
          .count();
  return report;
}

SolveReport mle_routing(const TransitionMatrix& p, const RoutingInstance& inst,
                        const SolveOptions& opts) {
  const std::size_t n = p.rows();
  if (p.cols() != n) throw ValidationError("transition matrix is not square");
  std::vector<int> sources = inst.active_stops();
  sources.insert(sources.begin(), kDepot);
  for (int s : sources) {
    if (static_cast<std::size_t>(s) >= n) {
      throw ValidationError("transition matrix too small for stop " + std::to_string(s));
    }
    double sum = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      if (p(s, r) < -1e-12) {
        throw ValidationError("transition matrix has a negative entry in row " +
                              std::to_string(s));
      }
      sum += p(s, r);
    }
    if (std::abs(sum - 1.0) > 1e-6) {
      throw ValidationError("transition matrix row " + std::to_string(s) +
                            " is not stochastic (sum=" + std::to_string(sum) + ")");
    }
  }
  return solve_cost(cost_from_probabilities(p, opts.epsilon), inst, opts);
}

SolveReport conventional_vrp(const DistanceMatrix& d, const RoutingInstance& inst,
                             const SolveOptions& opts) {
  SolveOptions o = opts;
  o.epsilon = 0.0;  // softmax probabilities are strictly positive
  SolveReport report = solve_cost(cost_from_probabilities(distance_probabilities(d), 0.0), inst, o);
  report.distance_km = routing_distance_km(d, report.routing);
  return report;
}

}  // namespace prefroute
