#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <set>

#include "prefroute/markov.hpp"
#include "prefroute/solver.hpp"
#include "test_support.hpp"

using namespace prefroute;

namespace {

RoutingInstance make_instance(std::vector<std::pair<int, int>> demands, int m, int q) {
  RoutingInstance inst;
  inst.vehicle_count = m;
  inst.capacity = q;
  inst.demands = std::move(demands);
  std::sort(inst.demands.begin(), inst.demands.end());
  return inst;
}

SolveOptions exact_opts() {
  SolveOptions o;
  o.backend = Backend::Exact;
  return o;
}

}  // namespace

TEST_CASE("single stop has a unique routing") {
  auto inst = make_instance({{1, 1}}, 1, 5);
  std::mt19937_64 rng(1);
  const auto p = testsupport::random_stochastic(rng, 2);
  const SolveReport r = mle_routing(p, inst, exact_opts());
  CHECK(r.routing.tours == std::vector<std::vector<int>>{{1}});
  CHECK(r.optimal);
}

TEST_CASE("an engineered high-probability chain wins") {
  // Chain 0->1->2->3->0 carries 0.9 per arc, everything else splits the
  // remainder.
  const std::size_t n = 4;
  TransitionMatrix p = Mat::square(n);
  auto chain = std::vector<std::pair<int, int>>{{0, 1}, {1, 2}, {2, 3}, {3, 0}};
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t r = 0; r < n; ++r) {
      if (r != s) p(s, r) = 0.1 / (n - 2);
    }
  }
  for (auto [s, r] : chain) {
    for (std::size_t u = 0; u < n; ++u) {
      if (u != static_cast<std::size_t>(s)) {
        p(s, u) = u == static_cast<std::size_t>(r) ? 0.9 : 0.1 / (n - 2);
      }
    }
  }
  auto inst = make_instance({{1, 1}, {2, 1}, {3, 1}}, 1, 50);
  const SolveReport exact = mle_routing(p, inst, exact_opts());
  CHECK(exact.routing.tours == std::vector<std::vector<int>>{{1, 2, 3}});
  const SolveReport brute = brute_force_routing(p, inst);
  CHECK(exact.objective == brute.objective);
  CHECK(exact.routing.tours == brute.routing.tours);
}

TEST_CASE("tight capacity forces two tours of two stops") {
  auto inst = make_instance({{1, 2}, {2, 2}, {3, 2}, {4, 2}}, 2, 4);
  std::mt19937_64 rng(2);
  const auto p = testsupport::random_stochastic(rng, 5);
  const SolveReport exact = mle_routing(p, inst, exact_opts());
  REQUIRE(exact.routing.tours.size() == 2);
  CHECK(exact.routing.tours[0].size() == 2);
  CHECK(exact.routing.tours[1].size() == 2);
  CHECK(exact.objective == brute_force_routing(p, inst).objective);
}

TEST_CASE("exact backend matches brute force on random instances") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 3 + static_cast<int>(rng() % 6);
    const int m = 1 + static_cast<int>(rng() % 3);
    if (m > n) continue;
    auto fixture = testsupport::random_instance(rng, n, m);
    const auto p = testsupport::random_stochastic(rng, static_cast<std::size_t>(n) + 1);
    const SolveReport exact = mle_routing(p, fixture.inst, exact_opts());
    const SolveReport brute = brute_force_routing(p, fixture.inst);
    CHECK(exact.objective == brute.objective);
    CHECK(exact.routing.tours == brute.routing.tours);
    CHECK(validate_routing(fixture.inst, exact.routing).empty());
  }
}

TEST_CASE("forced fleet equality and pigeonhole infeasibility") {
  SUBCASE("two stops, two vehicles: unique forced routing") {
    auto inst = make_instance({{1, 1}, {2, 1}}, 2, 5);
    std::mt19937_64 rng(3);
    const auto p = testsupport::random_stochastic(rng, 3);
    const SolveReport r = brute_force_routing(p, inst);
    CHECK(r.routing.tours == std::vector<std::vector<int>>{{1}, {2}});
    CHECK(r.nodes_explored == 1);  // exactly one feasible routing
  }
  SUBCASE("one stop, two vehicles is infeasible") {
    auto inst = make_instance({{1, 1}}, 2, 5);
    std::mt19937_64 rng(4);
    const auto p = testsupport::random_stochastic(rng, 2);
    CHECK_THROWS_AS(brute_force_routing(p, inst), InfeasibleError);
    CHECK_THROWS_AS(mle_routing(p, inst, exact_opts()), InfeasibleError);
  }
  SUBCASE("demand exceeding fleet capacity is infeasible") {
    auto inst = make_instance({{1, 4}, {2, 4}}, 1, 5);
    std::mt19937_64 rng(5);
    const auto p = testsupport::random_stochastic(rng, 3);
    CHECK_THROWS_AS(mle_routing(p, inst, exact_opts()), InfeasibleError);
  }
}

TEST_CASE("non-stochastic matrices are rejected") {
  auto inst = make_instance({{1, 1}, {2, 1}}, 1, 5);
  Mat p = Mat::square(3);
  p(0, 1) = 0.8;  // row sums 0.8
  p(1, 2) = 1.0;
  p(2, 1) = 1.0;
  CHECK_THROWS_WITH_AS(mle_routing(p, inst), doctest::Contains("not stochastic"),
                       ValidationError);
}

TEST_CASE("conventional vrp returns the distance-minimal tour") {
  // Stops on a line: 0 at x=0, 1 at x=1, 2 at x=2.
  Mat d = Mat::square(3);
  d(0, 1) = d(1, 0) = 1.0;
  d(1, 2) = d(2, 1) = 1.0;
  d(0, 2) = d(2, 0) = 2.0;
  auto inst = make_instance({{1, 1}, {2, 1}}, 1, 5);
  const SolveReport r = conventional_vrp(d, inst, exact_opts());
  CHECK(r.distance_km == doctest::Approx(4.0));
  const bool forward = r.routing.tours == std::vector<std::vector<int>>{{1, 2}};
  const bool backward = r.routing.tours == std::vector<std::vector<int>>{{2, 1}};
  CHECK((forward || backward));
}

TEST_CASE("symmetric instances have relabel-invariant objectives") {
  // Four stops at the corners of a square, depot at the center.
  Mat d = Mat::square(5);
  const double side = 2.0, diag = 2.0 * std::sqrt(2.0), radius = std::sqrt(2.0);
  for (int s = 1; s <= 4; ++s) d(0, s) = d(s, 0) = radius;
  d(1, 2) = d(2, 1) = side;
  d(2, 3) = d(3, 2) = side;
  d(3, 4) = d(4, 3) = side;
  d(4, 1) = d(1, 4) = side;
  d(1, 3) = d(3, 1) = diag;
  d(2, 4) = d(4, 2) = diag;
  auto inst = make_instance({{1, 1}, {2, 1}, {3, 1}, {4, 1}}, 1, 10);
  const SolveReport a = conventional_vrp(d, inst, exact_opts());

  // Relabel stops by the cycle 1->2->3->4->1.
  Mat d2 = Mat::square(5);
  auto relabel = [](int s) { return s == 0 ? 0 : (s % 4) + 1; };
  for (int s = 0; s < 5; ++s) {
    for (int r = 0; r < 5; ++r) d2(relabel(s), relabel(r)) = d(s, r);
  }
  const SolveReport b = conventional_vrp(d2, inst, exact_opts());
  CHECK(a.distance_km == doctest::Approx(b.distance_km).epsilon(1e-12));
}

TEST_CASE("distance equivalence: MLE argmin set equals min-distance argmin set") {
  std::mt19937_64 rng(99);
  int done = 0;
  while (done < 25) {
    const int n = 3 + static_cast<int>(rng() % 4);
    const int m = 1 + static_cast<int>(rng() % 2);
    if (m > n) continue;
    auto fixture = testsupport::random_instance(rng, n, m, 6.0);
    const auto all = enumerate_feasible(fixture.inst);
    REQUIRE(!all.empty());

    // -log Pr_dist differs from the distance by a per-row constant and
    // every feasible routing leaves each node the same number of times,
    // so both objectives induce the same argmin set (no smoothing).
    const CostMatrix c = cost_from_probabilities(distance_probabilities(fixture.distance), 0.0);
    double best_km = std::numeric_limits<double>::infinity();
    double best_mle = std::numeric_limits<double>::infinity();
    for (const auto& x : all) {
      best_km = std::min(best_km, routing_distance_km(fixture.distance, x));
      best_mle = std::min(best_mle, routing_cost(c, x));
    }
    std::set<std::vector<std::vector<int>>> km_set, mle_set;
    for (const auto& x : all) {
      const Routing cx = canonical(x);
      if (routing_distance_km(fixture.distance, x) <= best_km + 1e-9) km_set.insert(cx.tours);
      if (routing_cost(c, x) <= best_mle + 1e-9) mle_set.insert(cx.tours);
    }
    CHECK(km_set == mle_set);
    ++done;
  }
}

TEST_CASE("heuristic stays feasible and above the exact objective") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 4 + static_cast<int>(rng() % 5);
    const int m = 1 + static_cast<int>(rng() % 2);
    auto fixture = testsupport::random_instance(rng, n, m);
    const auto p = testsupport::random_stochastic(rng, static_cast<std::size_t>(n) + 1);
    SolveOptions heur;
    heur.backend = Backend::Heuristic;
    heur.heuristic_iters = 300;
    heur.seed = trial;
    const SolveReport h = mle_routing(p, fixture.inst, heur);
    CHECK(validate_routing(fixture.inst, h.routing).empty());
    CHECK_FALSE(h.optimal);
    const SolveReport e = mle_routing(p, fixture.inst, exact_opts());
    CHECK(h.objective >= e.objective - 1e-9);
  }
}

TEST_CASE("heuristic handles instances beyond the exact size limit") {
  std::mt19937_64 rng(13);
  auto fixture = testsupport::random_instance(rng, 30, 4);
  const auto p = testsupport::random_stochastic(rng, 31);
  SolveOptions opts;  // auto picks the heuristic at 30 stops
  opts.heuristic_iters = 500;
  const SolveReport r = mle_routing(p, fixture.inst, opts);
  CHECK(validate_routing(fixture.inst, r.routing).empty());
  CHECK_FALSE(r.optimal);
}

TEST_CASE("auto backend uses exact up to the size limit") {
  std::mt19937_64 rng(17);
  auto fixture = testsupport::random_instance(rng, 8, 2);
  const auto p = testsupport::random_stochastic(rng, 9);
  const SolveReport r = mle_routing(p, fixture.inst, SolveOptions{});
  CHECK(r.optimal);
}

TEST_CASE("shrinking the smoothing does not move a clear optimum") {
  std::mt19937_64 rng(21);
  int done = 0;
  while (done < 10) {
    auto fixture = testsupport::random_instance(rng, 5, 1);
    const auto p = testsupport::random_stochastic(rng, 6);

    SolveOptions a = exact_opts();
    a.epsilon = 1e-6;
    SolveOptions b = exact_opts();
    b.epsilon = 1e-9;
    const SolveReport ra = mle_routing(p, fixture.inst, a);

    // Only consider instances where the optimum is unique with margin.
    const CostMatrix c = cost_from_probabilities(p, 1e-6);
    double second = std::numeric_limits<double>::infinity();
    for (const auto& x : enumerate_feasible(fixture.inst)) {
      const double v = routing_cost(c, x);
      if (canonical(x).tours != ra.routing.tours) second = std::min(second, v);
    }
    if (second - ra.objective <= 1e-3) continue;
    const SolveReport rb = mle_routing(p, fixture.inst, b);
    CHECK(ra.routing.tours == rb.routing.tours);
    ++done;
  }
}

TEST_CASE("solve report objective equals the re-summed arc costs") {
  std::mt19937_64 rng(31);
  auto fixture = testsupport::random_instance(rng, 6, 2);
  const auto p = testsupport::random_stochastic(rng, 7);
  const SolveReport r = mle_routing(p, fixture.inst, exact_opts());
  const CostMatrix c = cost_from_probabilities(p, 1e-6);
  CHECK(r.objective == doctest::Approx(routing_cost(c, r.routing)).epsilon(1e-12));
}
