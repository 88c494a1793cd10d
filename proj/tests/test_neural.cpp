#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <random>

#include "prefroute/markov.hpp"
#include "prefroute/neural.hpp"
#include "prefroute/solver.hpp"
#include "test_support.hpp"

using namespace prefroute;
using testsupport::HistoryBuilder;

namespace {

FeatureBundle random_bundle(std::mt19937_64& rng, std::size_t n, int lookback, int source) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  FeatureBundle fb;
  fb.source = source;
  fb.weekday = static_cast<int>(rng() % 7);
  fb.vehicle_count = 1.0 + static_cast<double>(rng() % 8);
  fb.markov_logp.resize(n);
  fb.dist_logit.resize(n);
  fb.active_mask.resize(n, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    fb.markov_logp[r] = -14.0 * uni(rng);
    fb.dist_logit[r] = -10.0 * uni(rng);
    if (r != 0 && static_cast<int>(r) != source) fb.active_mask[r] = rng() % 2 ? 1.0 : 0.0;
  }
  fb.lagged.assign(lookback, std::vector<double>(n, 0.0));
  for (auto& row : fb.lagged) {
    row[rng() % n] = 1.0;
  }
  return fb;
}

ArcModelParams random_params(std::mt19937_64& rng, std::size_t n, int lookback, int source) {
  ArcModelParams p = ArcModelParams::initialized(source, n, lookback, rng());
  std::uniform_real_distribution<double> uni(-0.5, 0.5);
  for (auto& w : p.lag_weights) w = uni(rng);
  p.w_markov = uni(rng);
  p.w_dist = uni(rng);
  p.bias = uni(rng);
  return p;
}

std::vector<double> one_hot(std::size_t n, std::size_t at) {
  std::vector<double> v(n, 0.0);
  v[at] = 1.0;
  return v;
}

// Central finite differences of ce_loss(forward(params)) in every
// parameter coordinate.
void check_gradients(ArcModelParams& params, const FeatureBundle& fb,
                     const std::vector<double>& target) {
  const double h = 1e-5;
  ForwardTrace tr = forward_trace(params, fb);
  ModelTensors grads = ModelTensors::shaped(params.stop_embedding.rows(),
                                            static_cast<int>(params.lag_weights.size()));
  backward_from_dscore(params, fb, tr, ce_dscore(tr.probs, target), grads);

  auto pviews = params.tensors();
  auto gviews = grads.tensors();
  for (std::size_t t = 0; t < pviews.size(); ++t) {
    for (std::size_t i = 0; i < pviews[t].second; ++i) {
      double& w = pviews[t].first[i];
      const double saved = w;
      w = saved + h;
      const double up = ce_loss(forward(params, fb), target);
      w = saved - h;
      const double down = ce_loss(forward(params, fb), target);
      w = saved;
      const double fd = (up - down) / (2.0 * h);
      const double an = gviews[t].first[i];
      const double tol = 1e-4 * std::max({1.0, std::abs(fd), std::abs(an)});
      CHECK_MESSAGE(std::abs(fd - an) <= tol,
                    "tensor ", t, " index ", i, " analytic ", an, " fd ", fd);
    }
  }
}

}  // namespace

TEST_CASE("zero parameters give the uniform distribution") {
  ArcModelParams params = ArcModelParams::zeros(1, 5, 3);
  std::mt19937_64 rng(1);
  FeatureBundle fb = random_bundle(rng, 5, 3, 1);
  const auto p = forward(params, fb);
  CHECK(p[1] == 0.0);
  for (std::size_t r = 0; r < 5; ++r) {
    if (r != 1) CHECK(p[r] == doctest::Approx(0.25));
  }
}

TEST_CASE("pure markov weight recovers the markov row") {
  const std::size_t n = 5;
  ArcModelParams params = ArcModelParams::zeros(2, n, 3);
  params.w_markov = 1.0;
  std::mt19937_64 rng(2);
  FeatureBundle fb = random_bundle(rng, n, 3, 2);
  // A normalized probability row, logged with smoothing.
  std::vector<double> row{0.4, 0.3, 0.0, 0.2, 0.1};
  for (std::size_t r = 0; r < n; ++r) fb.markov_logp[r] = std::log(row[r] + 1e-6);
  const auto p = forward(params, fb);
  for (std::size_t r = 0; r < n; ++r) {
    if (r != 2) CHECK(p[r] == doctest::Approx(row[r]).epsilon(1e-4));
  }
}

TEST_CASE("pure distance weight recovers the distance softmax") {
  const std::size_t n = 5;
  std::mt19937_64 rng(3);
  auto fixture = testsupport::random_instance(rng, 4, 1);
  const TransitionMatrix expect = distance_probabilities(fixture.distance);

  ArcModelParams params = ArcModelParams::zeros(0, n, 3);
  params.w_dist = 1.0;
  FeatureBundle fb = random_bundle(rng, n, 3, 0);
  for (std::size_t r = 0; r < n; ++r) fb.dist_logit[r] = -fixture.distance(0, r);
  const auto p = forward(params, fb);
  for (std::size_t r = 1; r < n; ++r) CHECK(p[r] == doctest::Approx(expect(0, r)).epsilon(1e-9));
}

TEST_CASE("cross entropy matches hand values") {
  CHECK(ce_loss({0.25, 0.25, 0.25, 0.25}, one_hot(4, 2)) ==
        doctest::Approx(std::log(4.0)).epsilon(1e-9));
  CHECK(ce_loss({0.0, 1.0, 0.0}, one_hot(3, 1)) == doctest::Approx(0.0));
  // Only the target mass matters.
  CHECK(ce_loss({0.25, 0.6, 0.1, 0.05}, one_hot(4, 0)) ==
        doctest::Approx(std::log(4.0)).epsilon(1e-9));
  // Multi-hot rows (the depot serves several tours) sum the terms.
  CHECK(ce_loss({0.0, 0.5, 0.25, 0.25}, {0.0, 1.0, 1.0, 0.0}) ==
        doctest::Approx(std::log(2.0) + std::log(4.0)).epsilon(1e-9));
}

TEST_CASE("ce gradient at the scores is p minus the target") {
  std::mt19937_64 rng(4);
  FeatureBundle fb = random_bundle(rng, 6, 2, 3);
  ArcModelParams params = random_params(rng, 6, 2, 3);
  const auto p = forward(params, fb);
  const auto d = ce_dscore(p, one_hot(6, 1));
  for (std::size_t r = 0; r < 6; ++r) {
    CHECK(d[r] == doctest::Approx(p[r] - (r == 1 ? 1.0 : 0.0)).epsilon(1e-12));
  }
}

TEST_CASE("analytic gradients match central finite differences") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 4 + rng() % 3;
    const int lookback = 1 + static_cast<int>(rng() % 3);
    const int source = static_cast<int>(rng() % n);
    ArcModelParams params = random_params(rng, n, lookback, source);
    FeatureBundle fb = random_bundle(rng, n, lookback, source);
    std::size_t target = rng() % n;
    if (target == static_cast<std::size_t>(source)) target = (target + 1) % n;
    auto t = one_hot(n, target);
    if (trial % 4 == 0) t[(target + 1) % n] = 1.0;  // depot-style multi-hot
    if (t[static_cast<std::size_t>(source)] != 0.0) continue;
    check_gradients(params, fb, t);
  }
}

TEST_CASE("gradient through the cost row matches finite differences") {
  // d<grad_pi, pi(scores)> / d scores, with pi = -log(softmax + eps).
  std::mt19937_64 rng(77);
  const std::size_t n = 5;
  const double eps = 1e-6;
  ArcModelParams params = random_params(rng, n, 2, 0);
  FeatureBundle fb = random_bundle(rng, n, 2, 0);
  std::vector<double> grad_pi(n, 0.0);
  grad_pi[1] = -0.05;  // entries of +-1/lambda
  grad_pi[3] = 0.05;

  ForwardTrace tr = forward_trace(params, fb);
  const auto dscore = dscore_from_cost_grad(tr.probs, grad_pi, eps);

  auto value_at = [&](const std::vector<double>& scores) {
    double maxs = -std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < n; ++r) {
      if (r != 0) maxs = std::max(maxs, scores[r]);
    }
    double z = 0.0;
    std::vector<double> p(n, 0.0);
    for (std::size_t r = 1; r < n; ++r) {
      p[r] = std::exp(scores[r] - maxs);
      z += p[r];
    }
    double total = 0.0;
    for (std::size_t r = 1; r < n; ++r) {
      total += grad_pi[r] * -std::log(p[r] / z + eps);
    }
    return total;
  };

  const double h = 1e-6;
  for (std::size_t r = 1; r < n; ++r) {
    auto up = tr.scores, down = tr.scores;
    up[r] += h;
    down[r] -= h;
    const double fd = (value_at(up) - value_at(down)) / (2.0 * h);
    CHECK(dscore[r] == doctest::Approx(fd).epsilon(1e-4));
  }
}

TEST_CASE("feature bundles follow the lag and fallback rules") {
  HistoryBuilder b(4);
  b.day(0, Weekday::Mon, {{1, 2}});
  b.day(1, Weekday::Tue, {{1, 3}});
  b.day(2, Weekday::Wed, {{2, 3}});
  HistoryDataset h = b.build();
  MarkovCache cache(h);
  TrainConfig cfg;
  cfg.lookback = 3;
  cfg.features.lagged = true;

  SUBCASE("no prior activity gives all-uniform lag slots") {
    RoutingInstance inst = h.records[0].instance;  // t=0, nothing before
    FeatureBundle fb = build_features(h, cache.weekday_matrix_before(0, Weekday::Mon), inst, 1, cfg);
    for (const auto& row : fb.lagged) {
      CHECK(row[1] == 0.0);
      CHECK(row[0] == doctest::Approx(1.0 / 3.0));
      CHECK(row[2] == doctest::Approx(1.0 / 3.0));
      CHECK(row[3] == doctest::Approx(1.0 / 3.0));
    }
  }
  SUBCASE("one prior active day fills slot 0, uniform after") {
    RoutingInstance inst = h.records[1].instance;  // t=1; stop 1 was active at t=0
    FeatureBundle fb = build_features(h, cache.weekday_matrix_before(1, Weekday::Tue), inst, 1, cfg);
    CHECK(fb.lagged[0][2] == 1.0);  // successor of 1 on day 0
    CHECK(fb.lagged[0][3] == 0.0);
    CHECK(fb.lagged[1][0] == doctest::Approx(1.0 / 3.0));
    CHECK(fb.lagged[2][0] == doctest::Approx(1.0 / 3.0));
  }
  SUBCASE("disabled groups are zeroed") {
    TrainConfig masked = cfg;
    masked.features.markov = false;
    masked.features.distance = false;
    masked.features.lagged = false;
    masked.features.stops = false;
    masked.features.weekday = false;
    RoutingInstance inst = h.records[2].instance;
    FeatureBundle fb =
        build_features(h, cache.weekday_matrix_before(2, Weekday::Wed), inst, 2, masked);
    for (double v : fb.markov_logp) CHECK(v == 0.0);
    for (double v : fb.dist_logit) CHECK(v == 0.0);
    for (double v : fb.active_mask) CHECK(v == 0.0);
    for (const auto& row : fb.lagged) {
      for (double v : row) CHECK(v == 0.0);
    }
    CHECK(fb.weekday == -1);
    CHECK(fb.vehicle_count == 0.0);
  }
}

namespace {

HistoryDataset deterministic_successor_history(int days) {
  HistoryBuilder b(4);
  for (int t = 0; t < days; ++t) {
    b.day(t, static_cast<Weekday>(t % 7), {{1, 2, 3}});
  }
  return b.build();
}

}  // namespace

TEST_CASE("training learns a deterministic successor") {
  HistoryDataset h = deterministic_successor_history(10);
  MarkovCache cache(h);
  TrainConfig cfg;
  cfg.seed = 5;
  TrainResult result = train_source_model(h, cache, 1, cfg);

  // Predict at t=11 (weekday of day 11).
  RoutingInstance inst = h.records.back().instance;
  inst.timestamp = 11;
  inst.weekday = static_cast<Weekday>(11 % 7);
  FeatureBundle fb =
      build_features(h, cache.weekday_matrix_before(11, inst.weekday), inst, 1, cfg);
  const auto p = forward(result.params, fb);
  CHECK(p[2] >= 0.9);

  SUBCASE("per-epoch training CE is non-increasing early on") {
    REQUIRE(result.epoch_mean_ce.size() >= 5);
    for (int e = 1; e < 5; ++e) {
      CHECK(result.epoch_mean_ce[e] <= result.epoch_mean_ce[e - 1] + 1e-12);
    }
  }
}

TEST_CASE("alternating successors converge to a coin flip") {
  // All on the same weekday so the filtered markov feature sees both.
  HistoryBuilder b(4);
  for (int t = 0; t < 12; ++t) {
    b.day(7 * t, Weekday::Mon, {{1, t % 2 == 0 ? 2 : 3}});
  }
  HistoryDataset h = b.build();
  MarkovCache cache(h);
  TrainConfig cfg;
  cfg.features = FeatureMask{false, false, false, false, true};  // markov only
  TrainResult result = train_source_model(h, cache, 1, cfg);

  RoutingInstance inst = h.records.back().instance;
  inst.timestamp = 7 * 12;
  FeatureBundle fb =
      build_features(h, cache.weekday_matrix_before(7 * 12, inst.weekday), inst, 1, cfg);
  const auto p = forward(result.params, fb);
  CHECK(std::abs(p[2] - 0.5) <= 0.1);
  CHECK(std::abs(p[3] - 0.5) <= 0.1);
}

TEST_CASE("config preconditions are enforced") {
  HistoryDataset h = deterministic_successor_history(3);
  MarkovCache cache(h);
  TrainConfig cfg;
  cfg.epochs = 0;
  CHECK_THROWS_AS(train_source_model(h, cache, 1, cfg), ValidationError);
  TrainConfig cfg2;
  CHECK_THROWS_WITH_AS(train_source_model(h, cache, 999, cfg2),
                       doctest::Contains("no training data"), ValidationError);
}

TEST_CASE("training is deterministic under a fixed seed") {
  HistoryDataset h = deterministic_successor_history(8);
  MarkovCache cache(h);
  TrainConfig cfg;
  cfg.seed = 17;
  cfg.epochs = 20;
  TrainResult a = train_source_model(h, cache, 1, cfg);
  TrainResult b = train_source_model(h, cache, 1, cfg);
  CHECK(a.epoch_mean_ce == b.epoch_mean_ce);
  auto va = a.params.tensors();
  auto vb = b.params.tensors();
  for (std::size_t t = 0; t < va.size(); ++t) {
    for (std::size_t i = 0; i < va[t].second; ++i) {
      CHECK(va[t].first[i] == vb[t].first[i]);
    }
  }
}

TEST_CASE("disabling a feature group freezes its parameters") {
  HistoryDataset h = deterministic_successor_history(8);
  MarkovCache cache(h);

  auto train_with = [&](FeatureMask mask) {
    TrainConfig cfg;
    cfg.features = mask;
    cfg.epochs = 10;
    cfg.seed = 23;
    return train_source_model(h, cache, 1, cfg).params;
  };
  const ArcModelParams init = ArcModelParams::initialized(1, 4, 5, 23);

  SUBCASE("lagged off freezes the lag weights") {
    auto p = train_with(FeatureMask{false, true, true, true, true});
    for (double w : p.lag_weights) CHECK(w == 0.0);
  }
  SUBCASE("markov off freezes w_markov at its initial value") {
    auto p = train_with(FeatureMask{true, true, true, true, false});
    CHECK(p.w_markov == init.w_markov);
  }
  SUBCASE("distance off freezes w_dist") {
    auto p = train_with(FeatureMask{true, true, true, false, true});
    CHECK(p.w_dist == 0.0);
  }
  SUBCASE("weekday off freezes the weekday embedding and its map columns") {
    auto p = train_with(FeatureMask{true, false, true, true, true});
    CHECK(p.weekday_embedding == init.weekday_embedding);
    for (int i = 0; i < kStopDim; ++i) {
      for (int j = 0; j < kWeekdayDim; ++j) {
        CHECK(p.context_map(i, j) == init.context_map(i, j));
      }
    }
  }
  SUBCASE("stops off freezes the stop-set and vehicle map columns") {
    auto p = train_with(FeatureMask{true, true, false, true, true});
    for (int i = 0; i < kStopDim; ++i) {
      CHECK(p.context_map(i, kContextDim - 1) == init.context_map(i, kContextDim - 1));
      CHECK(p.context_map(i, kWeekdayDim) == init.context_map(i, kWeekdayDim));
    }
  }
}

TEST_CASE("predicted matrices react to the weekday context") {
  // Monday successor of 1 is always 2; Tuesday successor is always 3.
  HistoryBuilder b(5);
  for (int w = 0; w < 8; ++w) {
    b.day(w * 7, Weekday::Mon, {{1, 2}, {3, 4}});
    b.day(w * 7 + 1, Weekday::Tue, {{1, 3}, {2, 4}});
  }
  HistoryDataset h = b.build();
  MarkovCache cache(h);
  TrainConfig cfg;
  cfg.epochs = 60;
  cfg.seed = 3;

  ModelMap models;
  for (int s = 0; s < 5; ++s) {
    models.emplace(s, train_source_model(h, cache, s, cfg).params);
  }

  RoutingInstance monday = h.records[h.records.size() - 2].instance;
  RoutingInstance tuesday = monday;
  monday.timestamp = 100;
  monday.weekday = Weekday::Mon;
  tuesday.timestamp = 100;
  tuesday.weekday = Weekday::Tue;
  const TransitionMatrix pm = predict_matrix(models, h, monday, cfg, cache);
  const TransitionMatrix pt = predict_matrix(models, h, tuesday, cfg, cache);
  CHECK(pm(1, 2) > pm(1, 3));
  CHECK(pt(1, 3) > pt(1, 2));
}

TEST_CASE("zero-parameter models predict uniform rows with a closed-form objective") {
  HistoryDataset h = deterministic_successor_history(6);
  MarkovCache cache(h);
  TrainConfig cfg;
  const std::size_t n = h.universe_size();

  ModelMap models;
  for (std::size_t s = 0; s < n; ++s) {
    models.emplace(static_cast<int>(s), ArcModelParams::zeros(static_cast<int>(s), n, cfg.lookback));
  }
  RoutingInstance inst = h.records.back().instance;
  inst.timestamp = 10;
  const TransitionMatrix p = predict_matrix(models, h, inst, cfg, cache);
  for (int s : {0, 1, 2, 3}) {
    for (std::size_t r = 0; r < n; ++r) {
      const double expect = static_cast<std::size_t>(s) == r ? 0.0 : 1.0 / (n - 1);
      CHECK(p(s, r) == doctest::Approx(expect).epsilon(1e-12));
    }
  }

  // With every row uniform the MLE objective is |S| + m arcs, each at
  // -log(1/(universe-1) + eps).
  SolveOptions opts;
  opts.backend = Backend::Exact;
  const SolveReport solved = mle_routing(p, inst, opts);
  const double arc_cost = -std::log(1.0 / (n - 1) + opts.epsilon);
  const double stops = static_cast<double>(inst.active_stops().size());
  CHECK(solved.objective ==
        doctest::Approx((stops + inst.vehicle_count) * arc_cost).epsilon(1e-9));

  SUBCASE("a single-stop instance is forced regardless of the rows") {
    RoutingInstance single;
    single.timestamp = 10;
    single.weekday = inst.weekday;
    single.vehicle_count = 1;
    single.capacity = 5;
    single.demands = {{1, 1}};
    const TransitionMatrix ps = predict_matrix(models, h, single, cfg, cache);
    const SolveReport r = mle_routing(ps, single, opts);
    CHECK(r.routing.tours == std::vector<std::vector<int>>{{1}});
  }
}

TEST_CASE("prediction falls back to markov rows for unmodeled stops") {
  HistoryDataset h = deterministic_successor_history(6);
  MarkovCache cache(h);
  TrainConfig cfg;
  cfg.epochs = 5;
  ModelMap models;  // empty: every row falls back
  RoutingInstance inst = h.records.back().instance;
  inst.timestamp = 10;
  const TransitionMatrix p = predict_matrix(models, h, inst, cfg, cache);
  const TransitionMatrix expect = cache.weekday_matrix_before(10, inst.weekday);
  CHECK(p == expect);
}

TEST_CASE("model store round-trips") {
  HistoryDataset h = deterministic_successor_history(6);
  MarkovCache cache(h);
  TrainConfig cfg;
  cfg.epochs = 4;
  ModelMap models;
  for (int s = 0; s < 4; ++s) models.emplace(s, train_source_model(h, cache, s, cfg).params);

  const auto dir = std::filesystem::temp_directory_path() / "prefroute_models_test";
  std::filesystem::remove_all(dir);
  save_models(dir.string(), models, cfg);
  auto [loaded, loaded_cfg] = load_models(dir.string());
  std::filesystem::remove_all(dir);

  REQUIRE(loaded.size() == models.size());
  CHECK(loaded_cfg.epochs == cfg.epochs);
  for (const auto& [s, params] : models) {
    auto va = params.tensors();
    auto vb = loaded.at(s).tensors();
    for (std::size_t t = 0; t < va.size(); ++t) {
      for (std::size_t i = 0; i < va[t].second; ++i) {
        CHECK(va[t].first[i] == vb[t].first[i]);
      }
    }
  }
}
