#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "prefroute/eval.hpp"
#include "prefroute/synth.hpp"

using namespace prefroute;

namespace {

SynthConfig small_config() {
  SynthConfig cfg;
  cfg.universe_size = 9;
  cfg.mean_active = 5;
  cfg.vehicles_mean = 2;
  cfg.weeks = 10;
  cfg.seed = 12345;
  return cfg;
}

}  // namespace

TEST_CASE("generation is deterministic under a fixed seed") {
  SynthConfig cfg = small_config();
  const HistoryDataset a = synth_generate(cfg);
  const HistoryDataset b = synth_generate(cfg);
  CHECK(history_to_json_text(a) == history_to_json_text(b));

  SynthConfig other = cfg;
  other.seed = 999;
  CHECK(history_to_json_text(synth_generate(other)) != history_to_json_text(a));
}

TEST_CASE("generated datasets pass validation and have the configured shape") {
  SynthConfig cfg = small_config();
  const HistoryDataset h = synth_generate(cfg);
  CHECK(h.universe_size() == 10);
  CHECK(h.records.size() == static_cast<std::size_t>(cfg.weeks) * 7);
  validate_history(h);  // throws on any broken invariant

  double active_sum = 0.0;
  for (const auto& rec : h.records) active_sum += rec.instance.demands.size();
  const double mean_active = active_sum / static_cast<double>(h.records.size());
  CHECK(mean_active > 2.0);
  CHECK(mean_active < 9.0);
}

TEST_CASE("zero pattern strength collapses the weekday ground truths") {
  SynthConfig cfg = small_config();
  cfg.weekday_pattern_strength = 0.0;
  const auto gt = synth_ground_truth(cfg);
  REQUIRE(gt.size() == 7);
  for (int d = 1; d < 7; ++d) CHECK(gt[d] == gt[0]);

  SynthConfig strong = small_config();
  strong.weekday_pattern_strength = 1.0;
  const auto gt2 = synth_ground_truth(strong);
  CHECK(gt2[0] != gt2[1]);
}

TEST_CASE("full pattern strength makes same-weekday instances identical") {
  SynthConfig cfg = small_config();
  cfg.weekday_pattern_strength = 1.0;
  cfg.noise = 0.0;
  const HistoryDataset h = synth_generate(cfg);
  for (std::size_t i = 7; i < h.records.size(); ++i) {
    const auto& prev = h.records[i - 7];
    const auto& cur = h.records[i];
    CHECK(prev.instance.demands == cur.instance.demands);
    CHECK(prev.instance.vehicle_count == cur.instance.vehicle_count);
    CHECK(prev.routing.tours == cur.routing.tours);
  }
}

TEST_CASE("noiseless weekday-deterministic data gives the weekday estimator AD zero") {
  SynthConfig cfg = small_config();
  cfg.weekday_pattern_strength = 1.0;
  cfg.noise = 0.0;
  const HistoryDataset h = synth_generate(cfg);

  EvalConfig ec;
  ec.tests_per_weekday = 7;
  ec.solve.backend = Backend::Auto;
  ec.solve.heuristic_iters = 2000;

  const EvalReport weekday = rolling_evaluation(h, Estimator::MarkovWeekday, ec);
  CHECK(weekday.overall.ad_abs == 0.0);
  CHECK(weekday.overall.rd_abs == 0.0);

  const EvalReport allday = rolling_evaluation(h, Estimator::MarkovAllday, ec);
  CHECK(allday.overall.ad_pct > weekday.overall.ad_pct);

  // Pooling all weekdays hurts most where patterns deviate; on the
  // weekend days the weekday estimator must win.
  const int sat = static_cast<int>(Weekday::Sat), sun = static_cast<int>(Weekday::Sun);
  CHECK(weekday.per_weekday[sat].ad_pct <= allday.per_weekday[sat].ad_pct);
  CHECK(weekday.per_weekday[sun].ad_pct <= allday.per_weekday[sun].ad_pct);
  CHECK(weekday.per_weekday[sat].ad_pct + weekday.per_weekday[sun].ad_pct <
        allday.per_weekday[sat].ad_pct + allday.per_weekday[sun].ad_pct);
}

TEST_CASE("config validation") {
  SynthConfig cfg = small_config();
  cfg.mean_active = 20;
  CHECK_THROWS_AS(synth_generate(cfg), ValidationError);
  cfg = small_config();
  cfg.weeks = 0;
  CHECK_THROWS_AS(synth_generate(cfg), ValidationError);
  cfg = small_config();
  cfg.noise = 2.0;
  CHECK_THROWS_AS(synth_generate(cfg), ValidationError);
}
