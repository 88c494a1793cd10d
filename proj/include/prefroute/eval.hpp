#pragma once

#include <array>
#include <optional>

#include "prefroute/dfl.hpp"
#include "prefroute/markov.hpp"
#include "prefroute/neural.hpp"
#include "prefroute/solver.hpp"

namespace prefroute {

enum class Estimator { MarkovAllday, MarkovWeekday, Neural, Dfl, Conventional };

const char* estimator_name(Estimator e);
Estimator estimator_from_name(const std::string& name);

struct Metric {
  int abs = 0;
  double pct = 0.0;
};

// Arcs of the actual routing missing from the predicted one, as a count
// and as a percentage of the actual arc set.
Metric arc_difference(const Routing& x_actual, const Routing& x_pred);

// Stops assigned to the wrong route under greedy closest-pair route
// matching (smallest symmetric difference first, ties by index pair);
// percentage of the active stop count.
Metric route_difference(const Routing& x_actual, const Routing& x_pred);

struct EvalConfig {
  int tests_per_weekday = 7;
  WeightingScheme weighting = WeightingScheme::uniform();
  TrainConfig train;
  DflConfig dfl;
  SolveOptions solve;
};

struct InstanceEval {
  int timestamp = 0;
  Weekday weekday = Weekday::Mon;
  int ad_abs = 0;
  double ad_pct = 0.0;
  int rd_abs = 0;
  double rd_pct = 0.0;
  double ce = 0.0;
  double distance_km = 0.0;
};

struct EvalAggregate {
  int count = 0;
  double ad_abs = 0.0, ad_pct = 0.0, rd_abs = 0.0, rd_pct = 0.0, ce = 0.0, distance_km = 0.0;
};

struct EvalReport {
  Estimator estimator = Estimator::MarkovAllday;
  std::vector<InstanceEval> per_instance;
  EvalAggregate overall;
  std::array<EvalAggregate, 7> per_weekday;
  // Mean final-epoch training CE across retrained source models
  // (neural/dfl only).
  std::optional<double> mean_training_ce;
};

// Indices of the test records: the chronologically last k per weekday,
// keeping at least one earlier record of that weekday for estimation.
std::vector<std::size_t> select_test_indices(const HistoryDataset& history, int tests_per_weekday);

// The transition matrix an estimator produces for one day, using data
// strictly before it (test-day leakage is structurally impossible).
TransitionMatrix estimator_matrix_for_day(const HistoryDataset& history, Estimator est,
                                          const RoutingInstance& inst, const EvalConfig& cfg);

// Rolling-window evaluation: for each test day, estimate from strictly
// earlier data, solve the MLE routing and score it against the realized
// routing.
EvalReport rolling_evaluation(const HistoryDataset& history, Estimator est,
                              const EvalConfig& cfg);

std::string eval_report_to_json(const EvalReport& report);
std::string eval_report_to_csv(const EvalReport& report);

}  // namespace prefroute
