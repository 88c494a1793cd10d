#include "prefroute/eval.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "json_io.hpp"

namespace prefroute {

namespace {

const char* kEstimatorNames[] = {"markov_allday", "markov_weekday", "neural", "dfl",
                                 "conventional"};

}  // namespace

const char* estimator_name(Estimator e) { return kEstimatorNames[static_cast<int>(e)]; }

Estimator estimator_from_name(const std::string& name) {
  for (int i = 0; i < 5; ++i) {
    if (name == kEstimatorNames[i]) return static_cast<Estimator>(i);
  }
  throw ValidationError("unknown estimator '" + name + "'");
}

Metric arc_difference(const Routing& x_actual, const Routing& x_pred) {
  const auto actual = arcs_of(x_actual);
  const auto pred = arcs_of(x_pred);
  std::vector<Arc> missing;
  std::set_difference(actual.begin(), actual.end(), pred.begin(), pred.end(),
                      std::back_inserter(missing));
  Metric m;
  m.abs = static_cast<int>(missing.size());
  m.pct = actual.empty() ? 0.0 : 100.0 * m.abs / static_cast<double>(actual.size());
  return m;
}

Metric route_difference(const Routing& x_actual, const Routing& x_pred) {
  std::vector<std::set<int>> actual, pred;
  std::size_t n_stops = 0;
  for (const auto& t : x_actual.tours) {
    actual.emplace_back(t.begin(), t.end());
    n_stops += t.size();
  }
  for (const auto& t : x_pred.tours) pred.emplace_back(t.begin(), t.end());

  std::vector<char> actual_used(actual.size(), 0), pred_used(pred.size(), 0);
  int misassigned = 0;
  const std::size_t pairs = std::min(actual.size(), pred.size());
  for (std::size_t round = 0; round < pairs; ++round) {
    std::size_t best_i = 0, best_j = 0;
    int best_diff = -1;
    for (std::size_t i = 0; i < actual.size(); ++i) {
      if (actual_used[i]) continue;
      for (std::size_t j = 0; j < pred.size(); ++j) {
        if (pred_used[j]) continue;
        std::vector<int> sym;
        std::set_symmetric_difference(actual[i].begin(), actual[i].end(), pred[j].begin(),
                                      pred[j].end(), std::back_inserter(sym));
        const int diff = static_cast<int>(sym.size());
        if (best_diff < 0 || diff < best_diff) {
          best_diff = diff;
          best_i = i;
          best_j = j;
        }
      }
    }
    actual_used[best_i] = 1;
    pred_used[best_j] = 1;
    std::vector<int> only_actual;
    std::set_difference(actual[best_i].begin(), actual[best_i].end(), pred[best_j].begin(),
                        pred[best_j].end(), std::back_inserter(only_actual));
    misassigned += static_cast<int>(only_actual.size());
  }
  // Actual routes with no partner left contribute all their stops.
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (!actual_used[i]) misassigned += static_cast<int>(actual[i].size());
  }

  Metric m;
  m.abs = misassigned;
  m.pct = n_stops == 0 ? 0.0 : 100.0 * m.abs / static_cast<double>(n_stops);
  return m;
}

std::vector<std::size_t> select_test_indices(const HistoryDataset& history,
                                             int tests_per_weekday) {
  std::array<std::vector<std::size_t>, 7> by_weekday;
  for (std::size_t i = 0; i < history.records.size(); ++i) {
    by_weekday[static_cast<int>(history.records[i].instance.weekday)].push_back(i);
  }
  std::vector<std::size_t> test;
  for (const auto& idxs : by_weekday) {
    if (idxs.size() < 2) continue;  // keep at least one record for estimation
    const std::size_t k =
        std::min<std::size_t>(static_cast<std::size_t>(tests_per_weekday), idxs.size() - 1);
    test.insert(test.end(), idxs.end() - static_cast<std::ptrdiff_t>(k), idxs.end());
  }
  std::sort(test.begin(), test.end());
  return test;
}

namespace {

// Trains per-source models on data strictly before the instance
// (sources that never appeared before stay on the Markov fallback).
ModelMap train_models_for_day(const HistoryDataset& history, MarkovCache& markov,
                              const RoutingInstance& inst, const TrainConfig& cfg,
                              double* mean_final_ce) {
  ModelMap models;
  std::vector<int> sources = inst.active_stops();
  sources.insert(sources.begin(), kDepot);
  double ce_sum = 0.0;
  int ce_count = 0;
  for (int s : sources) {
    try {
      TrainResult r = train_source_model(history, markov, s, cfg, inst.timestamp);
      ce_sum += r.epoch_mean_ce.back();
      ++ce_count;
      models.emplace(s, std::move(r.params));
    } catch (const ValidationError&) {
      // no prior activity for this source
    }
  }
  if (mean_final_ce) *mean_final_ce = ce_count > 0 ? ce_sum / ce_count : 0.0;
  return models;
}

double instance_ce(const TransitionMatrix& p, const HistoryDataset& history,
                   const DayRecord& rec) {
  const std::size_t n = history.universe_size();
  std::vector<int> sources = rec.instance.active_stops();
  sources.insert(sources.begin(), kDepot);
  double total = 0.0;
  for (int s : sources) {
    std::vector<double> row(n);
    for (std::size_t r = 0; r < n; ++r) row[r] = p(static_cast<std::size_t>(s), r);
    total += ce_loss(row, successor_row(rec, s, n));
  }
  return total / static_cast<double>(sources.size());
}

struct RollingContext {
  const HistoryDataset& history;
  const EvalConfig& cfg;
  MarkovCache markov;
  std::optional<ModelMap> dfl_models;
  double training_ce_sum = 0.0;
  int training_ce_count = 0;

  RollingContext(const HistoryDataset& h, const EvalConfig& c) : history(h), cfg(c), markov(h) {}

  TransitionMatrix matrix_for(Estimator est, const RoutingInstance& inst) {
    switch (est) {
      case Estimator::MarkovAllday:
        return markov_probabilities(transition_counts(history, DayFilter::allday(),
                                                       cfg.weighting, inst.timestamp));
      case Estimator::MarkovWeekday:
        return markov_probabilities(transition_counts(history, DayFilter::on(inst.weekday),
                                                       cfg.weighting, inst.timestamp));
      case Estimator::Conventional:
        return distance_probabilities(history.distance);
      case Estimator::Neural: {
        double final_ce = 0.0;
        ModelMap models =
            train_models_for_day(history, markov, inst, cfg.train, &final_ce);
        training_ce_sum += final_ce;
        ++training_ce_count;
        return predict_matrix(models, history, inst, cfg.train, markov);
      }
      case Estimator::Dfl: {
        return predict_matrix(*dfl_models, history, inst, cfg.train, markov);
      }
    }
    throw std::logic_error("unreachable estimator");
  }
};

void accumulate(EvalAggregate& agg, const InstanceEval& row) {
  agg.count += 1;
  agg.ad_abs += row.ad_abs;
  agg.ad_pct += row.ad_pct;
  agg.rd_abs += row.rd_abs;
  agg.rd_pct += row.rd_pct;
  agg.ce += row.ce;
  agg.distance_km += row.distance_km;
}

void finalize(EvalAggregate& agg) {
  if (agg.count == 0) return;
  const double c = agg.count;
  agg.ad_abs /= c;
  agg.ad_pct /= c;
  agg.rd_abs /= c;
  agg.rd_pct /= c;
  agg.ce /= c;
  agg.distance_km /= c;
}

}  // namespace

TransitionMatrix estimator_matrix_for_day(const HistoryDataset& history, Estimator est,
                                          const RoutingInstance& inst, const EvalConfig& cfg) {
  RollingContext ctx(history, cfg);
  if (est == Estimator::Dfl) {
    ctx.dfl_models = dfl_train(history, cfg.dfl, cfg.train, inst.timestamp).models;
  }
  return ctx.matrix_for(est, inst);
}

EvalReport rolling_evaluation(const HistoryDataset& history, Estimator est,
                              const EvalConfig& cfg) {
  const auto test_idx = select_test_indices(history, cfg.tests_per_weekday);
  if (test_idx.empty()) {
    throw ValidationError("insufficient history for a rolling evaluation");
  }

  RollingContext ctx(history, cfg);
  if (est == Estimator::Dfl) {
    // One decision-focused training run on the data before the first
    // test day; features still roll forward per test day.
    const int first_test_t = history.records[test_idx.front()].instance.timestamp;
    ctx.dfl_models = dfl_train(history, cfg.dfl, cfg.train, first_test_t).models;
  }

  EvalReport report;
  report.estimator = est;
  for (std::size_t idx : test_idx) {
    const DayRecord& rec = history.records[idx];
    const TransitionMatrix p = ctx.matrix_for(est, rec.instance);

    SolveReport solved;
    if (est == Estimator::Conventional) {
      solved = conventional_vrp(history.distance, rec.instance, cfg.solve);
    } else {
      solved = mle_routing(p, rec.instance, cfg.solve);
    }

    InstanceEval row;
    row.timestamp = rec.instance.timestamp;
    row.weekday = rec.instance.weekday;
    const Metric ad = arc_difference(rec.routing, solved.routing);
    const Metric rd = route_difference(rec.routing, solved.routing);
    row.ad_abs = ad.abs;
    row.ad_pct = ad.pct;
    row.rd_abs = rd.abs;
    row.rd_pct = rd.pct;
    row.ce = instance_ce(p, history, rec);
    row.distance_km = routing_distance_km(history.distance, solved.routing);
    accumulate(report.overall, row);
    accumulate(report.per_weekday[static_cast<int>(rec.instance.weekday)], row);
    report.per_instance.push_back(row);
  }
  finalize(report.overall);
  for (auto& agg : report.per_weekday) finalize(agg);
  if (est == Estimator::Neural && ctx.training_ce_count > 0) {
    report.mean_training_ce = ctx.training_ce_sum / ctx.training_ce_count;
  }
  return report;
}

std::string eval_report_to_json(const EvalReport& report) {
  nlohmann::json doc;
  doc["estimator"] = estimator_name(report.estimator);
  doc["instances"] = nlohmann::json::array();
  for (const auto& row : report.per_instance) {
    doc["instances"].push_back({{"t", row.timestamp},
                                {"weekday", weekday_name(row.weekday)},
                                {"ad", row.ad_abs},
                                {"ad_pct", row.ad_pct},
                                {"rd", row.rd_abs},
                                {"rd_pct", row.rd_pct},
                                {"ce", row.ce},
                                {"distance_km", row.distance_km}});
  }
  auto agg_json = [](const EvalAggregate& a) {
    return nlohmann::json{{"count", a.count},   {"ad", a.ad_abs},
                          {"ad_pct", a.ad_pct}, {"rd", a.rd_abs},
                          {"rd_pct", a.rd_pct}, {"ce", a.ce},
                          {"distance_km", a.distance_km}};
  };
  doc["overall"] = agg_json(report.overall);
  doc["per_weekday"] = nlohmann::json::object();
  for (int d = 0; d < 7; ++d) {
    if (report.per_weekday[d].count > 0) {
      doc["per_weekday"][weekday_name(static_cast<Weekday>(d))] = agg_json(report.per_weekday[d]);
    }
  }
  if (report.mean_training_ce) doc["mean_training_ce"] = *report.mean_training_ce;
  return doc.dump(2);
}

std::string eval_report_to_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "t,weekday,ad,ad_pct,rd,rd_pct,ce,distance_km\n";
  for (const auto& row : report.per_instance) {
    out << row.timestamp << ',' << weekday_name(row.weekday) << ',' << row.ad_abs << ','
        << row.ad_pct << ',' << row.rd_abs << ',' << row.rd_pct << ',' << row.ce << ','
        << row.distance_km << '\n';
  }
  return out.str();
}

}  // namespace prefroute
