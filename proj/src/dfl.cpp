#include "prefroute/dfl.hpp"

#include <cmath>

namespace prefroute {

double task_loss(const Mat& x_actual, const Mat& x_pred, TaskLoss kind) {
  if (!x_actual.same_shape(x_pred)) {
    throw ValidationError("task loss needs equally shaped incidence matrices");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < x_actual.data().size(); ++i) {
    const double diff = x_actual.data()[i] - x_pred.data()[i];
    total += kind == TaskLoss::Relu ? std::max(diff, 0.0) : diff * diff;
  }
  return total;
}

Mat task_loss_grad(const Mat& x_actual, const Mat& x_pred, TaskLoss kind) {
  if (!x_actual.same_shape(x_pred)) {
    throw ValidationError("task loss needs equally shaped incidence matrices");
  }
  Mat g(x_actual.rows(), x_actual.cols());
  for (std::size_t i = 0; i < g.data().size(); ++i) {
    const double a = x_actual.data()[i];
    const double p = x_pred.data()[i];
    if (kind == TaskLoss::Relu) {
      g.data()[i] = p < a ? -1.0 : 0.0;
    } else {
      g.data()[i] = p < a ? -2.0 : (p > a ? 2.0 : 0.0);
    }
  }
  return g;
}

Mat dfl_gradient(const CostMatrix& pi_hat, const Routing& x_hat, const Routing& x_actual,
                 const RoutingInstance& inst, const DflConfig& cfg) {
  const std::size_t n = pi_hat.rows();
  const Mat inc_hat = incidence_of(x_hat, n);
  const Mat inc_actual = incidence_of(x_actual, n);
  const Mat dldx = task_loss_grad(inc_actual, inc_hat, cfg.loss);

  CostMatrix perturbed = pi_hat;
  for (std::size_t i = 0; i < perturbed.data().size(); ++i) {
    perturbed.data()[i] += cfg.lambda * dldx.data()[i];
  }
  const SolveReport resolved = solve_cost(perturbed, inst, cfg.solve);
  const Mat inc_tilde = incidence_of(resolved.routing, n);

  Mat grad(n, n);
  for (std::size_t i = 0; i < grad.data().size(); ++i) {
    grad.data()[i] = -(inc_hat.data()[i] - inc_tilde.data()[i]) / cfg.lambda;
  }
  return grad;
}

DflTrainResult dfl_train(const HistoryDataset& history, const DflConfig& cfg,
                         const TrainConfig& train_cfg, int upto) {
  if (cfg.epochs < 1) throw ValidationError("epochs must be >= 1");
  if (cfg.lambda <= 0.0) throw ValidationError("lambda must be positive");
  const std::size_t n = history.universe_size();

  std::vector<const DayRecord*> days;
  for (const auto& rec : history.records) {
    if (rec.instance.timestamp >= upto) break;
    days.push_back(&rec);
  }
  if (days.empty()) throw ValidationError("no training days for decision-focused training");

  MarkovCache markov(history);

  // Per-day feature bundles for every source, built once.
  struct DaySamples {
    const DayRecord* rec;
    std::vector<int> sources;
    std::vector<FeatureBundle> features;
    Mat inc_actual;
  };
  std::vector<DaySamples> prepared;
  for (const DayRecord* rec : days) {
    DaySamples d;
    d.rec = rec;
    d.sources = rec->instance.active_stops();
    d.sources.insert(d.sources.begin(), kDepot);
    const auto& pm =
        markov.weekday_matrix_before(rec->instance.timestamp, rec->instance.weekday);
    for (int s : d.sources) {
      d.features.push_back(build_features(history, pm, rec->instance, s, train_cfg));
    }
    d.inc_actual = incidence_of(rec->routing, n);
    prepared.push_back(std::move(d));
  }

  DflTrainResult result;
  std::map<int, AdamState> adam;
  for (std::size_t s = 0; s < n; ++s) {
    const int stop = static_cast<int>(s);
    result.models.emplace(
        stop, ArcModelParams::initialized(stop, n, train_cfg.lookback, train_cfg.seed));
    adam.emplace(stop, AdamState::shaped(n, train_cfg.lookback));
  }

  ModelTensors grads = ModelTensors::shaped(n, train_cfg.lookback);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double total_ad = 0.0;
    for (const DaySamples& day : prepared) {
      // Predict the full matrix from the current models.
      TransitionMatrix p(n, n);
      std::vector<ForwardTrace> traces;
      traces.reserve(day.sources.size());
      for (std::size_t k = 0; k < day.sources.size(); ++k) {
        ForwardTrace tr = forward_trace(result.models.at(day.sources[k]), day.features[k]);
        for (std::size_t r = 0; r < n; ++r) {
          p(static_cast<std::size_t>(day.sources[k]), r) = tr.probs[r];
        }
        traces.push_back(std::move(tr));
      }

      const CostMatrix pi_hat = cost_from_probabilities(p, train_cfg.epsilon);
      const SolveReport solved = solve_cost(pi_hat, day.rec->instance, cfg.solve);
      ++result.solver_calls;
      const Mat inc_hat = incidence_of(solved.routing, n);
      total_ad += task_loss(day.inc_actual, inc_hat, TaskLoss::Relu);

      const Mat dldx = task_loss_grad(day.inc_actual, inc_hat, cfg.loss);
      CostMatrix perturbed = pi_hat;
      for (std::size_t i = 0; i < perturbed.data().size(); ++i) {
        perturbed.data()[i] += cfg.lambda * dldx.data()[i];
      }
      const SolveReport resolved = solve_cost(perturbed, day.rec->instance, cfg.solve);
      ++result.solver_calls;
      const Mat inc_tilde = incidence_of(resolved.routing, n);

      for (std::size_t k = 0; k < day.sources.size(); ++k) {
        const int s = day.sources[k];
        std::vector<double> grad_row(n);
        for (std::size_t r = 0; r < n; ++r) {
          grad_row[r] = -(inc_hat(static_cast<std::size_t>(s), r) -
                          inc_tilde(static_cast<std::size_t>(s), r)) /
                        cfg.lambda;
        }
        std::vector<double> dscore =
            dscore_from_cost_grad(traces[k].probs, grad_row, train_cfg.epsilon);
        grads.zero();
        backward_from_dscore(result.models.at(s), day.features[k], traces[k], dscore, grads);
        adam_update(result.models.at(s), grads, adam.at(s), cfg.learning_rate);
      }
    }
    result.epoch_mean_ad.push_back(total_ad / static_cast<double>(prepared.size()));
  }
  return result;
}

}  // namespace prefroute
