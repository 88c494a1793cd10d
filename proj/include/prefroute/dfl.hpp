#pragma once

#include "prefroute/neural.hpp"
#include "prefroute/solver.hpp"

namespace prefroute {

enum class TaskLoss { Relu, Squared };

struct DflConfig {
  double lambda = 20.0;  // perturbation scale
  TaskLoss loss = TaskLoss::Relu;
  int epochs = 30;
  double learning_rate = 0.1;
  SolveOptions solve;  // backend for the inner solves
};

// Relu: arcs of the actual solution missing from the predicted one.
// Squared: elementwise squared difference.
double task_loss(const Mat& x_actual, const Mat& x_pred, TaskLoss kind);

// dL/dX_pred, the case tables of the two losses.
Mat task_loss_grad(const Mat& x_actual, const Mat& x_pred, TaskLoss kind);

// Perturb-and-resolve gradient w.r.t. the cost matrix:
// pi~ = pi + lambda * dL/dX_pred, X~ = argmin(pi~), grad = -(X_hat - X~)/lambda.
Mat dfl_gradient(const CostMatrix& pi_hat, const Routing& x_hat, const Routing& x_actual,
                 const RoutingInstance& inst, const DflConfig& cfg);

struct DflTrainResult {
  ModelMap models;
  std::vector<double> epoch_mean_ad;
  std::int64_t solver_calls = 0;
};

// Trains every source model through the solver on the task loss;
// exactly two solver calls per day per epoch. Only records with
// timestamp < upto participate.
DflTrainResult dfl_train(const HistoryDataset& history, const DflConfig& cfg,
                         const TrainConfig& train_cfg,
                         int upto = std::numeric_limits<int>::max());

}  // namespace prefroute
