#pragma once

#include <optional>
#include <string>
#include <vector>

#include "prefroute/eval.hpp"
#include "prefroute/synth.hpp"

namespace prefroute {

struct ExperimentConfig {
  std::string out_dir = "experiment_out";
  std::uint64_t seed = 1;
  std::optional<SynthConfig> synth;     // either generated ...
  std::optional<std::string> data_file; // ... or loaded from disk
  std::vector<Estimator> estimators = {Estimator::MarkovAllday, Estimator::MarkovWeekday,
                                       Estimator::Neural, Estimator::Conventional};
  EvalConfig eval;
  bool ablation = true;
  std::vector<TaskLoss> dfl_losses = {TaskLoss::Relu, TaskLoss::Squared};
  std::vector<double> dfl_lambdas = {20.0};
};

ExperimentConfig experiment_config_from_file(const std::string& path);
ExperimentConfig experiment_config_from_json_text(const std::string& text);

struct ExperimentResult {
  std::vector<EvalReport> comparison;           // one per estimator
  std::vector<std::pair<std::string, EvalReport>> ablation;  // feature sweep
  std::vector<std::pair<std::string, EvalReport>> dfl;       // per task loss
};

// Full protocol: per-estimator rolling evaluations, the feature-mask
// sweep, decision-focused runs, and sample routings as DOT files, all
// written under cfg.out_dir. A stage failure aborts with its name.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

}  // namespace prefroute
