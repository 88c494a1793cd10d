#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "prefroute/core.hpp"
#include "prefroute/markov.hpp"

namespace prefroute {

// Embedding widths of the weekday and stop features.
constexpr int kWeekdayDim = 6;
constexpr int kStopDim = 40;
// Context input: weekday embedding + vehicle count + stop-set scalar.
constexpr int kContextDim = kWeekdayDim + 1 + 1;

struct FeatureMask {
  bool lagged = false;  // the selected model runs without past data
  bool weekday = true;
  bool stops = true;
  bool distance = true;
  bool markov = true;
};

struct TrainConfig {
  double learning_rate = 0.1;
  int epochs = 100;
  int lookback = 5;  // L, number of lagged solution rows
  double epsilon = 1e-6;
  FeatureMask features;
  std::uint64_t seed = 1;
};

// Inputs of one source stop on one day. Disabled feature groups are
// zeroed here so their gradient paths vanish.
struct FeatureBundle {
  int source = 0;
  std::vector<std::vector<double>> lagged;  // L rows over the universe
  std::vector<double> markov_logp;
  std::vector<double> dist_logit;
  int weekday = -1;  // -1 when the weekday feature is disabled
  double vehicle_count = 0.0;
  std::vector<double> active_mask;  // S^t membership (customers only)
};

// Parameter tensors of one source-stop model; also used as the gradient
// and optimizer-moment container.
struct ModelTensors {
  std::vector<double> lag_weights;  // shared across destinations
  double w_markov = 0.0;
  double w_dist = 0.0;
  Mat weekday_embedding;  // 7 x kWeekdayDim
  Mat stop_embedding;     // universe x kStopDim
  Mat context_map;        // kStopDim x kContextDim
  double bias = 0.0;

  static ModelTensors shaped(std::size_t universe, int lookback);
  void zero();
  // Flat views over every tensor, fixed order (for Adam and tests).
  std::vector<std::pair<double*, std::size_t>> tensors();
  std::vector<std::pair<const double*, std::size_t>> tensors() const;
};

struct ArcModelParams : ModelTensors {
  int source = 0;

  static ArcModelParams zeros(int source, std::size_t universe, int lookback);
  // Embedding-style tensors start at small random values (an all-zero
  // bilinear term would stay stuck at zero), scalar weights at zero.
  static ArcModelParams initialized(int source, std::size_t universe, int lookback,
                                    std::uint64_t seed);
};

struct ForwardTrace {
  std::vector<double> scores;
  std::vector<double> probs;
  std::vector<double> ctx;       // kContextDim
  std::vector<double> ctx_proj;  // context_map * ctx
  double active_count = 0.0;
};

// Softmax of the linear arc scores over r != source; self entry is 0.
std::vector<double> forward(const ArcModelParams& params, const FeatureBundle& fb);
ForwardTrace forward_trace(const ArcModelParams& params, const FeatureBundle& fb);

// Cross entropy against the realized successor row (the depot row may
// carry several ones, one per tour).
double ce_loss(const std::vector<double>& probs, const std::vector<double>& target);

// d(ce_loss)/d(scores) = (sum target) * p - target.
std::vector<double> ce_dscore(const std::vector<double>& probs, const std::vector<double>& target);

// Chain rule from a gradient w.r.t. the cost row pi = -log(p + eps)
// back to the pre-softmax scores.
std::vector<double> dscore_from_cost_grad(const std::vector<double>& probs,
                                          const std::vector<double>& cost_grad_row, double eps);

// Accumulates parameter gradients given d(loss)/d(scores).
void backward_from_dscore(const ArcModelParams& params, const FeatureBundle& fb,
                          const ForwardTrace& trace, const std::vector<double>& dscore,
                          ModelTensors& grads);

struct AdamState {
  ModelTensors m;
  ModelTensors v;
  std::int64_t step = 0;

  static AdamState shaped(std::size_t universe, int lookback);
};

void adam_update(ArcModelParams& params, const ModelTensors& grads, AdamState& state,
                 double learning_rate);

// Realized successor row X^t[s,:] over the universe.
std::vector<double> successor_row(const DayRecord& rec, int s, std::size_t universe);

// Lagged rows, log Markov probabilities, distance logits and context
// inputs for (s, day); markov is the weekday-filtered matrix computed
// from data strictly before the day.
FeatureBundle build_features(const HistoryDataset& history, const TransitionMatrix& p_markov,
                             const RoutingInstance& inst, int s, const TrainConfig& cfg);

struct TrainResult {
  ArcModelParams params;
  std::vector<double> epoch_mean_ce;
};

// Online training over the source's active days (chronological order,
// repeated for cfg.epochs) with the Adam optimizer. Only records with
// timestamp < upto participate.
TrainResult train_source_model(const HistoryDataset& history, MarkovCache& markov, int s,
                               const TrainConfig& cfg,
                               int upto = std::numeric_limits<int>::max());

using ModelMap = std::map<int, ArcModelParams>;

// Full transition matrix for the instance: model rows for the depot and
// active stops, Markov rows as fallback everywhere else.
TransitionMatrix predict_matrix(const ModelMap& models, const HistoryDataset& history,
                                const RoutingInstance& inst, const TrainConfig& cfg,
                                MarkovCache& markov);

// Model store: one JSON document per source stop plus a manifest.
void save_models(const std::string& dir, const ModelMap& models, const TrainConfig& cfg);
std::pair<ModelMap, TrainConfig> load_models(const std::string& dir);

}  // namespace prefroute
