#include "prefroute/neural.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "json_io.hpp"

namespace prefroute {

namespace fs = std::filesystem;

ModelTensors ModelTensors::shaped(std::size_t universe, int lookback) {
  ModelTensors t;
  t.lag_weights.assign(static_cast<std::size_t>(lookback), 0.0);
  t.weekday_embedding = Mat(7, kWeekdayDim);
  t.stop_embedding = Mat(universe, kStopDim);
  t.context_map = Mat(kStopDim, kContextDim);
  return t;
}

void ModelTensors::zero() {
  std::fill(lag_weights.begin(), lag_weights.end(), 0.0);
  w_markov = w_dist = bias = 0.0;
  weekday_embedding.fill(0.0);
  stop_embedding.fill(0.0);
  context_map.fill(0.0);
}

std::vector<std::pair<double*, std::size_t>> ModelTensors::tensors() {
  return {{lag_weights.data(), lag_weights.size()},
          {&w_markov, 1},
          {&w_dist, 1},
          {weekday_embedding.data().data(), weekday_embedding.data().size()},
          {stop_embedding.data().data(), stop_embedding.data().size()},
          {context_map.data().data(), context_map.data().size()},
          {&bias, 1}};
}

std::vector<std::pair<const double*, std::size_t>> ModelTensors::tensors() const {
  auto mut = const_cast<ModelTensors*>(this)->tensors();
  std::vector<std::pair<const double*, std::size_t>> out;
  out.reserve(mut.size());
  for (auto [p, n] : mut) out.emplace_back(p, n);
  return out;
}

ArcModelParams ArcModelParams::zeros(int source, std::size_t universe, int lookback) {
  ArcModelParams p;
  static_cast<ModelTensors&>(p) = ModelTensors::shaped(universe, lookback);
  p.source = source;
  return p;
}

ArcModelParams ArcModelParams::initialized(int source, std::size_t universe, int lookback,
                                           std::uint64_t seed) {
  ArcModelParams p = zeros(source, universe, lookback);
  std::mt19937_64 rng(seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(source + 1)));
  // Small but nonzero: the context term is bilinear and an all-zero
  // start would never move.
  std::uniform_real_distribution<double> dist(-0.01, 0.01);
  for (auto& v : p.weekday_embedding.data()) v = dist(rng);
  for (auto& v : p.stop_embedding.data()) v = dist(rng);
  for (auto& v : p.context_map.data()) v = dist(rng);
  // Start the linear combination at the Markov solution; training then
  // refines it with the other inputs.
  p.w_markov = 1.0;
  return p;
}

namespace {

// Fleet sizes are order ten; scale the slot so it matches the embedding
// magnitudes.
constexpr double kVehicleScale = 0.1;
// The destination/context term averages over the embedding width, which
// keeps per-coordinate optimizer noise out of the scores.
constexpr double kContextGain = 1.0 / (100.0 * kStopDim);

std::vector<double> build_context(const ArcModelParams& params, const FeatureBundle& fb) {
  std::vector<double> ctx(kContextDim, 0.0);
  if (fb.weekday >= 0) {
    for (int k = 0; k < kWeekdayDim; ++k) ctx[k] = params.weekday_embedding(fb.weekday, k);
  }
  ctx[kWeekdayDim] = kVehicleScale * fb.vehicle_count;
  double count = 0.0, sum = 0.0;
  for (std::size_t u = 0; u < fb.active_mask.size(); ++u) {
    if (fb.active_mask[u] != 0.0) {
      count += 1.0;
      sum += params.stop_embedding(u, 0);
    }
  }
  ctx[kWeekdayDim + 1] = count > 0.0 ? sum / count : 0.0;
  return ctx;
}

}  // namespace

ForwardTrace forward_trace(const ArcModelParams& params, const FeatureBundle& fb) {
  const std::size_t n = fb.markov_logp.size();
  ForwardTrace tr;
  tr.ctx = build_context(params, fb);
  for (std::size_t u = 0; u < fb.active_mask.size(); ++u) {
    tr.active_count += fb.active_mask[u] != 0.0 ? 1.0 : 0.0;
  }

  tr.ctx_proj.assign(kStopDim, 0.0);
  for (int i = 0; i < kStopDim; ++i) {
    double acc = 0.0;
    for (int j = 0; j < kContextDim; ++j) acc += params.context_map(i, j) * tr.ctx[j];
    tr.ctx_proj[i] = acc;
  }

  tr.scores.assign(n, -std::numeric_limits<double>::infinity());
  for (std::size_t r = 0; r < n; ++r) {
    if (static_cast<int>(r) == fb.source) continue;
    double s = params.w_markov * fb.markov_logp[r] + params.w_dist * fb.dist_logit[r] +
               params.bias;
    for (std::size_t l = 0; l < params.lag_weights.size(); ++l) {
      s += params.lag_weights[l] * fb.lagged[l][r];
    }
    const double* emb = params.stop_embedding.row(r);
    double ctx_term = 0.0;
    for (int i = 0; i < kStopDim; ++i) ctx_term += emb[i] * tr.ctx_proj[i];
    s += kContextGain * ctx_term;
    if (!std::isfinite(s)) {
      throw std::runtime_error("non-finite arc score for source " + std::to_string(fb.source) +
                               " (exploding parameters?)");
    }
    tr.scores[r] = s;
  }

  double max_score = -std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < n; ++r) max_score = std::max(max_score, tr.scores[r]);
  tr.probs.assign(n, 0.0);
  double z = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    if (static_cast<int>(r) == fb.source) continue;
    tr.probs[r] = std::exp(tr.scores[r] - max_score);
    z += tr.probs[r];
  }
  for (std::size_t r = 0; r < n; ++r) tr.probs[r] /= z;
  return tr;
}

std::vector<double> forward(const ArcModelParams& params, const FeatureBundle& fb) {
  return forward_trace(params, fb).probs;
}

double ce_loss(const std::vector<double>& probs, const std::vector<double>& target) {
  static bool warned = false;
  double loss = 0.0;
  for (std::size_t r = 0; r < probs.size(); ++r) {
    if (target[r] == 0.0) continue;
    double p = probs[r];
    if (p <= 0.0) {
      if (!warned) {
        std::cerr << "warning: zero probability at a target stop, clamping\n";
        warned = true;
      }
      p = 1e-6;
    }
    loss -= target[r] * std::log(p);
  }
  return loss;
}

std::vector<double> ce_dscore(const std::vector<double>& probs,
                              const std::vector<double>& target) {
  double target_mass = 0.0;
  for (double x : target) target_mass += x;
  std::vector<double> d(probs.size());
  for (std::size_t r = 0; r < probs.size(); ++r) d[r] = target_mass * probs[r] - target[r];
  return d;
}

std::vector<double> dscore_from_cost_grad(const std::vector<double>& probs,
                                          const std::vector<double>& cost_grad_row, double eps) {
  const std::size_t n = probs.size();
  // dL/dp through pi = -log(p + eps), then the softmax Jacobian.
  std::vector<double> dlp(n, 0.0);
  double inner = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    dlp[r] = -cost_grad_row[r] / (probs[r] + eps);
    inner += probs[r] * dlp[r];
  }
  std::vector<double> d(n);
  for (std::size_t r = 0; r < n; ++r) d[r] = probs[r] * (dlp[r] - inner);
  return d;
}

void backward_from_dscore(const ArcModelParams& params, const FeatureBundle& fb,
                          const ForwardTrace& trace, const std::vector<double>& dscore,
                          ModelTensors& grads) {
  const std::size_t n = dscore.size();
  std::vector<double> dproj(kStopDim, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    if (static_cast<int>(r) == fb.source) continue;
    const double ds = dscore[r];
    if (ds == 0.0) continue;
    grads.w_markov += ds * fb.markov_logp[r];
    grads.w_dist += ds * fb.dist_logit[r];
    grads.bias += ds;
    for (std::size_t l = 0; l < params.lag_weights.size(); ++l) {
      grads.lag_weights[l] += ds * fb.lagged[l][r];
    }
    const double* emb = params.stop_embedding.row(r);
    double* demb = grads.stop_embedding.row(r);
    for (int i = 0; i < kStopDim; ++i) {
      demb[i] += kContextGain * ds * trace.ctx_proj[i];
      dproj[i] += kContextGain * ds * emb[i];
    }
  }

  std::vector<double> dctx(kContextDim, 0.0);
  for (int i = 0; i < kStopDim; ++i) {
    for (int j = 0; j < kContextDim; ++j) {
      grads.context_map(i, j) += dproj[i] * trace.ctx[j];
      dctx[j] += params.context_map(i, j) * dproj[i];
    }
  }

  if (fb.weekday >= 0) {
    for (int k = 0; k < kWeekdayDim; ++k) grads.weekday_embedding(fb.weekday, k) += dctx[k];
  }
  if (trace.active_count > 0.0) {
    const double scale = dctx[kWeekdayDim + 1] / trace.active_count;
    for (std::size_t u = 0; u < fb.active_mask.size(); ++u) {
      if (fb.active_mask[u] != 0.0) grads.stop_embedding(u, 0) += scale;
    }
  }
}

AdamState AdamState::shaped(std::size_t universe, int lookback) {
  AdamState s;
  s.m = ModelTensors::shaped(universe, lookback);
  s.v = ModelTensors::shaped(universe, lookback);
  return s;
}

void adam_update(ArcModelParams& params, const ModelTensors& grads, AdamState& state,
                 double learning_rate) {
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  state.step += 1;
  const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.step));

  auto p = params.tensors();
  auto g = grads.tensors();
  auto m = state.m.tensors();
  auto v = state.v.tensors();
  for (std::size_t t = 0; t < p.size(); ++t) {
    double* pp = p[t].first;
    const double* gg = g[t].first;
    double* mm = m[t].first;
    double* vv = v[t].first;
    for (std::size_t i = 0; i < p[t].second; ++i) {
      mm[i] = kBeta1 * mm[i] + (1.0 - kBeta1) * gg[i];
      vv[i] = kBeta2 * vv[i] + (1.0 - kBeta2) * gg[i] * gg[i];
      const double mhat = mm[i] / bc1;
      const double vhat = vv[i] / bc2;
      pp[i] -= learning_rate * mhat / (std::sqrt(vhat) + kEps);
    }
  }
}

std::vector<double> successor_row(const DayRecord& rec, int s, std::size_t universe) {
  std::vector<double> row(universe, 0.0);
  for (const auto& [from, to] : arcs_of(rec.routing)) {
    if (from == s) row[static_cast<std::size_t>(to)] = 1.0;
  }
  return row;
}

namespace {

bool source_active_on(const DayRecord& rec, int s) {
  return s == kDepot || rec.instance.is_active(s);
}

std::vector<double> uniform_row(std::size_t n, int self) {
  std::vector<double> row(n, n > 1 ? 1.0 / static_cast<double>(n - 1) : 0.0);
  if (self >= 0 && static_cast<std::size_t>(self) < n) row[static_cast<std::size_t>(self)] = 0.0;
  return row;
}

}  // namespace

FeatureBundle build_features(const HistoryDataset& history, const TransitionMatrix& p_markov,
                             const RoutingInstance& inst, int s, const TrainConfig& cfg) {
  const std::size_t n = history.universe_size();
  FeatureBundle fb;
  fb.source = s;
  // Fleet size travels with the stop-set context group.
  fb.vehicle_count = cfg.features.stops ? static_cast<double>(inst.vehicle_count) : 0.0;
  fb.weekday = cfg.features.weekday ? static_cast<int>(inst.weekday) : -1;

  fb.lagged.assign(static_cast<std::size_t>(cfg.lookback), std::vector<double>(n, 0.0));
  if (cfg.features.lagged) {
    std::vector<const DayRecord*> past;
    for (const auto& rec : history.records) {
      if (rec.instance.timestamp >= inst.timestamp) break;
      if (source_active_on(rec, s)) past.push_back(&rec);
    }
    for (int l = 0; l < cfg.lookback; ++l) {
      // Slot 0 is the most recent active day; missing history falls back
      // to the equiprobable vector.
      if (l < static_cast<int>(past.size())) {
        fb.lagged[l] = successor_row(*past[past.size() - 1 - l], s, n);
      } else {
        fb.lagged[l] = uniform_row(n, s);
      }
    }
  }

  fb.markov_logp.assign(n, 0.0);
  if (cfg.features.markov) {
    for (std::size_t r = 0; r < n; ++r) {
      fb.markov_logp[r] = std::log(p_markov(static_cast<std::size_t>(s), r) + cfg.epsilon);
    }
  }

  fb.dist_logit.assign(n, 0.0);
  if (cfg.features.distance) {
    for (std::size_t r = 0; r < n; ++r) {
      fb.dist_logit[r] = -history.distance(static_cast<std::size_t>(s), r);
    }
  }

  fb.active_mask.assign(n, 0.0);
  if (cfg.features.stops) {
    for (int a : inst.active_stops()) fb.active_mask[static_cast<std::size_t>(a)] = 1.0;
  }
  return fb;
}

TrainResult train_source_model(const HistoryDataset& history, MarkovCache& markov, int s,
                               const TrainConfig& cfg, int upto) {
  if (cfg.epochs < 1) throw ValidationError("epochs must be >= 1");
  if (cfg.lookback < 1) throw ValidationError("lookback must be >= 1");
  if (cfg.learning_rate <= 0.0) throw ValidationError("learning_rate must be positive");
  const std::size_t n = history.universe_size();

  struct Sample {
    FeatureBundle features;
    std::vector<double> target;
  };
  std::vector<Sample> samples;
  for (const auto& rec : history.records) {
    if (rec.instance.timestamp >= upto) break;
    if (!source_active_on(rec, s)) continue;
    const auto& pm = markov.weekday_matrix_before(rec.instance.timestamp, rec.instance.weekday);
    samples.push_back(
        {build_features(history, pm, rec.instance, s, cfg), successor_row(rec, s, n)});
  }
  if (samples.empty()) {
    throw ValidationError("no training data for source " + std::to_string(s));
  }

  TrainResult result;
  result.params = ArcModelParams::initialized(s, n, cfg.lookback, cfg.seed);
  AdamState adam = AdamState::shaped(n, cfg.lookback);
  ModelTensors grads = ModelTensors::shaped(n, cfg.lookback);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double total_ce = 0.0;
    for (const Sample& sample : samples) {
      ForwardTrace tr = forward_trace(result.params, sample.features);
      total_ce += ce_loss(tr.probs, sample.target);
      grads.zero();
      backward_from_dscore(result.params, sample.features, tr,
                           ce_dscore(tr.probs, sample.target), grads);
      adam_update(result.params, grads, adam, cfg.learning_rate);
    }
    result.epoch_mean_ce.push_back(total_ce / static_cast<double>(samples.size()));
  }
  return result;
}

TransitionMatrix predict_matrix(const ModelMap& models, const HistoryDataset& history,
                                const RoutingInstance& inst, const TrainConfig& cfg,
                                MarkovCache& markov) {
  const std::size_t n = history.universe_size();
  const TransitionMatrix& fallback =
      markov.weekday_matrix_before(inst.timestamp, inst.weekday);

  TransitionMatrix p = fallback;
  std::vector<int> sources = inst.active_stops();
  sources.insert(sources.begin(), kDepot);
  for (int s : sources) {
    auto it = models.find(s);
    if (it == models.end()) continue;  // Markov fallback row stays
    FeatureBundle fb = build_features(history, fallback, inst, s, cfg);
    std::vector<double> row = forward(it->second, fb);
    for (std::size_t r = 0; r < n; ++r) p(static_cast<std::size_t>(s), r) = row[r];
  }
  return p;
}

namespace {

nlohmann::json params_to_json(const ArcModelParams& p) {
  return {{"stop", p.source},
          {"lag_weights", p.lag_weights},
          {"w_markov", p.w_markov},
          {"w_dist", p.w_dist},
          {"weekday_embedding", mat_to_json(p.weekday_embedding)},
          {"stop_embedding", mat_to_json(p.stop_embedding)},
          {"context_map", mat_to_json(p.context_map)},
          {"bias", p.bias}};
}

ArcModelParams params_from_json(const nlohmann::json& j) {
  ArcModelParams p;
  p.source = j.at("stop").get<int>();
  p.lag_weights = j.at("lag_weights").get<std::vector<double>>();
  p.w_markov = j.at("w_markov").get<double>();
  p.w_dist = j.at("w_dist").get<double>();
  p.weekday_embedding = mat_from_json(j.at("weekday_embedding"));
  p.stop_embedding = mat_from_json(j.at("stop_embedding"));
  p.context_map = mat_from_json(j.at("context_map"));
  p.bias = j.at("bias").get<double>();
  return p;
}

}  // namespace

void save_models(const std::string& dir, const ModelMap& models, const TrainConfig& cfg) {
  fs::create_directories(dir);
  nlohmann::json manifest;
  manifest["config"] = train_config_to_json(cfg);
  manifest["stops"] = nlohmann::json::array();
  for (const auto& [s, params] : models) {
    manifest["stops"].push_back(s);
    nlohmann::json doc = params_to_json(params);
    doc["config"] = train_config_to_json(cfg);
    char name[32];
    std::snprintf(name, sizeof(name), "stop_%03d.json", s);
    std::ofstream out(fs::path(dir) / name);
    if (!out) throw ValidationError("cannot write model file in '" + dir + "'");
    out << doc.dump(2) << "\n";
  }
  std::ofstream out(fs::path(dir) / "manifest.json");
  out << manifest.dump(2) << "\n";
}

std::pair<ModelMap, TrainConfig> load_models(const std::string& dir) {
  std::ifstream min(fs::path(dir) / "manifest.json");
  if (!min) throw ParseError("cannot open model manifest in '" + dir + "'");
  nlohmann::json manifest;
  try {
    min >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model manifest is not valid JSON: ") + e.what());
  }
  TrainConfig cfg = train_config_from_json(manifest.at("config"));
  ModelMap models;
  for (const auto& stop : manifest.at("stops")) {
    const int s = stop.get<int>();
    char name[32];
    std::snprintf(name, sizeof(name), "stop_%03d.json", s);
    std::ifstream in(fs::path(dir) / name);
    if (!in) throw ParseError("missing model file for stop " + std::to_string(s));
    nlohmann::json doc;
    try {
      in >> doc;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("model file is not valid JSON: ") + e.what());
    }
    models.emplace(s, params_from_json(doc));
  }
  return {std::move(models), cfg};
}

}  // namespace prefroute
