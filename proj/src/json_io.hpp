#pragma once

// JSON (de)serialization shared by the model store, the CLI and the
// experiment runner. Internal header.

#include <string>
#include <vector>

#include "json.hpp"
#include "prefroute/core.hpp"
#include "prefroute/neural.hpp"

namespace prefroute {

inline nlohmann::json mat_to_json(const Mat& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Mat mat_from_json(const nlohmann::json& j) {
  const std::size_t rows = j.size();
  const std::size_t cols = rows == 0 ? 0 : j.at(0).size();
  Mat m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (j.at(i).size() != cols) throw ParseError("ragged matrix in JSON input");
    for (std::size_t c = 0; c < cols; ++c) m(i, c) = j.at(i).at(c).get<double>();
  }
  return m;
}

inline nlohmann::json feature_mask_to_json(const FeatureMask& f) {
  nlohmann::json out = nlohmann::json::array();
  if (f.lagged) out.push_back("lagged");
  if (f.weekday) out.push_back("weekday");
  if (f.stops) out.push_back("stops");
  if (f.distance) out.push_back("distance");
  if (f.markov) out.push_back("markov");
  return out;
}

inline FeatureMask feature_mask_from_json(const nlohmann::json& j) {
  FeatureMask f{false, false, false, false, false};
  for (const auto& name : j) {
    const std::string s = name.get<std::string>();
    if (s == "lagged") {
      f.lagged = true;
    } else if (s == "weekday") {
      f.weekday = true;
    } else if (s == "stops") {
      f.stops = true;
    } else if (s == "distance") {
      f.distance = true;
    } else if (s == "markov") {
      f.markov = true;
    } else {
      throw ParseError("unknown feature group '" + s + "'");
    }
  }
  return f;
}

inline nlohmann::json train_config_to_json(const TrainConfig& cfg) {
  return {{"learning_rate", cfg.learning_rate}, {"epochs", cfg.epochs},
          {"lookback", cfg.lookback},           {"epsilon", cfg.epsilon},
          {"features", feature_mask_to_json(cfg.features)},
          {"seed", cfg.seed}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.lookback = j.value("lookback", cfg.lookback);
  cfg.epsilon = j.value("epsilon", cfg.epsilon);
  if (j.contains("features")) cfg.features = feature_mask_from_json(j.at("features"));
  cfg.seed = j.value("seed", cfg.seed);
  return cfg;
}

// A standalone instance document: capacity plus the usual day fields.
inline RoutingInstance instance_from_json_doc(const nlohmann::json& j) {
  RoutingInstance inst;
  inst.timestamp = j.at("t").get<int>();
  inst.weekday = weekday_from_name(j.at("weekday").get<std::string>());
  inst.vehicle_count = j.at("vehicles").get<int>();
  inst.capacity = j.at("capacity").get<int>();
  for (const auto& [key, value] : j.at("demands").items()) {
    inst.demands.emplace_back(std::stoi(key), value.get<int>());
  }
  std::sort(inst.demands.begin(), inst.demands.end());
  return inst;
}

inline nlohmann::json instance_to_json_doc(const RoutingInstance& inst) {
  nlohmann::json demands = nlohmann::json::object();
  for (const auto& [s, q] : inst.demands) demands[std::to_string(s)] = q;
  return {{"t", inst.timestamp},
          {"weekday", weekday_name(inst.weekday)},
          {"vehicles", inst.vehicle_count},
          {"capacity", inst.capacity},
          {"demands", std::move(demands)}};
}

}  // namespace prefroute
