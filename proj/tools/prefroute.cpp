// Command line for learning route preferences from historical CVRP
// solutions and solving maximum-likelihood routings with them.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "prefroute/core.hpp"
#include "prefroute/dfl.hpp"
#include "prefroute/dot.hpp"
#include "prefroute/eval.hpp"
#include "prefroute/experiment.hpp"
#include "prefroute/markov.hpp"
#include "prefroute/neural.hpp"
#include "prefroute/solver.hpp"
#include "prefroute/synth.hpp"

namespace {

using nlohmann::json;
using namespace prefroute;

constexpr int kExitValidation = 2;
constexpr int kExitInfeasible = 3;

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << text;
}

json matrix_doc(const TransitionMatrix& p) {
  json stops = json::array();
  for (std::size_t i = 0; i < p.rows(); ++i) stops.push_back(i);
  json rows = json::array();
  for (std::size_t i = 0; i < p.rows(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < p.cols(); ++j) row.push_back(p(i, j));
    rows.push_back(std::move(row));
  }
  return {{"stops", std::move(stops)}, {"matrix", std::move(rows)}};
}

TransitionMatrix load_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open matrix file '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ParseError(std::string("matrix file is not valid JSON: ") + e.what());
  }
  const auto& rows = doc.at("matrix");
  TransitionMatrix p(rows.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.size()) throw ParseError("matrix is not square");
    for (std::size_t j = 0; j < rows.size(); ++j) p(i, j) = rows[i][j].get<double>();
  }
  return p;
}

RoutingInstance load_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open instance file '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ParseError(std::string("instance file is not valid JSON: ") + e.what());
  }
  RoutingInstance inst;
  inst.timestamp = doc.at("t").get<int>();
  inst.weekday = weekday_from_name(doc.at("weekday").get<std::string>());
  inst.vehicle_count = doc.at("vehicles").get<int>();
  inst.capacity = doc.at("capacity").get<int>();
  for (const auto& [key, value] : doc.at("demands").items()) {
    inst.demands.emplace_back(std::stoi(key), value.get<int>());
  }
  std::sort(inst.demands.begin(), inst.demands.end());
  return inst;
}

json report_doc(const SolveReport& report) {
  return {{"routes", canonical(report.routing).tours},
          {"objective", report.objective},
          {"optimal", report.optimal},
          {"nodes_explored", report.nodes_explored},
          {"wall_time_ms", report.wall_time_ms},
          {"distance_km", report.distance_km}};
}

FeatureMask parse_features(const std::string& csv) {
  FeatureMask mask{false, false, false, false, false};
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "lagged") {
      mask.lagged = true;
    } else if (item == "weekday") {
      mask.weekday = true;
    } else if (item == "stops") {
      mask.stops = true;
    } else if (item == "distance") {
      mask.distance = true;
    } else if (item == "markov") {
      mask.markov = true;
    } else {
      throw ValidationError("unknown feature group '" + item + "'");
    }
  }
  return mask;
}

Backend parse_backend(const std::string& name) {
  if (name == "exact") return Backend::Exact;
  if (name == "heuristic") return Backend::Heuristic;
  if (name == "auto") return Backend::Auto;
  throw ValidationError("unknown backend '" + name + "'");
}

const DayRecord& record_at(const HistoryDataset& h, int t) {
  for (const auto& rec : h.records) {
    if (rec.instance.timestamp == t) return rec;
  }
  throw ValidationError("no record with t=" + std::to_string(t) + " in the history");
}

int run(int argc, char** argv) {
  CLI::App app{"preference-learning CVRP toolkit"};
  app.require_subcommand(1);

  // ---- gen ----
  auto* gen = app.add_subcommand("gen", "generate a synthetic history");
  SynthConfig synth_cfg;
  std::string gen_out = "history.json";
  gen->add_option("--out", gen_out, "output history file");
  gen->add_option("--universe", synth_cfg.universe_size, "number of customers");
  gen->add_option("--mean-active", synth_cfg.mean_active, "average active stops per day");
  gen->add_option("--vehicles", synth_cfg.vehicles_mean, "average fleet size");
  gen->add_option("--weeks", synth_cfg.weeks, "number of weeks");
  gen->add_option("--pattern", synth_cfg.weekday_pattern_strength,
                  "weekday pattern strength in [0,1]");
  gen->add_option("--noise", synth_cfg.noise, "multiplicative cost noise in [0,1]");
  gen->add_option("--seed", synth_cfg.seed, "random seed");

  // ---- train ----
  auto* train = app.add_subcommand("train", "train per-source transition models");
  std::string train_history, train_out = "models", train_mode = "ce";
  std::string train_features;
  TrainConfig train_cfg;
  DflConfig dfl_cfg;
  std::string train_backend = "auto";
  int train_upto = std::numeric_limits<int>::max();
  train->add_option("--history", train_history, "history file")->required();
  train->add_option("--out", train_out, "model store directory");
  train->add_option("--mode", train_mode, "ce | dfl");
  train->add_option("--epochs", train_cfg.epochs, "training epochs");
  train->add_option("--lr", train_cfg.learning_rate, "learning rate");
  train->add_option("--lookback", train_cfg.lookback, "lagged-solution window L");
  train->add_option("--features", train_features,
                    "comma list of feature groups (lagged,weekday,stops,distance,markov)");
  train->add_option("--seed", train_cfg.seed, "random seed");
  train->add_option("--upto", train_upto, "train only on records with t < upto");
  train->add_option("--lambda", dfl_cfg.lambda, "dfl perturbation scale");
  std::string dfl_loss = "relu";
  train->add_option("--loss", dfl_loss, "dfl task loss: relu | squared");
  train->add_option("--dfl-epochs", dfl_cfg.epochs, "dfl training epochs");
  train->add_option("--backend", train_backend, "dfl inner solver backend");

  // ---- predict ----
  auto* predict = app.add_subcommand("predict", "emit a transition matrix for one day");
  std::string pred_history, pred_models, pred_estimator, pred_instance, pred_out = "matrix.json";
  int pred_t = -1;
  double pred_omega = 1.0;
  predict->add_option("--history", pred_history, "history file")->required();
  predict->add_option("--models", pred_models, "model store directory (neural prediction)");
  predict->add_option("--estimator", pred_estimator,
                      "markov_allday | markov_weekday | distance");
  predict->add_option("--t", pred_t, "timestamp of the day to predict (from the history)");
  predict->add_option("--instance", pred_instance, "standalone instance file");
  predict->add_option("--omega", pred_omega,
                      "mix weight: omega*markov + (1-omega)*distance");
  predict->add_option("--out", pred_out, "output matrix file");

  // ---- solve ----
  auto* solve = app.add_subcommand("solve", "solve the MLE routing for an instance");
  std::string solve_matrix, solve_instance, solve_backend = "auto", solve_out, solve_dot;
  std::string solve_history;
  SolveOptions solve_opts;
  solve->add_option("--matrix", solve_matrix, "transition matrix file")->required();
  solve->add_option("--instance", solve_instance, "instance file")->required();
  solve->add_option("--backend", solve_backend, "exact | heuristic | auto");
  solve->add_option("--time-ms", solve_opts.heuristic_time_ms, "heuristic time budget");
  solve->add_option("--iters", solve_opts.heuristic_iters,
                    "heuristic iteration budget (deterministic)");
  solve->add_option("--seed", solve_opts.seed, "heuristic seed");
  solve->add_option("--out", solve_out, "write the solve report here (default stdout)");
  solve->add_option("--dot", solve_dot, "also write the routing as a DOT graph");
  solve->add_option("--history", solve_history, "history file (stop names for --dot)");

  // ---- eval ----
  auto* eval = app.add_subcommand("eval", "rolling-window evaluation of an estimator");
  std::string eval_history, eval_estimator, eval_report, eval_csv;
  std::string eval_weighting = "uniform", eval_backend = "auto", eval_features;
  EvalConfig eval_cfg;
  int eval_half_life = 8;
  eval->add_option("--history", eval_history, "history file")->required();
  eval->add_option("--estimator", eval_estimator,
                   "markov_allday | markov_weekday | neural | dfl | conventional")
      ->required();
  eval->add_option("--tests-per-weekday", eval_cfg.tests_per_weekday, "test days per weekday");
  eval->add_option("--weighting", eval_weighting, "uniform | exponential");
  eval->add_option("--half-life", eval_half_life, "exponential half-life (records)");
  eval->add_option("--epochs", eval_cfg.train.epochs, "neural training epochs");
  eval->add_option("--lr", eval_cfg.train.learning_rate, "learning rate");
  eval->add_option("--lookback", eval_cfg.train.lookback, "lagged-solution window L");
  eval->add_option("--features", eval_features, "neural feature groups");
  eval->add_option("--seed", eval_cfg.train.seed, "random seed");
  eval->add_option("--lambda", eval_cfg.dfl.lambda, "dfl perturbation scale");
  eval->add_option("--dfl-epochs", eval_cfg.dfl.epochs, "dfl training epochs");
  eval->add_option("--backend", eval_backend, "solver backend");
  eval->add_option("--iters", eval_cfg.solve.heuristic_iters, "heuristic iteration budget");
  eval->add_option("--report", eval_report, "write the JSON report here");
  eval->add_option("--csv", eval_csv, "write the per-instance CSV here");

  // ---- experiment ----
  auto* experiment = app.add_subcommand("experiment", "run the full experiment protocol");
  std::string exp_config;
  experiment->add_option("--config", exp_config, "experiment config file")->required();

  // ---- export-dot ----
  auto* exdot = app.add_subcommand("export-dot", "render a routing as a DOT graph");
  std::string dot_history, dot_solution, dot_out = "routing.dot";
  int dot_t = -1;
  exdot->add_option("--history", dot_history, "history file");
  exdot->add_option("--t", dot_t, "timestamp of the realized routing to render");
  exdot->add_option("--solution", dot_solution, "solve report to render instead");
  exdot->add_option("--out", dot_out, "output DOT file");

  CLI11_PARSE(app, argc, argv);

  if (*gen) {
    HistoryDataset h = synth_generate(synth_cfg);
    save_history(h, gen_out);
    std::cout << "wrote " << h.records.size() << " days over " << h.stops.size() - 1
              << " customers to " << gen_out << "\n";
    return 0;
  }

  if (*train) {
    HistoryDataset h = load_history(train_history);
    if (!train_features.empty()) train_cfg.features = parse_features(train_features);
    ModelMap models;
    if (train_mode == "ce") {
      MarkovCache markov(h);
      for (std::size_t s = 0; s < h.universe_size(); ++s) {
        try {
          models.emplace(static_cast<int>(s),
                         train_source_model(h, markov, static_cast<int>(s), train_cfg,
                                            train_upto)
                             .params);
        } catch (const ValidationError&) {
          // sources with no history keep no model; prediction falls back
        }
      }
    } else if (train_mode == "dfl") {
      dfl_cfg.loss = dfl_loss == "squared" ? TaskLoss::Squared : TaskLoss::Relu;
      dfl_cfg.solve.backend = parse_backend(train_backend);
      dfl_cfg.learning_rate = train_cfg.learning_rate;
      models = dfl_train(h, dfl_cfg, train_cfg, train_upto).models;
    } else {
      throw ValidationError("unknown training mode '" + train_mode + "'");
    }
    save_models(train_out, models, train_cfg);
    std::cout << "wrote " << models.size() << " source models to " << train_out << "\n";
    return 0;
  }

  if (*predict) {
    HistoryDataset h = load_history(pred_history);
    RoutingInstance inst;
    if (!pred_instance.empty()) {
      inst = load_instance(pred_instance);
    } else if (pred_t >= 0) {
      inst = record_at(h, pred_t).instance;
    } else if (pred_estimator != "distance") {
      throw ValidationError("predict needs --t or --instance (except --estimator distance)");
    }

    TransitionMatrix p;
    if (!pred_models.empty()) {
      auto [models, cfg] = load_models(pred_models);
      MarkovCache markov(h);
      p = predict_matrix(models, h, inst, cfg, markov);
    } else if (pred_estimator == "distance") {
      p = distance_probabilities(h.distance);
    } else if (pred_estimator == "markov_allday" || pred_estimator == "markov_weekday") {
      const DayFilter filter = pred_estimator == "markov_allday"
                                   ? DayFilter::allday()
                                   : DayFilter::on(inst.weekday);
      p = markov_probabilities(
          transition_counts(h, filter, WeightingScheme::uniform(), inst.timestamp));
      if (pred_omega < 1.0) p = mix(p, distance_probabilities(h.distance), pred_omega);
    } else {
      throw ValidationError("predict needs --models or a valid --estimator");
    }
    write_text(pred_out, matrix_doc(p).dump(2) + "\n");
    std::cout << "wrote transition matrix to " << pred_out << "\n";
    return 0;
  }

  if (*solve) {
    const TransitionMatrix p = load_matrix(solve_matrix);
    const RoutingInstance inst = load_instance(solve_instance);
    solve_opts.backend = parse_backend(solve_backend);
    SolveReport report = mle_routing(p, inst, solve_opts);
    const std::string text = report_doc(report).dump(2) + "\n";
    if (solve_out.empty()) {
      std::cout << text;
    } else {
      write_text(solve_out, text);
    }
    if (!solve_dot.empty()) {
      std::vector<StopInfo> stops;
      if (!solve_history.empty()) stops = load_history(solve_history).stops;
      write_text(solve_dot, routing_to_dot(report.routing, stops,
                                           "t=" + std::to_string(inst.timestamp)));
    }
    return 0;
  }

  if (*eval) {
    HistoryDataset h = load_history(eval_history);
    if (!eval_features.empty()) eval_cfg.train.features = parse_features(eval_features);
    eval_cfg.weighting = eval_weighting == "exponential"
                             ? WeightingScheme::exponential(eval_half_life)
                             : WeightingScheme::uniform();
    eval_cfg.solve.backend = parse_backend(eval_backend);
    eval_cfg.dfl.solve = eval_cfg.solve;
    EvalReport report = rolling_evaluation(h, estimator_from_name(eval_estimator), eval_cfg);
    const std::string text = eval_report_to_json(report);
    if (eval_report.empty()) {
      std::cout << text << "\n";
    } else {
      write_text(eval_report, text + "\n");
    }
    if (!eval_csv.empty()) write_text(eval_csv, eval_report_to_csv(report));
    return 0;
  }

  if (*experiment) {
    run_experiment(experiment_config_from_file(exp_config));
    std::cout << "experiment complete\n";
    return 0;
  }

  if (*exdot) {
    std::vector<StopInfo> stops;
    Routing routing;
    std::string title;
    if (!dot_solution.empty()) {
      std::ifstream in(dot_solution);
      if (!in) throw ParseError("cannot open solution file '" + dot_solution + "'");
      json doc;
      in >> doc;
      for (const auto& route : doc.at("routes")) {
        routing.tours.push_back(route.get<std::vector<int>>());
      }
      title = "solution";
    } else if (!dot_history.empty() && dot_t >= 0) {
      HistoryDataset h = load_history(dot_history);
      routing = record_at(h, dot_t).routing;
      stops = h.stops;
      title = "actual t=" + std::to_string(dot_t);
    } else {
      throw ValidationError("export-dot needs --solution or --history with --t");
    }
    if (stops.empty() && !dot_history.empty()) stops = load_history(dot_history).stops;
    write_text(dot_out, routing_to_dot(routing, stops, title));
    std::cout << "wrote " << dot_out << "\n";
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
