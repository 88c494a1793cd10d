#include "prefroute/experiment.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "json_io.hpp"
#include "prefroute/dot.hpp"

namespace prefroute {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

SynthConfig synth_config_from_json(const json& j) {
  SynthConfig cfg;
  cfg.universe_size = j.value("universe_size", cfg.universe_size);
  cfg.mean_active = j.value("mean_active", cfg.mean_active);
  cfg.vehicles_mean = j.value("vehicles_mean", cfg.vehicles_mean);
  cfg.weeks = j.value("weeks", cfg.weeks);
  cfg.weekday_pattern_strength = j.value("weekday_pattern_strength", cfg.weekday_pattern_strength);
  cfg.noise = j.value("noise", cfg.noise);
  cfg.seed = j.value("seed", cfg.seed);
  return cfg;
}

SolveOptions solve_options_from_json(const json& j) {
  SolveOptions o;
  const std::string backend = j.value("backend", std::string("auto"));
  if (backend == "exact") {
    o.backend = Backend::Exact;
  } else if (backend == "heuristic") {
    o.backend = Backend::Heuristic;
  } else if (backend == "auto") {
    o.backend = Backend::Auto;
  } else {
    throw ParseError("unknown backend '" + backend + "'");
  }
  o.epsilon = j.value("epsilon", o.epsilon);
  o.heuristic_iters = j.value("heuristic_iters", o.heuristic_iters);
  o.heuristic_time_ms = j.value("heuristic_time_ms", o.heuristic_time_ms);
  o.seed = j.value("seed", o.seed);
  o.exact_size_limit = j.value("exact_size_limit", o.exact_size_limit);
  return o;
}

TaskLoss task_loss_from_name(const std::string& name) {
  if (name == "relu") return TaskLoss::Relu;
  if (name == "squared") return TaskLoss::Squared;
  throw ParseError("unknown task loss '" + name + "'");
}

DflConfig dfl_config_from_json(const json& j) {
  DflConfig cfg;
  cfg.lambda = j.value("lambda", cfg.lambda);
  if (j.contains("loss")) cfg.loss = task_loss_from_name(j.at("loss").get<std::string>());
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
  if (j.contains("solve")) cfg.solve = solve_options_from_json(j.at("solve"));
  return cfg;
}

WeightingScheme weighting_from_json(const json& j) {
  const std::string kind = j.value("kind", std::string("uniform"));
  if (kind == "uniform") return WeightingScheme::uniform();
  if (kind == "exponential") return WeightingScheme::exponential(j.value("half_life", 8));
  throw ParseError("unknown weighting scheme '" + kind + "'");
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  out << text;
}

std::string comparison_csv(const std::vector<EvalReport>& reports) {
  std::ostringstream out;
  out << "estimator,ce,ad,ad_pct,rd,rd_pct,distance_km\n";
  for (const auto& r : reports) {
    out << estimator_name(r.estimator) << ',' << r.overall.ce << ',' << r.overall.ad_abs << ','
        << r.overall.ad_pct << ',' << r.overall.rd_abs << ',' << r.overall.rd_pct << ','
        << r.overall.distance_km << '\n';
  }
  return out.str();
}

std::string per_weekday_csv(const std::vector<EvalReport>& reports) {
  std::ostringstream out;
  out << "weekday";
  for (const auto& r : reports) {
    out << ',' << estimator_name(r.estimator) << "_ad_pct," << estimator_name(r.estimator)
        << "_rd_pct";
  }
  out << "\noverall";
  for (const auto& r : reports) out << ',' << r.overall.ad_pct << ',' << r.overall.rd_pct;
  out << '\n';
  for (int d = 0; d < 7; ++d) {
    out << weekday_name(static_cast<Weekday>(d));
    for (const auto& r : reports) {
      out << ',' << r.per_weekday[d].ad_pct << ',' << r.per_weekday[d].rd_pct;
    }
    out << '\n';
  }
  return out.str();
}

std::string sweep_csv(const std::vector<std::pair<std::string, EvalReport>>& rows,
                      const char* label) {
  std::ostringstream out;
  out << label << ",training_ce,ce,ad,ad_pct,rd,rd_pct,distance_km\n";
  for (const auto& [name, r] : rows) {
    out << name << ',' << (r.mean_training_ce ? std::to_string(*r.mean_training_ce) : "") << ','
        << r.overall.ce << ',' << r.overall.ad_abs << ',' << r.overall.ad_pct << ','
        << r.overall.rd_abs << ',' << r.overall.rd_pct << ',' << r.overall.distance_km << '\n';
  }
  return out.str();
}

template <typename Fn>
auto stage(const std::string& name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const std::exception& e) {
    throw std::runtime_error("stage '" + name + "' failed: " + e.what());
  }
}

}  // namespace

ExperimentConfig experiment_config_from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("experiment config is not valid JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  cfg.out_dir = doc.value("out_dir", cfg.out_dir);
  cfg.seed = doc.value("seed", cfg.seed);
  if (doc.contains("data")) {
    const auto& data = doc.at("data");
    if (data.contains("synth")) {
      cfg.synth = synth_config_from_json(data.at("synth"));
      if (!data.at("synth").contains("seed")) cfg.synth->seed = cfg.seed;
    } else if (data.contains("file")) {
      cfg.data_file = data.at("file").get<std::string>();
    } else {
      throw ParseError("config 'data' must name either 'synth' or 'file'");
    }
  } else {
    cfg.synth = SynthConfig{};
    cfg.synth->seed = cfg.seed;
  }
  if (doc.contains("estimators")) {
    cfg.estimators.clear();
    for (const auto& e : doc.at("estimators")) {
      cfg.estimators.push_back(estimator_from_name(e.get<std::string>()));
    }
  }
  if (doc.contains("eval")) {
    cfg.eval.tests_per_weekday = doc.at("eval").value("tests_per_weekday", 7);
  }
  if (doc.contains("weighting")) cfg.eval.weighting = weighting_from_json(doc.at("weighting"));
  if (doc.contains("train")) cfg.eval.train = train_config_from_json(doc.at("train"));
  cfg.eval.train.seed = doc.value("seed", cfg.eval.train.seed);
  if (doc.contains("dfl")) cfg.eval.dfl = dfl_config_from_json(doc.at("dfl"));
  if (doc.contains("solve")) cfg.eval.solve = solve_options_from_json(doc.at("solve"));
  cfg.eval.solve.seed = cfg.seed;
  cfg.eval.dfl.solve = cfg.eval.solve;
  cfg.ablation = doc.value("ablation", cfg.ablation);
  if (doc.contains("dfl_losses")) {
    cfg.dfl_losses.clear();
    for (const auto& l : doc.at("dfl_losses")) {
      cfg.dfl_losses.push_back(task_loss_from_name(l.get<std::string>()));
    }
  }
  if (doc.contains("dfl_lambdas")) {
    cfg.dfl_lambdas = doc.at("dfl_lambdas").get<std::vector<double>>();
  } else if (doc.contains("dfl") && doc.at("dfl").contains("lambda")) {
    cfg.dfl_lambdas = {doc.at("dfl").at("lambda").get<double>()};
  }
  return cfg;
}

ExperimentConfig experiment_config_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open experiment config '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return experiment_config_from_json_text(buf.str());
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  const fs::path out_dir(cfg.out_dir);

  HistoryDataset history = stage("data", [&] {
    if (cfg.data_file) return load_history(*cfg.data_file);
    HistoryDataset h = synth_generate(*cfg.synth);
    save_history(h, (out_dir / "history.json").string());
    return h;
  });

  ExperimentResult result;
  for (Estimator est : cfg.estimators) {
    const std::string name = estimator_name(est);
    EvalReport report = stage("estimator:" + name, [&] {
      std::cerr << "evaluating " << name << "...\n";
      return rolling_evaluation(history, est, cfg.eval);
    });
    write_file(out_dir / (name + ".json"), eval_report_to_json(report));
    write_file(out_dir / (name + ".csv"), eval_report_to_csv(report));
    result.comparison.push_back(std::move(report));
  }
  write_file(out_dir / "comparison.csv", comparison_csv(result.comparison));
  write_file(out_dir / "per_weekday.csv", per_weekday_csv(result.comparison));

  if (cfg.ablation) {
    stage("ablation", [&] {
      // The feature sweep; epochs per row follow the tuned setups.
      struct Row {
        const char* name;
        FeatureMask mask;
        int epochs;
      };
      const Row rows[] = {
          {"full", {true, true, true, true, true}, 50},
          {"without_past_data", {false, true, true, true, true}, 100},
          {"without_weekday", {true, false, true, true, true}, 50},
          {"without_stop_information", {true, true, false, true, true}, 100},
          {"without_distance", {true, true, true, false, true}, 100},
          {"without_markov", {true, true, true, true, false}, 100},
          {"only_markov", {false, false, false, false, true}, 100},
      };
      for (const Row& row : rows) {
        std::cerr << "ablation " << row.name << "...\n";
        EvalConfig ec = cfg.eval;
        ec.train.features = row.mask;
        ec.train.epochs = std::min(cfg.eval.train.epochs, row.epochs);
        result.ablation.emplace_back(row.name, rolling_evaluation(history, Estimator::Neural, ec));
      }
      write_file(out_dir / "ablation.csv", sweep_csv(result.ablation, "features"));
      return 0;
    });
  }

  if (!cfg.dfl_losses.empty() && !cfg.dfl_lambdas.empty()) {
    stage("dfl", [&] {
      for (TaskLoss loss : cfg.dfl_losses) {
        for (double lambda : cfg.dfl_lambdas) {
          std::string name = loss == TaskLoss::Relu ? "relu" : "squared";
          if (cfg.dfl_lambdas.size() > 1) {
            std::ostringstream tag;
            tag << name << "_lambda_" << lambda;
            name = tag.str();
          }
          std::cerr << "decision-focused (" << name << ")...\n";
          EvalConfig ec = cfg.eval;
          ec.dfl.loss = loss;
          ec.dfl.lambda = lambda;
          result.dfl.emplace_back(name, rolling_evaluation(history, Estimator::Dfl, ec));
        }
      }
      write_file(out_dir / "dfl.csv", sweep_csv(result.dfl, "loss"));
      return 0;
    });
  }

  stage("export", [&] {
    const auto test_idx = select_test_indices(history, cfg.eval.tests_per_weekday);
    if (test_idx.empty()) return 0;
    const DayRecord& sample = history.records[test_idx.front()];
    fs::create_directories(out_dir / "dot");
    write_file(out_dir / "dot" / "actual.dot",
               routing_to_dot(sample.routing, history.stops,
                              "actual t=" + std::to_string(sample.instance.timestamp)));
    for (Estimator est : cfg.estimators) {
      const std::string name = estimator_name(est);
      EvalConfig ec = cfg.eval;
      const TransitionMatrix p = estimator_matrix_for_day(history, est, sample.instance, ec);
      SolveReport solved = est == Estimator::Conventional
                               ? conventional_vrp(history.distance, sample.instance, ec.solve)
                               : mle_routing(p, sample.instance, ec.solve);
      write_file(out_dir / "dot" / (name + ".dot"),
                 routing_to_dot(solved.routing, history.stops,
                                name + " t=" + std::to_string(sample.instance.timestamp)));
    }
    return 0;
  });

  return result;
}

}  // namespace prefroute
