// Command-line surface for the position-bias estimation toolkit.
//
// Subcommands:
//   simulate    generate a synthetic corpus and PBM click logs
//   estimate    fit relative propensities from a click log
//   experiment  sweep / overlap experiment grids with MSE aggregation
//   truth       print the simulation's true propensity vector
//
// Exit codes: 0 success, 2 validation/usage errors, 3 estimation impossible.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "posbias/corpus.hpp"
#include "posbias/errors.hpp"
#include "posbias/harness.hpp"
#include "posbias/simulator.hpp"

namespace {

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  size_t start = 0;
  while (start <= s.size()) {
    size_t comma = s.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(s.substr(start));
      break;
    }
    out.push_back(s.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

int run_simulate(const std::string& config_path, const std::string& out_logs,
                 const std::string& out_corpus,
                 std::optional<uint64_t> seed_override) {
  posbias::SimulationConfig cfg = posbias::load_config(config_path);
  if (seed_override) cfg.seed = *seed_override;
  posbias::Corpus corpus = posbias::generate_corpus(cfg);
  posbias::RankingTable table = posbias::generate_rankers(corpus, cfg);
  posbias::LogCollection logs = posbias::simulate_clicks(table, corpus, cfg);
  posbias::save_logs(logs, out_logs);
  if (!out_corpus.empty()) posbias::save_corpus(corpus, out_corpus);
  std::cerr << "wrote " << logs.records.size() << " records to " << out_logs
            << "\n";
  return 0;
}

int run_estimate(const std::string& logs_path, int top_k,
                 const std::string& method, const std::string& out_path) {
  if (method != "mle" && method != "pairwise") {
    throw posbias::ArgumentError("--method must be \"mle\" or \"pairwise\"");
  }
  posbias::LogCollection logs = posbias::load_logs(logs_path);
  posbias::PropensityEstimate est = posbias::estimate_from_logs(
      logs, top_k,
      method == "mle" ? posbias::EstimationMethod::kMle
                      : posbias::EstimationMethod::kPairwise);
  posbias::save_estimate(est, out_path);
  return 0;
}

int run_experiment(const std::string& kind, const std::string& config_path,
                   const std::string& values, int runs,
                   std::optional<uint64_t> seed_override,
                   const std::string& out_path, const std::string& format) {
  if (format != "csv" && format != "json") {
    throw posbias::ArgumentError("--format must be \"csv\" or \"json\"");
  }
  posbias::SimulationConfig cfg = posbias::load_config(config_path);
  if (seed_override) cfg.seed = *seed_override;

  std::vector<posbias::ExperimentResultRow> rows;
  if (kind == "sweep") {
    std::vector<int> vals;
    for (const std::string& tok : split_csv(values)) {
      try {
        vals.push_back(std::stoi(tok));
      } catch (const std::exception&) {
        throw posbias::ArgumentError("bad sweep value \"" + tok + "\"");
      }
    }
    rows = posbias::run_sweep_experiment(cfg, vals, runs);
  } else if (kind == "overlap") {
    std::vector<double> vals;
    for (const std::string& tok : split_csv(values)) {
      try {
        vals.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw posbias::ArgumentError("bad overlap value \"" + tok + "\"");
      }
    }
    rows = posbias::run_overlap_experiment(cfg, vals, runs);
  } else {
    throw posbias::ArgumentError(
        "experiment kind must be \"sweep\" or \"overlap\"");
  }

  posbias::emit_results(rows, out_path,
                        format == "csv" ? posbias::ResultFormat::kCsv
                                        : posbias::ResultFormat::kJson);
  return 0;
}

int run_truth(double eta, int top_k) {
  for (double p : posbias::true_propensities(eta, top_k)) {
    std::printf("%.10g\n", p);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Relative position-bias propensity estimation from "
               "multi-ranker click logs"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "simulate PBM click logs");
  std::string sim_config, sim_out_logs, sim_out_corpus;
  std::optional<uint64_t> sim_seed;
  sim->add_option("--config", sim_config, "simulation config file")
      ->required();
  sim->add_option("--out-logs", sim_out_logs, "click log output path")
      ->required();
  sim->add_option("--out-corpus", sim_out_corpus, "corpus output path");
  sim->add_option("--seed", sim_seed, "override the config's seed");

  // estimate
  auto* est = app.add_subcommand("estimate", "estimate relative propensities");
  std::string est_logs, est_method = "mle", est_out;
  int est_top_k = 10;
  est->add_option("--logs", est_logs, "click log file")->required();
  est->add_option("--top-k", est_top_k, "number of top positions M");
  est->add_option("--method", est_method, "mle|pairwise");
  est->add_option("--out", est_out, "estimate output path")->required();

  // experiment
  auto* exp = app.add_subcommand("experiment", "run an experiment grid");
  std::string exp_kind, exp_config, exp_values, exp_out, exp_format = "csv";
  int exp_runs = 6;
  std::optional<uint64_t> exp_seed;
  exp->add_option("kind", exp_kind, "sweep|overlap")->required();
  exp->add_option("--config", exp_config, "simulation config file")
      ->required();
  exp->add_option("--values", exp_values, "comma-separated swept values")
      ->required();
  exp->add_option("--runs", exp_runs, "independent runs per value");
  exp->add_option("--seed", exp_seed, "override the config's seed");
  exp->add_option("--out", exp_out, "result file path")->required();
  exp->add_option("--format", exp_format, "csv|json");

  // truth
  auto* tru = app.add_subcommand("truth", "print true propensities");
  double tru_eta = 1.0;
  int tru_top_k = 10;
  tru->add_option("--eta", tru_eta, "position-bias severity");
  tru->add_option("--top-k", tru_top_k, "number of positions");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sim->parsed()) {
      return run_simulate(sim_config, sim_out_logs, sim_out_corpus, sim_seed);
    }
    if (est->parsed()) {
      return run_estimate(est_logs, est_top_k, est_method, est_out);
    }
    if (exp->parsed()) {
      return run_experiment(exp_kind, exp_config, exp_values, exp_runs,
                            exp_seed, exp_out, exp_format);
    }
    if (tru->parsed()) {
      return run_truth(tru_eta, tru_top_k);
    }
  } catch (const posbias::EstimationImpossibleError& e) {
    std::cerr << "estimation impossible: " << e.what() << "\n";
    return 3;
  } catch (const posbias::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
