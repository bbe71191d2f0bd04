#include "posbias/harness.hpp"

#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>

#include "json.hpp"
#include "posbias/errors.hpp"
#include "posbias/interventions.hpp"
#include "posbias/rng.hpp"

namespace posbias {

PropensityEstimate estimate_from_logs(const LogCollection& logs, int M,
                                      EstimationMethod method,
                                      const FitOptions& fit) {
  RankingTable table = derive_rankings(logs);
  InterventionalSets sets = build_interventional_sets(table, M);
  WeightTable weights = compute_weights(table, logs.log_sizes, M);
  PairStats stats = accumulate_pair_stats(logs, sets, weights);
  return method == EstimationMethod::kMle ? fit_mle(stats, fit)
                                          : pairwise_estimate(stats);
}

double mse(const PropensityEstimate& estimate,
           const std::vector<double>& truth) {
  if (static_cast<int>(truth.size()) != estimate.M) {
    throw ArgumentError("truth vector must have one entry per position 1..M");
  }
  if (!estimate.unidentifiable.empty()) {
    throw MetricUndefinedError(
        "estimate has unidentifiable positions; MSE is undefined");
  }
  if (estimate.M < 2) return 0.0;
  double sum = 0.0;
  for (int k = 2; k <= estimate.M; ++k) {
    double diff = estimate.rel_propensity[k - 1] - truth[k - 1] / truth[0];
    sum += diff * diff;
  }
  return sum / static_cast<double>(estimate.M - 1);
}

namespace {

struct RunOutcome {
  bool unidentifiable = false;
  double mse_value = 0.0;
  std::exception_ptr error;  // anything other than a non-identifiability
};

// One simulated experiment cell: regenerate everything from the derived
// seed, push it through the full pipeline, score against the truth.
RunOutcome execute_run(SimulationConfig cfg) {
  RunOutcome out;
  try {
    Corpus corpus = generate_corpus(cfg);
    RankingTable table = generate_rankers(corpus, cfg);
    LogCollection logs = simulate_clicks(table, corpus, cfg);
    PropensityEstimate est =
        estimate_from_logs(logs, cfg.M, EstimationMethod::kMle);
    out.mse_value = mse(est, true_propensities(cfg.eta, cfg.M));
  } catch (const EstimationImpossibleError&) {
    out.unidentifiable = true;
  } catch (const MetricUndefinedError&) {
    out.unidentifiable = true;
  } catch (...) {
    out.error = std::current_exception();
  }
  return out;
}

ExperimentResultRow aggregate(double x_value,
                              const std::vector<RunOutcome>& outcomes) {
  ExperimentResultRow row;
  row.x_value = x_value;
  for (const RunOutcome& o : outcomes) {
    if (o.error) std::rethrow_exception(o.error);
    if (o.unidentifiable) {
      ++row.unidentifiable_runs;
    } else {
      row.per_run_mse.push_back(o.mse_value);
    }
  }
  row.runs = static_cast<int>(row.per_run_mse.size()) + row.unidentifiable_runs;
  if (row.per_run_mse.empty()) {
    row.mse_mean = std::numeric_limits<double>::quiet_NaN();
    row.mse_variance = std::numeric_limits<double>::quiet_NaN();
  } else {
    double n = static_cast<double>(row.per_run_mse.size());
    double mean = 0.0;
    for (double v : row.per_run_mse) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : row.per_run_mse) var += (v - mean) * (v - mean);
    var /= n;
    row.mse_mean = mean;
    row.mse_variance = var;
  }
  return row;
}

template <typename Value, typename Apply>
std::vector<ExperimentResultRow> run_grid(const SimulationConfig& config,
                                          const std::vector<Value>& values,
                                          int runs, Apply apply) {
  config.validate();
  if (runs < 1) throw ArgumentError("runs must be >= 1");
  if (values.empty()) throw ArgumentError("at least one swept value required");

  const size_t cells = values.size() * static_cast<size_t>(runs);
  std::vector<RunOutcome> outcomes(cells);

  // Independent cells; each derives its own seed, so schedule is free.
#pragma omp parallel for schedule(dynamic) collapse(2)
  for (int64_t vi = 0; vi < static_cast<int64_t>(values.size()); ++vi) {
    for (int64_t run = 0; run < runs; ++run) {
      SimulationConfig cfg = config;
      apply(cfg, values[vi]);
      cfg.seed = derive_seed(config.seed,
                             {kExperimentStream, static_cast<uint64_t>(vi),
                              static_cast<uint64_t>(run)});
      outcomes[vi * runs + run] = execute_run(cfg);
    }
  }

  std::vector<ExperimentResultRow> rows;
  rows.reserve(values.size());
  for (size_t vi = 0; vi < values.size(); ++vi) {
    std::vector<RunOutcome> slice(outcomes.begin() + vi * runs,
                                  outcomes.begin() + (vi + 1) * runs);
    rows.push_back(aggregate(static_cast<double>(values[vi]), slice));
  }
  return rows;
}

}  // namespace

std::vector<ExperimentResultRow> run_sweep_experiment(
    const SimulationConfig& config, const std::vector<int>& sweep_values,
    int runs) {
  for (int s : sweep_values) {
    if (s < 1) throw ArgumentError("sweep values must be >= 1");
  }
  return run_grid(config, sweep_values, runs,
                  [](SimulationConfig& cfg, int v) { cfg.sweeps = v; });
}

std::vector<ExperimentResultRow> run_overlap_experiment(
    const SimulationConfig& config, const std::vector<double>& overlap_values,
    int runs) {
  for (double v : overlap_values) {
    if (v < 0.0 || v > 1.0) {
      throw ArgumentError("overlap values must lie in [0, 1]");
    }
  }
  return run_grid(config, overlap_values, runs,
                  [](SimulationConfig& cfg, double v) { cfg.overlap = v; });
}

namespace {

std::string fmt10(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

void emit_results(const std::vector<ExperimentResultRow>& rows,
                  const std::string& path, ResultFormat format) {
  if (rows.empty()) throw ArgumentError("no result rows to emit");
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);

  if (format == ResultFormat::kCsv) {
    out << "x,mse_mean,mse_variance,runs,unidentifiable_runs\n";
    for (const auto& row : rows) {
      out << fmt10(row.x_value) << ',' << fmt10(row.mse_mean) << ','
          << fmt10(row.mse_variance) << ',' << row.runs << ','
          << row.unidentifiable_runs << '\n';
    }
  } else {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& row : rows) {
      nlohmann::json j;
      j["x"] = row.x_value;
      j["mse_mean"] = row.mse_mean;
      j["mse_variance"] = row.mse_variance;
      j["runs"] = row.runs;
      j["unidentifiable_runs"] = row.unidentifiable_runs;
      j["per_run_mse"] = row.per_run_mse;
      arr.push_back(std::move(j));
    }
    out << arr.dump(2) << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace posbias
