#pragma once

#include <string>
#include <vector>

#include "posbias/corpus.hpp"
#include "posbias/estimators.hpp"
#include "posbias/simulator.hpp"

namespace posbias {

enum class EstimationMethod { kMle, kPairwise };

// The whole estimation path from raw logs: recover the ranker outputs,
// build interventional sets and weights, accumulate the pair statistics,
// then fit.
PropensityEstimate estimate_from_logs(const LogCollection& logs, int M,
                                      EstimationMethod method,
                                      const FitOptions& fit = {});

struct ExperimentResultRow {
  double x_value = 0.0;  // swept parameter: sweeps count or overlap fraction
  double mse_mean = 0.0;
  double mse_variance = 0.0;  // population variance over completed runs
  int runs = 0;               // per_run_mse.size() + unidentifiable_runs
  std::vector<double> per_run_mse;
  int unidentifiable_runs = 0;
};

// Mean squared error of the relative-propensity vector over k = 2..M (the
// first entry is identically 1 on both sides). Any unidentifiable position
// is a MetricUndefinedError, reported rather than averaged in.
double mse(const PropensityEstimate& estimate,
           const std::vector<double>& truth);

// Figure-1 analog: sweep the amount of logged data. Each (value, run) cell
// regenerates corpus and rankers from a seed derived from (config seed,
// value index, run index), simulates, estimates, and scores MSE against
// true_propensities(eta, M). Runs whose estimate is not fully identifiable
// are counted in unidentifiable_runs and excluded from the mean.
std::vector<ExperimentResultRow> run_sweep_experiment(
    const SimulationConfig& config, const std::vector<int>& sweep_values,
    int runs);

// Figure-2 analog: sweep ranker similarity. overlap = 1 produces identical
// rankers, which must surface as unidentifiable runs, never as estimates.
std::vector<ExperimentResultRow> run_overlap_experiment(
    const SimulationConfig& config, const std::vector<double>& overlap_values,
    int runs);

enum class ResultFormat { kCsv, kJson };

// csv: header x,mse_mean,mse_variance,runs,unidentifiable_runs with floats
// at 10 significant digits. json: array of row objects with per_run_mse.
void emit_results(const std::vector<ExperimentResultRow>& rows,
                  const std::string& path, ResultFormat format);

}  // namespace posbias
