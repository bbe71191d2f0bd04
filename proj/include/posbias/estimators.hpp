#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "posbias/interventions.hpp"

namespace posbias {

struct FitOptions {
  int max_iterations = 10000;
  // Stop when the ascent gradient's infinity norm drops below this.
  double gradient_tolerance = 1e-8;
  // Pairs whose total weighted impression mass is <= this are excluded.
  double min_pair_mass = 0.0;
  // Single scheme: full-batch gradient ascent with halving backtracking and
  // Armijo acceptance. Kept as an explicit knob so the choice is visible.
  enum class StepRule { kBacktrackingArmijo } step_rule =
      StepRule::kBacktrackingArmijo;
  // Record the objective after every accepted step (for monotonicity checks).
  bool record_trace = false;

  void validate() const;
};

// Positions are nodes, pairs with impression mass at both positions are
// edges. A position's relative propensity is estimable only when connected
// to position 1.
struct IdentifiabilityReport {
  int M = 0;
  std::vector<std::pair<int, int>> edges;        // (k, k') with k < k'
  std::vector<int> component_of_position_1;      // sorted, contains 1
  std::vector<int> unidentifiable;               // sorted, complement

  bool identifiable(int position) const;
};

struct PropensityEstimate {
  int M = 0;
  // Entry k-1 holds p_k / p_1; exactly 1 at position 1; NaN at positions
  // flagged unidentifiable (never a silently wrong number).
  std::vector<double> rel_propensity;
  // Raw maximizer of the objective, one entry per position. Only ratios are
  // meaningful: the objective is invariant under p -> c*p, r -> r/c.
  std::vector<double> fitted_p;
  // One shared relevance parameter per unordered pair with data.
  std::map<std::pair<int, int>, double> fitted_r;
  double objective_value = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<int> unidentifiable;  // sorted positions
  std::vector<double> objective_trace;  // filled when record_trace is set
};

// Claim-1 ratio estimate of p_k / p_k': the weighted click masses of the
// pair {k, k'} at its two positions. Zero denominator mass is an
// UndefinedRatioError.
double pairwise_ratio(const PairStats& stats, int k, int kprime);

// Claim-2 log-likelihood: sum over pairs with mass of
//   c * log(p*r) + notc * log(1 - p*r)
// at both positions, with one r per unordered pair. Parameters must lie in
// (0,1). Pairs with zero total mass are skipped.
double mle_objective(const std::vector<double>& fitted_p,
                     const std::map<std::pair<int, int>, double>& fitted_r,
                     const PairStats& stats);

struct MleGradient {
  std::vector<double> d_p;                        // entry k-1
  std::map<std::pair<int, int>, double> d_r;      // per pair with mass
};

// Analytic gradient of mle_objective with respect to every parameter.
MleGradient mle_gradient(const std::vector<double>& fitted_p,
                         const std::map<std::pair<int, int>, double>& fitted_r,
                         const PairStats& stats);

// Maximizes the Claim-2 objective by deterministic gradient ascent through
// a logistic reparameterization (parameters squashed into (0,1), all
// initialized at 0.5). Throws EstimationImpossibleError when no pair has
// mass or nothing connects position 1.
PropensityEstimate fit_mle(const PairStats& stats,
                           const FitOptions& options = {});

// Claim-1 estimates against position 1 for every k, packaged like fit_mle's
// output. Positions whose {k,1} ratio is undefined are unidentifiable.
PropensityEstimate pairwise_estimate(const PairStats& stats);

IdentifiabilityReport check_identifiability(const PairStats& stats);

// Single JSON object: rel_propensity (null at unidentifiable positions),
// unidentifiable, objective_value, iterations, converged.
void save_estimate(const PropensityEstimate& estimate,
                   const std::string& path);

}  // namespace posbias
