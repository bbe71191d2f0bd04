#include "posbias/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "json.hpp"
#include "posbias/errors.hpp"

namespace posbias {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  double e = std::exp(t);
  return e / (1.0 + e);
}

void check_unit_interval(double v, const char* what) {
  if (!(v > 0.0) || !(v < 1.0)) {
    throw ArgumentError(std::string(what) +
                        " must lie strictly inside (0, 1)");
  }
}

struct LikelihoodPair {
  size_t cell;  // index into PairStats::cells
  int k, kprime;
  double c_k, nc_k, c_kp, nc_kp;
};

// Pairs entering the likelihood: total weighted mass strictly above the
// threshold, in pair-index order (deterministic).
std::vector<LikelihoodPair> select_pairs(const PairStats& stats,
                                         double min_pair_mass) {
  std::vector<LikelihoodPair> out;
  for (size_t i = 0; i < stats.cells.size(); ++i) {
    const PairCell& c = stats.cells[i];
    double mass = c.c_at_k + c.c_at_kprime + c.notc_at_k + c.notc_at_kprime;
    if (!(mass > min_pair_mass)) continue;
    auto [k, kprime] = pair_positions(i, stats.M);
    out.push_back({i, k, kprime, c.c_at_k, c.notc_at_k, c.c_at_kprime,
                   c.notc_at_kprime});
  }
  return out;
}

// One position's contribution: c*log(p*r) + nc*log(1 - p*r).
double position_terms(double c, double nc, double p, double r) {
  double u = p * r;
  double v = 0.0;
  if (c > 0.0) v += c * std::log(u);
  if (nc > 0.0) v += nc * std::log1p(-u);
  return v;
}

// Connected component of position 1 in the graph whose edges are pairs with
// impression mass at both positions.
std::vector<char> component_of_one(const std::vector<LikelihoodPair>& pairs,
                                   int M) {
  std::vector<std::vector<int>> adj(M + 1);
  for (const auto& pr : pairs) {
    bool low = pr.c_k + pr.nc_k > 0.0;
    bool high = pr.c_kp + pr.nc_kp > 0.0;
    if (low && high) {
      adj[pr.k].push_back(pr.kprime);
      adj[pr.kprime].push_back(pr.k);
    }
  }
  std::vector<char> seen(M + 1, 0);
  std::vector<int> stack{1};
  seen[1] = 1;
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (int w : adj[v]) {
      if (!seen[w]) {
        seen[w] = 1;
        stack.push_back(w);
      }
    }
  }
  return seen;
}

}  // namespace

void FitOptions::validate() const {
  if (max_iterations < 1) throw ArgumentError("max_iterations must be >= 1");
  if (!(gradient_tolerance > 0.0)) {
    throw ArgumentError("gradient_tolerance must be > 0");
  }
  if (min_pair_mass < 0.0) throw ArgumentError("min_pair_mass must be >= 0");
}

bool IdentifiabilityReport::identifiable(int position) const {
  return std::binary_search(component_of_position_1.begin(),
                            component_of_position_1.end(), position);
}

double pairwise_ratio(const PairStats& stats, int k, int kprime) {
  double num = stats.click_mass(k, kprime);
  double den = stats.click_mass(kprime, k);
  if (!(den > 0.0)) {
    throw UndefinedRatioError("no clicks at position " +
                              std::to_string(kprime) + " within the pair {" +
                              std::to_string(k) + "," + std::to_string(kprime) +
                              "}; the ratio is undefined");
  }
  return num / den;
}

double mle_objective(const std::vector<double>& fitted_p,
                     const std::map<std::pair<int, int>, double>& fitted_r,
                     const PairStats& stats) {
  if (static_cast<int>(fitted_p.size()) != stats.M) {
    throw ArgumentError("fitted_p must have one entry per position 1..M");
  }
  for (double p : fitted_p) check_unit_interval(p, "fitted_p entry");
  for (const auto& [key, r] : fitted_r) check_unit_interval(r, "fitted_r entry");

  double total = 0.0;
  for (const LikelihoodPair& pr : select_pairs(stats, 0.0)) {
    auto it = fitted_r.find({pr.k, pr.kprime});
    if (it == fitted_r.end()) {
      throw ArgumentError("fitted_r is missing pair {" + std::to_string(pr.k) +
                          "," + std::to_string(pr.kprime) + "}");
    }
    double r = it->second;
    total += position_terms(pr.c_k, pr.nc_k, fitted_p[pr.k - 1], r);
    total += position_terms(pr.c_kp, pr.nc_kp, fitted_p[pr.kprime - 1], r);
  }
  return total;
}

MleGradient mle_gradient(const std::vector<double>& fitted_p,
                         const std::map<std::pair<int, int>, double>& fitted_r,
                         const PairStats& stats) {
  if (static_cast<int>(fitted_p.size()) != stats.M) {
    throw ArgumentError("fitted_p must have one entry per position 1..M");
  }
  for (double p : fitted_p) check_unit_interval(p, "fitted_p entry");
  for (const auto& [key, r] : fitted_r) check_unit_interval(r, "fitted_r entry");

  MleGradient g;
  g.d_p.assign(stats.M, 0.0);
  for (const LikelihoodPair& pr : select_pairs(stats, 0.0)) {
    auto it = fitted_r.find({pr.k, pr.kprime});
    if (it == fitted_r.end()) {
      throw ArgumentError("fitted_r is missing pair {" + std::to_string(pr.k) +
                          "," + std::to_string(pr.kprime) + "}");
    }
    double r = it->second;
    double dr = 0.0;
    struct {
      int pos;
      double c, nc;
    } sides[2] = {{pr.k, pr.c_k, pr.nc_k}, {pr.kprime, pr.c_kp, pr.nc_kp}};
    for (const auto& s : sides) {
      double p = fitted_p[s.pos - 1];
      double u = p * r;
      double dp = 0.0;
      if (s.c > 0.0) {
        dp += s.c / p;
        dr += s.c / r;
      }
      if (s.nc > 0.0) {
        dp -= s.nc * r / (1.0 - u);
        dr -= s.nc * p / (1.0 - u);
      }
      g.d_p[s.pos - 1] += dp;
    }
    g.d_r[{pr.k, pr.kprime}] = dr;
  }
  return g;
}

IdentifiabilityReport check_identifiability(const PairStats& stats) {
  IdentifiabilityReport rep;
  rep.M = stats.M;
  auto pairs = select_pairs(stats, 0.0);
  for (const auto& pr : pairs) {
    if (pr.c_k + pr.nc_k > 0.0 && pr.c_kp + pr.nc_kp > 0.0) {
      rep.edges.emplace_back(pr.k, pr.kprime);
    }
  }
  std::vector<char> seen = component_of_one(pairs, stats.M);
  for (int k = 1; k <= stats.M; ++k) {
    (seen[k] ? rep.component_of_position_1 : rep.unidentifiable).push_back(k);
  }
  return rep;
}

PropensityEstimate fit_mle(const PairStats& stats, const FitOptions& options) {
  options.validate();
  const int M = stats.M;
  if (M < 2) throw ArgumentError("PairStats must cover at least 2 positions");

  std::vector<LikelihoodPair> pairs = select_pairs(stats, options.min_pair_mass);
  if (pairs.empty()) {
    throw EstimationImpossibleError(
        "no interventional pair carries impression mass; the rankers never "
        "disagreed within the top positions");
  }
  std::vector<char> in_comp = component_of_one(pairs, M);
  bool any_linked = false;
  for (int k = 2; k <= M; ++k) any_linked = any_linked || in_comp[k];
  if (!any_linked) {
    throw EstimationImpossibleError(
        "no interventional pair links position 1 to any other position; "
        "every relative propensity is unidentifiable");
  }

  const size_t P = pairs.size();
  const size_t dim = static_cast<size_t>(M) + P;

  // theta -> (p, r) through the logistic map; start at p = r = 0.5.
  std::vector<double> theta(dim, 0.0);
  std::vector<double> p(M), r(P);

  auto unpack = [&](const std::vector<double>& th) {
    for (int i = 0; i < M; ++i) p[i] = sigmoid(th[i]);
    for (size_t j = 0; j < P; ++j) r[j] = sigmoid(th[M + j]);
  };

  auto eval = [&](const std::vector<double>& th) {
    unpack(th);
    double total = 0.0;
    for (size_t j = 0; j < P; ++j) {
      const LikelihoodPair& pr = pairs[j];
      total += position_terms(pr.c_k, pr.nc_k, p[pr.k - 1], r[j]);
      total += position_terms(pr.c_kp, pr.nc_kp, p[pr.kprime - 1], r[j]);
    }
    return total;
  };

  // Ascent gradient in theta space (chain rule through the logistic map),
  // plus the Fisher-information diagonal used to rescale the ascent
  // direction. Without the rescaling the mass disparity across pairs makes
  // plain ascent zigzag for ~1e5 iterations on routine instances.
  auto gradient = [&](const std::vector<double>& th, std::vector<double>& g,
                      std::vector<double>& fisher) {
    unpack(th);
    std::fill(g.begin(), g.end(), 0.0);
    std::fill(fisher.begin(), fisher.end(), 0.0);
    for (size_t j = 0; j < P; ++j) {
      const LikelihoodPair& pr = pairs[j];
      double rj = r[j];
      double dr = 0.0;
      struct {
        int pos;
        double c, nc;
      } sides[2] = {{pr.k, pr.c_k, pr.nc_k}, {pr.kprime, pr.c_kp, pr.nc_kp}};
      for (const auto& s : sides) {
        double pk = p[s.pos - 1];
        double u = pk * rj;
        double dp = 0.0;
        if (s.c > 0.0) {
          dp += s.c / pk;
          dr += s.c / rj;
        }
        if (s.nc > 0.0) {
          dp -= s.nc * rj / (1.0 - u);
          dr -= s.nc * pk / (1.0 - u);
        }
        g[s.pos - 1] += dp * pk * (1.0 - pk);
        double mass = s.c + s.nc;
        if (mass > 0.0) {
          double info = mass / (u * (1.0 - u));
          double du_dtp = rj * pk * (1.0 - pk);
          double du_dtr = pk * rj * (1.0 - rj);
          fisher[s.pos - 1] += du_dtp * du_dtp * info;
          fisher[M + j] += du_dtr * du_dtr * info;
        }
      }
      g[M + j] = dr * rj * (1.0 - rj);
    }
  };

  PropensityEstimate est;
  est.M = M;

  std::vector<double> g(dim), fisher(dim), dir(dim), trial(dim);
  double value = eval(theta);
  if (options.record_trace) est.objective_trace.push_back(value);

  double step = 1.0;
  int accepted = 0;
  bool converged = false;

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    gradient(theta, g, fisher);
    double gnorm = 0.0;
    for (double gi : g) gnorm = std::max(gnorm, std::abs(gi));
    if (gnorm <= options.gradient_tolerance) {
      converged = true;
      break;
    }

    // Fisher-rescaled ascent direction; g.dir > 0 since the scaling is
    // positive, so Armijo acceptance still guarantees monotone ascent.
    double slope = 0.0;
    for (size_t i = 0; i < dim; ++i) {
      dir[i] = g[i] / std::max(fisher[i], 1e-12);
      slope += g[i] * dir[i];
    }

    // Warm-start from the previous accepted step, then halve until the
    // Armijo condition holds.
    double alpha = std::min(step * 2.0, 4.0);
    bool moved = false;
    while (alpha >= 1e-20) {
      for (size_t i = 0; i < dim; ++i) trial[i] = theta[i] + alpha * dir[i];
      double trial_value = eval(trial);
      if (trial_value >= value + 1e-4 * alpha * slope) {
        theta.swap(trial);
        value = trial_value;
        step = alpha;
        moved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!moved) break;  // no representable step improves the objective
    ++accepted;
    if (options.record_trace) est.objective_trace.push_back(value);
  }

  unpack(theta);
  est.fitted_p.assign(p.begin(), p.end());
  for (size_t j = 0; j < P; ++j) {
    est.fitted_r[{pairs[j].k, pairs[j].kprime}] = r[j];
  }
  est.objective_value = value;
  est.iterations = accepted;
  est.converged = converged;

  est.rel_propensity.assign(M, kNaN);
  for (int k = 1; k <= M; ++k) {
    if (in_comp[k]) {
      est.rel_propensity[k - 1] = est.fitted_p[k - 1] / est.fitted_p[0];
    } else {
      est.unidentifiable.push_back(k);
    }
  }
  return est;
}

PropensityEstimate pairwise_estimate(const PairStats& stats) {
  const int M = stats.M;
  if (M < 2) throw ArgumentError("PairStats must cover at least 2 positions");

  PropensityEstimate est;
  est.M = M;
  est.rel_propensity.assign(M, kNaN);
  est.rel_propensity[0] = 1.0;
  est.objective_value = kNaN;
  est.iterations = 0;
  est.converged = true;

  bool any = false;
  for (int k = 2; k <= M; ++k) {
    try {
      est.rel_propensity[k - 1] = pairwise_ratio(stats, k, 1);
      any = true;
    } catch (const UndefinedRatioError&) {
      est.unidentifiable.push_back(k);
    }
  }
  if (!any) {
    throw EstimationImpossibleError(
        "every pairwise ratio against position 1 is undefined; no usable "
        "clicks in the {k,1} interventional sets");
  }
  return est;
}

void save_estimate(const PropensityEstimate& estimate,
                   const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  nlohmann::json j;
  j["rel_propensity"] = estimate.rel_propensity;  // NaN serializes as null
  j["unidentifiable"] = estimate.unidentifiable;
  j["objective_value"] = estimate.objective_value;
  j["iterations"] = estimate.iterations;
  j["converged"] = estimate.converged;
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace posbias
