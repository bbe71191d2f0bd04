#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "posbias/corpus.hpp"
#include "posbias/rng.hpp"

namespace posbias {

// sweep: each ranker logs every query once per sweep, in corpus order.
// iid-sampling: each record's query is drawn uniformly at random; each
// ranker still contributes sweeps * num_queries records, so the choice of
// ranker never depends on the query.
enum class SamplingMode { kSweep, kIidSampling };

struct SimulationConfig {
  double eta = 1.0;            // position-bias severity; p_r = (1/r)^eta
  double eps_minus = 0.1;      // click-rate multiplier for irrelevant docs
  double overlap = 0.8;        // correlation of the two rankers' score noise
  int sweeps = 5;              // full passes over the query set per ranker
  int M = 10;                  // top-position cutoff for estimation
  int num_queries = 1000;
  int candidates_per_query = 20;
  double relevant_fraction = 0.25;
  uint64_t seed = 0;
  SamplingMode mode = SamplingMode::kSweep;
  double score_noise = 0.5;    // sigma, relative to the unit relevance gap

  void validate() const;  // throws ArgumentError
};

// Flat key/value JSON document with exactly the fields above; unknown keys
// rejected, missing keys take the defaults.
SimulationConfig load_config(const std::string& path);

const char* to_string(SamplingMode mode);
SamplingMode sampling_mode_from_string(const std::string& s);

// Synthetic stand-in corpus: num_queries queries, candidates_per_query
// documents each, labels i.i.d. Bernoulli(relevant_fraction).
Corpus generate_corpus(const SimulationConfig& cfg, RandomStream& rng);
Corpus generate_corpus(const SimulationConfig& cfg);

// Two correlated rankers "A" and "B". Per (query, doc) the score is
//   rel + sigma * (sqrt(overlap) * z_shared + sqrt(1-overlap) * z_own)
// with standard normal draws; candidates sorted by descending score, ties
// broken by document id. overlap=1 makes the rankers identical.
RankingTable generate_rankers(const Corpus& corpus, double overlap,
                              RandomStream& rng, double score_noise = 0.5);
RankingTable generate_rankers(const Corpus& corpus,
                              const SimulationConfig& cfg);

// p_r = (1/r)^eta for r in 1..M.
std::vector<double> true_propensities(double eta, int M);

// Position-Based-Model click simulation. A document displayed at rank r is
// clicked with probability p_r when relevant and p_r * eps_minus when not.
// Every record draws from its own stream derived from (seed, ranker, query,
// repetition index), so output is bitwise-deterministic for a fixed seed no
// matter how the loop is scheduled.
LogCollection simulate_clicks(const RankingTable& rankings,
                              const Corpus& corpus,
                              const SimulationConfig& cfg);
// Serial reference; produces bitwise-identical output.
LogCollection simulate_clicks_serial(const RankingTable& rankings,
                                     const Corpus& corpus,
                                     const SimulationConfig& cfg);

}  // namespace posbias
