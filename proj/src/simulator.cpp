#include "posbias/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "json.hpp"
#include "posbias/errors.hpp"

namespace posbias {

using nlohmann::json;

namespace {

const char* kRankerIds[2] = {"A", "B"};

struct DisplayEntry {
  const std::vector<std::string>* ranking = nullptr;
  std::vector<uint8_t> relevance;  // in display order
};

}  // namespace

void SimulationConfig::validate() const {
  if (eta < 0) throw ArgumentError("eta must be >= 0");
  if (eps_minus < 0 || eps_minus > 1) {
    throw ArgumentError("eps_minus must lie in [0, 1]");
  }
  if (overlap < 0 || overlap > 1) {
    throw ArgumentError("overlap must lie in [0, 1]");
  }
  if (sweeps < 1) throw ArgumentError("sweeps must be >= 1");
  if (M < 1) throw ArgumentError("M must be >= 1");
  if (num_queries < 1) throw ArgumentError("num_queries must be >= 1");
  if (candidates_per_query < 2) {
    throw ArgumentError("candidates_per_query must be >= 2");
  }
  // Closed interval: the endpoints are degenerate but well-defined labels.
  if (relevant_fraction < 0 || relevant_fraction > 1) {
    throw ArgumentError("relevant_fraction must lie in [0, 1]");
  }
  if (score_noise < 0) throw ArgumentError("score_noise must be >= 0");
}

const char* to_string(SamplingMode mode) {
  return mode == SamplingMode::kSweep ? "sweep" : "iid-sampling";
}

SamplingMode sampling_mode_from_string(const std::string& s) {
  if (s == "sweep") return SamplingMode::kSweep;
  if (s == "iid-sampling") return SamplingMode::kIidSampling;
  throw ParseError("unknown sampling mode \"" + s +
                   "\" (expected \"sweep\" or \"iid-sampling\")");
}

SimulationConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw ParseError(path + ": config must be a JSON object");
  }
  SimulationConfig cfg;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "eta") cfg.eta = value.get<double>();
      else if (key == "eps_minus") cfg.eps_minus = value.get<double>();
      else if (key == "overlap") cfg.overlap = value.get<double>();
      else if (key == "sweeps") cfg.sweeps = value.get<int>();
      else if (key == "M") cfg.M = value.get<int>();
      else if (key == "num_queries") cfg.num_queries = value.get<int>();
      else if (key == "candidates_per_query")
        cfg.candidates_per_query = value.get<int>();
      else if (key == "relevant_fraction")
        cfg.relevant_fraction = value.get<double>();
      else if (key == "seed") cfg.seed = value.get<uint64_t>();
      else if (key == "mode")
        cfg.mode = sampling_mode_from_string(value.get<std::string>());
      else if (key == "score_noise") cfg.score_noise = value.get<double>();
      else
        throw ParseError(path + ": unknown config key \"" + key + "\"");
    } catch (const json::exception&) {
      throw ParseError(path + ": bad value for config key \"" + key + "\"");
    }
  }
  cfg.validate();
  return cfg;
}

Corpus generate_corpus(const SimulationConfig& cfg, RandomStream& rng) {
  cfg.validate();
  std::vector<QueryRecord> queries;
  queries.reserve(cfg.num_queries);
  for (int qi = 0; qi < cfg.num_queries; ++qi) {
    QueryRecord q;
    q.query_id = "q" + std::to_string(qi);
    q.candidates.reserve(cfg.candidates_per_query);
    q.relevance.reserve(cfg.candidates_per_query);
    for (int di = 0; di < cfg.candidates_per_query; ++di) {
      q.candidates.push_back("d" + std::to_string(di));
      q.relevance.push_back(rng.next_unit() < cfg.relevant_fraction ? 1 : 0);
    }
    queries.push_back(std::move(q));
  }
  return Corpus::from_queries(std::move(queries));
}

Corpus generate_corpus(const SimulationConfig& cfg) {
  RandomStream rng(derive_seed(cfg.seed, {kCorpusStream}));
  return generate_corpus(cfg, rng);
}

RankingTable generate_rankers(const Corpus& corpus, double overlap,
                              RandomStream& rng, double score_noise) {
  if (overlap < 0 || overlap > 1) {
    throw ArgumentError("overlap must lie in [0, 1]");
  }
  if (score_noise < 0) throw ArgumentError("score_noise must be >= 0");
  const double w_shared = std::sqrt(overlap);
  const double w_own = std::sqrt(1.0 - overlap);

  RankingTable table;
  std::vector<std::pair<double, int>> scored;  // (-score used via comparator)
  for (const QueryRecord& q : corpus.queries()) {
    const size_t n = q.candidates.size();
    std::vector<double> score_a(n), score_b(n);
    for (size_t d = 0; d < n; ++d) {
      double z_shared = rng.next_normal();
      double z_a = rng.next_normal();
      double z_b = rng.next_normal();
      double rel = static_cast<double>(q.relevance[d]);
      score_a[d] = rel + score_noise * (w_shared * z_shared + w_own * z_a);
      score_b[d] = rel + score_noise * (w_shared * z_shared + w_own * z_b);
    }
    for (int r = 0; r < 2; ++r) {
      const std::vector<double>& score = (r == 0) ? score_a : score_b;
      scored.clear();
      for (size_t d = 0; d < n; ++d) scored.emplace_back(score[d], d);
      std::sort(scored.begin(), scored.end(),
                [&q](const auto& x, const auto& y) {
                  if (x.first != y.first) return x.first > y.first;
                  return q.candidates[x.second] < q.candidates[y.second];
                });
      std::vector<std::string> ranking;
      ranking.reserve(n);
      for (const auto& [s, d] : scored) ranking.push_back(q.candidates[d]);
      table.entries.emplace(std::make_pair(kRankerIds[r], q.query_id),
                            std::move(ranking));
    }
  }
  return table;
}

RankingTable generate_rankers(const Corpus& corpus,
                              const SimulationConfig& cfg) {
  cfg.validate();
  RandomStream rng(derive_seed(cfg.seed, {kRankerStream}));
  return generate_rankers(corpus, cfg.overlap, rng, cfg.score_noise);
}

std::vector<double> true_propensities(double eta, int M) {
  if (eta < 0) throw ArgumentError("eta must be >= 0");
  if (M < 1) throw ArgumentError("M must be >= 1");
  std::vector<double> p(M);
  for (int r = 1; r <= M; ++r) {
    p[r - 1] = std::pow(1.0 / static_cast<double>(r), eta);
  }
  return p;
}

namespace {

LogCollection simulate_impl(const RankingTable& rankings, const Corpus& corpus,
                            const SimulationConfig& cfg, bool parallel) {
  cfg.validate();

  // Ranker set comes from the table; every (ranker, query) must be covered.
  std::set<std::string> ranker_set;
  for (const auto& [key, ranking] : rankings.entries) {
    ranker_set.insert(key.first);
  }
  if (ranker_set.empty()) {
    throw ConsistencyError("ranking table is empty; nothing to simulate");
  }
  std::vector<std::string> rankers(ranker_set.begin(), ranker_set.end());

  const size_t num_q = corpus.size();
  // Display entry per (ranker, query): ranking pointer plus relevance
  // labels resolved into display order once, outside the record loop.
  std::vector<DisplayEntry> display(rankers.size() * num_q);
  for (size_t r = 0; r < rankers.size(); ++r) {
    for (size_t qi = 0; qi < num_q; ++qi) {
      const QueryRecord& q = corpus.query(qi);
      auto it = rankings.entries.find(std::make_pair(rankers[r], q.query_id));
      if (it == rankings.entries.end()) {
        throw ConsistencyError("no ranking for (" + rankers[r] + ", " +
                               q.query_id + ")");
      }
      DisplayEntry& e = display[r * num_q + qi];
      e.ranking = &it->second;
      e.relevance.reserve(it->second.size());
      for (const std::string& d : it->second) {
        int pos = corpus.doc_pos(qi, d);
        if (pos < 0) {
          throw ConsistencyError("ranking for (" + rankers[r] + ", " +
                                 q.query_id + ") contains unknown document \"" +
                                 d + "\"");
        }
        e.relevance.push_back(q.relevance[pos]);
      }
    }
  }

  // Click probability by displayed rank, for every displayed position (the
  // decay applies below the estimation cutoff M as well).
  size_t max_len = 0;
  for (const auto& e : display) max_len = std::max(max_len, e.ranking->size());
  std::vector<double> rank_prob(max_len);
  for (size_t r = 1; r <= max_len; ++r) {
    rank_prob[r - 1] = std::pow(1.0 / static_cast<double>(r), cfg.eta);
  }

  const uint64_t per_ranker =
      static_cast<uint64_t>(cfg.sweeps) * static_cast<uint64_t>(num_q);
  const uint64_t total = per_ranker * rankers.size();

  LogCollection logs;
  logs.records.resize(total);

  std::vector<uint64_t> ranker_hash(rankers.size());
  std::vector<uint64_t> query_hash(num_q);
  for (size_t r = 0; r < rankers.size(); ++r) {
    ranker_hash[r] = fnv1a64(rankers[r]);
  }
  for (size_t qi = 0; qi < num_q; ++qi) {
    query_hash[qi] = fnv1a64(corpus.query(qi).query_id);
  }

  const bool iid = cfg.mode == SamplingMode::kIidSampling;
  const int64_t total_i = static_cast<int64_t>(total);

#pragma omp parallel for schedule(static) if (parallel)
  for (int64_t slot = 0; slot < total_i; ++slot) {
    const size_t r = static_cast<size_t>(slot) / per_ranker;
    const uint64_t t = static_cast<uint64_t>(slot) % per_ranker;

    size_t qi;
    uint64_t rep;
    if (iid) {
      RandomStream pick(
          derive_seed(cfg.seed, {kQuerySampleStream, ranker_hash[r], t}));
      qi = static_cast<size_t>(pick.next_below(num_q));
      rep = t;
    } else {
      rep = t / num_q;
      qi = static_cast<size_t>(t % num_q);
    }

    const DisplayEntry& e = display[r * num_q + qi];
    RandomStream rng(derive_seed(
        cfg.seed, {kClickStream, ranker_hash[r], query_hash[qi], rep}));

    ClickLogRecord& rec = logs.records[slot];
    rec.ranker_id = rankers[r];
    rec.query_id = corpus.query(qi).query_id;
    rec.presented_ranking = *e.ranking;
    rec.clicks.resize(e.ranking->size());
    for (size_t d = 0; d < e.ranking->size(); ++d) {
      double p = rank_prob[d];
      if (!e.relevance[d]) p *= cfg.eps_minus;
      rec.clicks[d] = rng.next_unit() < p ? 1 : 0;
    }
  }

  for (size_t r = 0; r < rankers.size(); ++r) {
    logs.log_sizes[rankers[r]] = per_ranker;
  }
  return logs;
}

}  // namespace

LogCollection simulate_clicks(const RankingTable& rankings,
                              const Corpus& corpus,
                              const SimulationConfig& cfg) {
  return simulate_impl(rankings, corpus, cfg, true);
}

LogCollection simulate_clicks_serial(const RankingTable& rankings,
                                     const Corpus& corpus,
                                     const SimulationConfig& cfg) {
  return simulate_impl(rankings, corpus, cfg, false);
}

}  // namespace posbias
