#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "posbias/errors.hpp"
#include "posbias/interventions.hpp"
#include "posbias/rng.hpp"
#include "posbias/simulator.hpp"

using namespace posbias;

namespace {

RankingTable two_ranker_table(
    const std::vector<std::string>& ranking_a,
    const std::vector<std::string>& ranking_b) {
  RankingTable t;
  t.entries[{"A", "q1"}] = ranking_a;
  t.entries[{"B", "q1"}] = ranking_b;
  return t;
}

// Literal evaluation of the defining triple sum for one pair, using only
// the explicit member lists and the weight lookups. Independent of the
// kernel's per-(q,d) position index.
PairCell naive_pair_cell(const LogCollection& logs,
                         const InterventionalSets& sets,
                         const WeightTable& weights, int k, int kprime) {
  PairCell out;
  const auto& members = sets.members(k, kprime);
  auto in_set = [&](const QueryDoc& qd) {
    return std::find(members.begin(), members.end(), qd) != members.end();
  };
  for (const ClickLogRecord& rec : logs.records) {
    for (size_t i = 0; i < rec.presented_ranking.size(); ++i) {
      QueryDoc qd{rec.query_id, rec.presented_ranking[i]};
      if (!in_set(qd)) continue;
      int rank = static_cast<int>(i) + 1;
      double delta = rec.clicks[i];
      if (rank == k) {
        double w = weights.weight(qd, k);
        out.c_at_k += delta / w;
        out.notc_at_k += (1.0 - delta) / w;
        ++out.impressions_at_k;
      } else if (rank == kprime) {
        double w = weights.weight(qd, kprime);
        out.c_at_kprime += delta / w;
        out.notc_at_kprime += (1.0 - delta) / w;
        ++out.impressions_at_kprime;
      }
    }
  }
  if (k > kprime) {
    std::swap(out.c_at_k, out.c_at_kprime);
    std::swap(out.notc_at_k, out.notc_at_kprime);
    std::swap(out.impressions_at_k, out.impressions_at_kprime);
  }
  return out;
}

struct SimBundle {
  Corpus corpus;
  RankingTable table;
  LogCollection logs;
  InterventionalSets sets;
  WeightTable weights;
  PairStats stats;
};

SimBundle simulate_bundle(SimulationConfig cfg) {
  SimBundle b;
  b.corpus = generate_corpus(cfg);
  b.table = generate_rankers(b.corpus, cfg);
  b.logs = simulate_clicks(b.table, b.corpus, cfg);
  b.sets = build_interventional_sets(b.table, cfg.M);
  b.weights = compute_weights(b.table, b.logs.log_sizes, cfg.M);
  b.stats = accumulate_pair_stats(b.logs, b.sets, b.weights);
  return b;
}

}  // namespace

TEST_CASE("pair indexing round-trips") {
  for (int M : {2, 3, 5, 10}) {
    size_t n = pair_count(M);
    CHECK(n == static_cast<size_t>(M) * (M - 1) / 2);
    for (size_t i = 0; i < n; ++i) {
      auto [k, kp] = pair_positions(i, M);
      CHECK(k < kp);
      CHECK(pair_index(k, kp, M) == i);
      CHECK(pair_index(kp, k, M) == i);
    }
  }
}

TEST_CASE("identical rankers produce only empty sets") {
  RankingTable t = two_ranker_table({"a", "b", "c"}, {"a", "b", "c"});
  InterventionalSets sets = build_interventional_sets(t, 3);
  for (const auto& s : sets.sets) CHECK(s.empty());
}

TEST_CASE("the single-swap example at M=3 and M=2") {
  RankingTable t = two_ranker_table({"a", "b", "c"}, {"b", "a", "c"});

  InterventionalSets m3 = build_interventional_sets(t, 3);
  std::vector<QueryDoc> expected{{"q1", "a"}, {"q1", "b"}};
  CHECK(m3.members(1, 2) == expected);
  CHECK(m3.members(1, 3).empty());
  CHECK(m3.members(2, 3).empty());
  CHECK_FALSE(m3.contains(1, 2, {"q1", "c"}));
  CHECK_FALSE(m3.contains(1, 3, {"q1", "c"}));
  CHECK_FALSE(m3.contains(2, 3, {"q1", "c"}));

  InterventionalSets m2 = build_interventional_sets(t, 2);
  CHECK(m2.members(1, 2) == expected);
  CHECK(m2.sets.size() == 1);
}

TEST_CASE("M below 2 or empty table rejected") {
  RankingTable t = two_ranker_table({"a", "b"}, {"b", "a"});
  CHECK_THROWS_AS(build_interventional_sets(t, 1), ArgumentError);
  RankingTable empty;
  CHECK_THROWS_AS(build_interventional_sets(empty, 3), ArgumentError);
}

TEST_CASE("set construction matches exhaustive enumeration on random tables") {
  std::mt19937 gen(2024);
  for (int trial = 0; trial < 25; ++trial) {
    int num_rankers = 2 + static_cast<int>(gen() % 3);
    int num_queries = 1 + static_cast<int>(gen() % 4);
    int num_docs = 3 + static_cast<int>(gen() % 5);
    int M = 2 + static_cast<int>(gen() % 4);

    RankingTable table;
    for (int r = 0; r < num_rankers; ++r) {
      for (int q = 0; q < num_queries; ++q) {
        std::vector<std::string> docs;
        for (int d = 0; d < num_docs; ++d) {
          docs.push_back("d" + std::to_string(d));
        }
        std::shuffle(docs.begin(), docs.end(), gen);
        table.entries[{"r" + std::to_string(r), "q" + std::to_string(q)}] =
            docs;
      }
    }

    InterventionalSets sets = build_interventional_sets(table, M);

    for (int k = 1; k <= M; ++k) {
      for (int kp = k + 1; kp <= M; ++kp) {
        std::vector<QueryDoc> expected;
        for (int q = 0; q < num_queries; ++q) {
          std::string query = "q" + std::to_string(q);
          for (int d = 0; d < num_docs; ++d) {
            std::string doc = "d" + std::to_string(d);
            bool at_k = false, at_kp = false;
            for (const auto& [key, ranking] : table.entries) {
              if (key.second != query) continue;
              for (size_t i = 0; i < ranking.size(); ++i) {
                if (ranking[i] != doc) continue;
                if (static_cast<int>(i) + 1 == k) at_k = true;
                if (static_cast<int>(i) + 1 == kp) at_kp = true;
              }
            }
            if (at_k && at_kp) expected.push_back({query, doc});
          }
        }
        std::sort(expected.begin(), expected.end());
        CHECK(sets.members(k, kp) == expected);
      }
    }
  }
}

TEST_CASE("set construction invariant to ranker labels and record order") {
  SimulationConfig cfg;
  cfg.num_queries = 40;
  cfg.candidates_per_query = 8;
  cfg.sweeps = 2;
  cfg.seed = 31;
  Corpus corpus = generate_corpus(cfg);
  RankingTable table = generate_rankers(corpus, cfg);
  LogCollection logs = simulate_clicks(table, corpus, cfg);

  InterventionalSets base = build_interventional_sets(table, cfg.M);

  RankingTable relabeled;
  for (const auto& [key, ranking] : table.entries) {
    relabeled.entries[{key.first == "A" ? "zeta" : "alpha", key.second}] =
        ranking;
  }
  InterventionalSets renamed = build_interventional_sets(relabeled, cfg.M);
  CHECK(renamed.sets == base.sets);

  std::vector<ClickLogRecord> shuffled = logs.records;
  std::mt19937 gen(9);
  std::shuffle(shuffled.begin(), shuffled.end(), gen);
  RankingTable from_shuffled = derive_rankings(collect_logs(shuffled));
  CHECK(build_interventional_sets(from_shuffled, cfg.M).sets == base.sets);
}

TEST_CASE("compute_weights hand examples") {
  SUBCASE("two rankers, different positions") {
    RankingTable t = two_ranker_table({"d", "e"}, {"e", "d"});
    std::map<std::string, uint64_t> sizes{{"A", 10}, {"B", 20}};
    WeightTable w = compute_weights(t, sizes, 2);
    CHECK(w.weight({"q1", "d"}, 1) == 10.0);
    CHECK(w.weight({"q1", "d"}, 2) == 20.0);
    CHECK(w.weight({"q1", "e"}, 1) == 20.0);
    CHECK(w.weight({"q1", "e"}, 2) == 10.0);
  }
  SUBCASE("agreement sums the masses") {
    RankingTable t = two_ranker_table({"d", "e"}, {"d", "e"});
    std::map<std::string, uint64_t> sizes{{"A", 5}, {"B", 5}};
    WeightTable w = compute_weights(t, sizes, 2);
    CHECK(w.weight({"q1", "d"}, 1) == 10.0);
  }
  SUBCASE("a ranker with no records contributes nothing") {
    RankingTable t;
    t.entries[{"A", "q1"}] = {"d", "e"};
    std::map<std::string, uint64_t> sizes{{"A", 0}};
    WeightTable w = compute_weights(t, sizes, 2);
    CHECK(w.weight({"q1", "d"}, 1) == 0.0);
    CHECK(w.weight({"q1", "e"}, 2) == 0.0);
  }
  SUBCASE("log size for an unknown ranker is a consistency error") {
    RankingTable t = two_ranker_table({"d", "e"}, {"e", "d"});
    std::map<std::string, uint64_t> sizes{{"A", 1}, {"B", 1}, {"C", 5}};
    CHECK_THROWS_AS(compute_weights(t, sizes, 2), ConsistencyError);
  }
  SUBCASE("positions beyond M omitted") {
    RankingTable t = two_ranker_table({"d", "e", "f"}, {"f", "e", "d"});
    std::map<std::string, uint64_t> sizes{{"A", 3}, {"B", 3}};
    WeightTable w = compute_weights(t, sizes, 2);
    CHECK(w.weight({"q1", "f"}, 3) == 0.0);
    CHECK(w.weight({"q1", "d"}, 3) == 0.0);
  }
}

TEST_CASE("accumulate hand instance: 3 clicks in 10 impressions at rank 1") {
  // A ranks [d, e] with 10 records (d clicked in the first 3); B ranks
  // [e, d] with 20 unclicked records. All four sums follow by hand.
  std::vector<ClickLogRecord> records;
  for (int i = 0; i < 10; ++i) {
    ClickLogRecord rec;
    rec.ranker_id = "A";
    rec.query_id = "q1";
    rec.presented_ranking = {"d", "e"};
    rec.clicks = {i < 3 ? uint8_t{1} : uint8_t{0}, 0};
    records.push_back(rec);
  }
  for (int i = 0; i < 20; ++i) {
    ClickLogRecord rec;
    rec.ranker_id = "B";
    rec.query_id = "q1";
    rec.presented_ranking = {"e", "d"};
    rec.clicks = {0, 0};
    records.push_back(rec);
  }
  LogCollection logs = collect_logs(records);
  RankingTable table = derive_rankings(logs);
  InterventionalSets sets = build_interventional_sets(table, 2);
  WeightTable weights = compute_weights(table, logs.log_sizes, 2);
  PairStats stats = accumulate_pair_stats(logs, sets, weights);

  const PairCell& cell = stats.cell(1, 2);
  // d at rank 1 under A: 3/10 clicked, 7/10 not; e at rank 1 under B: 20/20
  // not clicked. Rank 2 gathers e under A (10/10) and d under B (20/20).
  CHECK(cell.c_at_k == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(cell.notc_at_k == doctest::Approx(1.7).epsilon(1e-12));
  CHECK(cell.c_at_kprime == 0.0);
  CHECK(cell.notc_at_kprime == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(cell.impressions_at_k == 30);
  CHECK(cell.impressions_at_kprime == 30);

  // Removing the three clicks moves exactly 3/10 of mass to the no-click sum.
  for (auto& rec : records) rec.clicks.assign(rec.clicks.size(), 0);
  LogCollection quiet = collect_logs(records);
  PairStats stats0 = accumulate_pair_stats(quiet, sets, weights);
  CHECK(stats0.cell(1, 2).c_at_k == 0.0);
  CHECK(stats0.cell(1, 2).notc_at_k ==
        doctest::Approx(cell.notc_at_k + 0.3).epsilon(1e-12));
}

TEST_CASE("zero-click logs have zero click mass and positive no-click mass") {
  SimulationConfig cfg;
  cfg.num_queries = 30;
  cfg.candidates_per_query = 6;
  cfg.sweeps = 2;
  cfg.relevant_fraction = 0.0;
  cfg.eps_minus = 0.0;  // no clicks at all
  cfg.seed = 8;
  SimBundle b = simulate_bundle(cfg);
  bool any_impressions = false;
  for (size_t i = 0; i < b.stats.cells.size(); ++i) {
    const PairCell& c = b.stats.cells[i];
    CHECK(c.c_at_k == 0.0);
    CHECK(c.c_at_kprime == 0.0);
    if (c.impressions_at_k > 0) {
      CHECK(c.notc_at_k > 0.0);
      any_impressions = true;
    }
  }
  CHECK(any_impressions);
}

TEST_CASE("duplicating the whole log leaves PairStats unchanged") {
  SimulationConfig cfg;
  cfg.num_queries = 80;
  cfg.candidates_per_query = 10;
  cfg.sweeps = 3;
  cfg.seed = 19;
  SimBundle b = simulate_bundle(cfg);

  std::vector<ClickLogRecord> doubled = b.logs.records;
  doubled.insert(doubled.end(), b.logs.records.begin(), b.logs.records.end());
  LogCollection logs2 = collect_logs(doubled);
  WeightTable weights2 = compute_weights(b.table, logs2.log_sizes, cfg.M);
  PairStats stats2 = accumulate_pair_stats(logs2, b.sets, weights2);

  for (size_t i = 0; i < b.stats.cells.size(); ++i) {
    CHECK(std::abs(stats2.cells[i].c_at_k - b.stats.cells[i].c_at_k) <= 1e-12);
    CHECK(std::abs(stats2.cells[i].c_at_kprime -
                   b.stats.cells[i].c_at_kprime) <= 1e-12);
    CHECK(std::abs(stats2.cells[i].notc_at_k - b.stats.cells[i].notc_at_k) <=
          1e-12);
    CHECK(std::abs(stats2.cells[i].notc_at_kprime -
                   b.stats.cells[i].notc_at_kprime) <= 1e-12);
    CHECK(stats2.cells[i].impressions_at_k ==
          2 * b.stats.cells[i].impressions_at_k);
  }
}

TEST_CASE("sweep-mode mass identity: c + notc = |S| / |Q| per side") {
  for (uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    SimulationConfig cfg;
    cfg.num_queries = 60;
    cfg.candidates_per_query = 12;
    cfg.sweeps = seed == 1 ? 1 : 4;  // identity must hold for any s
    cfg.eta = 1.0;
    cfg.eps_minus = 0.1;
    cfg.seed = seed;
    SimBundle b = simulate_bundle(cfg);

    double inv_q = 1.0 / static_cast<double>(cfg.num_queries);
    for (size_t i = 0; i < b.stats.cells.size(); ++i) {
      double set_mass = static_cast<double>(b.sets.sets[i].size()) * inv_q;
      const PairCell& c = b.stats.cells[i];
      CHECK(std::abs(c.c_at_k + c.notc_at_k - set_mass) <= 1e-9);
      CHECK(std::abs(c.c_at_kprime + c.notc_at_kprime - set_mass) <= 1e-9);
    }
  }
}

TEST_CASE("naive nested-loop oracle agrees on small instances") {
  std::mt19937 gen(5150);
  for (int trial = 0; trial < 10; ++trial) {
    SimulationConfig cfg;
    cfg.num_queries = 5;
    cfg.candidates_per_query = 6;
    cfg.sweeps = 1 + static_cast<int>(gen() % 5);  // <= 50 records total
    cfg.M = 4;
    cfg.eta = 0.5;
    cfg.eps_minus = 0.3;
    cfg.relevant_fraction = 0.4;
    cfg.overlap = 0.2;
    cfg.seed = gen();
    SimBundle b = simulate_bundle(cfg);
    REQUIRE(b.logs.records.size() <= 50);

    for (int k = 1; k <= cfg.M; ++k) {
      for (int kp = k + 1; kp <= cfg.M; ++kp) {
        PairCell expect = naive_pair_cell(b.logs, b.sets, b.weights, k, kp);
        const PairCell& got = b.stats.cell(k, kp);
        CHECK(std::abs(got.c_at_k - expect.c_at_k) <= 1e-12);
        CHECK(std::abs(got.c_at_kprime - expect.c_at_kprime) <= 1e-12);
        CHECK(std::abs(got.notc_at_k - expect.notc_at_k) <= 1e-12);
        CHECK(std::abs(got.notc_at_kprime - expect.notc_at_kprime) <= 1e-12);
        CHECK(got.impressions_at_k == expect.impressions_at_k);
        CHECK(got.impressions_at_kprime == expect.impressions_at_kprime);
      }
    }
  }
}

TEST_CASE("output independent of chunk size and equal to the serial pass") {
  SimulationConfig cfg;
  cfg.num_queries = 50;
  cfg.candidates_per_query = 9;
  cfg.sweeps = 3;
  cfg.seed = 23;
  SimBundle b = simulate_bundle(cfg);

  PairStats serial = accumulate_pair_stats_serial(b.logs, b.sets, b.weights);
  for (size_t chunk : {size_t{1}, size_t{3}, size_t{17}, size_t{100000}}) {
    PairStats chunked =
        accumulate_pair_stats(b.logs, b.sets, b.weights, chunk);
    for (size_t i = 0; i < serial.cells.size(); ++i) {
      CHECK(std::abs(chunked.cells[i].c_at_k - serial.cells[i].c_at_k) <=
            1e-12);
      CHECK(std::abs(chunked.cells[i].c_at_kprime -
                     serial.cells[i].c_at_kprime) <= 1e-12);
      CHECK(std::abs(chunked.cells[i].notc_at_k - serial.cells[i].notc_at_k) <=
            1e-12);
      CHECK(std::abs(chunked.cells[i].notc_at_kprime -
                     serial.cells[i].notc_at_kprime) <= 1e-12);
      CHECK(chunked.cells[i].impressions_at_k ==
            serial.cells[i].impressions_at_k);
    }
  }
}

TEST_CASE("records at positions beyond M contribute nothing") {
  // Candidate lists longer than M: the pair stats must match a run whose
  // clicks beyond M are zeroed out, because those positions are ignored.
  SimulationConfig cfg;
  cfg.num_queries = 20;
  cfg.candidates_per_query = 8;
  cfg.M = 3;
  cfg.sweeps = 2;
  cfg.seed = 99;
  SimBundle b = simulate_bundle(cfg);

  std::vector<ClickLogRecord> truncated = b.logs.records;
  for (auto& rec : truncated) {
    for (size_t i = cfg.M; i < rec.clicks.size(); ++i) rec.clicks[i] = 0;
  }
  PairStats again = accumulate_pair_stats(collect_logs(truncated), b.sets,
                                          b.weights);
  for (size_t i = 0; i < b.stats.cells.size(); ++i) {
    CHECK(again.cells[i].c_at_k == b.stats.cells[i].c_at_k);
    CHECK(again.cells[i].notc_at_k == b.stats.cells[i].notc_at_k);
    CHECK(again.cells[i].c_at_kprime == b.stats.cells[i].c_at_kprime);
    CHECK(again.cells[i].notc_at_kprime == b.stats.cells[i].notc_at_kprime);
  }
}

TEST_CASE("save_pair_stats writes one object per pair") {
  SimulationConfig cfg;
  cfg.num_queries = 10;
  cfg.candidates_per_query = 5;
  cfg.M = 4;
  cfg.sweeps = 1;
  cfg.seed = 1;
  SimBundle b = simulate_bundle(cfg);

  auto path = std::filesystem::temp_directory_path() /
              ("posbias_stats_" + std::to_string(::getpid()) + ".jsonl");
  save_pair_stats(b.stats, path.string());
  std::ifstream in(path);
  std::string line;
  size_t lines = 0;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 1 + pair_count(cfg.M));  // header + one per pair
  std::filesystem::remove(path);
}
