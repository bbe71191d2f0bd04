#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "posbias/corpus.hpp"

namespace posbias {

struct QueryDoc {
  std::string query_id;
  std::string doc_id;

  bool operator==(const QueryDoc&) const = default;
  auto operator<=>(const QueryDoc&) const = default;
};

struct QueryDocHash {
  size_t operator()(const QueryDoc& qd) const noexcept;
};

// Unordered position pairs {k, k'} with 1 <= k < k' <= M are laid out
// densely: index = (k-1)*M - k*(k+1)/2 + k' - 1 scanned in (k, k') order.
size_t pair_count(int M);
size_t pair_index(int k, int kprime, int M);
std::pair<int, int> pair_positions(size_t index, int M);  // returns k < k'

// S_{k,k'}: (query, doc) pairs placed at position k by some ranker and at
// k' by another. Pairs with empty sets are kept so downstream analysis sees
// the whole pair graph.
struct InterventionalSets {
  int M = 0;
  // pair-indexed; members sorted by (query_id, doc_id)
  std::vector<std::vector<QueryDoc>> sets;
  // distinct positions <= M at which any ranker places the pair, sorted
  std::unordered_map<QueryDoc, std::vector<int>, QueryDocHash> positions;

  const std::vector<QueryDoc>& members(int k, int kprime) const;
  bool contains(int k, int kprime, const QueryDoc& qd) const;
};

// w(q,d,k) = sum_i n_i * 1[ranker i places d at k for q], positions <= M.
struct WeightTable {
  int M = 0;
  // per (q,d): (position, mass) sorted by position
  std::unordered_map<QueryDoc, std::vector<std::pair<int, double>>,
                     QueryDocHash>
      weights;

  double weight(const QueryDoc& qd, int position) const;  // 0 when absent
};

// Weighted click / no-click sums per unordered pair. The cell's "k" is the
// lower of the two positions.
struct PairCell {
  double c_at_k = 0.0;
  double c_at_kprime = 0.0;
  double notc_at_k = 0.0;
  double notc_at_kprime = 0.0;
  uint64_t impressions_at_k = 0;
  uint64_t impressions_at_kprime = 0;
};

struct PairStats {
  int M = 0;
  std::vector<PairCell> cells;  // pair-indexed

  static PairStats zeros(int M);

  const PairCell& cell(int k, int kprime) const;
  // Weighted click mass at position pos within the pair {pos, other}.
  double click_mass(int pos, int other) const;
  double noclick_mass(int pos, int other) const;
  uint64_t impressions(int pos, int other) const;
  // All four sums of the pair; total weighted impression mass.
  double pair_mass(int k, int kprime) const;
};

InterventionalSets build_interventional_sets(const RankingTable& rankings,
                                             int M);

WeightTable compute_weights(const RankingTable& rankings,
                            const std::map<std::string, uint64_t>& log_sizes,
                            int M);

// OpenMP kernel: records are split into fixed-size chunks, each chunk is
// accumulated in record order with compensated addition, and the partials
// are merged in chunk order. Output does not depend on thread count.
PairStats accumulate_pair_stats(const LogCollection& logs,
                                const InterventionalSets& sets,
                                const WeightTable& weights);
PairStats accumulate_pair_stats(const LogCollection& logs,
                                const InterventionalSets& sets,
                                const WeightTable& weights,
                                size_t chunk_size);

// Serial reference: one pass in record order. Kept as the test baseline for
// the parallel kernel.
PairStats accumulate_pair_stats_serial(const LogCollection& logs,
                                       const InterventionalSets& sets,
                                       const WeightTable& weights);

// Diagnostic dump: one JSON object per pair with the four sums and raw
// impression counts.
void save_pair_stats(const PairStats& stats, const std::string& path);

}  // namespace posbias
