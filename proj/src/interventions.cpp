#include "posbias/interventions.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <set>

#include "json.hpp"
#include "posbias/errors.hpp"
#include "posbias/rng.hpp"

namespace posbias {

namespace {

// Kahan-Neumaier style compensated accumulator.
struct KahanSum {
  double sum = 0.0;
  double comp = 0.0;

  void add(double x) {
    double y = x - comp;
    double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  // Folds another accumulator in, correction term included.
  void merge(const KahanSum& other) {
    add(other.sum);
    add(-other.comp);
  }
};

struct CellAcc {
  KahanSum c_at_k;
  KahanSum c_at_kprime;
  KahanSum notc_at_k;
  KahanSum notc_at_kprime;
  uint64_t impressions_at_k = 0;
  uint64_t impressions_at_kprime = 0;
};

void check_pair_args(int k, int kprime, int M) {
  if (k < 1 || k > M || kprime < 1 || kprime > M || k == kprime) {
    throw ArgumentError("positions must be distinct and lie in [1, " +
                        std::to_string(M) + "]");
  }
}

}  // namespace

size_t QueryDocHash::operator()(const QueryDoc& qd) const noexcept {
  return static_cast<size_t>(
      mix64(fnv1a64(qd.query_id) ^ (fnv1a64(qd.doc_id) * 0x9e3779b97f4a7c15ULL)));
}

size_t pair_count(int M) {
  return static_cast<size_t>(M) * (M - 1) / 2;
}

size_t pair_index(int k, int kprime, int M) {
  if (k > kprime) std::swap(k, kprime);
  // pairs (k, k') with k < k', scanned in lexicographic order
  return static_cast<size_t>(k - 1) * M - static_cast<size_t>(k) * (k + 1) / 2 +
         kprime - 1;
}

std::pair<int, int> pair_positions(size_t index, int M) {
  size_t offset = 0;
  for (int k = 1; k < M; ++k) {
    size_t row = static_cast<size_t>(M - k);
    if (index < offset + row) {
      return {k, k + 1 + static_cast<int>(index - offset)};
    }
    offset += row;
  }
  throw ArgumentError("pair index out of range");
}

const std::vector<QueryDoc>& InterventionalSets::members(int k,
                                                         int kprime) const {
  check_pair_args(k, kprime, M);
  return sets[pair_index(k, kprime, M)];
}

bool InterventionalSets::contains(int k, int kprime, const QueryDoc& qd) const {
  check_pair_args(k, kprime, M);
  auto it = positions.find(qd);
  if (it == positions.end()) return false;
  const auto& pos = it->second;
  return std::binary_search(pos.begin(), pos.end(), k) &&
         std::binary_search(pos.begin(), pos.end(), kprime);
}

double WeightTable::weight(const QueryDoc& qd, int position) const {
  auto it = weights.find(qd);
  if (it == weights.end()) return 0.0;
  for (const auto& [pos, mass] : it->second) {
    if (pos == position) return mass;
  }
  return 0.0;
}

PairStats PairStats::zeros(int M) {
  if (M < 2) throw ArgumentError("M must be >= 2");
  PairStats s;
  s.M = M;
  s.cells.resize(pair_count(M));
  return s;
}

const PairCell& PairStats::cell(int k, int kprime) const {
  check_pair_args(k, kprime, M);
  return cells[pair_index(k, kprime, M)];
}

double PairStats::click_mass(int pos, int other) const {
  const PairCell& c = cell(pos, other);
  return pos < other ? c.c_at_k : c.c_at_kprime;
}

double PairStats::noclick_mass(int pos, int other) const {
  const PairCell& c = cell(pos, other);
  return pos < other ? c.notc_at_k : c.notc_at_kprime;
}

uint64_t PairStats::impressions(int pos, int other) const {
  const PairCell& c = cell(pos, other);
  return pos < other ? c.impressions_at_k : c.impressions_at_kprime;
}

double PairStats::pair_mass(int k, int kprime) const {
  const PairCell& c = cell(k, kprime);
  return c.c_at_k + c.c_at_kprime + c.notc_at_k + c.notc_at_kprime;
}

InterventionalSets build_interventional_sets(const RankingTable& rankings,
                                             int M) {
  if (M < 2) throw ArgumentError("M must be >= 2");
  if (rankings.entries.empty()) {
    throw ArgumentError("ranking table is empty");
  }

  InterventionalSets out;
  out.M = M;
  out.sets.resize(pair_count(M));

  for (const auto& [key, ranking] : rankings.entries) {
    const std::string& query = key.second;
    int limit = std::min<int>(M, static_cast<int>(ranking.size()));
    for (int idx = 0; idx < limit; ++idx) {
      QueryDoc qd{query, ranking[idx]};
      auto& pos = out.positions[qd];
      int p = idx + 1;
      if (std::find(pos.begin(), pos.end(), p) == pos.end()) {
        pos.push_back(p);
      }
    }
  }

  for (auto& [qd, pos] : out.positions) {
    std::sort(pos.begin(), pos.end());
    for (size_t i = 0; i < pos.size(); ++i) {
      for (size_t j = i + 1; j < pos.size(); ++j) {
        out.sets[pair_index(pos[i], pos[j], M)].push_back(qd);
      }
    }
  }
  // unordered_map iteration order leaked into the sets; fix it
  for (auto& s : out.sets) std::sort(s.begin(), s.end());
  return out;
}

WeightTable compute_weights(const RankingTable& rankings,
                            const std::map<std::string, uint64_t>& log_sizes,
                            int M) {
  if (M < 1) throw ArgumentError("M must be >= 1");

  std::set<std::string> rankers;
  for (const auto& [key, ranking] : rankings.entries) rankers.insert(key.first);
  for (const auto& [ranker, n] : log_sizes) {
    if (!rankers.count(ranker)) {
      throw ConsistencyError("log_sizes mentions ranker \"" + ranker +
                             "\" which is absent from the ranking table");
    }
  }

  WeightTable out;
  out.M = M;
  for (const auto& [key, ranking] : rankings.entries) {
    auto it = log_sizes.find(key.first);
    // A ranker without a log contributes no impressions, hence no mass.
    if (it == log_sizes.end() || it->second == 0) continue;
    double n = static_cast<double>(it->second);
    int limit = std::min<int>(M, static_cast<int>(ranking.size()));
    for (int idx = 0; idx < limit; ++idx) {
      QueryDoc qd{key.second, ranking[idx]};
      auto& entries = out.weights[qd];
      int p = idx + 1;
      bool found = false;
      for (auto& [pos, mass] : entries) {
        if (pos == p) {
          mass += n;
          found = true;
          break;
        }
      }
      if (!found) entries.emplace_back(p, n);
    }
  }
  for (auto& [qd, entries] : out.weights) {
    std::sort(entries.begin(), entries.end());
  }
  return out;
}

namespace {

// Accumulates records [begin, end) into acc in record order.
// Returns false on a zero weight at a contributing position, which violates
// the construction contract between sets, weights and logs.
bool accumulate_range(const std::vector<ClickLogRecord>& records, size_t begin,
                      size_t end, const InterventionalSets& sets,
                      const WeightTable& weights, std::vector<CellAcc>& acc) {
  const int M = sets.M;
  for (size_t j = begin; j < end; ++j) {
    const ClickLogRecord& rec = records[j];
    const int limit =
        std::min<int>(M, static_cast<int>(rec.presented_ranking.size()));
    for (int idx = 0; idx < limit; ++idx) {
      const int pos = idx + 1;
      QueryDoc qd{rec.query_id, rec.presented_ranking[idx]};
      auto it = sets.positions.find(qd);
      if (it == sets.positions.end()) continue;
      const std::vector<int>& plist = it->second;
      // (q,d) is in S_{pos,k'} only if the table also places it at pos.
      if (!std::binary_search(plist.begin(), plist.end(), pos)) continue;
      if (plist.size() < 2) continue;

      const double w = weights.weight(qd, pos);
      if (!(w > 0.0)) return false;
      const double share = 1.0 / w;
      const bool clicked = rec.clicks[idx] != 0;

      for (int other : plist) {
        if (other == pos) continue;
        CellAcc& cell = acc[pair_index(pos, other, M)];
        const bool low_side = pos < other;
        if (clicked) {
          (low_side ? cell.c_at_k : cell.c_at_kprime).add(share);
        } else {
          (low_side ? cell.notc_at_k : cell.notc_at_kprime).add(share);
        }
        ++(low_side ? cell.impressions_at_k : cell.impressions_at_kprime);
      }
    }
  }
  return true;
}

PairStats finalize(const std::vector<CellAcc>& acc, int M) {
  PairStats stats = PairStats::zeros(M);
  for (size_t i = 0; i < acc.size(); ++i) {
    stats.cells[i].c_at_k = acc[i].c_at_k.sum;
    stats.cells[i].c_at_kprime = acc[i].c_at_kprime.sum;
    stats.cells[i].notc_at_k = acc[i].notc_at_k.sum;
    stats.cells[i].notc_at_kprime = acc[i].notc_at_kprime.sum;
    stats.cells[i].impressions_at_k = acc[i].impressions_at_k;
    stats.cells[i].impressions_at_kprime = acc[i].impressions_at_kprime;
  }
  return stats;
}

}  // namespace

PairStats accumulate_pair_stats_serial(const LogCollection& logs,
                                       const InterventionalSets& sets,
                                       const WeightTable& weights) {
  std::vector<CellAcc> acc(pair_count(sets.M));
  if (!accumulate_range(logs.records, 0, logs.records.size(), sets, weights,
                        acc)) {
    throw ConsistencyError(
        "zero weight at a contributing position; logs do not match the "
        "ranking table the weights were built from");
  }
  return finalize(acc, sets.M);
}

PairStats accumulate_pair_stats(const LogCollection& logs,
                                const InterventionalSets& sets,
                                const WeightTable& weights,
                                size_t chunk_size) {
  if (chunk_size == 0) throw ArgumentError("chunk_size must be >= 1");
  const size_t n = logs.records.size();
  const size_t cells = pair_count(sets.M);
  const size_t nchunks = n == 0 ? 0 : (n + chunk_size - 1) / chunk_size;

  std::vector<std::vector<CellAcc>> partials(nchunks);
  std::atomic<bool> ok{true};

#pragma omp parallel for schedule(dynamic)
  for (int64_t c = 0; c < static_cast<int64_t>(nchunks); ++c) {
    auto& acc = partials[c];
    acc.assign(cells, CellAcc{});
    size_t begin = static_cast<size_t>(c) * chunk_size;
    size_t end = std::min(n, begin + chunk_size);
    if (!accumulate_range(logs.records, begin, end, sets, weights, acc)) {
      ok.store(false, std::memory_order_relaxed);
    }
  }
  if (!ok.load()) {
    throw ConsistencyError(
        "zero weight at a contributing position; logs do not match the "
        "ranking table the weights were built from");
  }

  // Deterministic merge in chunk order.
  std::vector<CellAcc> total(cells);
  for (size_t c = 0; c < nchunks; ++c) {
    for (size_t i = 0; i < cells; ++i) {
      total[i].c_at_k.merge(partials[c][i].c_at_k);
      total[i].c_at_kprime.merge(partials[c][i].c_at_kprime);
      total[i].notc_at_k.merge(partials[c][i].notc_at_k);
      total[i].notc_at_kprime.merge(partials[c][i].notc_at_kprime);
      total[i].impressions_at_k += partials[c][i].impressions_at_k;
      total[i].impressions_at_kprime += partials[c][i].impressions_at_kprime;
    }
  }
  return finalize(total, sets.M);
}

PairStats accumulate_pair_stats(const LogCollection& logs,
                                const InterventionalSets& sets,
                                const WeightTable& weights) {
  return accumulate_pair_stats(logs, sets, weights, 4096);
}

void save_pair_stats(const PairStats& stats, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  nlohmann::json header;
  header["format"] = "pairstats";
  header["version"] = 1;
  header["M"] = stats.M;
  out << header.dump() << '\n';
  for (size_t i = 0; i < stats.cells.size(); ++i) {
    auto [k, kprime] = pair_positions(i, stats.M);
    const PairCell& c = stats.cells[i];
    nlohmann::json j;
    j["k"] = k;
    j["kprime"] = kprime;
    j["c_at_k"] = c.c_at_k;
    j["c_at_kprime"] = c.c_at_kprime;
    j["notc_at_k"] = c.notc_at_k;
    j["notc_at_kprime"] = c.notc_at_kprime;
    j["impressions_at_k"] = c.impressions_at_k;
    j["impressions_at_kprime"] = c.impressions_at_kprime;
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace posbias
