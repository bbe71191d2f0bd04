#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace posbias {

// One query with its fixed candidate pool and binary relevance labels.
// Relevance is simulation ground truth; the estimators never read it.
struct QueryRecord {
  std::string query_id;
  std::vector<std::string> candidates;  // ordered, unique within the query
  std::vector<uint8_t> relevance;       // aligned with candidates, 0/1

  bool operator==(const QueryRecord&) const = default;
};

// Validated, immutable after construction. Safe to share across threads.
class Corpus {
 public:
  Corpus() = default;

  // Takes ownership and checks all invariants: unique query ids, unique
  // candidates per query, non-empty candidate lists, aligned labels.
  static Corpus from_queries(std::vector<QueryRecord> queries);

  const std::vector<QueryRecord>& queries() const { return queries_; }
  size_t size() const { return queries_.size(); }
  const QueryRecord& query(size_t i) const { return queries_[i]; }

  std::optional<size_t> index_of(std::string_view query_id) const;
  // Position of doc_id in query i's candidate list, -1 when absent.
  int doc_pos(size_t query_index, std::string_view doc_id) const;

  bool operator==(const Corpus& other) const {
    return queries_ == other.queries_;
  }

 private:
  std::vector<QueryRecord> queries_;
  std::unordered_map<std::string, size_t> query_index_;
  std::vector<std::unordered_map<std::string, int>> doc_index_;
};

// One logged impression: the ranking a user saw and what they clicked.
struct ClickLogRecord {
  std::string ranker_id;
  std::string query_id;
  std::vector<std::string> presented_ranking;
  std::vector<uint8_t> clicks;  // aligned with presented_ranking, 0/1

  bool operator==(const ClickLogRecord&) const = default;
};

struct LogCollection {
  std::vector<ClickLogRecord> records;
  std::map<std::string, uint64_t> log_sizes;  // ranker_id -> n_i

  bool operator==(const LogCollection&) const = default;
};

// Deterministic ranker outputs: (ranker_id, query_id) -> permutation of the
// query's candidate set.
struct RankingTable {
  std::map<std::pair<std::string, std::string>, std::vector<std::string>>
      entries;

  bool operator==(const RankingTable&) const = default;
};

// --- file I/O -------------------------------------------------------------
// All files are line-delimited JSON with a one-line self-describing header,
// so logs can be streamed and concatenated.

Corpus load_corpus(const std::string& path);
void save_corpus(const Corpus& corpus, const std::string& path);

// Full validation against the corpus: known ids, permutation rankings.
LogCollection load_logs(const std::string& path, const Corpus& corpus);
// Structural validation only; lets the estimator work from clicks alone.
LogCollection load_logs(const std::string& path);
void save_logs(const LogCollection& logs, const std::string& path);

RankingTable load_rankings(const std::string& path);
void save_rankings(const RankingTable& table, const std::string& path);

// --- in-memory assembly ----------------------------------------------------

// Computes log_sizes and runs the same validation as load_logs.
LogCollection collect_logs(std::vector<ClickLogRecord> records);
LogCollection collect_logs(std::vector<ClickLogRecord> records,
                           const Corpus& corpus);

// Recovers each ranker's deterministic output from its logged impressions.
// Two contradictory rankings for one (ranker, query) is a ConsistencyError.
RankingTable derive_rankings(const LogCollection& logs);

// Cross-check for an optionally supplied rankings file: every pair present
// in `derived` must match `supplied` exactly.
void verify_rankings_match(const RankingTable& derived,
                           const RankingTable& supplied);

}  // namespace posbias
