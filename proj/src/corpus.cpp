#include "posbias/corpus.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "posbias/errors.hpp"

namespace posbias {

using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

json parse_line(const std::string& line, size_t line_no,
                const std::string& path) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw ParseError(path + ":" + std::to_string(line_no) +
                     ": malformed record (expected a JSON object)");
  }
  return j;
}

// Header line, e.g. {"format":"corpus","version":1}. Returns false when the
// stream is empty (an empty file is an empty collection).
bool read_header(std::ifstream& in, const std::string& path,
                 const std::string& expected_format, size_t& line_no) {
  std::string line;
  if (!std::getline(in, line)) return false;
  ++line_no;
  json j = parse_line(line, line_no, path);
  if (!j.contains("format") || !j["format"].is_string() ||
      j["format"].get<std::string>() != expected_format) {
    throw ParseError(path + ":1: expected header with format \"" +
                     expected_format + "\"");
  }
  if (!j.contains("version") || !j["version"].is_number_integer() ||
      j["version"].get<int>() != kFormatVersion) {
    throw ParseError(path + ":1: unsupported format version");
  }
  return true;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path);
  return in;
}

std::string field_str(const json& j, const char* key, size_t line_no,
                      const std::string& path) {
  if (!j.contains(key) || !j[key].is_string()) {
    throw ParseError(path + ":" + std::to_string(line_no) +
                     ": missing or non-string field \"" + key + "\"");
  }
  return j[key].get<std::string>();
}

std::vector<std::string> field_str_array(const json& j, const char* key,
                                         size_t line_no,
                                         const std::string& path) {
  if (!j.contains(key) || !j[key].is_array()) {
    throw ParseError(path + ":" + std::to_string(line_no) +
                     ": missing or non-array field \"" + key + "\"");
  }
  std::vector<std::string> out;
  out.reserve(j[key].size());
  for (const auto& v : j[key]) {
    if (!v.is_string()) {
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": non-string entry in \"" + key + "\"");
    }
    out.push_back(v.get<std::string>());
  }
  return out;
}

void check_record_structure(const ClickLogRecord& rec, size_t line_no,
                            const std::string& origin) {
  std::string where = origin.empty()
                          ? "record for (" + rec.ranker_id + ", " +
                                rec.query_id + ")"
                          : origin + ":" + std::to_string(line_no);
  if (rec.clicks.size() != rec.presented_ranking.size()) {
    throw ValidationError(where + ": click vector length " +
                          std::to_string(rec.clicks.size()) +
                          " does not match ranking length " +
                          std::to_string(rec.presented_ranking.size()));
  }
  for (uint8_t c : rec.clicks) {
    if (c > 1) throw ValidationError(where + ": click entries must be 0 or 1");
  }
}

void check_record_against_corpus(const ClickLogRecord& rec,
                                 const Corpus& corpus, size_t line_no,
                                 const std::string& origin) {
  std::string where = origin.empty()
                          ? "record for (" + rec.ranker_id + ", " +
                                rec.query_id + ")"
                          : origin + ":" + std::to_string(line_no);
  auto qi = corpus.index_of(rec.query_id);
  if (!qi) {
    throw ValidationError(where + ": unknown query_id \"" + rec.query_id +
                          "\"");
  }
  const QueryRecord& q = corpus.query(*qi);
  if (rec.presented_ranking.size() != q.candidates.size()) {
    throw ValidationError(where +
                          ": presented ranking is not a permutation of the "
                          "candidate set (size mismatch)");
  }
  std::vector<char> seen(q.candidates.size(), 0);
  for (const std::string& d : rec.presented_ranking) {
    int pos = corpus.doc_pos(*qi, d);
    if (pos < 0) {
      throw ValidationError(where + ": unknown document id \"" + d +
                            "\" for query \"" + rec.query_id + "\"");
    }
    if (seen[pos]) {
      throw ValidationError(where + ": document \"" + d +
                            "\" appears twice in the presented ranking");
    }
    seen[pos] = 1;
  }
}

std::map<std::string, uint64_t> count_log_sizes(
    const std::vector<ClickLogRecord>& records) {
  std::map<std::string, uint64_t> sizes;
  for (const auto& rec : records) ++sizes[rec.ranker_id];
  return sizes;
}

}  // namespace

Corpus Corpus::from_queries(std::vector<QueryRecord> queries) {
  Corpus c;
  c.queries_ = std::move(queries);
  c.query_index_.reserve(c.queries_.size());
  c.doc_index_.resize(c.queries_.size());
  for (size_t i = 0; i < c.queries_.size(); ++i) {
    const QueryRecord& q = c.queries_[i];
    if (q.candidates.empty()) {
      throw ValidationError("query \"" + q.query_id +
                            "\" has an empty candidate list");
    }
    if (q.relevance.size() != q.candidates.size()) {
      throw ValidationError("query \"" + q.query_id +
                            "\" relevance labels do not cover the candidate "
                            "list exactly");
    }
    for (uint8_t r : q.relevance) {
      if (r > 1) {
        throw ValidationError("query \"" + q.query_id +
                              "\" has a non-binary relevance label");
      }
    }
    if (!c.query_index_.emplace(q.query_id, i).second) {
      throw ValidationError("duplicate query_id \"" + q.query_id + "\"");
    }
    auto& docs = c.doc_index_[i];
    docs.reserve(q.candidates.size());
    for (size_t d = 0; d < q.candidates.size(); ++d) {
      if (!docs.emplace(q.candidates[d], static_cast<int>(d)).second) {
        throw ValidationError("query \"" + q.query_id +
                              "\" has duplicate candidate \"" +
                              q.candidates[d] + "\"");
      }
    }
  }
  return c;
}

std::optional<size_t> Corpus::index_of(std::string_view query_id) const {
  auto it = query_index_.find(std::string(query_id));
  if (it == query_index_.end()) return std::nullopt;
  return it->second;
}

int Corpus::doc_pos(size_t query_index, std::string_view doc_id) const {
  const auto& docs = doc_index_[query_index];
  auto it = docs.find(std::string(doc_id));
  return it == docs.end() ? -1 : it->second;
}

Corpus load_corpus(const std::string& path) {
  std::ifstream in = open_in(path);
  size_t line_no = 0;
  std::vector<QueryRecord> queries;
  if (!read_header(in, path, "corpus", line_no)) {
    return Corpus::from_queries({});
  }
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = parse_line(line, line_no, path);
    QueryRecord q;
    q.query_id = field_str(j, "query_id", line_no, path);
    q.candidates = field_str_array(j, "candidates", line_no, path);
    if (!j.contains("relevance") || !j["relevance"].is_object()) {
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": missing or non-object field \"relevance\"");
    }
    const json& rel = j["relevance"];
    if (rel.size() != q.candidates.size()) {
      throw ValidationError(path + ":" + std::to_string(line_no) +
                            ": relevance labels do not cover the candidate "
                            "list exactly for query \"" +
                            q.query_id + "\"");
    }
    q.relevance.reserve(q.candidates.size());
    for (const std::string& d : q.candidates) {
      auto it = rel.find(d);
      if (it == rel.end() || !it->is_number_integer()) {
        throw ValidationError(path + ":" + std::to_string(line_no) +
                              ": missing relevance label for candidate \"" +
                              d + "\"");
      }
      int v = it->get<int>();
      if (v != 0 && v != 1) {
        throw ValidationError(path + ":" + std::to_string(line_no) +
                              ": relevance label for \"" + d +
                              "\" must be 0 or 1");
      }
      q.relevance.push_back(static_cast<uint8_t>(v));
    }
    queries.push_back(std::move(q));
  }
  return Corpus::from_queries(std::move(queries));
}

void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out = open_out(path);
  out << R"({"format":"corpus","version":1})" << '\n';
  for (const QueryRecord& q : corpus.queries()) {
    json rel = json::object();
    for (size_t d = 0; d < q.candidates.size(); ++d) {
      rel[q.candidates[d]] = static_cast<int>(q.relevance[d]);
    }
    json j;
    j["query_id"] = q.query_id;
    j["candidates"] = q.candidates;
    j["relevance"] = std::move(rel);
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

namespace {

LogCollection load_logs_impl(const std::string& path, const Corpus* corpus) {
  std::ifstream in = open_in(path);
  size_t line_no = 0;
  LogCollection logs;
  if (!read_header(in, path, "clicklog", line_no)) {
    return logs;  // empty file -> empty collection
  }
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = parse_line(line, line_no, path);
    ClickLogRecord rec;
    rec.ranker_id = field_str(j, "ranker_id", line_no, path);
    rec.query_id = field_str(j, "query_id", line_no, path);
    rec.presented_ranking = field_str_array(j, "ranking", line_no, path);
    if (!j.contains("clicks") || !j["clicks"].is_array()) {
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": missing or non-array field \"clicks\"");
    }
    rec.clicks.reserve(j["clicks"].size());
    for (const auto& v : j["clicks"]) {
      if (!v.is_number_integer()) {
        throw ParseError(path + ":" + std::to_string(line_no) +
                         ": non-integer entry in \"clicks\"");
      }
      int c = v.get<int>();
      if (c != 0 && c != 1) {
        throw ValidationError(path + ":" + std::to_string(line_no) +
                              ": click entries must be 0 or 1");
      }
      rec.clicks.push_back(static_cast<uint8_t>(c));
    }
    check_record_structure(rec, line_no, path);
    if (corpus) check_record_against_corpus(rec, *corpus, line_no, path);
    logs.records.push_back(std::move(rec));
  }
  logs.log_sizes = count_log_sizes(logs.records);
  return logs;
}

}  // namespace

LogCollection load_logs(const std::string& path, const Corpus& corpus) {
  return load_logs_impl(path, &corpus);
}

LogCollection load_logs(const std::string& path) {
  return load_logs_impl(path, nullptr);
}

void save_logs(const LogCollection& logs, const std::string& path) {
  std::ofstream out = open_out(path);
  out << R"({"format":"clicklog","version":1})" << '\n';
  for (const ClickLogRecord& rec : logs.records) {
    json j;
    j["ranker_id"] = rec.ranker_id;
    j["query_id"] = rec.query_id;
    j["ranking"] = rec.presented_ranking;
    json clicks = json::array();
    for (uint8_t c : rec.clicks) clicks.push_back(static_cast<int>(c));
    j["clicks"] = std::move(clicks);
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

RankingTable load_rankings(const std::string& path) {
  std::ifstream in = open_in(path);
  size_t line_no = 0;
  RankingTable table;
  if (!read_header(in, path, "rankings", line_no)) return table;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = parse_line(line, line_no, path);
    std::string ranker = field_str(j, "ranker_id", line_no, path);
    std::string query = field_str(j, "query_id", line_no, path);
    auto ranking = field_str_array(j, "ranking", line_no, path);
    auto key = std::make_pair(std::move(ranker), std::move(query));
    if (table.entries.count(key)) {
      throw ValidationError(path + ":" + std::to_string(line_no) +
                            ": duplicate entry for (" + key.first + ", " +
                            key.second + ")");
    }
    table.entries.emplace(std::move(key), std::move(ranking));
  }
  return table;
}

void save_rankings(const RankingTable& table, const std::string& path) {
  std::ofstream out = open_out(path);
  out << R"({"format":"rankings","version":1})" << '\n';
  for (const auto& [key, ranking] : table.entries) {
    json j;
    j["ranker_id"] = key.first;
    j["query_id"] = key.second;
    j["ranking"] = ranking;
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

LogCollection collect_logs(std::vector<ClickLogRecord> records) {
  for (const auto& rec : records) check_record_structure(rec, 0, "");
  LogCollection logs;
  logs.records = std::move(records);
  logs.log_sizes = count_log_sizes(logs.records);
  return logs;
}

LogCollection collect_logs(std::vector<ClickLogRecord> records,
                           const Corpus& corpus) {
  for (const auto& rec : records) {
    check_record_structure(rec, 0, "");
    check_record_against_corpus(rec, corpus, 0, "");
  }
  LogCollection logs;
  logs.records = std::move(records);
  logs.log_sizes = count_log_sizes(logs.records);
  return logs;
}

RankingTable derive_rankings(const LogCollection& logs) {
  if (logs.records.empty()) {
    throw ValidationError("cannot derive rankings from an empty log");
  }
  RankingTable table;
  for (const ClickLogRecord& rec : logs.records) {
    auto key = std::make_pair(rec.ranker_id, rec.query_id);
    auto [it, inserted] = table.entries.emplace(key, rec.presented_ranking);
    if (!inserted && it->second != rec.presented_ranking) {
      throw ConsistencyError(
          "ranker \"" + rec.ranker_id + "\" presented two different rankings "
          "for query \"" + rec.query_id +
          "\"; deterministic rankers cannot do that");
    }
  }
  return table;
}

void verify_rankings_match(const RankingTable& derived,
                           const RankingTable& supplied) {
  for (const auto& [key, ranking] : derived.entries) {
    auto it = supplied.entries.find(key);
    if (it == supplied.entries.end()) {
      throw ConsistencyError("supplied rankings are missing an entry for (" +
                             key.first + ", " + key.second + ")");
    }
    if (it->second != ranking) {
      throw ConsistencyError("supplied ranking disagrees with the logs for (" +
                             key.first + ", " + key.second + ")");
    }
  }
}

}  // namespace posbias
