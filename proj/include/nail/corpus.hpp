// Copyright 2026 The nail Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace nail {

struct Document {
  std::string doc_id;
  std::string text;
};

struct QueryRecord {
  std::string query_id;
  std::string text;
};

/// Relevance judgments: query_id -> doc_id -> grade. Absent pairs are grade 0.
class Qrels {
 public:
  void set(const std::string& query_id, const std::string& doc_id, int grade);
  int grade(std::string_view query_id, std::string_view doc_id) const;

  /// Judgments for one query, or nullptr when the query has none.
  const std::map<std::string, int, std::less<>>* judgments(std::string_view query_id) const;
  const std::map<std::string, std::map<std::string, int, std::less<>>, std::less<>>& all() const {
    return grades_;
  }
  bool empty() const { return grades_.empty(); }

 private:
  std::map<std::string, std::map<std::string, int, std::less<>>, std::less<>> grades_;
};

struct RunEntry {
  std::string query_id;
  std::string doc_id;
  int rank = 0;
  double score = 0.0;
  std::string tag;
};

/// Streams documents from a newline-delimited JSON file with "id" and
/// "text" fields. Holds one parsed record at a time.
class CorpusReader {
 public:
  explicit CorpusReader(const std::filesystem::path& path);

  /// Next document in file order; std::nullopt at end of file.
  std::optional<Document> next();
  std::size_t line_number() const { return line_no_; }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  std::size_t line_no_ = 0;
  std::unordered_set<std::string> seen_;
};

std::vector<Document> load_corpus(const std::filesystem::path& path);
std::vector<QueryRecord> load_queries(const std::filesystem::path& path);
Qrels load_qrels(const std::filesystem::path& path);

/// Checks rank contiguity (1..n) and non-increasing scores for each query.
/// Entries of one query must be contiguous and in rank order.
void validate_run(std::span<const RunEntry> entries);

/// Writes "query_id Q0 doc_id rank score tag" lines, scores with 6 decimals.
/// Validation happens before the file is opened.
void write_run(std::span<const RunEntry> entries, const std::filesystem::path& path,
               std::string_view tag);
std::vector<RunEntry> read_run(const std::filesystem::path& path);

/// Run entries grouped by query (first-appearance order), ranked doc ids each.
struct RankedList {
  std::string query_id;
  std::vector<std::string> doc_ids;
};
std::vector<RankedList> group_run(std::span<const RunEntry> entries);

}  // namespace nail
