// Copyright 2026 The nail Authors
// Licensed under the Apache License, Version 2.0

#include "nail/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

#include "nail/errors.hpp"

namespace nail {
namespace {

std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

bool blank(std::string_view line) {
  return line.find_first_not_of(" \t") == std::string_view::npos;
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return in;
}

}  // namespace

void Qrels::set(const std::string& query_id, const std::string& doc_id, int grade) {
  if (grade < 0) throw FormatError("negative relevance grade for " + query_id + "/" + doc_id);
  grades_[query_id][doc_id] = grade;
}

int Qrels::grade(std::string_view query_id, std::string_view doc_id) const {
  auto q = grades_.find(query_id);
  if (q == grades_.end()) return 0;
  auto d = q->second.find(doc_id);
  return d == q->second.end() ? 0 : d->second;
}

const std::map<std::string, int, std::less<>>* Qrels::judgments(std::string_view query_id) const {
  auto q = grades_.find(query_id);
  return q == grades_.end() ? nullptr : &q->second;
}

CorpusReader::CorpusReader(const std::filesystem::path& path)
    : path_(path), in_(open_or_throw(path)) {}

std::optional<Document> CorpusReader::next() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_no_;
    strip_cr(line);
    if (blank(line)) continue;

    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(where(path_, line_no_) + "malformed record: " + e.what());
    }
    if (!record.is_object() || !record.contains("id") || !record.contains("text")) {
      throw FormatError(where(path_, line_no_) + "record needs \"id\" and \"text\" fields");
    }
    const auto& id = record["id"];
    const auto& text = record["text"];
    if (!text.is_string() || !(id.is_string() || id.is_number_integer())) {
      throw FormatError(where(path_, line_no_) + "\"id\" must be a string and \"text\" a string");
    }
    Document doc{id.is_string() ? id.get<std::string>() : id.dump(), text.get<std::string>()};
    if (!seen_.insert(doc.doc_id).second) {
      throw FormatError(where(path_, line_no_) + "duplicate document id '" + doc.doc_id + "'");
    }
    return doc;
  }
  return std::nullopt;
}

std::vector<Document> load_corpus(const std::filesystem::path& path) {
  CorpusReader reader(path);
  std::vector<Document> docs;
  while (auto doc = reader.next()) docs.push_back(std::move(*doc));
  return docs;
}

std::vector<QueryRecord> load_queries(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  std::vector<QueryRecord> queries;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw FormatError(where(path, line_no) + "missing tab separator");
    QueryRecord q{line.substr(0, tab), line.substr(tab + 1)};
    if (q.query_id.empty()) throw FormatError(where(path, line_no) + "empty query id");
    if (!seen.insert(q.query_id).second) {
      throw FormatError(where(path, line_no) + "duplicate query id '" + q.query_id + "'");
    }
    queries.push_back(std::move(q));
  }
  return queries;
}

Qrels load_qrels(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  Qrels qrels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (blank(line)) continue;
    std::istringstream fields(line);
    std::string qid, iter, did, grade_text, extra;
    if (!(fields >> qid >> iter >> did >> grade_text) || (fields >> extra)) {
      throw FormatError(where(path, line_no) + "expected 4 columns: query_id 0 doc_id grade");
    }
    int grade = 0;
    auto [ptr, ec] = std::from_chars(grade_text.data(), grade_text.data() + grade_text.size(), grade);
    if (ec != std::errc() || ptr != grade_text.data() + grade_text.size()) {
      throw FormatError(where(path, line_no) + "grade '" + grade_text + "' is not an integer");
    }
    if (grade < 0) throw FormatError(where(path, line_no) + "negative grade");
    qrels.set(qid, did, grade);
  }
  return qrels;
}

void validate_run(std::span<const RunEntry> entries) {
  std::unordered_set<std::string> finished;
  std::size_t i = 0;
  while (i < entries.size()) {
    const std::string& qid = entries[i].query_id;
    if (!finished.insert(qid).second) {
      throw InvariantError("run entries for query '" + qid + "' are not contiguous");
    }
    int expected_rank = 1;
    double previous = 0.0;
    for (; i < entries.size() && entries[i].query_id == qid; ++i, ++expected_rank) {
      const auto& e = entries[i];
      if (e.rank != expected_rank) {
        throw InvariantError("query '" + qid + "': expected rank " + std::to_string(expected_rank) +
                             ", got " + std::to_string(e.rank));
      }
      if (expected_rank > 1 && e.score > previous) {
        throw InvariantError("query '" + qid + "': score increases at rank " +
                             std::to_string(e.rank));
      }
      if (e.doc_id.empty() || e.doc_id.find_first_of(" \t\n") != std::string::npos) {
        throw InvariantError("query '" + qid + "': invalid doc id '" + e.doc_id + "'");
      }
      previous = e.score;
    }
  }
}

void write_run(std::span<const RunEntry> entries, const std::filesystem::path& path,
               std::string_view tag) {
  validate_run(entries);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  char score[64];
  for (const auto& e : entries) {
    std::snprintf(score, sizeof(score), "%.6f", e.score);
    out << e.query_id << " Q0 " << e.doc_id << ' ' << e.rank << ' ' << score << ' ' << tag << '\n';
  }
  if (!out) throw FormatError("write failed for " + path.string());
}

std::vector<RunEntry> read_run(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  std::vector<RunEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (blank(line)) continue;
    std::istringstream fields(line);
    RunEntry e;
    std::string q0, rank_text, score_text;
    if (!(fields >> e.query_id >> q0 >> e.doc_id >> rank_text >> score_text >> e.tag)) {
      throw FormatError(where(path, line_no) + "expected 6 columns");
    }
    try {
      std::size_t used = 0;
      e.rank = std::stoi(rank_text, &used);
      if (used != rank_text.size()) throw std::invalid_argument(rank_text);
      e.score = std::stod(score_text, &used);
      if (used != score_text.size()) throw std::invalid_argument(score_text);
    } catch (const std::logic_error&) {
      throw FormatError(where(path, line_no) + "bad rank or score");
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

std::vector<RankedList> group_run(std::span<const RunEntry> entries) {
  std::vector<std::vector<std::pair<int, std::string>>> ranked;
  std::vector<RankedList> lists;
  std::unordered_map<std::string, std::size_t> slot;
  for (const auto& e : entries) {
    auto [it, inserted] = slot.emplace(e.query_id, lists.size());
    if (inserted) {
      lists.push_back({e.query_id, {}});
      ranked.emplace_back();
    }
    ranked[it->second].emplace_back(e.rank, e.doc_id);
  }
  for (std::size_t i = 0; i < lists.size(); ++i) {
    std::stable_sort(ranked[i].begin(), ranked[i].end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [rank, doc] : ranked[i]) lists[i].doc_ids.push_back(std::move(doc));
  }
  return lists;
}

}  // namespace nail
