// Copyright 2026 The nail Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nail/corpus.hpp"
#include "nail/term_index.hpp"
#include "nail/vocab.hpp"

namespace nail {

using Judgments = std::map<std::string, int, std::less<>>;

/// Exponential gain (2^rel - 1) / log2(i + 1); the ideal ranking uses every
/// judged document of the query. 0 when the ideal DCG is 0.
double ndcg_at_k(std::span<const std::string> ranked, const Judgments* judged, std::size_t k);
/// Fraction of grade > 0 documents found in the top k; 0 with none judged.
double recall_at_k(std::span<const std::string> ranked, const Judgments* judged, std::size_t k);
/// Reciprocal rank of the first grade > 0 document within the top k.
double mrr_at_k(std::span<const std::string> ranked, const Judgments* judged, std::size_t k);

enum class MetricKind { kNdcg, kRecall, kMrr };

struct MetricSpec {
  MetricKind kind = MetricKind::kNdcg;
  std::size_t k = 10;

  std::string name() const;  // "ndcg@10", "recall@100", "mrr@10"
  /// Inverse of name(); throws ArgumentError.
  static MetricSpec parse(std::string_view text);
};

std::vector<MetricSpec> default_metrics();

struct MetricReport {
  std::vector<std::string> metric_names;
  std::map<std::string, std::map<std::string, double>> per_query;  // query -> metric -> value
  std::map<std::string, double> aggregate;                         // metric -> mean
  std::size_t num_queries = 0;
  std::vector<std::string> warnings;
};

/// Evaluates every query that has judgments; unjudged run queries are
/// ignored with a warning, judged queries missing from the run score 0.
MetricReport evaluate_run(std::span<const RunEntry> run, const Qrels& qrels,
                          std::span<const MetricSpec> metrics);

/// Rows "query_id,metric,value" followed by "all,metric,mean" rows.
void write_report_csv(const MetricReport& report, std::ostream& out);
void write_report_csv(const MetricReport& report, const std::filesystem::path& path);

struct SweepPoint {
  std::size_t k = 0;
  double recall_at_100 = 0.0;
};

/// For each k (plus k = V as the dense reference when absent): sparsify
/// every vector, build an index, retrieve exhaustively and average
/// recall@100 over judged queries.
std::vector<SweepPoint> sparsification_sweep(std::span<const DocVector> vectors,
                                             const Vocabulary& vocab, const Qrels& qrels,
                                             std::span<const QueryRecord> queries,
                                             std::span<const std::size_t> k_values);

/// Header "k,recall_at_100".
void write_sweep_csv(std::span<const SweepPoint> points, const std::filesystem::path& path);

}  // namespace nail
