// Copyright 2026 The nail Authors
// Licensed under the Apache License, Version 2.0

#include "nail/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <unordered_set>

#include "nail/errors.hpp"
#include "nail/scoring.hpp"

namespace nail {
namespace {

int grade_of(const Judgments* judged, const std::string& doc) {
  if (judged == nullptr) return 0;
  auto it = judged->find(doc);
  return it == judged->end() ? 0 : it->second;
}

void require_k(std::size_t k) {
  if (k == 0) throw ArgumentError("metric cutoff k must be at least 1");
}

std::string format_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

double ndcg_at_k(std::span<const std::string> ranked, const Judgments* judged, std::size_t k) {
  require_k(k);
  if (judged == nullptr) return 0.0;
  std::vector<int> ideal;
  for (const auto& [doc, grade] : *judged) ideal.push_back(grade);
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  double idcg = 0.0;
  for (std::size_t i = 0; i < std::min(k, ideal.size()); ++i) {
    idcg += (std::exp2(ideal[i]) - 1.0) / std::log2(static_cast<double>(i) + 2.0);
  }
  if (idcg == 0.0) return 0.0;
  double dcg = 0.0;
  for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) {
    const int g = grade_of(judged, ranked[i]);
    if (g > 0) dcg += (std::exp2(g) - 1.0) / std::log2(static_cast<double>(i) + 2.0);
  }
  return dcg / idcg;
}

double recall_at_k(std::span<const std::string> ranked, const Judgments* judged, std::size_t k) {
  require_k(k);
  if (judged == nullptr) return 0.0;
  std::size_t relevant = 0;
  for (const auto& [doc, grade] : *judged) relevant += grade > 0;
  if (relevant == 0) return 0.0;
  std::unordered_set<std::string_view> found;
  for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) {
    if (grade_of(judged, ranked[i]) > 0) found.insert(ranked[i]);
  }
  return static_cast<double>(found.size()) / static_cast<double>(relevant);
}

double mrr_at_k(std::span<const std::string> ranked, const Judgments* judged, std::size_t k) {
  require_k(k);
  for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) {
    if (grade_of(judged, ranked[i]) > 0) return 1.0 / static_cast<double>(i + 1);
  }
  return 0.0;
}

std::string MetricSpec::name() const {
  switch (kind) {
    case MetricKind::kNdcg:
      return "ndcg@" + std::to_string(k);
    case MetricKind::kRecall:
      return "recall@" + std::to_string(k);
    case MetricKind::kMrr:
      return "mrr@" + std::to_string(k);
  }
  return {};
}

MetricSpec MetricSpec::parse(std::string_view text) {
  const auto at = text.find('@');
  if (at == std::string_view::npos) throw ArgumentError("metric must look like name@k");
  const auto name = text.substr(0, at);
  const auto cutoff = text.substr(at + 1);
  MetricSpec spec;
  if (name == "ndcg") {
    spec.kind = MetricKind::kNdcg;
  } else if (name == "recall") {
    spec.kind = MetricKind::kRecall;
  } else if (name == "mrr") {
    spec.kind = MetricKind::kMrr;
  } else {
    throw ArgumentError("unknown metric '" + std::string(name) + "'");
  }
  auto [ptr, ec] = std::from_chars(cutoff.data(), cutoff.data() + cutoff.size(), spec.k);
  if (ec != std::errc() || ptr != cutoff.data() + cutoff.size() || spec.k == 0) {
    throw ArgumentError("bad metric cutoff in '" + std::string(text) + "'");
  }
  return spec;
}

std::vector<MetricSpec> default_metrics() {
  return {{MetricKind::kNdcg, 10},
          {MetricKind::kRecall, 100},
          {MetricKind::kRecall, 1000},
          {MetricKind::kMrr, 10}};
}

MetricReport evaluate_run(std::span<const RunEntry> run, const Qrels& qrels,
                          std::span<const MetricSpec> metrics) {
  MetricReport report;
  for (const auto& m : metrics) report.metric_names.push_back(m.name());

  std::map<std::string, std::vector<std::string>, std::less<>> ranked;
  for (auto& list : group_run(run)) {
    if (qrels.judgments(list.query_id) == nullptr) {
      report.warnings.push_back("query '" + list.query_id + "' has no judgments; ignored");
      continue;
    }
    ranked.emplace(list.query_id, std::move(list.doc_ids));
  }

  static const std::vector<std::string> kEmpty;
  for (const auto& [qid, judged] : qrels.all()) {
    auto it = ranked.find(qid);
    const auto& docs = it == ranked.end() ? kEmpty : it->second;
    auto& values = report.per_query[qid];
    for (const auto& m : metrics) {
      double v = 0.0;
      switch (m.kind) {
        case MetricKind::kNdcg:
          v = ndcg_at_k(docs, &judged, m.k);
          break;
        case MetricKind::kRecall:
          v = recall_at_k(docs, &judged, m.k);
          break;
        case MetricKind::kMrr:
          v = mrr_at_k(docs, &judged, m.k);
          break;
      }
      values[m.name()] = v;
    }
  }

  report.num_queries = report.per_query.size();
  for (const auto& name : report.metric_names) {
    double total = 0.0;
    for (const auto& [qid, values] : report.per_query) total += values.at(name);
    report.aggregate[name] =
        report.num_queries == 0 ? 0.0 : total / static_cast<double>(report.num_queries);
  }
  return report;
}

void write_report_csv(const MetricReport& report, std::ostream& out) {
  out << "query_id,metric,value\n";
  for (const auto& [qid, values] : report.per_query) {
    for (const auto& name : report.metric_names) {
      out << qid << ',' << name << ',' << format_value(values.at(name)) << '\n';
    }
  }
  for (const auto& name : report.metric_names) {
    out << "all," << name << ',' << format_value(report.aggregate.at(name)) << '\n';
  }
}

void write_report_csv(const MetricReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  write_report_csv(report, out);
}

std::vector<SweepPoint> sparsification_sweep(std::span<const DocVector> vectors,
                                             const Vocabulary& vocab, const Qrels& qrels,
                                             std::span<const QueryRecord> queries,
                                             std::span<const std::size_t> k_values) {
  std::vector<std::size_t> ks(k_values.begin(), k_values.end());
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] == 0) throw ArgumentError("sweep k values must be positive");
    if (i > 0 && ks[i] <= ks[i - 1]) throw ArgumentError("sweep k values must be ascending");
  }
  if (ks.empty() || ks.back() < vocab.size()) ks.push_back(vocab.size());

  std::vector<ScoreVector> dense;
  dense.reserve(vectors.size());
  for (const auto& v : vectors) dense.push_back(v.vector.to_dense(vocab.size()));

  std::vector<QueryFeature> features;
  for (const auto& q : queries) features.push_back(featurize_query(q.text, vocab));

  const std::vector<MetricSpec> recall100{{MetricKind::kRecall, 100}};
  std::vector<SweepPoint> points;
  for (std::size_t k : ks) {
    ImpactIndexBuilder builder(vocab.size(), vocab.checksum(), "sweep");
    for (std::size_t d = 0; d < vectors.size(); ++d) builder.add(vectors[d].doc_id, sparsify(dense[d], k));
    const ImpactIndex index = std::move(builder).finish();

    std::vector<RunEntry> run;
    for (std::size_t q = 0; q < queries.size(); ++q) {
      const auto ranked = retrieve_exhaustive(features[q], index, 100);
      auto entries = to_run_entries(queries[q].query_id, ranked, "sweep");
      run.insert(run.end(), entries.begin(), entries.end());
    }
    const auto report = evaluate_run(run, qrels, recall100);
    points.push_back({k, report.aggregate.at(recall100[0].name())});
  }
  return points;
}

void write_sweep_csv(std::span<const SweepPoint> points, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out << "k,recall_at_100\n";
  for (const auto& p : points) out << p.k << ',' << format_value(p.recall_at_100) << '\n';
}

}  // namespace nail
