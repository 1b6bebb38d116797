// Copyright 2026 The nail Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "nail/corpus.hpp"
#include "nail/term_index.hpp"
#include "nail/vocab.hpp"

namespace nail {

struct ScoredDoc {
  std::string doc_id;
  double score = 0.0;

  bool operator==(const ScoredDoc&) const = default;
};

/// s(q, d) = sum_t w_q[t] * w_d[t]. Query tokens beyond the vector are ignored.
double score_pair(const QueryFeature& qf, const ScoreVector& sv);
double score_pair(const QueryFeature& qf, const SparseScoreVector& sv);

struct Bm25Params {
  double k1 = 0.9;
  double b = 0.4;
};

struct Bm25Stats {
  std::size_t num_docs = 0;
  std::vector<std::uint32_t> df;       // by token id
  std::vector<std::uint32_t> doc_len;  // by ordinal
  double avgdl = 0.0;
  Bm25Params params;

  /// Throws ArgumentError when k1 < 0 or b outside [0, 1].
  static Bm25Stats from_documents(std::span<const TokenSequence> docs, std::size_t vocab_size,
                                  Bm25Params params = {});
};

/// ln(1 + (N - df + 0.5) / (df + 0.5))
double bm25_idf(std::uint32_t df, std::size_t num_docs);
/// idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl)); 0 when tf == 0.
double bm25_term_score(std::uint32_t tf, std::uint32_t dl, std::uint32_t df, const Bm25Stats& stats);
/// Sum of term scores over the unique tokens of `qf`.
double bm25_score(const QueryFeature& qf, const TokenSequence& doc, const Bm25Stats& stats);

/// Term-frequency inverted index with BM25 statistics.
class Bm25Index {
 public:
  struct TfPosting {
    std::uint32_t doc = 0;
    std::uint32_t tf = 0;
  };

  Bm25Index(std::span<const Document> docs, const Vocabulary& vocab, Bm25Params params = {});

  const Bm25Stats& stats() const { return stats_; }
  std::size_t num_docs() const { return doc_ids_.size(); }
  const std::string& doc_id(std::uint32_t ordinal) const { return doc_ids_.at(ordinal); }
  std::span<const TfPosting> postings_for(TokenId t) const { return postings_.at(t.value); }

  /// Per-document BM25 term weights, the impact-index form of this model.
  ScoreVector document_vector(std::uint32_t ordinal) const;

 private:
  std::vector<std::string> doc_ids_;
  std::vector<std::vector<TfPosting>> postings_;
  Bm25Stats stats_;
};

/// Documents with a nonzero BM25 score, score descending then ordinal
/// ascending, truncated to top_n.
std::vector<ScoredDoc> retrieve_bm25(const QueryFeature& qf, const Bm25Index& index,
                                     std::size_t top_n);

/// Score vectors keyed by doc id, used for reranking.
class DocVectorStore {
 public:
  DocVectorStore() = default;
  static DocVectorStore from_index(const ImpactIndex& index);
  static DocVectorStore from_vectors(std::span<const DocVector> vectors);

  void add(std::string doc_id, SparseScoreVector sv);
  const SparseScoreVector* find(std::string_view doc_id) const;
  std::size_t size() const { return vectors_.size(); }

 private:
  std::unordered_map<std::string, SparseScoreVector> vectors_;
};

/// Reorders candidates by score_pair, descending; equal scores keep their
/// incoming order. Throws ArgumentError naming a candidate without a vector.
std::vector<ScoredDoc> rerank(std::span<const ScoredDoc> candidates, const QueryFeature& qf,
                              const DocVectorStore& vectors);

/// Posting traversal over the query's tokens. Every document with at least
/// one matching posting is ranked: score descending, ordinal ascending.
std::vector<ScoredDoc> retrieve_exhaustive(const QueryFeature& qf, const ImpactIndex& index,
                                           std::size_t top_n);

/// One multiply-accumulate per (query token, candidate document).
std::uint64_t estimate_flops(std::uint64_t query_len, std::uint64_t num_docs);
/// Smallest n with 10^n >= flops (0 for 0 and 1).
int flops_order(std::uint64_t flops);

/// Converts a ranked list into run entries with ranks 1..n.
std::vector<RunEntry> to_run_entries(std::string_view query_id, std::span<const ScoredDoc> ranked,
                                     std::string_view tag);

}  // namespace nail
