// Copyright 2026 The nail Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nail/corpus.hpp"
#include "nail/vocab.hpp"

namespace nail {

/// Dense per-token document scores w_d, one value per vocabulary entry.
class ScoreVector {
 public:
  ScoreVector() = default;
  /// Throws ArgumentError on non-finite values.
  explicit ScoreVector(std::vector<float> scores);
  static ScoreVector zeros(std::size_t vocab_size) {
    return ScoreVector(std::vector<float>(vocab_size, 0.0F));
  }

  std::size_t size() const { return scores_.size(); }
  float operator[](std::size_t i) const { return scores_[i]; }
  float operator[](TokenId t) const { return scores_[t.value]; }
  std::span<const float> values() const { return scores_; }

  bool operator==(const ScoreVector&) const = default;

 private:
  std::vector<float> scores_;
};

struct SparseEntry {
  TokenId token;
  float score = 0.0F;

  bool operator==(const SparseEntry&) const = default;
};

/// Sparse score vector with strictly increasing token ids.
class SparseScoreVector {
 public:
  SparseScoreVector() = default;
  /// Sorts by token id; throws ArgumentError on duplicates or non-finite scores.
  explicit SparseScoreVector(std::vector<SparseEntry> entries);
  /// Nonzero entries of a dense vector.
  static SparseScoreVector nonzeros(const ScoreVector& dense);

  std::span<const SparseEntry> entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  ScoreVector to_dense(std::size_t vocab_size) const;

  bool operator==(const SparseScoreVector&) const = default;

 private:
  std::vector<SparseEntry> entries_;
};

/// Keeps the k highest-scoring tokens (ties go to the smaller token id),
/// returned in token-id order. Retained scores are copied unchanged.
SparseScoreVector sparsify(const ScoreVector& sv, std::size_t k);

struct Posting {
  std::uint32_t doc = 0;  // ordinal
  float score = 0.0F;

  bool operator==(const Posting&) const = default;
};

struct IndexMetadata {
  static constexpr std::uint32_t kFormatVersion = 1;

  std::uint32_t format_version = kFormatVersion;
  std::uint32_t vocab_size = 0;
  std::uint32_t num_docs = 0;
  std::uint64_t vocab_checksum = 0;
  std::string scorer_tag;

  bool operator==(const IndexMetadata&) const = default;
};

/// Inverted impact index: token -> (doc ordinal, score) postings sorted by
/// ordinal. Immutable once built.
class ImpactIndex {
 public:
  ImpactIndex() = default;
  /// Validates ordinals, posting order and shapes; throws FormatError.
  ImpactIndex(IndexMetadata meta, std::vector<std::string> doc_ids,
              std::vector<std::vector<Posting>> postings);

  const IndexMetadata& metadata() const { return meta_; }
  std::size_t vocab_size() const { return meta_.vocab_size; }
  std::size_t num_docs() const { return doc_ids_.size(); }
  std::size_t num_postings() const;
  const std::string& doc_id(std::uint32_t ordinal) const { return doc_ids_.at(ordinal); }
  const std::vector<std::string>& doc_ids() const { return doc_ids_; }

  /// Stored list for `t`; empty when the token has no postings.
  /// Throws ArgumentError when t >= V.
  std::span<const Posting> postings_for(TokenId t) const;

  /// Per-document sparse vectors recovered from the postings.
  std::vector<SparseScoreVector> forward_vectors() const;

  bool operator==(const ImpactIndex&) const = default;

 private:
  IndexMetadata meta_;
  std::vector<std::string> doc_ids_;
  std::vector<std::vector<Posting>> postings_;
};

/// Appends documents in ordinal order. Zero scores are never stored.
class ImpactIndexBuilder {
 public:
  ImpactIndexBuilder(std::size_t vocab_size, std::uint64_t vocab_checksum, std::string scorer_tag);

  std::uint32_t add(std::string doc_id, const SparseScoreVector& sv);
  ImpactIndex finish() &&;

 private:
  IndexMetadata meta_;
  std::vector<std::string> doc_ids_;
  std::vector<std::vector<Posting>> postings_;
};

using DocumentScorer = std::function<ScoreVector(const Document&)>;

struct BuildOptions {
  std::optional<std::size_t> sparsify_k;
  std::size_t threads = 1;
  std::size_t chunk_size = 1024;
  std::string scorer_tag = "nail";
};

/// Scores every document and assembles postings. Documents are scored in
/// parallel within a chunk; ordinals follow ingestion order regardless of
/// scheduling. A scorer exception aborts the build with the doc id attached.
ImpactIndex build_index(const std::function<std::optional<Document>()>& next_doc,
                        const DocumentScorer& scorer, const Vocabulary& vocab,
                        const BuildOptions& options = {});
ImpactIndex build_index(std::span<const Document> docs, const DocumentScorer& scorer,
                        const Vocabulary& vocab, const BuildOptions& options = {});

/// Binary layout (little-endian): magic "NAILIDX1", metadata block, doc-id
/// table, then length-prefixed posting blocks in ascending token order.
void save_index(const ImpactIndex& index, const std::filesystem::path& path);
/// Throws IncompatibleError on version mismatch, or on checksum mismatch
/// when `expected_checksum` is given; FormatError on corrupt input.
ImpactIndex load_index(const std::filesystem::path& path,
                       const std::uint64_t* expected_checksum = nullptr);

/// NDJSON interchange: {"id": ..., "entries": [[token_id, score], ...]} per line.
struct DocVector {
  std::string doc_id;
  SparseScoreVector vector;
};
void write_vectors_ndjson(std::span<const DocVector> vectors, const std::filesystem::path& path);
std::vector<DocVector> read_vectors_ndjson(const std::filesystem::path& path,
                                           std::size_t vocab_size);

}  // namespace nail
