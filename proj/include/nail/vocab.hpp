// Copyright 2026 The nail Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace nail {

/// Index of a token in a Vocabulary.
struct TokenId {
  std::uint32_t value = 0;

  constexpr auto operator<=>(const TokenId&) const = default;
};

/// Tokenizer output. Ids are valid for the vocabulary that produced them.
struct TokenSequence {
  std::vector<TokenId> ids;
  std::size_t source_len = 0;

  std::size_t size() const { return ids.size(); }
  bool empty() const { return ids.empty(); }
};

/// Fixed retrieval vocabulary. Line 1 of the vocabulary file is the UNK
/// token; it is never produced by segmentation.
class Vocabulary {
 public:
  static Vocabulary load(const std::filesystem::path& path);
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  Vocabulary(const Vocabulary& other) : Vocabulary(other.tokens_) {}
  Vocabulary(Vocabulary&&) noexcept = default;
  Vocabulary& operator=(const Vocabulary& other);
  Vocabulary& operator=(Vocabulary&&) noexcept = default;

  std::size_t size() const { return tokens_.size(); }
  TokenId unk_id() const { return TokenId{0}; }
  const std::string& token(TokenId id) const { return tokens_.at(id.value); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  bool contains(TokenId id) const { return id.value < tokens_.size(); }

  /// Id of an exact token string, or unk_id() when absent.
  TokenId id_of(std::string_view token) const;

  /// Id of a token reachable by segmentation; false for UNK and absent strings.
  bool lookup(std::string_view token, TokenId& out) const;

  std::size_t max_token_bytes() const { return max_token_bytes_; }

  /// FNV-1a 64 over the newline-joined token list.
  std::uint64_t checksum() const;

 private:
  explicit Vocabulary(std::vector<std::string> tokens);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string_view, std::uint32_t> index_;
  std::size_t max_token_bytes_ = 0;
};

/// Lowercase, split on whitespace, then greedy longest-prefix match against
/// the vocabulary. Unmatched characters (whole UTF-8 code points) emit UNK.
TokenSequence tokenize(std::string_view text, const Vocabulary& vocab);

enum class QueryWeighting {
  kCounts,  // weight = number of occurrences
  kBinary,  // weight clamped to 1
};

/// Sparse query weights w_q, sorted by token id. Weights are positive.
class QueryFeature {
 public:
  using Entry = std::pair<TokenId, double>;

  QueryFeature() = default;
  /// Accumulates `entries`; duplicate ids are summed, non-positive weights dropped.
  explicit QueryFeature(std::vector<Entry> entries);

  static QueryFeature from_tokens(const TokenSequence& tokens, TokenId unk,
                                  QueryWeighting weighting = QueryWeighting::kCounts);

  std::span<const Entry> entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  double total_weight() const;
  QueryFeature scaled(double alpha) const;

 private:
  std::vector<Entry> entries_;
};

QueryFeature featurize_query(std::string_view text, const Vocabulary& vocab,
                             QueryWeighting weighting = QueryWeighting::kCounts);

}  // namespace nail
