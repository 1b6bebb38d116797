// Copyright 2026 The nail Authors
// Licensed under the Apache License, Version 2.0

#include "nail/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "nail/errors.hpp"

namespace nail {
namespace {

bool is_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// Length of the UTF-8 sequence introduced by `lead`; stray continuation
// bytes count as one character.
std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;
}

}  // namespace

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.empty()) throw FormatError("vocabulary is empty");
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i].empty()) {
      throw FormatError("vocabulary line " + std::to_string(i + 1) + ": empty token");
    }
    auto [it, inserted] = index_.emplace(tokens_[i], static_cast<std::uint32_t>(i));
    if (!inserted) {
      throw FormatError("vocabulary line " + std::to_string(i + 1) + ": duplicate token '" +
                        tokens_[i] + "' (first seen on line " + std::to_string(it->second + 1) +
                        ")");
    }
    if (i != 0) max_token_bytes_ = std::max(max_token_bytes_, tokens_[i].size());
  }
}

Vocabulary& Vocabulary::operator=(const Vocabulary& other) {
  if (this != &other) *this = Vocabulary(other.tokens_);
  return *this;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  return Vocabulary(std::move(tokens));
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open vocabulary file " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(std::move(line));
  }
  if (tokens.empty()) throw FormatError("vocabulary file " + path.string() + " is empty");
  return Vocabulary(std::move(tokens));
}

TokenId Vocabulary::id_of(std::string_view token) const {
  auto it = index_.find(token);
  return it == index_.end() ? unk_id() : TokenId{it->second};
}

bool Vocabulary::lookup(std::string_view token, TokenId& out) const {
  auto it = index_.find(token);
  if (it == index_.end() || it->second == unk_id().value) return false;
  out = TokenId{it->second};
  return true;
}

std::uint64_t Vocabulary::checksum() const {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (const auto& token : tokens_) {
    for (unsigned char c : token) {
      hash ^= c;
      hash *= 0x100000001b3ULL;
    }
    hash ^= static_cast<unsigned char>('\n');
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

TokenSequence tokenize(std::string_view text, const Vocabulary& vocab) {
  TokenSequence out;
  out.source_len = text.size();

  std::string normalized(text);
  std::transform(normalized.begin(), normalized.end(), normalized.begin(), [](unsigned char c) {
    return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c);
  });

  const std::string_view s(normalized);
  std::size_t pos = 0;
  while (pos < s.size()) {
    if (is_space(static_cast<unsigned char>(s[pos]))) {
      ++pos;
      continue;
    }
    std::size_t end = pos;
    while (end < s.size() && !is_space(static_cast<unsigned char>(s[end]))) ++end;

    // Greedy longest-prefix segmentation of s[pos, end).
    while (pos < end) {
      const std::size_t longest = std::min(vocab.max_token_bytes(), end - pos);
      bool matched = false;
      for (std::size_t len = longest; len > 0; --len) {
        TokenId id;
        if (vocab.lookup(s.substr(pos, len), id)) {
          out.ids.push_back(id);
          pos += len;
          matched = true;
          break;
        }
      }
      if (!matched) {
        out.ids.push_back(vocab.unk_id());
        pos = std::min(end, pos + utf8_length(static_cast<unsigned char>(s[pos])));
      }
    }
  }
  return out;
}

QueryFeature::QueryFeature(std::vector<Entry> entries) {
  std::map<std::uint32_t, double> acc;
  for (const auto& [id, w] : entries) acc[id.value] += w;
  entries_.reserve(acc.size());
  for (const auto& [id, w] : acc) {
    if (w > 0.0) entries_.emplace_back(TokenId{id}, w);
  }
}

QueryFeature QueryFeature::from_tokens(const TokenSequence& tokens, TokenId unk,
                                       QueryWeighting weighting) {
  std::vector<Entry> entries;
  entries.reserve(tokens.size());
  for (TokenId id : tokens.ids) {
    if (id != unk) entries.emplace_back(id, 1.0);
  }
  QueryFeature qf(std::move(entries));
  if (weighting == QueryWeighting::kBinary) {
    for (auto& entry : qf.entries_) entry.second = 1.0;
  }
  return qf;
}

double QueryFeature::total_weight() const {
  double total = 0.0;
  for (const auto& entry : entries_) total += entry.second;
  return total;
}

QueryFeature QueryFeature::scaled(double alpha) const {
  QueryFeature out = *this;
  for (auto& entry : out.entries_) entry.second *= alpha;
  if (alpha <= 0.0) out.entries_.clear();
  return out;
}

QueryFeature featurize_query(std::string_view text, const Vocabulary& vocab,
                             QueryWeighting weighting) {
  return QueryFeature::from_tokens(tokenize(text, vocab), vocab.unk_id(), weighting);
}

}  // namespace nail
