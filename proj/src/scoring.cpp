// Copyright 2026 The nail Authors
// Licensed under the Apache License, Version 2.0

#include "nail/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "nail/errors.hpp"

namespace nail {
namespace {

struct OrdinalScore {
  std::uint32_t doc;
  double score;
};

// Score descending, ordinal ascending.
std::vector<OrdinalScore> top_by_score(std::vector<OrdinalScore> hits, std::size_t top_n) {
  auto better = [](const OrdinalScore& a, const OrdinalScore& b) {
    return a.score != b.score ? a.score > b.score : a.doc < b.doc;
  };
  const std::size_t keep = std::min(top_n, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep), hits.end(),
                    better);
  hits.resize(keep);
  return hits;
}

}  // namespace

double score_pair(const QueryFeature& qf, const ScoreVector& sv) {
  double total = 0.0;
  for (const auto& [token, weight] : qf.entries()) {
    if (token.value < sv.size()) total += weight * static_cast<double>(sv[token]);
  }
  return total;
}

double score_pair(const QueryFeature& qf, const SparseScoreVector& sv) {
  double total = 0.0;
  auto it = sv.entries().begin();
  const auto end = sv.entries().end();
  for (const auto& [token, weight] : qf.entries()) {
    while (it != end && it->token < token) ++it;
    if (it == end) break;
    if (it->token == token) total += weight * static_cast<double>(it->score);
  }
  return total;
}

Bm25Stats Bm25Stats::from_documents(std::span<const TokenSequence> docs, std::size_t vocab_size,
                                    Bm25Params params) {
  if (!(params.k1 >= 0.0)) throw ArgumentError("bm25: k1 must be >= 0");
  if (!(params.b >= 0.0 && params.b <= 1.0)) throw ArgumentError("bm25: b must be in [0, 1]");
  Bm25Stats stats;
  stats.params = params;
  stats.num_docs = docs.size();
  stats.df.assign(vocab_size, 0);
  stats.doc_len.reserve(docs.size());
  std::vector<std::uint32_t> last_seen(vocab_size, 0);
  double total_len = 0.0;
  for (std::uint32_t d = 0; d < docs.size(); ++d) {
    stats.doc_len.push_back(static_cast<std::uint32_t>(docs[d].size()));
    total_len += static_cast<double>(docs[d].size());
    for (TokenId t : docs[d].ids) {
      if (last_seen[t.value] != d + 1) {
        last_seen[t.value] = d + 1;
        ++stats.df[t.value];
      }
    }
  }
  stats.avgdl = docs.empty() ? 0.0 : total_len / static_cast<double>(docs.size());
  return stats;
}

double bm25_idf(std::uint32_t df, std::size_t num_docs) {
  const double n = static_cast<double>(num_docs);
  const double f = static_cast<double>(df);
  return std::log(1.0 + (n - f + 0.5) / (f + 0.5));
}

double bm25_term_score(std::uint32_t tf, std::uint32_t dl, std::uint32_t df,
                       const Bm25Stats& stats) {
  if (tf == 0) return 0.0;
  const double k1 = stats.params.k1;
  const double b = stats.params.b;
  const double f = static_cast<double>(tf);
  const double length_term = stats.avgdl > 0.0 ? b * static_cast<double>(dl) / stats.avgdl : 0.0;
  return bm25_idf(df, stats.num_docs) * f * (k1 + 1.0) / (f + k1 * (1.0 - b + length_term));
}

double bm25_score(const QueryFeature& qf, const TokenSequence& doc, const Bm25Stats& stats) {
  double total = 0.0;
  const auto dl = static_cast<std::uint32_t>(doc.size());
  for (const auto& [token, weight] : qf.entries()) {
    if (token.value >= stats.df.size()) continue;
    const auto tf = static_cast<std::uint32_t>(std::count(doc.ids.begin(), doc.ids.end(), token));
    total += bm25_term_score(tf, dl, stats.df[token.value], stats);
  }
  return total;
}

Bm25Index::Bm25Index(std::span<const Document> docs, const Vocabulary& vocab, Bm25Params params)
    : postings_(vocab.size()) {
  std::vector<TokenSequence> tokenized;
  tokenized.reserve(docs.size());
  for (const auto& doc : docs) {
    doc_ids_.push_back(doc.doc_id);
    tokenized.push_back(tokenize(doc.text, vocab));
  }
  stats_ = Bm25Stats::from_documents(tokenized, vocab.size(), params);

  std::vector<std::uint32_t> tf(vocab.size(), 0);
  for (std::uint32_t d = 0; d < tokenized.size(); ++d) {
    for (TokenId t : tokenized[d].ids) ++tf[t.value];
    for (TokenId t : tokenized[d].ids) {
      if (tf[t.value] != 0) {
        postings_[t.value].push_back({d, tf[t.value]});
        tf[t.value] = 0;
      }
    }
  }
}

ScoreVector Bm25Index::document_vector(std::uint32_t ordinal) const {
  std::vector<float> scores(postings_.size(), 0.0F);
  const std::uint32_t dl = stats_.doc_len.at(ordinal);
  for (std::uint32_t t = 0; t < postings_.size(); ++t) {
    if (t == 0) continue;  // UNK never matches a query token
    const auto& list = postings_[t];
    auto it = std::lower_bound(list.begin(), list.end(), ordinal,
                               [](const TfPosting& p, std::uint32_t d) { return p.doc < d; });
    if (it != list.end() && it->doc == ordinal) {
      scores[t] = static_cast<float>(bm25_term_score(it->tf, dl, stats_.df[t], stats_));
    }
  }
  return ScoreVector(std::move(scores));
}

std::vector<ScoredDoc> retrieve_bm25(const QueryFeature& qf, const Bm25Index& index,
                                     std::size_t top_n) {
  if (top_n == 0) throw ArgumentError("top_n must be at least 1");
  const auto& stats = index.stats();
  std::vector<double> acc(index.num_docs(), 0.0);
  std::vector<std::uint32_t> touched;
  for (const auto& [token, weight] : qf.entries()) {
    if (token.value >= stats.df.size()) continue;
    for (const auto& p : index.postings_for(token)) {
      if (acc[p.doc] == 0.0) touched.push_back(p.doc);
      acc[p.doc] += bm25_term_score(p.tf, stats.doc_len[p.doc], stats.df[token.value], stats);
    }
  }
  std::vector<OrdinalScore> hits;
  for (auto d : touched) {
    if (acc[d] != 0.0) hits.push_back({d, acc[d]});
  }
  std::vector<ScoredDoc> out;
  for (const auto& h : top_by_score(std::move(hits), top_n)) {
    out.push_back({index.doc_id(h.doc), h.score});
  }
  return out;
}

DocVectorStore DocVectorStore::from_index(const ImpactIndex& index) {
  DocVectorStore store;
  auto vectors = index.forward_vectors();
  for (std::uint32_t d = 0; d < vectors.size(); ++d) store.add(index.doc_id(d), std::move(vectors[d]));
  return store;
}

DocVectorStore DocVectorStore::from_vectors(std::span<const DocVector> vectors) {
  DocVectorStore store;
  for (const auto& v : vectors) store.add(v.doc_id, v.vector);
  return store;
}

void DocVectorStore::add(std::string doc_id, SparseScoreVector sv) {
  vectors_.insert_or_assign(std::move(doc_id), std::move(sv));
}

const SparseScoreVector* DocVectorStore::find(std::string_view doc_id) const {
  auto it = vectors_.find(std::string(doc_id));
  return it == vectors_.end() ? nullptr : &it->second;
}

std::vector<ScoredDoc> rerank(std::span<const ScoredDoc> candidates, const QueryFeature& qf,
                              const DocVectorStore& vectors) {
  std::vector<ScoredDoc> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) {
    const auto* sv = vectors.find(c.doc_id);
    if (sv == nullptr) throw ArgumentError("no score vector for candidate '" + c.doc_id + "'");
    out.push_back({c.doc_id, score_pair(qf, *sv)});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const ScoredDoc& a, const ScoredDoc& b) { return a.score > b.score; });
  return out;
}

std::vector<ScoredDoc> retrieve_exhaustive(const QueryFeature& qf, const ImpactIndex& index,
                                           std::size_t top_n) {
  if (top_n == 0) throw ArgumentError("top_n must be at least 1");
  std::vector<double> acc(index.num_docs(), 0.0);
  std::vector<char> seen(index.num_docs(), 0);
  std::vector<std::uint32_t> touched;
  for (const auto& [token, weight] : qf.entries()) {
    if (token.value >= index.vocab_size()) continue;
    for (const auto& p : index.postings_for(token)) {
      if (!seen[p.doc]) {
        seen[p.doc] = 1;
        touched.push_back(p.doc);
      }
      acc[p.doc] += weight * static_cast<double>(p.score);
    }
  }
  std::vector<OrdinalScore> hits;
  hits.reserve(touched.size());
  for (auto d : touched) hits.push_back({d, acc[d]});
  std::vector<ScoredDoc> out;
  for (const auto& h : top_by_score(std::move(hits), top_n)) {
    out.push_back({index.doc_id(h.doc), h.score});
  }
  return out;
}

std::uint64_t estimate_flops(std::uint64_t query_len, std::uint64_t num_docs) {
  return query_len * num_docs;
}

int flops_order(std::uint64_t flops) {
  int order = 0;
  for (std::uint64_t bound = 1; bound < flops; bound *= 10) {
    ++order;
    if (bound > std::numeric_limits<std::uint64_t>::max() / 10) break;
  }
  return order;
}

std::vector<RunEntry> to_run_entries(std::string_view query_id, std::span<const ScoredDoc> ranked,
                                     std::string_view tag) {
  std::vector<RunEntry> entries;
  entries.reserve(ranked.size());
  int rank = 1;
  for (const auto& d : ranked) {
    entries.push_back({std::string(query_id), d.doc_id, rank++, d.score, std::string(tag)});
  }
  return entries;
}

}  // namespace nail
