// Copyright 2026 The nail Authors
// Licensed under the Apache License, Version 2.0

#include "nail/term_index.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <numeric>
#include <thread>

#include "binary_io.hpp"
#include "json.hpp"
#include "nail/errors.hpp"

namespace nail {
namespace {

constexpr char kMagic[8] = {'N', 'A', 'I', 'L', 'I', 'D', 'X', '1'};

bool all_finite(std::span<const float> values) {
  return std::all_of(values.begin(), values.end(), [](float v) { return std::isfinite(v); });
}

}  // namespace

ScoreVector::ScoreVector(std::vector<float> scores) : scores_(std::move(scores)) {
  if (!all_finite(scores_)) throw ArgumentError("score vector contains non-finite values");
}

SparseScoreVector::SparseScoreVector(std::vector<SparseEntry> entries) : entries_(std::move(entries)) {
  std::sort(entries_.begin(), entries_.end(),
            [](const SparseEntry& a, const SparseEntry& b) { return a.token < b.token; });
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (!std::isfinite(entries_[i].score)) {
      throw ArgumentError("sparse score vector contains non-finite values");
    }
    if (i > 0 && entries_[i - 1].token == entries_[i].token) {
      throw ArgumentError("sparse score vector repeats token " +
                          std::to_string(entries_[i].token.value));
    }
  }
}

SparseScoreVector SparseScoreVector::nonzeros(const ScoreVector& dense) {
  std::vector<SparseEntry> entries;
  for (std::size_t t = 0; t < dense.size(); ++t) {
    if (dense[t] != 0.0F) entries.push_back({TokenId{static_cast<std::uint32_t>(t)}, dense[t]});
  }
  return SparseScoreVector(std::move(entries));
}

ScoreVector SparseScoreVector::to_dense(std::size_t vocab_size) const {
  std::vector<float> dense(vocab_size, 0.0F);
  for (const auto& e : entries_) {
    if (e.token.value >= vocab_size) throw ArgumentError("token id exceeds vocabulary size");
    dense[e.token.value] = e.score;
  }
  return ScoreVector(std::move(dense));
}

SparseScoreVector sparsify(const ScoreVector& sv, std::size_t k) {
  if (k == 0) throw ArgumentError("sparsify: k must be at least 1");
  std::vector<std::uint32_t> order(sv.size());
  std::iota(order.begin(), order.end(), 0U);
  const std::size_t keep = std::min(k, sv.size());
  auto by_score = [&](std::uint32_t a, std::uint32_t b) {
    return sv[a] != sv[b] ? sv[a] > sv[b] : a < b;
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                    by_score);
  std::vector<SparseEntry> entries;
  entries.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) entries.push_back({TokenId{order[i]}, sv[order[i]]});
  return SparseScoreVector(std::move(entries));
}

ImpactIndex::ImpactIndex(IndexMetadata meta, std::vector<std::string> doc_ids,
                         std::vector<std::vector<Posting>> postings)
    : meta_(std::move(meta)), doc_ids_(std::move(doc_ids)), postings_(std::move(postings)) {
  if (meta_.num_docs != doc_ids_.size()) throw FormatError("index doc count mismatch");
  if (postings_.size() != meta_.vocab_size) throw FormatError("index vocabulary size mismatch");
  for (const auto& list : postings_) {
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (list[i].doc >= meta_.num_docs) throw FormatError("posting ordinal out of range");
      if (i > 0 && list[i - 1].doc >= list[i].doc) throw FormatError("posting list not sorted");
      if (!std::isfinite(list[i].score)) throw FormatError("posting score is not finite");
    }
  }
}

std::size_t ImpactIndex::num_postings() const {
  std::size_t n = 0;
  for (const auto& list : postings_) n += list.size();
  return n;
}

std::span<const Posting> ImpactIndex::postings_for(TokenId t) const {
  if (t.value >= meta_.vocab_size) {
    throw ArgumentError("token id " + std::to_string(t.value) + " >= vocabulary size " +
                        std::to_string(meta_.vocab_size));
  }
  return postings_[t.value];
}

std::vector<SparseScoreVector> ImpactIndex::forward_vectors() const {
  std::vector<std::vector<SparseEntry>> per_doc(doc_ids_.size());
  for (std::uint32_t t = 0; t < postings_.size(); ++t) {
    for (const auto& p : postings_[t]) per_doc[p.doc].push_back({TokenId{t}, p.score});
  }
  std::vector<SparseScoreVector> out;
  out.reserve(per_doc.size());
  for (auto& entries : per_doc) out.emplace_back(std::move(entries));
  return out;
}

ImpactIndexBuilder::ImpactIndexBuilder(std::size_t vocab_size, std::uint64_t vocab_checksum,
                                       std::string scorer_tag)
    : postings_(vocab_size) {
  meta_.vocab_size = static_cast<std::uint32_t>(vocab_size);
  meta_.vocab_checksum = vocab_checksum;
  meta_.scorer_tag = std::move(scorer_tag);
}

std::uint32_t ImpactIndexBuilder::add(std::string doc_id, const SparseScoreVector& sv) {
  const auto ordinal = static_cast<std::uint32_t>(doc_ids_.size());
  for (const auto& e : sv.entries()) {
    if (e.token.value >= postings_.size()) {
      throw ArgumentError("document '" + doc_id + "': token id out of range");
    }
    if (e.score != 0.0F) postings_[e.token.value].push_back({ordinal, e.score});
  }
  doc_ids_.push_back(std::move(doc_id));
  return ordinal;
}

ImpactIndex ImpactIndexBuilder::finish() && {
  meta_.num_docs = static_cast<std::uint32_t>(doc_ids_.size());
  return ImpactIndex(std::move(meta_), std::move(doc_ids_), std::move(postings_));
}

ImpactIndex build_index(const std::function<std::optional<Document>()>& next_doc,
                        const DocumentScorer& scorer, const Vocabulary& vocab,
                        const BuildOptions& options) {
  if (options.sparsify_k && *options.sparsify_k == 0) {
    throw ArgumentError("sparsify_k must be at least 1");
  }
  ImpactIndexBuilder builder(vocab.size(), vocab.checksum(), options.scorer_tag);
  const std::size_t threads = std::max<std::size_t>(1, options.threads);
  const std::size_t chunk_size = std::max<std::size_t>(1, options.chunk_size);

  std::vector<Document> chunk;
  std::vector<SparseScoreVector> scored;
  std::vector<std::exception_ptr> failures;

  auto score_one = [&](std::size_t i) {
    try {
      ScoreVector sv = scorer(chunk[i]);
      if (sv.size() != vocab.size()) {
        throw ArgumentError("scorer returned " + std::to_string(sv.size()) + " scores, expected " +
                            std::to_string(vocab.size()));
      }
      scored[i] = options.sparsify_k ? sparsify(sv, *options.sparsify_k)
                                     : SparseScoreVector::nonzeros(sv);
    } catch (...) {
      failures[i] = std::current_exception();
    }
  };

  auto flush = [&] {
    scored.assign(chunk.size(), SparseScoreVector{});
    failures.assign(chunk.size(), nullptr);
    if (threads == 1 || chunk.size() < 2) {
      for (std::size_t i = 0; i < chunk.size(); ++i) score_one(i);
    } else {
      std::vector<std::jthread> workers;
      const std::size_t n = std::min(threads, chunk.size());
      for (std::size_t w = 0; w < n; ++w) {
        workers.emplace_back([&, w] {
          for (std::size_t i = w; i < chunk.size(); i += n) score_one(i);
        });
      }
    }
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      if (failures[i]) {
        const std::string prefix = "scoring document '" + chunk[i].doc_id + "' failed: ";
        try {
          std::rethrow_exception(failures[i]);
        } catch (const FormatError& e) {
          throw FormatError(prefix + e.what());
        } catch (const std::exception& e) {
          throw InvariantError(prefix + e.what());
        }
      }
      builder.add(std::move(chunk[i].doc_id), scored[i]);
    }
    chunk.clear();
  };

  while (auto doc = next_doc()) {
    chunk.push_back(std::move(*doc));
    if (chunk.size() == chunk_size) flush();
  }
  flush();
  return std::move(builder).finish();
}

ImpactIndex build_index(std::span<const Document> docs, const DocumentScorer& scorer,
                        const Vocabulary& vocab, const BuildOptions& options) {
  std::size_t next = 0;
  return build_index(
      [&]() -> std::optional<Document> {
        if (next == docs.size()) return std::nullopt;
        return docs[next++];
      },
      scorer, vocab, options);
}

void save_index(const ImpactIndex& index, const std::filesystem::path& path) {
  detail::ByteWriter w;
  const auto& meta = index.metadata();
  w.raw(kMagic, sizeof(kMagic));
  w.u32(meta.format_version);
  w.u32(meta.vocab_size);
  w.u32(meta.num_docs);
  w.u64(meta.vocab_checksum);
  w.str(meta.scorer_tag);
  for (const auto& id : index.doc_ids()) w.str(id);

  std::uint32_t blocks = 0;
  for (std::uint32_t t = 0; t < meta.vocab_size; ++t) blocks += !index.postings_for(TokenId{t}).empty();
  w.u32(blocks);
  for (std::uint32_t t = 0; t < meta.vocab_size; ++t) {
    const auto list = index.postings_for(TokenId{t});
    if (list.empty()) continue;
    w.u32(t);
    w.u32(static_cast<std::uint32_t>(list.size()));
    for (const auto& p : list) {
      w.u32(p.doc);
      w.f32(p.score);
    }
  }

  w.write_file(path);
}

ImpactIndex load_index(const std::filesystem::path& path, const std::uint64_t* expected_checksum) {
  detail::ByteReader r(path, "index");

  if (!r.raw_equals(kMagic, sizeof(kMagic))) {
    throw FormatError(path.string() + " is not an index file (bad magic)");
  }
  IndexMetadata meta;
  meta.format_version = r.u32();
  if (meta.format_version != IndexMetadata::kFormatVersion) {
    throw IncompatibleError("index format version " + std::to_string(meta.format_version) +
                            " is not supported (expected " +
                            std::to_string(IndexMetadata::kFormatVersion) + ")");
  }
  meta.vocab_size = r.u32();
  meta.num_docs = r.u32();
  meta.vocab_checksum = r.u64();
  if (expected_checksum && *expected_checksum != meta.vocab_checksum) {
    throw IncompatibleError("index was built with a different vocabulary (checksum mismatch)");
  }
  meta.scorer_tag = r.str();

  std::vector<std::string> doc_ids;
  doc_ids.reserve(meta.num_docs);
  for (std::uint32_t i = 0; i < meta.num_docs; ++i) doc_ids.push_back(r.str());

  std::vector<std::vector<Posting>> postings(meta.vocab_size);
  const auto blocks = r.u32();
  std::int64_t previous = -1;
  for (std::uint32_t b = 0; b < blocks; ++b) {
    const auto token = r.u32();
    if (token >= meta.vocab_size || static_cast<std::int64_t>(token) <= previous) {
      throw FormatError("index posting blocks out of order");
    }
    previous = token;
    const auto count = r.u32();
    if (count == 0 || count > meta.num_docs) throw FormatError("bad posting block length");
    auto& list = postings[token];
    list.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
      Posting p;
      p.doc = r.u32();
      p.score = r.f32();
      list.push_back(p);
    }
  }
  if (!r.at_end()) throw FormatError("trailing bytes after index data");
  return ImpactIndex(std::move(meta), std::move(doc_ids), std::move(postings));
}

void write_vectors_ndjson(std::span<const DocVector> vectors, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  for (const auto& v : vectors) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : v.vector.entries()) entries.push_back({e.token.value, e.score});
    out << nlohmann::json{{"id", v.doc_id}, {"entries", std::move(entries)}}.dump() << '\n';
  }
}

std::vector<DocVector> read_vectors_ndjson(const std::filesystem::path& path,
                                           std::size_t vocab_size) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<DocVector> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no) + ": ";
    try {
      const auto record = nlohmann::json::parse(line);
      std::vector<SparseEntry> entries;
      for (const auto& pair : record.at("entries")) {
        const auto token = pair.at(0).get<std::int64_t>();
        if (token < 0 || static_cast<std::size_t>(token) >= vocab_size) {
          throw FormatError(where + "token id " + std::to_string(token) + " out of range");
        }
        entries.push_back({TokenId{static_cast<std::uint32_t>(token)}, pair.at(1).get<float>()});
      }
      out.push_back({record.at("id").get<std::string>(), SparseScoreVector(std::move(entries))});
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(where + e.what());
    } catch (const ArgumentError& e) {
      throw FormatError(where + e.what());
    }
  }
  return out;
}

}  // namespace nail
