// Copyright 2026 The nail Authors
// Licensed under the Apache License, Version 2.0

#include "nail/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <random>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "nail/corpus.hpp"
#include "nail/errors.hpp"
#include "nail/eval.hpp"
#include "nail/model.hpp"
#include "nail/random.hpp"
#include "nail/scoring.hpp"
#include "nail/term_index.hpp"
#include "nail/training.hpp"
#include "nail/vocab.hpp"

namespace nail {
namespace {

void require(const std::filesystem::path& path, const char* flag) {
  if (path.empty()) throw ArgumentError(std::string("missing required option ") + flag);
}

std::size_t thread_count(const RunConfig& config) {
  if (config.threads > 0) return config.threads;
  return std::max(1U, std::thread::hardware_concurrency());
}

// Model checkpoint whose vocabulary size must match the loaded vocabulary.
ModelParams load_model_for(const std::filesystem::path& path, const Vocabulary& vocab) {
  auto ckpt = load_model(path);
  if (ckpt.params.shape.vocab_size != vocab.size()) {
    throw IncompatibleError("model vocabulary size " + std::to_string(ckpt.params.shape.vocab_size) +
                            " does not match vocabulary size " + std::to_string(vocab.size()));
  }
  return std::move(ckpt.params);
}

DocVectorStore model_vectors(const std::vector<Document>& docs, const Vocabulary& vocab,
                             const ModelParams& params) {
  DocVectorStore store;
  for (const auto& d : docs) {
    store.add(d.doc_id, SparseScoreVector::nonzeros(encode_document(tokenize(d.text, vocab), params)));
  }
  return store;
}

std::vector<Passage> to_passages(const std::vector<Document>& docs, const Vocabulary& vocab) {
  std::vector<Passage> out;
  out.reserve(docs.size());
  for (const auto& d : docs) out.push_back({d.doc_id, tokenize(d.text, vocab)});
  return out;
}

}  // namespace

void cmd_build_index(const RunConfig& config, std::ostream& log) {
  require(config.corpus, "--corpus");
  require(config.vocab, "--vocab");
  require(config.output, "--output");
  const auto start = std::chrono::steady_clock::now();
  const Vocabulary vocab = Vocabulary::load(config.vocab);

  BuildOptions options;
  options.sparsify_k = config.sparsify_k;
  options.threads = thread_count(config);

  ImpactIndex index;
  if (config.scorer == "model") {
    if (config.model.empty()) throw ArgumentError("--scorer model requires --model");
    const ModelParams params = load_model_for(config.model, vocab);
    options.scorer_tag = "nail";
    CorpusReader reader(config.corpus);
    index = build_index([&] { return reader.next(); },
                        [&](const Document& d) { return encode_document(tokenize(d.text, vocab), params); },
                        vocab, options);
  } else if (config.scorer == "vectors") {
    if (config.vectors.empty()) throw ArgumentError("--scorer vectors requires --vectors");
    const auto vectors = read_vectors_ndjson(config.vectors, vocab.size());
    std::unordered_map<std::string, const SparseScoreVector*> by_id;
    for (const auto& v : vectors) by_id.emplace(v.doc_id, &v.vector);
    options.scorer_tag = "vectors";
    CorpusReader reader(config.corpus);
    index = build_index([&] { return reader.next(); },
                        [&](const Document& d) {
                          auto it = by_id.find(d.doc_id);
                          if (it == by_id.end()) throw FormatError("no vector for document");
                          return it->second->to_dense(vocab.size());
                        },
                        vocab, options);
  } else if (config.scorer == "bm25") {
    const auto docs = load_corpus(config.corpus);
    const Bm25Index bm25(docs, vocab, {config.k1, config.b});
    std::unordered_map<std::string_view, std::uint32_t> ordinal;
    for (std::uint32_t i = 0; i < docs.size(); ++i) ordinal.emplace(docs[i].doc_id, i);
    options.scorer_tag = "bm25";
    index = build_index(docs, [&](const Document& d) { return bm25.document_vector(ordinal.at(d.doc_id)); },
                        vocab, options);
  } else {
    throw ArgumentError("unknown scorer '" + config.scorer + "' (model | vectors | bm25)");
  }

  save_index(index, config.output);
  if (!config.export_vectors.empty()) {
    const auto forward = index.forward_vectors();
    std::vector<DocVector> out;
    out.reserve(forward.size());
    for (std::uint32_t d = 0; d < forward.size(); ++d) out.push_back({index.doc_id(d), forward[d]});
    write_vectors_ndjson(out, config.export_vectors);
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  log << "docs=" << index.num_docs() << " nnz=" << index.num_postings()
      << " build_seconds=" << seconds << '\n';
}

void cmd_retrieve(const RunConfig& config, std::ostream& log) {
  require(config.queries, "--queries");
  require(config.vocab, "--vocab");
  require(config.output, "--output");
  if (config.top_n == 0) throw ArgumentError("--top-n must be at least 1");
  const Vocabulary vocab = Vocabulary::load(config.vocab);
  const auto queries = load_queries(config.queries);

  std::vector<RunEntry> run;
  std::string tag;
  if (config.mode == "bm25") {
    tag = "bm25";
    if (!config.corpus.empty()) {
      const auto docs = load_corpus(config.corpus);
      const Bm25Index bm25(docs, vocab, {config.k1, config.b});
      for (const auto& q : queries) {
        const auto ranked = retrieve_bm25(featurize_query(q.text, vocab), bm25, config.top_n);
        auto entries = to_run_entries(q.query_id, ranked, tag);
        run.insert(run.end(), entries.begin(), entries.end());
      }
    } else {
      // Persisted BM25 impacts: each unique query token counts once.
      require(config.index, "--corpus or --index");
      const auto checksum = vocab.checksum();
      const ImpactIndex index = load_index(config.index, &checksum);
      if (index.metadata().scorer_tag != "bm25") {
        throw ArgumentError("--mode bm25 needs an index built with --scorer bm25");
      }
      for (const auto& q : queries) {
        const auto qf = featurize_query(q.text, vocab, QueryWeighting::kBinary);
        auto entries = to_run_entries(q.query_id, retrieve_exhaustive(qf, index, config.top_n), tag);
        run.insert(run.end(), entries.begin(), entries.end());
      }
    }
  } else if (config.mode == "nail-exh") {
    tag = "nail-exh";
    require(config.index, "--index");
    const auto checksum = vocab.checksum();
    const ImpactIndex index = load_index(config.index, &checksum);
    for (const auto& q : queries) {
      const auto ranked = retrieve_exhaustive(featurize_query(q.text, vocab), index, config.top_n);
      auto entries = to_run_entries(q.query_id, ranked, tag);
      run.insert(run.end(), entries.begin(), entries.end());
    }
  } else {
    throw ArgumentError("unknown retrieval mode '" + config.mode + "' (bm25 | nail-exh)");
  }
  write_run(run, config.output, tag);
  log << "queries=" << queries.size() << " entries=" << run.size() << " tag=" << tag << '\n';
}

void cmd_rerank(const RunConfig& config, std::ostream& log) {
  require(config.candidates, "--candidates");
  require(config.queries, "--queries");
  require(config.vocab, "--vocab");
  require(config.output, "--output");
  const Vocabulary vocab = Vocabulary::load(config.vocab);
  const auto queries = load_queries(config.queries);

  DocVectorStore store;
  if (!config.index.empty()) {
    const auto checksum = vocab.checksum();
    store = DocVectorStore::from_index(load_index(config.index, &checksum));
  } else if (!config.vectors.empty()) {
    store = DocVectorStore::from_vectors(read_vectors_ndjson(config.vectors, vocab.size()));
  } else if (!config.model.empty()) {
    require(config.corpus, "--corpus");
    store = model_vectors(load_corpus(config.corpus), vocab, load_model_for(config.model, vocab));
  } else {
    throw ArgumentError("rerank needs --index, --vectors, or --model with --corpus");
  }

  std::unordered_map<std::string, const QueryRecord*> by_id;
  for (const auto& q : queries) by_id.emplace(q.query_id, &q);

  const auto candidates = read_run(config.candidates);
  std::vector<RunEntry> run;
  for (const auto& list : group_run(candidates)) {
    auto q = by_id.find(list.query_id);
    if (q == by_id.end()) throw FormatError("candidate run names unknown query '" + list.query_id + "'");
    std::vector<ScoredDoc> cands;
    for (const auto& d : list.doc_ids) cands.push_back({d, 0.0});
    std::vector<ScoredDoc> ranked;
    try {
      ranked = rerank(cands, featurize_query(q->second->text, vocab), store);
    } catch (const ArgumentError& e) {
      throw FormatError(e.what());
    }
    auto entries = to_run_entries(list.query_id, ranked, "nail-rerank");
    run.insert(run.end(), entries.begin(), entries.end());
  }
  write_run(run, config.output, "nail-rerank");
  log << "reranked_entries=" << run.size() << '\n';
}

void cmd_train(const RunConfig& config, std::ostream& log) {
  require(config.corpus, "--corpus");
  require(config.vocab, "--vocab");
  require(config.output, "--output");
  if (!(config.held_out_fraction >= 0.0 && config.held_out_fraction < 1.0)) {
    throw ArgumentError("--held-out-fraction must be in [0, 1)");
  }
  const Vocabulary vocab = Vocabulary::load(config.vocab);
  const auto docs = load_corpus(config.corpus);

  TrainConfig tc;
  tc.stage = parse_stage(config.stage);
  tc.hidden = config.hidden;
  tc.positions = config.positions;
  tc.steps = config.steps;
  tc.lr = config.lr;
  tc.total_passages = config.total_passages;
  tc.negatives_per_example = config.negatives;
  tc.seed = config.seed;
  tc.eval_every = config.eval_every;
  tc.init_scale = config.init_scale;

  std::optional<ModelParams> init;
  if (!config.init_model.empty()) init = load_model_for(config.init_model, vocab);

  // Held-out selection uses its own stream so the training stream only
  // depends on the seed.
  std::mt19937_64 split_rng(config.seed + 1);
  auto held_out_count = [&](std::size_t n) {
    return static_cast<std::size_t>(config.held_out_fraction * static_cast<double>(n));
  };

  TrainResult result;
  if (tc.stage == TrainingStage::kPretrain) {
    auto passages = to_passages(docs, vocab);
    shuffle_range(passages.begin(), passages.end(), split_rng);
    const auto cut = passages.size() - held_out_count(passages.size());
    std::span<const Passage> all(passages);
    result = train_pretrain(tc, vocab.size(), all.subspan(0, cut), all.subspan(cut),
                            init ? &*init : nullptr);
  } else {
    require(config.queries, "--queries");
    require(config.qrels, "--qrels");
    const auto queries = load_queries(config.queries);
    const Qrels qrels = load_qrels(config.qrels);
    const Bm25Index bm25(docs, vocab, {config.k1, config.b});
    std::unordered_map<std::string_view, std::size_t> ordinal;
    for (std::size_t i = 0; i < docs.size(); ++i) ordinal.emplace(docs[i].doc_id, i);
    const auto passages = to_passages(docs, vocab);

    std::vector<std::vector<FinetuneExample>> per_query;
    for (const auto& q : queries) {
      const auto* judged = qrels.judgments(q.query_id);
      if (judged == nullptr) continue;
      const TokenSequence qtokens = tokenize(q.text, vocab);
      std::vector<ScoredPassage> candidates;
      for (const auto& hit : retrieve_bm25(featurize_query(q.text, vocab), bm25, 100)) {
        auto g = judged->find(hit.doc_id);
        if (g != judged->end() && g->second > 0) continue;
        candidates.push_back({passages[ordinal.at(hit.doc_id)], hit.score});
      }
      std::vector<FinetuneExample> examples;
      for (const auto& [doc_id, grade] : *judged) {
        if (grade <= 0) continue;
        auto it = ordinal.find(doc_id);
        if (it == ordinal.end()) continue;
        examples.push_back({qtokens, passages[it->second], candidates});
      }
      if (!examples.empty()) per_query.push_back(std::move(examples));
    }
    shuffle_range(per_query.begin(), per_query.end(), split_rng);
    const auto cut = per_query.size() - held_out_count(per_query.size());
    std::vector<FinetuneExample> train_set, held_out;
    for (std::size_t i = 0; i < per_query.size(); ++i) {
      auto& dst = i < cut ? train_set : held_out;
      for (auto& ex : per_query[i]) dst.push_back(std::move(ex));
    }
    log << "train_examples=" << train_set.size() << " held_out_examples=" << held_out.size() << '\n';
    result = train_finetune(tc, vocab.size(), train_set, held_out, init ? &*init : nullptr);
  }

  save_model({result.params, config.seed, std::string(to_string(tc.stage))}, config.output);
  if (!config.loss_csv.empty()) write_loss_trace(result.trace, config.loss_csv);
  log << "steps=" << config.steps << " best_step=" << result.best_step;
  if (result.best_held_out_loss) log << " best_held_out_loss=" << *result.best_held_out_loss;
  log << '\n';
}

void cmd_evaluate(const RunConfig& config, std::ostream& log) {
  require(config.candidates, "--run");
  require(config.qrels, "--qrels");
  std::vector<MetricSpec> metrics;
  for (const auto& m : config.metrics) metrics.push_back(MetricSpec::parse(m));
  if (metrics.empty()) metrics = default_metrics();

  const auto report = evaluate_run(read_run(config.candidates), load_qrels(config.qrels), metrics);
  for (const auto& w : report.warnings) log << "warning: " << w << '\n';
  if (!config.output.empty()) write_report_csv(report, config.output);
  for (const auto& name : report.metric_names) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", report.aggregate.at(name));
    log << name << '\t' << buf << '\n';
  }
}

void cmd_sweep(const RunConfig& config, std::ostream& log) {
  require(config.vocab, "--vocab");
  require(config.queries, "--queries");
  require(config.qrels, "--qrels");
  require(config.output, "--output");
  const Vocabulary vocab = Vocabulary::load(config.vocab);

  std::vector<DocVector> vectors;
  if (!config.vectors.empty()) {
    vectors = read_vectors_ndjson(config.vectors, vocab.size());
  } else {
    require(config.index, "--vectors or --index");
    const auto checksum = vocab.checksum();
    const auto index = load_index(config.index, &checksum);
    auto forward = index.forward_vectors();
    for (std::uint32_t d = 0; d < forward.size(); ++d) {
      vectors.push_back({index.doc_id(d), std::move(forward[d])});
    }
  }
  std::vector<std::size_t> ks = config.sweep_k;
  if (ks.empty()) ks = {1, 10, 100};
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());

  const auto points = sparsification_sweep(vectors, vocab, load_qrels(config.qrels),
                                           load_queries(config.queries), ks);
  write_sweep_csv(points, config.output);
  for (const auto& p : points) log << "k=" << p.k << " recall@100=" << p.recall_at_100 << '\n';
}

void cmd_flops(const RunConfig& config, std::ostream& out) {
  out << estimate_flops(config.query_len, config.num_docs) << '\n';
}

void cmd_top_terms(const RunConfig& config, std::ostream& out) {
  require(config.vocab, "--vocab");
  if (config.top_terms == 0) throw ArgumentError("--k must be at least 1");
  const Vocabulary vocab = Vocabulary::load(config.vocab);
  const std::unordered_set<std::string> wanted(config.doc_ids.begin(), config.doc_ids.end());

  std::vector<DocVector> vectors;
  if (!config.model.empty()) {
    require(config.corpus, "--corpus");
    const auto params = load_model_for(config.model, vocab);
    CorpusReader reader(config.corpus);
    while (auto doc = reader.next()) {
      if (!wanted.empty() && !wanted.contains(doc->doc_id)) continue;
      const auto sv = encode_document(tokenize(doc->text, vocab), params);
      vectors.push_back({doc->doc_id, sparsify(sv, config.top_terms)});
    }
  } else if (!config.vectors.empty()) {
    vectors = read_vectors_ndjson(config.vectors, vocab.size());
  } else {
    require(config.index, "--model, --vectors or --index");
    const auto checksum = vocab.checksum();
    const auto index = load_index(config.index, &checksum);
    auto forward = index.forward_vectors();
    for (std::uint32_t d = 0; d < forward.size(); ++d) {
      vectors.push_back({index.doc_id(d), std::move(forward[d])});
    }
  }

  char buf[32];
  for (const auto& v : vectors) {
    if (!wanted.empty() && !wanted.contains(v.doc_id)) continue;
    std::vector<SparseEntry> entries(v.vector.entries().begin(), v.vector.entries().end());
    std::stable_sort(entries.begin(), entries.end(), [](const SparseEntry& a, const SparseEntry& b) {
      return a.score != b.score ? a.score > b.score : a.token < b.token;
    });
    if (entries.size() > config.top_terms) entries.resize(config.top_terms);
    out << v.doc_id;
    for (const auto& e : entries) {
      std::snprintf(buf, sizeof(buf), "%.4f", static_cast<double>(e.score));
      out << '\t' << vocab.token(e.token) << ':' << buf;
    }
    out << '\n';
  }
}

}  // namespace nail
