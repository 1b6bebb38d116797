// Copyright 2026 The nail Authors
// Licensed under the Apache License, Version 2.0

// Command-line front end for the indexing, retrieval, training and
// evaluation pipeline.

#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "nail/errors.hpp"
#include "nail/pipeline.hpp"

namespace {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kInternal = 3 };

void add_vocab(CLI::App* cmd, nail::RunConfig& c) {
  cmd->add_option("--vocab", c.vocab, "Vocabulary file (one token per line, line 1 = UNK)")
      ->required();
}

}  // namespace

int main(int argc, char** argv) {
  nail::RunConfig c;
  std::size_t sparsify_k = 0;

  CLI::App app{"nail: sparse lexical retrieval with precomputed document score vectors"};
  app.set_config("--config", "", "TOML-style file with option defaults; flags take precedence");
  app.require_subcommand(1);
  app.add_option("--seed", c.seed, "Seed for all randomness")->capture_default_str();

  auto* build = app.add_subcommand("build-index", "Score a corpus and write an impact index");
  build->add_option("--corpus", c.corpus, "Corpus NDJSON ({\"id\",\"text\"} per line)")->required();
  add_vocab(build, c);
  build->add_option("--output,-o", c.output, "Index file to write")->required();
  build->add_option("--scorer", c.scorer, "model | vectors | bm25")
      ->check(CLI::IsMember({"model", "vectors", "bm25"}))
      ->capture_default_str();
  build->add_option("--model", c.model, "Model checkpoint (scorer=model)");
  build->add_option("--vectors", c.vectors, "Score vectors NDJSON (scorer=vectors)");
  build->add_option("--sparsify-k", sparsify_k, "Keep only the top-k tokens per document")
      ->check(CLI::PositiveNumber);
  build->add_option("--threads", c.threads, "Scoring threads (0 = all cores)");
  build->add_option("--k1", c.k1, "BM25 k1")->capture_default_str();
  build->add_option("--b", c.b, "BM25 b")->capture_default_str();
  build->add_option("--export-vectors", c.export_vectors, "Also write indexed vectors as NDJSON");

  auto* retrieve = app.add_subcommand("retrieve", "Rank documents for every query");
  retrieve->add_option("--mode", c.mode, "bm25 | nail-exh")
      ->check(CLI::IsMember({"bm25", "nail-exh"}))
      ->capture_default_str();
  retrieve->add_option("--queries", c.queries, "Queries TSV (id<TAB>text)")->required();
  add_vocab(retrieve, c);
  retrieve->add_option("--index", c.index, "Impact index (nail-exh, or bm25 without --corpus)");
  retrieve->add_option("--corpus", c.corpus, "Corpus NDJSON for exact BM25");
  retrieve->add_option("--output,-o", c.output, "Run file to write")->required();
  retrieve->add_option("--top-n", c.top_n, "Results per query")->capture_default_str();
  retrieve->add_option("--k1", c.k1, "BM25 k1")->capture_default_str();
  retrieve->add_option("--b", c.b, "BM25 b")->capture_default_str();

  auto* rerank = app.add_subcommand("rerank", "Reorder a candidate run by inner-product score");
  rerank->add_option("--candidates", c.candidates, "Candidate run (TREC format)")->required();
  rerank->add_option("--queries", c.queries, "Queries TSV")->required();
  add_vocab(rerank, c);
  rerank->add_option("--index", c.index, "Impact index holding the document vectors");
  rerank->add_option("--vectors", c.vectors, "Score vectors NDJSON");
  rerank->add_option("--model", c.model, "Model checkpoint (with --corpus)");
  rerank->add_option("--corpus", c.corpus, "Corpus NDJSON (with --model)");
  rerank->add_option("--output,-o", c.output, "Run file to write")->required();

  auto* train = app.add_subcommand("train", "Train the indexer with the contrastive loss");
  train->add_option("--stage", c.stage, "pretrain | finetune")
      ->check(CLI::IsMember({"pretrain", "finetune"}))
      ->capture_default_str();
  train->add_option("--corpus", c.corpus, "Corpus NDJSON")->required();
  add_vocab(train, c);
  train->add_option("--queries", c.queries, "Queries TSV (finetune)");
  train->add_option("--qrels", c.qrels, "Relevance judgments (finetune)");
  train->add_option("--init-model", c.init_model, "Start from this checkpoint");
  train->add_option("--output,-o", c.output, "Checkpoint to write")->required();
  train->add_option("--loss-csv", c.loss_csv, "Loss trace CSV (step,loss,held_out_loss)");
  train->add_option("--steps", c.steps, "SGD steps")->capture_default_str();
  train->add_option("--lr", c.lr, "Learning rate")->check(CLI::NonNegativeNumber)->capture_default_str();
  train->add_option("--hidden", c.hidden, "Hidden size h")->check(CLI::PositiveNumber)->capture_default_str();
  train->add_option("--positions", c.positions, "Decode positions P")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  train->add_option("--negatives", c.negatives, "Hard negatives per example")->capture_default_str();
  train->add_option("--total-passages", c.total_passages, "Passages per batch")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  train->add_option("--eval-every", c.eval_every, "Held-out evaluation interval")->capture_default_str();
  train->add_option("--init-scale", c.init_scale, "Uniform init half-width")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  train->add_option("--held-out-fraction", c.held_out_fraction, "Share of data held out")
      ->check(CLI::Range(0.0, 0.99))
      ->capture_default_str();
  train->add_option("--k1", c.k1, "BM25 k1 for hard-negative mining")->capture_default_str();
  train->add_option("--b", c.b, "BM25 b for hard-negative mining")->capture_default_str();

  auto* evaluate = app.add_subcommand("evaluate", "Compute IR metrics for a run");
  evaluate->add_option("--run", c.candidates, "Run file (TREC format)")->required();
  evaluate->add_option("--qrels", c.qrels, "Relevance judgments")->required();
  evaluate->add_option("--output,-o", c.output, "Metrics CSV to write");
  evaluate->add_option("--metric", c.metrics, "Metric like ndcg@10, recall@100, mrr@10 (repeatable)");

  auto* sweep = app.add_subcommand("sweep", "Recall@100 as documents are cut to their top-k tokens");
  add_vocab(sweep, c);
  sweep->add_option("--vectors", c.vectors, "Score vectors NDJSON");
  sweep->add_option("--index", c.index, "Impact index to take vectors from");
  sweep->add_option("--queries", c.queries, "Queries TSV")->required();
  sweep->add_option("--qrels", c.qrels, "Relevance judgments")->required();
  sweep->add_option("--k", c.sweep_k, "Token budgets to try (repeatable)");
  sweep->add_option("--output,-o", c.output, "Sweep CSV to write")->required();

  auto* flops = app.add_subcommand("flops", "Estimated scoring cost for a query");
  flops->add_option("--query-len", c.query_len, "Query tokens")->capture_default_str();
  flops->add_option("--num-docs", c.num_docs, "Documents scored")->capture_default_str();

  auto* top_terms = app.add_subcommand("top-terms", "Print the highest-scoring tokens per document");
  add_vocab(top_terms, c);
  top_terms->add_option("--model", c.model, "Model checkpoint (with --corpus)");
  top_terms->add_option("--corpus", c.corpus, "Corpus NDJSON");
  top_terms->add_option("--vectors", c.vectors, "Score vectors NDJSON");
  top_terms->add_option("--index", c.index, "Impact index");
  top_terms->add_option("--k", c.top_terms, "Tokens per document")->capture_default_str();
  top_terms->add_option("--doc", c.doc_ids, "Only these document ids (repeatable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }
  if (sparsify_k > 0) c.sparsify_k = sparsify_k;

  try {
    if (build->parsed()) nail::cmd_build_index(c, std::cerr);
    if (retrieve->parsed()) nail::cmd_retrieve(c, std::cerr);
    if (rerank->parsed()) nail::cmd_rerank(c, std::cerr);
    if (train->parsed()) nail::cmd_train(c, std::cerr);
    if (evaluate->parsed()) nail::cmd_evaluate(c, std::cout);
    if (sweep->parsed()) nail::cmd_sweep(c, std::cerr);
    if (flops->parsed()) nail::cmd_flops(c, std::cout);
    if (top_terms->parsed()) nail::cmd_top_terms(c, std::cout);
  } catch (const nail::ArgumentError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const nail::FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternal;
  }
  return kOk;
}
