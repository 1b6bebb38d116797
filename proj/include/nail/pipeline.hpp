// Copyright 2026 The nail Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace nail {

/// Settings shared by all pipeline commands. Each command reads the paths
/// it needs and ignores the rest.
struct RunConfig {
  std::filesystem::path corpus;
  std::filesystem::path queries;
  std::filesystem::path qrels;
  std::filesystem::path vocab;
  std::filesystem::path index;
  std::filesystem::path model;
  std::filesystem::path vectors;
  std::filesystem::path candidates;
  std::filesystem::path output;
  std::filesystem::path loss_csv;
  std::filesystem::path init_model;
  std::filesystem::path export_vectors;

  std::string scorer = "model";   // build-index: model | vectors | bm25
  std::string mode = "nail-exh";  // retrieve: bm25 | nail-exh
  std::string stage = "finetune";

  std::size_t top_n = 100;
  std::optional<std::size_t> sparsify_k;
  double k1 = 0.9;
  double b = 0.4;
  std::size_t hidden = 16;
  std::size_t positions = 16;
  double lr = 0.1;
  std::size_t steps = 1000;
  std::size_t negatives = 3;
  std::size_t total_passages = 64;
  std::size_t eval_every = 100;
  double init_scale = 0.05;
  double held_out_fraction = 0.1;
  std::uint64_t seed = 0;
  std::size_t threads = 0;  // 0: hardware concurrency

  std::vector<std::string> metrics;  // empty: ndcg@10, recall@100, recall@1000, mrr@10
  std::vector<std::size_t> sweep_k;
  std::size_t top_terms = 10;
  std::vector<std::string> doc_ids;  // top-terms filter
  std::uint64_t query_len = 16;
  std::uint64_t num_docs = 1;
};

void cmd_build_index(const RunConfig& config, std::ostream& log);
void cmd_retrieve(const RunConfig& config, std::ostream& log);
void cmd_rerank(const RunConfig& config, std::ostream& log);
void cmd_train(const RunConfig& config, std::ostream& log);
void cmd_evaluate(const RunConfig& config, std::ostream& log);
void cmd_sweep(const RunConfig& config, std::ostream& log);
void cmd_flops(const RunConfig& config, std::ostream& out);
void cmd_top_terms(const RunConfig& config, std::ostream& out);

}  // namespace nail
