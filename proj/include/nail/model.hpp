// Copyright 2026 The nail Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nail/term_index.hpp"
#include "nail/vocab.hpp"

namespace nail {

/// Row-major dense matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct ModelShape {
  std::size_t vocab_size = 0;
  std::size_t hidden = 16;
  std::size_t positions = 16;

  bool operator==(const ModelShape&) const = default;
};

/// Parameters of the non-autoregressive indexer. Gradients use the same type.
///
///   enc      = mean of token_embedding rows over the document tokens
///   h_j      = tanh(fusion * [enc; position_embedding_j] + fusion_bias)
///   logits_j = output_projection * h_j + output_bias
///   score[t] = max_j logits_j[t]
struct ModelParams {
  ModelShape shape;
  Matrix token_embedding;     // V x h
  Matrix position_embedding;  // P x h
  Matrix fusion;              // h x 2h
  Matrix fusion_bias;         // 1 x h
  Matrix output_projection;   // V x h
  Matrix output_bias;         // 1 x V

  static constexpr std::array<std::string_view, 6> kTensorNames = {
      "token_embedding", "position_embedding", "fusion",
      "fusion_bias",     "output_projection",  "output_bias"};

  static ModelParams zeros(const ModelShape& shape);
  /// Weights uniform in [-init_scale, init_scale], biases zero. Values are
  /// rounded to float precision so checkpoints round-trip exactly.
  static ModelParams random(const ModelShape& shape, std::mt19937_64& rng, double init_scale = 0.05);

  std::array<Matrix*, 6> tensors();
  std::array<const Matrix*, 6> tensors() const;
  std::size_t num_parameters() const;

  /// Throws ArgumentError on shape mismatch or non-finite values.
  void validate() const;
  bool operator==(const ModelParams&) const = default;
};

/// Forward-pass intermediates for one document.
struct DocumentActivations {
  std::vector<double> encoding;          // h
  Matrix hidden;                         // P x h, post-tanh
  std::vector<double> scores;            // V, max over positions
  std::vector<std::uint32_t> argmax;     // V, first position attaining the max
  std::vector<double> runner_up_gap;     // V, max minus second-best logit (inf when P == 1)
};

DocumentActivations forward_document(const TokenSequence& doc, const ModelParams& params);
ScoreVector encode_document(const TokenSequence& doc, const ModelParams& params);

/// Document tokens plus the id used for in-batch distinctness.
struct Passage {
  std::string doc_id;
  TokenSequence tokens;
};

struct TrainingExample {
  TokenSequence query;
  Passage positive;
  std::vector<Passage> negatives;
};

/// Passages are laid out example by example: positive, then its negatives.
struct TrainingBatch {
  std::vector<TrainingExample> examples;

  std::size_t total_passages() const;
  std::vector<const Passage*> passages() const;
  /// Column of example i's positive in the score matrix.
  std::vector<std::size_t> positive_columns() const;
};

/// m x n matrix of s(q_i, p_j); each passage is encoded once.
Matrix batch_scores(const TrainingBatch& batch, const ModelParams& params);

/// Per-example L_i = -S[i, pos_i] + logsumexp_j S[i, j] (row-max stabilized).
std::vector<double> contrastive_losses(const Matrix& scores, std::span<const std::size_t> positives);
double contrastive_loss(const Matrix& scores, std::span<const std::size_t> positives);
double contrastive_loss(const TrainingBatch& batch, const ModelParams& params);

struct LossAndGradient {
  double loss = 0.0;
  ModelParams gradient;
};

/// Analytic gradient of contrastive_loss. Max-pool subgradients go to the
/// first position attaining the max.
LossAndGradient loss_gradient(const TrainingBatch& batch, const ModelParams& params);

/// params - lr * gradient, rounded to float precision. Throws InvariantError
/// on non-finite gradients, ArgumentError when lr < 0 or shapes differ.
ModelParams sgd_step(const ModelParams& params, const ModelParams& gradient, double lr);

struct ModelCheckpoint {
  ModelParams params;
  std::uint64_t seed = 0;
  std::string stage;

  bool operator==(const ModelCheckpoint&) const = default;
};

/// Magic "NAILMDL1", version, V, h, P, seed, stage, then each tensor as
/// little-endian float32 in kTensorNames order.
void save_model(const ModelCheckpoint& checkpoint, const std::filesystem::path& path);
ModelCheckpoint load_model(const std::filesystem::path& path);

}  // namespace nail
