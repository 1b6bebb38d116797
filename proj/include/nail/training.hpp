// Copyright 2026 The nail Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "nail/model.hpp"
#include "nail/vocab.hpp"

namespace nail {

/// Half-open token range [start, start + length).
struct TokenSpan {
  std::size_t start = 0;
  std::size_t length = 0;

  bool operator==(const TokenSpan&) const = default;
};

TokenSequence slice(const TokenSequence& tokens, TokenSpan span);

/// Pseudo-query = the span, pseudo-passage = everything else in order.
std::pair<TokenSequence, TokenSequence> split_inverse_cloze(const TokenSequence& passage,
                                                            TokenSpan span);

/// Span length uniform in [1, len/2], start uniform over valid positions.
/// std::nullopt (skip) when the passage has fewer than 2 tokens.
std::optional<std::pair<TokenSequence, TokenSequence>> make_inverse_cloze(
    const TokenSequence& passage, std::mt19937_64& rng);

/// Length uniform in [1, len], then start uniform in [0, len - length].
TokenSpan sample_crop_span(std::size_t len, std::mt19937_64& rng);

/// Two independently drawn spans; they may overlap. Throws ArgumentError on
/// an empty passage.
std::pair<TokenSequence, TokenSequence> make_independent_crop(const TokenSequence& passage,
                                                              std::mt19937_64& rng);

struct ScoredPassage {
  Passage passage;
  double score = 0.0;
};

/// Draws without replacement with probability proportional to exp(score),
/// renormalized over what remains. Returns candidate indices in draw order.
std::vector<std::size_t> sample_hard_negative_indices(std::span<const double> scores,
                                                      std::size_t count, std::mt19937_64& rng);
std::vector<Passage> sample_hard_negatives(std::span<const ScoredPassage> candidates,
                                           std::size_t count, std::mt19937_64& rng);

/// A query with its positive and retrieval candidates for hard negatives.
struct FinetuneExample {
  TokenSequence query;
  Passage positive;
  std::vector<ScoredPassage> candidates;
};

/// One pass over the examples in shuffled order, cut into batches of
/// total_passages / (negatives_per_example + 1) queries. Passage doc ids are
/// distinct within a batch: an example whose positive is already present
/// moves to the next batch, and colliding negatives are redrawn (after 100
/// collisions, or too few candidates, the example is skipped).
class BatchAssembler {
 public:
  static constexpr std::size_t kMaxCollisionRetries = 100;

  BatchAssembler(std::span<const FinetuneExample> examples, std::size_t negatives_per_example,
                 std::size_t total_passages, std::mt19937_64& rng);

  std::size_t queries_per_batch() const { return queries_per_batch_; }
  std::size_t skipped() const { return skipped_; }

  /// Next batch, possibly short at the end; std::nullopt when exhausted.
  std::optional<TrainingBatch> next();

 private:
  bool try_add(const FinetuneExample& ex, TrainingBatch& batch,
               std::unordered_set<std::string_view>& ids);

  std::span<const FinetuneExample> examples_;
  std::size_t negatives_;
  std::size_t queries_per_batch_;
  std::mt19937_64* rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::deque<std::size_t> deferred_;
  std::size_t skipped_ = 0;
};

enum class TrainingStage { kPretrain, kFinetune };

std::string_view to_string(TrainingStage stage);
TrainingStage parse_stage(std::string_view name);

struct TrainConfig {
  TrainingStage stage = TrainingStage::kFinetune;
  std::size_t hidden = 16;
  std::size_t positions = 16;
  std::size_t steps = 1000;
  double lr = 0.1;
  std::size_t total_passages = 64;
  std::size_t negatives_per_example = 3;
  std::uint64_t seed = 0;
  std::size_t eval_every = 100;
  double init_scale = 0.05;
};

struct LossRecord {
  std::size_t step = 0;
  std::optional<double> loss;           // mean per-example training loss
  std::optional<double> held_out_loss;  // mean per-example held-out loss

  bool operator==(const LossRecord&) const = default;
};

struct TrainResult {
  ModelParams params;  // parameters at the best held-out loss
  std::vector<LossRecord> trace;
  std::size_t best_step = 0;
  std::optional<double> best_held_out_loss;
};

using BatchSource = std::function<TrainingBatch()>;

/// SGD on the contrastive loss. Held-out loss is measured at step 0 and
/// every eval_every steps; the best checkpoint (earliest on ties) is
/// returned. Without held-out batches the final parameters are returned.
TrainResult train(const TrainConfig& config, ModelParams initial, const BatchSource& next_batch,
                  std::span<const TrainingBatch> held_out);

/// Fine-tuning: batches from BatchAssembler, reshuffled and resampled each epoch.
TrainResult train_finetune(const TrainConfig& config, std::size_t vocab_size,
                           std::span<const FinetuneExample> train_examples,
                           std::span<const FinetuneExample> held_out_examples,
                           const ModelParams* initial = nullptr);

/// Pretraining: each batch is half independent-cropping and half
/// inverse-cloze pairs drawn from distinct passages; no hard negatives.
TrainResult train_pretrain(const TrainConfig& config, std::size_t vocab_size,
                           std::span<const Passage> passages,
                           std::span<const Passage> held_out_passages,
                           const ModelParams* initial = nullptr);

/// Pretraining batch of `queries` pairs from distinct passages.
TrainingBatch make_pretrain_batch(std::span<const Passage> passages, std::size_t queries,
                                  std::mt19937_64& rng);

/// CSV with header "step,loss,held_out_loss"; missing values are empty.
void write_loss_trace(std::span<const LossRecord> trace, const std::filesystem::path& path);

}  // namespace nail
