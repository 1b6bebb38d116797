// Copyright 2026 The nail Authors
// Licensed under the Apache License, Version 2.0

#include "nail/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <string>

#include "nail/errors.hpp"
#include "nail/random.hpp"

namespace nail {
namespace {

// Draws from exp(score) weights without replacement.
class SoftmaxSampler {
 public:
  explicit SoftmaxSampler(std::span<const double> scores) : weights_(scores.size()) {
    if (scores.empty()) return;
    const double mx = *std::max_element(scores.begin(), scores.end());
    for (std::size_t i = 0; i < scores.size(); ++i) weights_[i] = std::exp(scores[i] - mx);
    remaining_ = scores.size();
  }

  std::size_t remaining() const { return remaining_; }

  std::size_t draw(std::mt19937_64& rng) {
    double total = 0.0;
    for (double w : weights_) total += w;
    double u = uniform01(rng) * total;
    std::size_t last = weights_.size();
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      if (weights_[i] <= 0.0) continue;
      last = i;
      if (u < weights_[i]) break;
      u -= weights_[i];
    }
    weights_[last] = 0.0;
    --remaining_;
    return last;
  }

 private:
  std::vector<double> weights_;
  std::size_t remaining_ = 0;
};

// Mean per-example loss over a set of batches.
double mean_loss(std::span<const TrainingBatch> batches, const ModelParams& params) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& batch : batches) {
    total += contrastive_loss(batch, params);
    count += batch.examples.size();
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

}  // namespace

TokenSequence slice(const TokenSequence& tokens, TokenSpan span) {
  if (span.start + span.length > tokens.size()) throw ArgumentError("span exceeds sequence");
  TokenSequence out;
  out.ids.assign(tokens.ids.begin() + static_cast<std::ptrdiff_t>(span.start),
                 tokens.ids.begin() + static_cast<std::ptrdiff_t>(span.start + span.length));
  return out;
}

std::pair<TokenSequence, TokenSequence> split_inverse_cloze(const TokenSequence& passage,
                                                            TokenSpan span) {
  TokenSequence query = slice(passage, span);
  TokenSequence rest;
  rest.ids.reserve(passage.size() - span.length);
  for (std::size_t i = 0; i < passage.size(); ++i) {
    if (i < span.start || i >= span.start + span.length) rest.ids.push_back(passage.ids[i]);
  }
  return {std::move(query), std::move(rest)};
}

std::optional<std::pair<TokenSequence, TokenSequence>> make_inverse_cloze(
    const TokenSequence& passage, std::mt19937_64& rng) {
  const std::size_t len = passage.size();
  if (len < 2) return std::nullopt;
  const std::size_t span_len = 1 + uniform_index(rng, len / 2);
  const std::size_t start = uniform_index(rng, len - span_len + 1);
  return split_inverse_cloze(passage, {start, span_len});
}

TokenSpan sample_crop_span(std::size_t len, std::mt19937_64& rng) {
  if (len == 0) throw ArgumentError("cannot crop an empty passage");
  const std::size_t span_len = 1 + uniform_index(rng, len);
  const std::size_t start = uniform_index(rng, len - span_len + 1);
  return {start, span_len};
}

std::pair<TokenSequence, TokenSequence> make_independent_crop(const TokenSequence& passage,
                                                              std::mt19937_64& rng) {
  const TokenSpan first = sample_crop_span(passage.size(), rng);
  const TokenSpan second = sample_crop_span(passage.size(), rng);
  return {slice(passage, first), slice(passage, second)};
}

std::vector<std::size_t> sample_hard_negative_indices(std::span<const double> scores,
                                                      std::size_t count, std::mt19937_64& rng) {
  if (count > scores.size()) {
    throw ArgumentError("requested " + std::to_string(count) + " hard negatives from " +
                        std::to_string(scores.size()) + " candidates");
  }
  SoftmaxSampler sampler(scores);
  std::vector<std::size_t> picked;
  picked.reserve(count);
  while (picked.size() < count) picked.push_back(sampler.draw(rng));
  return picked;
}

std::vector<Passage> sample_hard_negatives(std::span<const ScoredPassage> candidates,
                                           std::size_t count, std::mt19937_64& rng) {
  std::vector<double> scores;
  scores.reserve(candidates.size());
  for (const auto& c : candidates) scores.push_back(c.score);
  std::vector<Passage> out;
  for (auto i : sample_hard_negative_indices(scores, count, rng)) out.push_back(candidates[i].passage);
  return out;
}

BatchAssembler::BatchAssembler(std::span<const FinetuneExample> examples,
                               std::size_t negatives_per_example, std::size_t total_passages,
                               std::mt19937_64& rng)
    : examples_(examples), negatives_(negatives_per_example), rng_(&rng) {
  if (total_passages < negatives_per_example + 1) {
    throw ArgumentError("total_passages must be at least negatives_per_example + 1");
  }
  queries_per_batch_ = total_passages / (negatives_per_example + 1);
  order_.resize(examples.size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  shuffle_range(order_.begin(), order_.end(), rng);
}

bool BatchAssembler::try_add(const FinetuneExample& ex, TrainingBatch& batch,
                             std::unordered_set<std::string_view>& ids) {
  std::vector<double> scores;
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < ex.candidates.size(); ++i) {
    if (ex.candidates[i].passage.doc_id == ex.positive.doc_id) continue;
    pool.push_back(i);
    scores.push_back(ex.candidates[i].score);
  }
  SoftmaxSampler sampler(scores);
  std::vector<std::size_t> chosen;
  std::unordered_set<std::string_view> chosen_ids;
  std::size_t collisions = 0;
  while (chosen.size() < negatives_) {
    if (sampler.remaining() == 0 || collisions > kMaxCollisionRetries) {
      ++skipped_;
      return false;
    }
    const auto& cand = ex.candidates[pool[sampler.draw(*rng_)]];
    const std::string_view id = cand.passage.doc_id;
    if (ids.contains(id) || chosen_ids.contains(id)) {
      ++collisions;
      continue;
    }
    chosen_ids.insert(id);
    chosen.push_back(static_cast<std::size_t>(&cand - ex.candidates.data()));
  }

  TrainingExample te{ex.query, ex.positive, {}};
  for (auto i : chosen) te.negatives.push_back(ex.candidates[i].passage);
  batch.examples.push_back(std::move(te));
  // batch.examples was reserved to queries_per_batch_, so these views stay valid.
  ids.insert(batch.examples.back().positive.doc_id);
  for (const auto& neg : batch.examples.back().negatives) ids.insert(neg.doc_id);
  return true;
}

std::optional<TrainingBatch> BatchAssembler::next() {
  TrainingBatch batch;
  batch.examples.reserve(queries_per_batch_);
  std::unordered_set<std::string_view> ids;
  std::deque<std::size_t> carry;

  auto consider = [&](std::size_t idx) {
    const auto& ex = examples_[idx];
    if (ids.contains(ex.positive.doc_id)) {
      carry.push_back(idx);
      return;
    }
    try_add(ex, batch, ids);
  };

  while (batch.examples.size() < queries_per_batch_ && !deferred_.empty()) {
    const auto idx = deferred_.front();
    deferred_.pop_front();
    consider(idx);
  }
  while (batch.examples.size() < queries_per_batch_ && cursor_ < order_.size()) {
    consider(order_[cursor_++]);
  }
  for (auto idx : carry) deferred_.push_back(idx);

  if (batch.examples.empty()) return std::nullopt;
  return batch;
}

std::string_view to_string(TrainingStage stage) {
  return stage == TrainingStage::kPretrain ? "pretrain" : "finetune";
}

TrainingStage parse_stage(std::string_view name) {
  if (name == "pretrain") return TrainingStage::kPretrain;
  if (name == "finetune") return TrainingStage::kFinetune;
  throw ArgumentError("unknown training stage '" + std::string(name) + "'");
}

TrainResult train(const TrainConfig& config, ModelParams initial, const BatchSource& next_batch,
                  std::span<const TrainingBatch> held_out) {
  initial.validate();
  TrainResult result;
  result.params = initial;
  ModelParams params = std::move(initial);
  const bool has_held_out = std::any_of(held_out.begin(), held_out.end(),
                                        [](const auto& b) { return !b.examples.empty(); });

  auto evaluate = [&](std::size_t step, LossRecord& record) {
    if (!has_held_out) return;
    const double loss = mean_loss(held_out, params);
    record.held_out_loss = loss;
    if (!result.best_held_out_loss || loss < *result.best_held_out_loss) {
      result.best_held_out_loss = loss;
      result.best_step = step;
      result.params = params;
    }
  };

  LossRecord initial_record{0, std::nullopt, std::nullopt};
  evaluate(0, initial_record);
  result.trace.push_back(initial_record);

  for (std::size_t step = 1; step <= config.steps; ++step) {
    const TrainingBatch batch = next_batch();
    if (batch.examples.empty()) throw ArgumentError("training produced an empty batch");
    auto lg = loss_gradient(batch, params);
    params = sgd_step(params, lg.gradient, config.lr);

    LossRecord record{step, lg.loss / static_cast<double>(batch.examples.size()), std::nullopt};
    if (config.eval_every > 0 && (step % config.eval_every == 0 || step == config.steps)) {
      evaluate(step, record);
    }
    result.trace.push_back(record);
  }
  if (!has_held_out) {
    result.params = std::move(params);
    result.best_step = config.steps;
  }
  return result;
}

namespace {

ModelParams initial_params(const TrainConfig& config, std::size_t vocab_size,
                           const ModelParams* initial, std::mt19937_64& rng) {
  const ModelShape shape{vocab_size, config.hidden, config.positions};
  if (initial != nullptr) {
    if (!(initial->shape == shape)) throw ArgumentError("initial model shape does not match config");
    return *initial;
  }
  return ModelParams::random(shape, rng, config.init_scale);
}

// Independent stream for held-out sampling so that it does not perturb
// the training stream.
std::mt19937_64 held_out_rng(std::uint64_t seed) { return std::mt19937_64(seed ^ 0x9e3779b97f4a7c15ULL); }

}  // namespace

TrainResult train_finetune(const TrainConfig& config, std::size_t vocab_size,
                           std::span<const FinetuneExample> train_examples,
                           std::span<const FinetuneExample> held_out_examples,
                           const ModelParams* initial) {
  std::mt19937_64 rng(config.seed);
  ModelParams params = initial_params(config, vocab_size, initial, rng);
  if (config.steps > 0 && train_examples.empty()) throw ArgumentError("no training examples");

  std::vector<TrainingBatch> held_out;
  {
    auto hrng = held_out_rng(config.seed);
    BatchAssembler assembler(held_out_examples, config.negatives_per_example,
                             config.total_passages, hrng);
    while (auto b = assembler.next()) held_out.push_back(std::move(*b));
  }

  std::optional<BatchAssembler> epoch;
  BatchSource source = [&]() -> TrainingBatch {
    for (int attempt = 0; attempt < 2; ++attempt) {
      if (!epoch) {
        epoch.emplace(train_examples, config.negatives_per_example, config.total_passages, rng);
      }
      if (auto batch = epoch->next()) return std::move(*batch);
      epoch.reset();
    }
    throw ArgumentError("no training batch could be assembled (every example was skipped)");
  };
  return train(config, std::move(params), source, held_out);
}

TrainingBatch make_pretrain_batch(std::span<const Passage> passages, std::size_t queries,
                                  std::mt19937_64& rng) {
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < passages.size(); ++i) {
    if (!passages[i].tokens.empty()) usable.push_back(i);
  }
  const std::size_t m = std::min(queries, usable.size());
  // Partial Fisher-Yates: the first m entries become a uniform sample.
  for (std::size_t i = 0; i < m; ++i) {
    const auto j = i + uniform_index(rng, usable.size() - i);
    std::swap(usable[i], usable[j]);
  }
  TrainingBatch batch;
  std::unordered_set<std::string_view> ids;
  for (std::size_t i = 0; i < m; ++i) {
    const Passage& src = passages[usable[i]];
    if (!ids.insert(src.doc_id).second) continue;
    std::pair<TokenSequence, TokenSequence> pair;
    std::optional<std::pair<TokenSequence, TokenSequence>> cloze;
    if (i >= m / 2) cloze = make_inverse_cloze(src.tokens, rng);
    pair = cloze ? std::move(*cloze) : make_independent_crop(src.tokens, rng);
    batch.examples.push_back({std::move(pair.first), {src.doc_id, std::move(pair.second)}, {}});
  }
  return batch;
}

TrainResult train_pretrain(const TrainConfig& config, std::size_t vocab_size,
                           std::span<const Passage> passages,
                           std::span<const Passage> held_out_passages,
                           const ModelParams* initial) {
  std::mt19937_64 rng(config.seed);
  ModelParams params = initial_params(config, vocab_size, initial, rng);
  const std::size_t queries = std::max<std::size_t>(1, config.total_passages);

  std::vector<TrainingBatch> held_out;
  if (!held_out_passages.empty()) {
    auto hrng = held_out_rng(config.seed);
    held_out.push_back(make_pretrain_batch(held_out_passages, queries, hrng));
  }
  BatchSource source = [&]() { return make_pretrain_batch(passages, queries, rng); };
  return train(config, std::move(params), source, held_out);
}

void write_loss_trace(std::span<const LossRecord> trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out << "step,loss,held_out_loss\n";
  char buf[64];
  for (const auto& r : trace) {
    out << r.step << ',';
    if (r.loss) {
      std::snprintf(buf, sizeof(buf), "%.9g", *r.loss);
      out << buf;
    }
    out << ',';
    if (r.held_out_loss) {
      std::snprintf(buf, sizeof(buf), "%.9g", *r.held_out_loss);
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace nail
