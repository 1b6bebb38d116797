// Copyright 2026 The nail Authors
// Licensed under the Apache License, Version 2.0

#include "gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "nail/random.hpp"

namespace nail::testing {
namespace {

std::vector<std::vector<std::uint32_t>> argmax_pattern(const TrainingBatch& batch,
                                                       const ModelParams& params) {
  std::vector<std::vector<std::uint32_t>> out;
  for (const auto* p : batch.passages()) out.push_back(forward_document(p->tokens, params).argmax);
  return out;
}

}  // namespace

GradCheckResult check_gradient(const TrainingBatch& batch, const ModelParams& params, double step,
                               double floor) {
  const auto analytic = loss_gradient(batch, params).gradient;
  const auto base_pattern = argmax_pattern(batch, params);
  GradCheckResult result;
  ModelParams probe = params;
  const auto probe_tensors = probe.tensors();
  const auto grad_tensors = analytic.tensors();
  for (std::size_t t = 0; t < probe_tensors.size(); ++t) {
    auto values = probe_tensors[t]->data();
    const auto grads = grad_tensors[t]->data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double original = values[i];
      values[i] = original + step;
      const double up = contrastive_loss(batch, probe);
      const bool up_same = argmax_pattern(batch, probe) == base_pattern;
      values[i] = original - step;
      const double down = contrastive_loss(batch, probe);
      const bool down_same = argmax_pattern(batch, probe) == base_pattern;
      values[i] = original;
      if (!up_same || !down_same) {
        ++result.excluded;
        continue;
      }
      const double numeric = (up - down) / (2.0 * step);
      const double a = grads[i];
      const double abs_err = std::abs(a - numeric);
      const double rel = abs_err / std::max({std::abs(a), std::abs(numeric), floor});
      ++result.checked;
      result.max_abs_error = std::max(result.max_abs_error, abs_err);
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst = std::string(ModelParams::kTensorNames[t]) + "[" + std::to_string(i) + "]";
      }
    }
  }
  return result;
}

TrainingBatch random_batch(std::mt19937_64& rng, std::size_t vocab_size, std::size_t examples,
                           std::size_t negatives) {
  auto random_tokens = [&](std::size_t len) {
    TokenSequence seq;
    for (std::size_t i = 0; i < len; ++i) {
      seq.ids.push_back(TokenId{static_cast<std::uint32_t>(1 + uniform_index(rng, vocab_size - 1))});
    }
    return seq;
  };
  TrainingBatch batch;
  std::size_t next_id = 0;
  for (std::size_t e = 0; e < examples; ++e) {
    TrainingExample ex;
    ex.query = random_tokens(1 + uniform_index(rng, 4));
    ex.positive = {"p" + std::to_string(next_id++), random_tokens(2 + uniform_index(rng, 5))};
    for (std::size_t n = 0; n < negatives; ++n) {
      ex.negatives.push_back({"p" + std::to_string(next_id++), random_tokens(2 + uniform_index(rng, 5))});
    }
    batch.examples.push_back(std::move(ex));
  }
  return batch;
}

}  // namespace nail::testing
