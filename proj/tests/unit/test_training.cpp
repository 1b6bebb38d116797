// Copyright 2026 The nail Authors
// Licensed under the Apache License, Version 2.0

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "doctest.h"
#include "nail/errors.hpp"
#include "nail/random.hpp"
#include "nail/training.hpp"
#include "synthetic.hpp"

using namespace nail;
using nail::testing::read_text;
using nail::testing::TempDir;

namespace {

TokenSequence seq(std::vector<std::uint32_t> ids) {
  TokenSequence s;
  for (auto i : ids) s.ids.push_back(TokenId{i});
  return s;
}

std::vector<std::uint32_t> raw(const TokenSequence& s) {
  std::vector<std::uint32_t> out;
  for (auto id : s.ids) out.push_back(id.value);
  return out;
}

Passage passage(const std::string& id, std::vector<std::uint32_t> ids) { return {id, seq(std::move(ids))}; }

std::vector<FinetuneExample> simple_examples(std::size_t n, std::size_t candidates) {
  std::vector<FinetuneExample> out;
  for (std::size_t i = 0; i < n; ++i) {
    FinetuneExample ex{seq({1}), passage("d" + std::to_string(i), {1, 2}), {}};
    for (std::size_t c = 0; c < candidates; ++c) {
      const auto id = (i + 1 + c) % (n + candidates);
      ex.candidates.push_back({passage("d" + std::to_string(id), {3}), 0.0});
    }
    out.push_back(ex);
  }
  return out;
}

}  // namespace

TEST_CASE("inverse cloze split examples") {
  auto [q, p] = split_inverse_cloze(seq({1, 2, 3, 4}), {1, 2});
  CHECK(raw(q) == std::vector<std::uint32_t>{2, 3});
  CHECK(raw(p) == std::vector<std::uint32_t>{1, 4});

  std::mt19937_64 rng(0);
  auto pair = make_inverse_cloze(seq({5, 6}), rng);
  REQUIRE(pair);
  CHECK(pair->first.size() == 1);
  CHECK(pair->second.size() == 1);
  CHECK_FALSE(make_inverse_cloze(seq({5}), rng));
  CHECK_FALSE(make_inverse_cloze(seq({}), rng));
}

TEST_CASE("inverse cloze pairs partition the passage") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 500; ++trial) {
    const auto len = 2 + uniform_index(rng, 20);
    std::vector<std::uint32_t> ids(len);
    for (std::size_t i = 0; i < len; ++i) ids[i] = static_cast<std::uint32_t>(100 + i);
    const auto pair = make_inverse_cloze(seq(ids), rng);
    REQUIRE(pair);
    const auto q = raw(pair->first);
    const auto p = raw(pair->second);
    CHECK(q.size() >= 1);
    CHECK(q.size() <= len / 2);
    CHECK(q.size() + p.size() == len);
    // The query is contiguous and the remainder keeps its order.
    for (std::size_t i = 1; i < q.size(); ++i) CHECK(q[i] == q[i - 1] + 1);
    auto merged = q;
    merged.insert(merged.end(), p.begin(), p.end());
    std::sort(merged.begin(), merged.end());
    CHECK(merged == ids);
    CHECK(std::is_sorted(p.begin(), p.end()));
  }
}

TEST_CASE("independent crop examples") {
  std::mt19937_64 rng(2);
  const auto [a, b] = make_independent_crop(seq({7}), rng);
  CHECK(raw(a) == std::vector<std::uint32_t>{7});
  CHECK(raw(b) == std::vector<std::uint32_t>{7});
  CHECK_THROWS_AS(make_independent_crop(seq({}), rng), ArgumentError);

  std::mt19937_64 r1(99), r2(99);
  const auto x = make_independent_crop(seq({1, 2, 3, 4, 5, 6}), r1);
  const auto y = make_independent_crop(seq({1, 2, 3, 4, 5, 6}), r2);
  CHECK(raw(x.first) == raw(y.first));
  CHECK(raw(x.second) == raw(y.second));
}

TEST_CASE("crop spans cover every start and length") {
  std::mt19937_64 rng(3);
  std::map<std::pair<std::size_t, std::size_t>, int> seen;
  std::vector<int> lengths(11, 0);
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    const auto span = sample_crop_span(10, rng);
    REQUIRE(span.length >= 1);
    REQUIRE(span.start + span.length <= 10);
    ++seen[{span.start, span.length}];
    ++lengths[span.length];
  }
  CHECK(seen.size() == 55);
  // Length is uniform over 1..10: chi-square with 9 degrees of freedom.
  double chi = 0.0;
  for (std::size_t l = 1; l <= 10; ++l) chi += std::pow(lengths[l] - draws / 10.0, 2) / (draws / 10.0);
  CHECK(chi < 27.88);  // p = 0.001
}

TEST_CASE("hard negative sampling") {
  std::mt19937_64 rng(4);
  const std::vector<double> flat(10, 0.0);
  std::vector<int> counts(10, 0);
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) ++counts[sample_hard_negative_indices(flat, 1, rng)[0]];
  double chi = 0.0;
  for (int c : counts) chi += std::pow(c - draws / 10.0, 2) / (draws / 10.0);
  CHECK(chi < 27.88);

  std::vector<double> peaked(10, 0.0);
  peaked[3] = 50.0;
  int hits = 0;
  for (int i = 0; i < 1000; ++i) hits += sample_hard_negative_indices(peaked, 1, rng)[0] == 3;
  CHECK(hits == 1000);

  // Probabilities follow exp(score): index 1 has e times the weight of index 0.
  const std::vector<double> two{0.0, 1.0};
  int ones = 0;
  for (int i = 0; i < draws; ++i) ones += sample_hard_negative_indices(two, 1, rng)[0] == 1;
  const double p = std::exp(1.0) / (1.0 + std::exp(1.0));
  CHECK(std::abs(ones / double(draws) - p) < 4 * std::sqrt(p * (1 - p) / draws));

  auto all = sample_hard_negative_indices(flat, 10, rng);
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < 10; ++i) CHECK(all[i] == i);
  CHECK_THROWS_AS(sample_hard_negative_indices(flat, 11, rng), ArgumentError);
  CHECK(sample_hard_negative_indices(flat, 0, rng).empty());
}

TEST_CASE("batch sizes follow the passage budget") {
  std::mt19937_64 rng(5);
  const auto examples = simple_examples(200, 70);
  CHECK(BatchAssembler(examples, 3, 64, rng).queries_per_batch() == 16);
  CHECK(BatchAssembler(examples, 63, 64, rng).queries_per_batch() == 1);
  CHECK(BatchAssembler(examples, 0, 64, rng).queries_per_batch() == 64);
  CHECK_THROWS_AS(BatchAssembler(examples, 64, 64, rng), ArgumentError);

  BatchAssembler no_neg(examples, 0, 64, rng);
  auto batch = no_neg.next();
  REQUIRE(batch);
  CHECK(batch->examples.size() == 64);
  for (const auto& ex : batch->examples) CHECK(ex.negatives.empty());
}

TEST_CASE("assembled batches have distinct passages and use every example once") {
  std::mt19937_64 rng(6);
  const auto examples = simple_examples(100, 20);
  BatchAssembler assembler(examples, 3, 64, rng);
  std::multiset<std::string> positives;
  std::size_t batches = 0;
  while (auto batch = assembler.next()) {
    ++batches;
    CHECK(batch->examples.size() <= 16);
    std::set<std::string> ids;
    for (const auto* p : batch->passages()) CHECK(ids.insert(p->doc_id).second);
    for (const auto& ex : batch->examples) {
      CHECK(ex.negatives.size() == 3);
      positives.insert(ex.positive.doc_id);
    }
  }
  CHECK(positives.size() + assembler.skipped() == 100);
  CHECK(batches >= 7);
}

TEST_CASE("examples without enough candidates are skipped") {
  std::mt19937_64 rng(7);
  const auto examples = simple_examples(10, 2);
  BatchAssembler assembler(examples, 3, 64, rng);
  CHECK_FALSE(assembler.next());
  CHECK(assembler.skipped() == 10);
}

TEST_CASE("train with zero steps returns the initial parameters") {
  const auto task = nail::testing::make_overlap_task({.vocab_size = 40, .num_docs = 30, .validation_queries = 10,
                                                      .test_queries = 0, .candidates = 10});
  TrainConfig config;
  config.steps = 0;
  config.hidden = 4;
  config.positions = 2;
  std::mt19937_64 rng(config.seed);
  const auto initial = ModelParams::random({40, 4, 2}, rng, config.init_scale);
  const auto result = train_finetune(config, 40, task.train, task.validation);
  CHECK(result.params == initial);
  REQUIRE(result.trace.size() == 1);
  CHECK(result.trace[0].step == 0);
  CHECK(result.trace[0].held_out_loss);
}

TEST_CASE("training is deterministic for a seed") {
  const auto task = nail::testing::make_overlap_task({.vocab_size = 40, .num_docs = 30, .validation_queries = 10,
                                                      .test_queries = 0, .candidates = 10});
  TrainConfig config;
  config.steps = 30;
  config.hidden = 4;
  config.positions = 2;
  config.eval_every = 10;
  config.total_passages = 16;
  config.seed = 3;
  const auto a = train_finetune(config, 40, task.train, task.validation);
  const auto b = train_finetune(config, 40, task.train, task.validation);
  CHECK(a.params == b.params);
  CHECK(a.trace == b.trace);
  config.seed = 4;
  const auto c = train_finetune(config, 40, task.train, task.validation);
  CHECK_FALSE(c.params == a.params);
}

TEST_CASE("train keeps the best held-out checkpoint") {
  // lr = 0 leaves the parameters fixed, so every evaluation ties and the
  // earliest one wins.
  const auto task = nail::testing::make_overlap_task({.vocab_size = 40, .num_docs = 30, .validation_queries = 10,
                                                      .test_queries = 0, .candidates = 10});
  TrainConfig config;
  config.steps = 20;
  config.hidden = 4;
  config.positions = 2;
  config.eval_every = 5;
  config.lr = 0.0;
  const auto r = train_finetune(config, 40, task.train, task.validation);
  CHECK(r.best_step == 0);
  std::size_t evals = 0;
  for (const auto& rec : r.trace) evals += rec.held_out_loss.has_value();
  CHECK(evals == 5);

  config.lr = 0.05;
  config.init_scale = 1.0;
  config.steps = 200;
  config.eval_every = 50;
  const auto trained = train_finetune(config, 40, task.train, task.validation);
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_step = 0;
  for (const auto& rec : trained.trace) {
    if (rec.held_out_loss && *rec.held_out_loss < best) {
      best = *rec.held_out_loss;
      best_step = rec.step;
    }
  }
  CHECK(trained.best_step == best_step);
  CHECK(*trained.best_held_out_loss == best);
}

TEST_CASE("pretraining batches draw distinct passages") {
  std::mt19937_64 rng(8);
  std::vector<Passage> passages;
  for (int i = 0; i < 20; ++i) passages.push_back(passage("p" + std::to_string(i), {1, 2, 3, 4, 5}));
  const auto batch = make_pretrain_batch(passages, 8, rng);
  CHECK(batch.examples.size() == 8);
  std::set<std::string> ids;
  for (const auto& ex : batch.examples) {
    CHECK(ids.insert(ex.positive.doc_id).second);
    CHECK(ex.negatives.empty());
    CHECK_FALSE(ex.query.empty());
  }
}

TEST_CASE("pretraining runs and records a trace") {
  std::mt19937_64 rng(9);
  std::vector<Passage> passages;
  for (int i = 0; i < 30; ++i) {
    std::vector<std::uint32_t> ids;
    for (int k = 0; k < 6; ++k) ids.push_back(1 + uniform_index(rng, 39));
    passages.push_back(passage("p" + std::to_string(i), ids));
  }
  TrainConfig config;
  config.stage = TrainingStage::kPretrain;
  config.steps = 10;
  config.hidden = 4;
  config.positions = 2;
  config.total_passages = 8;
  config.eval_every = 5;
  const auto r = train_pretrain(config, 40, passages, std::span<const Passage>(passages).first(8));
  CHECK(r.trace.size() == 11);
  for (const auto& rec : r.trace) {
    if (rec.loss) CHECK(std::isfinite(*rec.loss));
  }
}

TEST_CASE("loss trace CSV") {
  TempDir dir;
  const std::vector<LossRecord> trace{{0, std::nullopt, 0.5}, {1, 0.25, std::nullopt}};
  write_loss_trace(trace, dir / "loss.csv");
  CHECK(read_text(dir / "loss.csv") == "step,loss,held_out_loss\n0,,0.5\n1,0.25,\n");
}

TEST_CASE("stage names") {
  CHECK(parse_stage("pretrain") == TrainingStage::kPretrain);
  CHECK(to_string(TrainingStage::kFinetune) == "finetune");
  CHECK_THROWS_AS(parse_stage("other"), ArgumentError);
}
