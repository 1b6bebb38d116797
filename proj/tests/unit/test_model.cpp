// Copyright 2026 The nail Authors
// Licensed under the Apache License, Version 2.0

#include <cmath>
#include <cstring>
#include <limits>
#include <random>
#include <vector>

#include "doctest.h"
#include "gradcheck.hpp"
#include "nail/errors.hpp"
#include "nail/model.hpp"
#include "nail/random.hpp"
#include "nail/scoring.hpp"
#include "synthetic.hpp"

using namespace nail;
using nail::testing::check_gradient;
using nail::testing::random_batch;
using nail::testing::read_text;
using nail::testing::TempDir;
using nail::testing::write_text;

namespace {

TokenSequence seq(std::vector<std::uint32_t> ids) {
  TokenSequence s;
  for (auto i : ids) s.ids.push_back(TokenId{i});
  return s;
}

ModelParams hand_params() {
  auto p = ModelParams::zeros({3, 1, 2});
  p.token_embedding(0, 0) = 0.1;
  p.token_embedding(1, 0) = 0.4;
  p.token_embedding(2, 0) = -0.2;
  p.position_embedding(0, 0) = 0.3;
  p.position_embedding(1, 0) = -0.5;
  p.fusion(0, 0) = 2.0;  // encoding
  p.fusion(0, 1) = 1.0;  // position
  p.fusion_bias(0, 0) = 0.05;
  p.output_projection(0, 0) = 1.0;
  p.output_projection(1, 0) = -2.0;
  p.output_projection(2, 0) = 0.5;
  p.output_bias(0, 1) = 0.1;
  p.output_bias(0, 2) = -0.1;
  return p;
}

Matrix matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  Matrix m(rows, cols);
  std::copy(values.begin(), values.end(), m.data().begin());
  return m;
}

}  // namespace

TEST_CASE("forward pass matches a hand-computed example") {
  const auto act = forward_document(seq({1, 2}), hand_params());
  REQUIRE(act.scores.size() == 3);
  CHECK(act.encoding[0] == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(std::abs(act.scores[0] - 0.5005202111902353) < 1e-9);
  CHECK(std::abs(act.scores[1] - 0.5898373248074182) < 1e-9);
  CHECK(std::abs(act.scores[2] - 0.15026010559511763) < 1e-9);
  CHECK(act.argmax == std::vector<std::uint32_t>{0, 1, 0});

  const auto sv = encode_document(seq({1, 2}), hand_params());
  CHECK(sv[0] == static_cast<float>(0.5005202111902353));
}

TEST_CASE("zero output layer gives a zero vector") {
  std::mt19937_64 rng(1);
  auto p = ModelParams::random({10, 4, 3}, rng, 0.5);
  p.output_projection = Matrix(10, 4);
  p.output_bias = Matrix(1, 10);
  const auto sv = encode_document(seq({1, 2, 3}), p);
  for (float x : sv.values()) CHECK(x == 0.0F);
}

TEST_CASE("single position equals its own logits") {
  std::mt19937_64 rng(2);
  const auto p = ModelParams::random({8, 3, 1}, rng, 0.5);
  const auto act = forward_document(seq({4, 5}), p);
  for (std::size_t t = 0; t < 8; ++t) {
    double logit = p.output_bias(0, t);
    for (std::size_t k = 0; k < 3; ++k) logit += p.output_projection(t, k) * act.hidden(0, k);
    CHECK(act.scores[t] == doctest::Approx(logit).epsilon(1e-12));
    CHECK(std::isinf(act.runner_up_gap[t]));
  }
}

TEST_CASE("max-pool dominates every position and is order invariant") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = ModelParams::random({12, 4, 4}, rng, 0.8);
    std::vector<std::uint32_t> ids;
    for (std::size_t i = 0; i < 2 + uniform_index(rng, 6); ++i) ids.push_back(uniform_index(rng, 12));
    const auto act = forward_document(seq(ids), p);
    for (std::size_t j = 0; j < 4; ++j) {
      for (std::size_t t = 0; t < 12; ++t) {
        double logit = p.output_bias(0, t);
        for (std::size_t k = 0; k < 4; ++k) logit += p.output_projection(t, k) * act.hidden(j, k);
        CHECK(act.scores[t] >= logit - 1e-15);
      }
    }
    auto shuffled = ids;
    shuffle_range(shuffled.begin(), shuffled.end(), rng);
    const auto other = forward_document(seq(shuffled), p);
    for (std::size_t t = 0; t < 12; ++t) CHECK(other.scores[t] == doctest::Approx(act.scores[t]).epsilon(1e-12));
  }
}

TEST_CASE("batch_scores agrees with score_pair on encoded documents") {
  std::mt19937_64 rng(4);
  const auto p = ModelParams::random({15, 4, 3}, rng, 0.7);
  TrainingBatch batch;
  batch.examples.push_back({seq({1, 2, 2}), {"a", seq({1, 3, 5})}, {{"b", seq({2, 7})}}});
  batch.examples.push_back({seq({}), {"c", seq({9})}, {}});
  const auto s = batch_scores(batch, p);
  REQUIRE(s.rows() == 2);
  REQUIRE(s.cols() == 3);
  const auto passages = batch.passages();
  const auto qf = QueryFeature::from_tokens(batch.examples[0].query, TokenId{0});
  for (std::size_t j = 0; j < 3; ++j) {
    const double expected = score_pair(qf, encode_document(passages[j]->tokens, p));
    CHECK(std::abs(s(0, j) - expected) <= 1e-6 * std::max(1.0, std::abs(expected)));
    CHECK(s(1, j) == 0.0);
  }
  CHECK(batch.positive_columns() == std::vector<std::size_t>{0, 2});
  CHECK(batch.total_passages() == 3);
}

TEST_CASE("zero parameters score zero everywhere") {
  const auto p = ModelParams::zeros({6, 2, 2});
  TrainingBatch batch;
  batch.examples.push_back({seq({1}), {"a", seq({1, 2})}, {{"b", seq({3})}}});
  const auto s = batch_scores(batch, p);
  CHECK(s(0, 0) == 0.0);
  CHECK(s(0, 1) == 0.0);
  CHECK(contrastive_loss(batch, p) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("contrastive loss examples") {
  const std::vector<std::size_t> first{0};
  CHECK(contrastive_loss(matrix(1, 2, {1.5, 1.5}), first) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(contrastive_loss(matrix(1, 2, {100.0, 0.0}), first) < 1e-40);
  CHECK(contrastive_loss(matrix(1, 2, {1000.0, 999.0}), first) ==
        doctest::Approx(std::log1p(std::exp(-1.0))).epsilon(1e-12));
  CHECK(std::isfinite(contrastive_loss(matrix(1, 2, {-1000.0, 1000.0}), first)));
}

TEST_CASE("contrastive loss matches the direct softmax formula") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t m = 3, n = 4;
    Matrix s(m, n);
    for (auto& x : s.data()) x = 6.0 * uniform01(rng) - 3.0;
    std::vector<std::size_t> pos(m);
    for (auto& c : pos) c = uniform_index(rng, n);
    double expected = 0.0;
    const auto per = contrastive_losses(s, pos);
    for (std::size_t i = 0; i < m; ++i) {
      double z = 0.0;
      for (std::size_t j = 0; j < n; ++j) z += std::exp(s(i, j));
      const double li = -std::log(std::exp(s(i, pos[i])) / z);
      CHECK(std::abs(per[i] - li) < 1e-9);
      CHECK(per[i] >= 0.0);
      expected += li;
    }
    CHECK(std::abs(contrastive_loss(s, pos) - expected) < 1e-9);
  }
}

TEST_CASE("output bias never changes the loss") {
  // It shifts every passage score of a query by the same amount.
  std::mt19937_64 rng(6);
  const auto batch = random_batch(rng, 20, 3, 2);
  auto p = ModelParams::random({20, 4, 2}, rng, 0.5);
  const auto grad = loss_gradient(batch, p).gradient;
  for (double g : grad.output_bias.data()) CHECK(std::abs(g) < 1e-12);
}

TEST_CASE("tokens outside the batch get zero embedding gradient") {
  std::mt19937_64 rng(7);
  TrainingBatch batch;
  batch.examples.push_back({seq({1, 2}), {"a", seq({1, 3})}, {{"b", seq({2, 4})}}});
  const auto p = ModelParams::random({10, 3, 2}, rng, 0.5);
  const auto grad = loss_gradient(batch, p).gradient;
  for (std::size_t t = 5; t < 10; ++t) {
    for (double g : grad.token_embedding.row(t)) CHECK(g == 0.0);
  }
}

TEST_CASE("loss_gradient reports the loss") {
  std::mt19937_64 rng(8);
  const auto batch = random_batch(rng, 20, 3, 2);
  const auto p = ModelParams::random({20, 4, 2}, rng, 0.5);
  CHECK(loss_gradient(batch, p).loss == doctest::Approx(contrastive_loss(batch, p)).epsilon(1e-12));
}

TEST_CASE("analytic gradient agrees with central differences") {
  std::mt19937_64 rng(9);
  double worst = 0.0;
  std::size_t checked = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const auto batch = random_batch(rng, 20, 3, 2);
    const auto p = ModelParams::random({20, 4, 2}, rng, 0.5);
    const auto r = check_gradient(batch, p, 1e-4, 1e-6);
    worst = std::max(worst, r.max_rel_error);
    checked += r.checked;
    INFO("trial " << trial << " worst " << r.worst << " abs " << r.max_abs_error);
    CHECK(r.max_rel_error < 1e-4);
  }
  CHECK(checked > 1000);
  MESSAGE("max relative error " << worst);
}

TEST_CASE("sgd_step") {
  std::mt19937_64 rng(10);
  const auto p = ModelParams::random({6, 2, 2}, rng, 0.5);
  auto g = ModelParams::zeros(p.shape);
  for (auto* t : g.tensors()) {
    for (auto& x : t->data()) x = uniform01(rng) - 0.5;
  }
  CHECK(sgd_step(p, g, 0.0) == p);
  const auto q = sgd_step(p, g, 0.5);
  const auto pt = p.tensors();
  const auto gt = g.tensors();
  const auto qt = q.tensors();
  for (std::size_t t = 0; t < pt.size(); ++t) {
    for (std::size_t i = 0; i < pt[t]->data().size(); ++i) {
      const double expected = static_cast<float>(pt[t]->data()[i] - 0.5 * gt[t]->data()[i]);
      CHECK(qt[t]->data()[i] == expected);
    }
  }
  CHECK_THROWS_AS(sgd_step(p, g, -1.0), ArgumentError);
  g.fusion(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(sgd_step(p, g, 0.1), InvariantError);
  CHECK_THROWS_AS(sgd_step(p, ModelParams::zeros({7, 2, 2}), 0.1), ArgumentError);
}

TEST_CASE("random init is deterministic and bounded") {
  std::mt19937_64 a(11), b(11);
  const auto p = ModelParams::random({30, 4, 3}, a, 0.05);
  CHECK(p == ModelParams::random({30, 4, 3}, b, 0.05));
  for (double x : p.token_embedding.data()) CHECK(std::abs(x) <= 0.05);
  for (double x : p.fusion_bias.data()) CHECK(x == 0.0);
  CHECK(p.num_parameters() == 30 * 4 + 3 * 4 + 4 * 8 + 4 + 30 * 4 + 30);
}

TEST_CASE("model checkpoint round trip is bit-exact") {
  TempDir dir;
  std::mt19937_64 rng(12);
  const ModelCheckpoint ckpt{ModelParams::random({25, 4, 3}, rng, 1.0), 42, "finetune"};
  save_model(ckpt, dir / "m.bin");
  const auto back = load_model(dir / "m.bin");
  CHECK(back == ckpt);
  const auto a = ckpt.params.tensors();
  const auto b = back.params.tensors();
  for (std::size_t t = 0; t < a.size(); ++t) {
    CHECK(std::memcmp(a[t]->data().data(), b[t]->data().data(), a[t]->data().size() * sizeof(double)) == 0);
  }
  const auto doc = seq({1, 5, 7});
  CHECK(encode_document(doc, ckpt.params) == encode_document(doc, back.params));

  auto bytes = read_text(dir / "m.bin");
  write_text(dir / "short.bin", bytes.substr(0, bytes.size() - 1));
  CHECK_THROWS_AS(load_model(dir / "short.bin"), FormatError);
  bytes[0] = 'x';
  write_text(dir / "magic.bin", bytes);
  CHECK_THROWS_AS(load_model(dir / "magic.bin"), FormatError);
}
