// Copyright 2026 The nail Authors
// Licensed under the Apache License, Version 2.0

#include "nail/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "binary_io.hpp"
#include "nail/errors.hpp"
#include "nail/random.hpp"

namespace nail {
namespace {

constexpr char kModelMagic[8] = {'N', 'A', 'I', 'L', 'M', 'D', 'L', '1'};
constexpr std::uint32_t kModelVersion = 1;

double to_float_precision(double v) { return static_cast<double>(static_cast<float>(v)); }

void check_shape(const Matrix& m, std::size_t rows, std::size_t cols, std::string_view name) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ArgumentError("model tensor " + std::string(name) + " has shape " +
                        std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ", expected " +
                        std::to_string(rows) + "x" + std::to_string(cols));
  }
}

// Query weights of every example; UNK occurrences are dropped.
std::vector<QueryFeature> query_features(const TrainingBatch& batch) {
  std::vector<QueryFeature> out;
  out.reserve(batch.examples.size());
  for (const auto& ex : batch.examples) out.push_back(QueryFeature::from_tokens(ex.query, TokenId{0}));
  return out;
}

Matrix score_matrix(std::span<const QueryFeature> queries,
                    std::span<const DocumentActivations> docs) {
  Matrix scores(queries.size(), docs.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    for (std::size_t j = 0; j < docs.size(); ++j) {
      double s = 0.0;
      for (const auto& [token, weight] : queries[i].entries()) {
        if (token.value < docs[j].scores.size()) s += weight * docs[j].scores[token.value];
      }
      scores(i, j) = s;
    }
  }
  return scores;
}

std::vector<DocumentActivations> encode_batch(const TrainingBatch& batch,
                                              const ModelParams& params) {
  std::vector<DocumentActivations> acts;
  for (const Passage* p : batch.passages()) acts.push_back(forward_document(p->tokens, params));
  return acts;
}

}  // namespace

ModelParams ModelParams::zeros(const ModelShape& shape) {
  if (shape.vocab_size == 0 || shape.hidden == 0 || shape.positions == 0) {
    throw ArgumentError("model dimensions must be positive");
  }
  ModelParams p;
  p.shape = shape;
  p.token_embedding = Matrix(shape.vocab_size, shape.hidden);
  p.position_embedding = Matrix(shape.positions, shape.hidden);
  p.fusion = Matrix(shape.hidden, 2 * shape.hidden);
  p.fusion_bias = Matrix(1, shape.hidden);
  p.output_projection = Matrix(shape.vocab_size, shape.hidden);
  p.output_bias = Matrix(1, shape.vocab_size);
  return p;
}

ModelParams ModelParams::random(const ModelShape& shape, std::mt19937_64& rng, double init_scale) {
  if (!(init_scale >= 0.0) || !std::isfinite(init_scale)) {
    throw ArgumentError("init_scale must be finite and non-negative");
  }
  ModelParams p = zeros(shape);
  for (Matrix* m : {&p.token_embedding, &p.position_embedding, &p.fusion, &p.output_projection}) {
    for (double& v : m->data()) {
      v = to_float_precision(init_scale * (2.0 * uniform01(rng) - 1.0));
    }
  }
  return p;
}

std::array<Matrix*, 6> ModelParams::tensors() {
  return {&token_embedding, &position_embedding, &fusion,
          &fusion_bias,     &output_projection,  &output_bias};
}

std::array<const Matrix*, 6> ModelParams::tensors() const {
  return {&token_embedding, &position_embedding, &fusion,
          &fusion_bias,     &output_projection,  &output_bias};
}

std::size_t ModelParams::num_parameters() const {
  std::size_t n = 0;
  for (const Matrix* m : tensors()) n += m->data().size();
  return n;
}

void ModelParams::validate() const {
  const auto V = shape.vocab_size, h = shape.hidden, P = shape.positions;
  if (V == 0 || h == 0 || P == 0) throw ArgumentError("model dimensions must be positive");
  check_shape(token_embedding, V, h, kTensorNames[0]);
  check_shape(position_embedding, P, h, kTensorNames[1]);
  check_shape(fusion, h, 2 * h, kTensorNames[2]);
  check_shape(fusion_bias, 1, h, kTensorNames[3]);
  check_shape(output_projection, V, h, kTensorNames[4]);
  check_shape(output_bias, 1, V, kTensorNames[5]);
  for (const Matrix* m : tensors()) {
    for (double v : m->data()) {
      if (!std::isfinite(v)) throw ArgumentError("model parameters contain non-finite values");
    }
  }
}

DocumentActivations forward_document(const TokenSequence& doc, const ModelParams& params) {
  const auto V = params.shape.vocab_size, h = params.shape.hidden, P = params.shape.positions;
  DocumentActivations act;
  act.encoding.assign(h, 0.0);
  for (TokenId t : doc.ids) {
    if (t.value >= V) throw ArgumentError("document token id out of range for model");
    const auto row = params.token_embedding.row(t.value);
    for (std::size_t k = 0; k < h; ++k) act.encoding[k] += row[k];
  }
  if (!doc.empty()) {
    const double inv = 1.0 / static_cast<double>(doc.size());
    for (double& v : act.encoding) v *= inv;
  }

  act.hidden = Matrix(P, h);
  for (std::size_t j = 0; j < P; ++j) {
    const auto pos = params.position_embedding.row(j);
    for (std::size_t r = 0; r < h; ++r) {
      const auto w = params.fusion.row(r);
      double a = params.fusion_bias(0, r);
      for (std::size_t k = 0; k < h; ++k) a += w[k] * act.encoding[k];
      for (std::size_t k = 0; k < h; ++k) a += w[h + k] * pos[k];
      act.hidden(j, r) = std::tanh(a);
    }
  }

  act.scores.assign(V, -std::numeric_limits<double>::infinity());
  act.argmax.assign(V, 0);
  act.runner_up_gap.assign(V, std::numeric_limits<double>::infinity());
  std::vector<double> second(V, -std::numeric_limits<double>::infinity());
  for (std::size_t j = 0; j < P; ++j) {
    const auto hj = act.hidden.row(j);
    for (std::size_t t = 0; t < V; ++t) {
      const auto u = params.output_projection.row(t);
      double logit = params.output_bias(0, t);
      for (std::size_t k = 0; k < h; ++k) logit += u[k] * hj[k];
      if (logit > act.scores[t]) {
        second[t] = act.scores[t];
        act.scores[t] = logit;
        act.argmax[t] = static_cast<std::uint32_t>(j);
      } else if (logit > second[t]) {
        second[t] = logit;
      }
    }
  }
  if (P > 1) {
    for (std::size_t t = 0; t < V; ++t) act.runner_up_gap[t] = act.scores[t] - second[t];
  }
  return act;
}

ScoreVector encode_document(const TokenSequence& doc, const ModelParams& params) {
  const auto act = forward_document(doc, params);
  std::vector<float> scores(act.scores.size());
  std::transform(act.scores.begin(), act.scores.end(), scores.begin(),
                 [](double v) { return static_cast<float>(v); });
  return ScoreVector(std::move(scores));
}

std::size_t TrainingBatch::total_passages() const {
  std::size_t n = 0;
  for (const auto& ex : examples) n += 1 + ex.negatives.size();
  return n;
}

std::vector<const Passage*> TrainingBatch::passages() const {
  std::vector<const Passage*> out;
  out.reserve(total_passages());
  for (const auto& ex : examples) {
    out.push_back(&ex.positive);
    for (const auto& neg : ex.negatives) out.push_back(&neg);
  }
  return out;
}

std::vector<std::size_t> TrainingBatch::positive_columns() const {
  std::vector<std::size_t> cols;
  cols.reserve(examples.size());
  std::size_t col = 0;
  for (const auto& ex : examples) {
    cols.push_back(col);
    col += 1 + ex.negatives.size();
  }
  return cols;
}

Matrix batch_scores(const TrainingBatch& batch, const ModelParams& params) {
  return score_matrix(query_features(batch), encode_batch(batch, params));
}

std::vector<double> contrastive_losses(const Matrix& scores,
                                       std::span<const std::size_t> positives) {
  if (positives.size() != scores.rows()) {
    throw ArgumentError("one positive column is required per query row");
  }
  std::vector<double> losses(scores.rows(), 0.0);
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    const auto row = scores.row(i);
    if (positives[i] >= row.size()) throw ArgumentError("positive column out of range");
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double s : row) sum += std::exp(s - mx);
    losses[i] = -row[positives[i]] + mx + std::log(sum);
  }
  return losses;
}

double contrastive_loss(const Matrix& scores, std::span<const std::size_t> positives) {
  double total = 0.0;
  for (double l : contrastive_losses(scores, positives)) total += l;
  return total;
}

double contrastive_loss(const TrainingBatch& batch, const ModelParams& params) {
  const auto cols = batch.positive_columns();
  return contrastive_loss(batch_scores(batch, params), cols);
}

LossAndGradient loss_gradient(const TrainingBatch& batch, const ModelParams& params) {
  const auto V = params.shape.vocab_size, h = params.shape.hidden, P = params.shape.positions;
  const auto queries = query_features(batch);
  const auto passages = batch.passages();
  const auto acts = encode_batch(batch, params);
  const auto positives = batch.positive_columns();
  const Matrix scores = score_matrix(queries, acts);

  LossAndGradient out;
  out.loss = contrastive_loss(scores, positives);
  out.gradient = ModelParams::zeros(params.shape);
  ModelParams& g = out.gradient;

  // dL/dS[i][j] = softmax_j(S[i]) - [j == pos_i]
  Matrix dscores(scores.rows(), scores.cols());
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    const auto row = scores.row(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double s : row) sum += std::exp(s - mx);
    for (std::size_t j = 0; j < row.size(); ++j) dscores(i, j) = std::exp(row[j] - mx) / sum;
    dscores(i, positives[i]) -= 1.0;
  }

  std::vector<double> dtoken(V, 0.0);
  std::vector<std::uint32_t> touched;
  Matrix dhidden(P, h);
  std::vector<double> denc(h);
  std::vector<double> da(h);
  for (std::size_t j = 0; j < passages.size(); ++j) {
    const auto& act = acts[j];

    // Gradient w.r.t. the pooled score of each token that appears in a query.
    touched.clear();
    for (std::size_t i = 0; i < queries.size(); ++i) {
      for (const auto& [token, weight] : queries[i].entries()) {
        if (token.value >= V) continue;
        if (dtoken[token.value] == 0.0) touched.push_back(token.value);
        dtoken[token.value] += dscores(i, j) * weight;
      }
    }

    std::fill(dhidden.data().begin(), dhidden.data().end(), 0.0);
    for (std::uint32_t t : touched) {
      const double d = dtoken[t];
      dtoken[t] = 0.0;
      if (d == 0.0) continue;
      const std::size_t p = act.argmax[t];
      const auto hp = act.hidden.row(p);
      auto du = g.output_projection.row(t);
      const auto u = params.output_projection.row(t);
      auto dh = dhidden.row(p);
      for (std::size_t k = 0; k < h; ++k) {
        du[k] += d * hp[k];
        dh[k] += d * u[k];
      }
      g.output_bias(0, t) += d;
    }

    std::fill(denc.begin(), denc.end(), 0.0);
    for (std::size_t p = 0; p < P; ++p) {
      const auto hp = act.hidden.row(p);
      const auto dh = dhidden.row(p);
      bool any = false;
      for (std::size_t r = 0; r < h; ++r) {
        da[r] = dh[r] * (1.0 - hp[r] * hp[r]);
        any = any || da[r] != 0.0;
      }
      if (!any) continue;
      const auto pos = params.position_embedding.row(p);
      auto dpos = g.position_embedding.row(p);
      for (std::size_t r = 0; r < h; ++r) {
        if (da[r] == 0.0) continue;
        auto dw = g.fusion.row(r);
        const auto w = params.fusion.row(r);
        for (std::size_t k = 0; k < h; ++k) {
          dw[k] += da[r] * act.encoding[k];
          dw[h + k] += da[r] * pos[k];
          denc[k] += w[k] * da[r];
          dpos[k] += w[h + k] * da[r];
        }
        g.fusion_bias(0, r) += da[r];
      }
    }

    const auto& tokens = passages[j]->tokens;
    if (tokens.empty()) continue;
    const double inv = 1.0 / static_cast<double>(tokens.size());
    for (TokenId t : tokens.ids) {
      auto de = g.token_embedding.row(t.value);
      for (std::size_t k = 0; k < h; ++k) de[k] += denc[k] * inv;
    }
  }
  return out;
}

ModelParams sgd_step(const ModelParams& params, const ModelParams& gradient, double lr) {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ArgumentError("learning rate must be >= 0");
  if (!(params.shape == gradient.shape)) throw ArgumentError("gradient shape mismatch");
  ModelParams next = params;
  auto dst = next.tensors();
  auto src = gradient.tensors();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    auto values = dst[i]->data();
    const auto grads = src[i]->data();
    if (values.size() != grads.size()) throw ArgumentError("gradient shape mismatch");
    for (std::size_t k = 0; k < values.size(); ++k) {
      if (!std::isfinite(grads[k])) {
        throw InvariantError("non-finite gradient in " + std::string(ModelParams::kTensorNames[i]) +
                             "; training halted");
      }
      if (lr != 0.0) values[k] = to_float_precision(values[k] - lr * grads[k]);
    }
  }
  return next;
}

void save_model(const ModelCheckpoint& checkpoint, const std::filesystem::path& path) {
  const auto& p = checkpoint.params;
  p.validate();
  detail::ByteWriter w;
  w.raw(kModelMagic, sizeof(kModelMagic));
  w.u32(kModelVersion);
  w.u32(static_cast<std::uint32_t>(p.shape.vocab_size));
  w.u32(static_cast<std::uint32_t>(p.shape.hidden));
  w.u32(static_cast<std::uint32_t>(p.shape.positions));
  w.u64(checkpoint.seed);
  w.str(checkpoint.stage);
  for (const Matrix* m : p.tensors()) {
    for (double v : m->data()) w.f32(static_cast<float>(v));
  }
  w.write_file(path);
}

ModelCheckpoint load_model(const std::filesystem::path& path) {
  detail::ByteReader r(path, "model");
  if (!r.raw_equals(kModelMagic, sizeof(kModelMagic))) {
    throw FormatError(path.string() + " is not a model checkpoint (bad magic)");
  }
  const auto version = r.u32();
  if (version != kModelVersion) {
    throw IncompatibleError("model checkpoint version " + std::to_string(version) +
                            " is not supported");
  }
  ModelShape shape;
  shape.vocab_size = r.u32();
  shape.hidden = r.u32();
  shape.positions = r.u32();
  ModelCheckpoint ckpt;
  ckpt.seed = r.u64();
  ckpt.stage = r.str();
  try {
    ckpt.params = ModelParams::zeros(shape);
  } catch (const ArgumentError& e) {
    throw FormatError(std::string("model checkpoint: ") + e.what());
  }
  for (Matrix* m : ckpt.params.tensors()) {
    for (double& v : m->data()) v = static_cast<double>(r.f32());
  }
  if (!r.at_end()) throw FormatError("trailing bytes after model data");
  try {
    ckpt.params.validate();
  } catch (const ArgumentError& e) {
    throw FormatError(std::string("model checkpoint: ") + e.what());
  }
  return ckpt;
}

}  // namespace nail
