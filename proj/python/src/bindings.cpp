// Copyright 2026 The nail Authors
// Licensed under the Apache License, Version 2.0

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "nail/corpus.hpp"
#include "nail/errors.hpp"
#include "nail/eval.hpp"
#include "nail/model.hpp"
#include "nail/pipeline.hpp"
#include "nail/scoring.hpp"
#include "nail/term_index.hpp"
#include "nail/vocab.hpp"

namespace py = pybind11;
using namespace nail;

namespace {

using Weighted = std::vector<std::pair<std::uint32_t, double>>;

std::vector<std::uint32_t> ids_of(const TokenSequence& seq) {
  std::vector<std::uint32_t> out;
  out.reserve(seq.size());
  for (auto id : seq.ids) out.push_back(id.value);
  return out;
}

QueryFeature to_feature(const Weighted& entries) {
  std::vector<QueryFeature::Entry> out;
  for (auto [t, w] : entries) out.emplace_back(TokenId{t}, w);
  return QueryFeature(std::move(out));
}

Weighted from_feature(const QueryFeature& qf) {
  Weighted out;
  for (const auto& [t, w] : qf.entries()) out.emplace_back(t.value, w);
  return out;
}

std::vector<std::pair<std::uint32_t, float>> from_sparse(const SparseScoreVector& sv) {
  std::vector<std::pair<std::uint32_t, float>> out;
  for (const auto& e : sv.entries()) out.emplace_back(e.token.value, e.score);
  return out;
}

std::vector<std::pair<std::string, double>> from_ranked(const std::vector<ScoredDoc>& ranked) {
  std::vector<std::pair<std::string, double>> out;
  for (const auto& d : ranked) out.emplace_back(d.doc_id, d.score);
  return out;
}

Judgments to_judgments(const std::map<std::string, int>& judged) { return {judged.begin(), judged.end()}; }

// Bm25Index keeps no reference to its inputs, but retrieval needs the vocabulary.
struct PyBm25 {
  Vocabulary vocab;
  Bm25Index index;
};

template <void (*Cmd)(const RunConfig&, std::ostream&)>
std::string run_command(const RunConfig& config) {
  std::ostringstream log;
  {
    py::gil_scoped_release release;
    Cmd(config, log);
  }
  return log.str();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Sparse lexical retrieval with precomputed document token scores.";

  auto format_error = py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<IncompatibleError>(m, "IncompatibleError", format_error.ptr());
  py::register_exception<ArgumentError>(m, "ArgumentError", PyExc_ValueError);
  py::register_exception<InvariantError>(m, "InvariantError", PyExc_RuntimeError);

  py::class_<Vocabulary>(m, "Vocabulary")
      .def_static("load", &Vocabulary::load, py::arg("path"))
      .def_static("from_tokens", &Vocabulary::from_tokens, py::arg("tokens"))
      .def("__len__", &Vocabulary::size)
      .def("token", [](const Vocabulary& v, std::uint32_t id) { return v.token(TokenId{id}); })
      .def("id_of", [](const Vocabulary& v, std::string_view s) { return v.id_of(s).value; })
      .def_property_readonly("tokens", &Vocabulary::tokens)
      .def_property_readonly("checksum", &Vocabulary::checksum);

  m.def("tokenize", [](std::string_view text, const Vocabulary& v) { return ids_of(tokenize(text, v)); },
        py::arg("text"), py::arg("vocab"), "Greedy longest-match token ids; 0 is UNK.");
  m.def(
      "featurize_query",
      [](std::string_view text, const Vocabulary& v, bool binary) {
        return from_feature(featurize_query(text, v, binary ? QueryWeighting::kBinary : QueryWeighting::kCounts));
      },
      py::arg("text"), py::arg("vocab"), py::arg("binary") = false,
      "Sorted (token_id, weight) pairs; weights are counts unless binary.");

  m.def(
      "sparsify", [](std::vector<float> scores, std::size_t k) { return from_sparse(sparsify(ScoreVector(std::move(scores)), k)); },
      py::arg("scores"), py::arg("k"), "Top-k (token_id, score) pairs in token order.");
  m.def(
      "score_pair",
      [](const Weighted& query, std::vector<float> scores) { return score_pair(to_feature(query), ScoreVector(std::move(scores))); },
      py::arg("query"), py::arg("scores"));

  py::class_<PyBm25>(m, "Bm25Index")
      .def(py::init([](const std::vector<std::pair<std::string, std::string>>& docs, const Vocabulary& vocab,
                       double k1, double b) {
             std::vector<Document> d;
             for (const auto& [id, text] : docs) d.push_back({id, text});
             return new PyBm25{vocab, Bm25Index(d, vocab, {k1, b})};
           }),
           py::arg("docs"), py::arg("vocab"), py::arg("k1") = 0.9, py::arg("b") = 0.4)
      .def("retrieve",
           [](const PyBm25& self, std::string_view query, std::size_t top_n) {
             return from_ranked(retrieve_bm25(featurize_query(query, self.vocab), self.index, top_n));
           },
           py::arg("query"), py::arg("top_n") = 100)
      .def_property_readonly("num_docs", [](const PyBm25& self) { return self.index.num_docs(); });

  py::class_<ImpactIndex>(m, "ImpactIndex")
      .def_static(
          "build",
          [](const std::vector<std::pair<std::string, std::vector<float>>>& docs, const Vocabulary& vocab,
             std::optional<std::size_t> sparsify_k, const std::string& scorer_tag) {
            std::vector<Document> d;
            for (std::size_t i = 0; i < docs.size(); ++i) d.push_back({docs[i].first, std::to_string(i)});
            BuildOptions options;
            options.sparsify_k = sparsify_k;
            options.scorer_tag = scorer_tag;
            return build_index(
                d, [&](const Document& doc) { return ScoreVector(docs[std::stoul(doc.text)].second); }, vocab, options);
          },
          py::arg("docs"), py::arg("vocab"), py::arg("sparsify_k") = std::nullopt, py::arg("scorer_tag") = "vectors",
          "Index dense per-document score lists given as (doc_id, scores) pairs.")
      .def_static(
          "load",
          [](const std::filesystem::path& path, const Vocabulary* vocab) {
            if (vocab == nullptr) return load_index(path);
            const auto checksum = vocab->checksum();
            return load_index(path, &checksum);
          },
          py::arg("path"), py::arg("vocab") = nullptr)
      .def("save", [](const ImpactIndex& self, const std::filesystem::path& path) { save_index(self, path); })
      .def_property_readonly("num_docs", &ImpactIndex::num_docs)
      .def_property_readonly("num_postings", &ImpactIndex::num_postings)
      .def_property_readonly("vocab_size", &ImpactIndex::vocab_size)
      .def_property_readonly("scorer_tag", [](const ImpactIndex& self) { return self.metadata().scorer_tag; })
      .def_property_readonly("doc_ids", &ImpactIndex::doc_ids)
      .def("postings",
           [](const ImpactIndex& self, std::uint32_t token) {
             std::vector<std::pair<std::uint32_t, float>> out;
             for (const auto& p : self.postings_for(TokenId{token})) out.emplace_back(p.doc, p.score);
             return out;
           })
      .def("retrieve",
           [](const ImpactIndex& self, const Weighted& query, std::size_t top_n) {
             return from_ranked(retrieve_exhaustive(to_feature(query), self, top_n));
           },
           py::arg("query"), py::arg("top_n") = 100)
      .def("__eq__", [](const ImpactIndex& a, const ImpactIndex& b) { return a == b; });

  py::class_<ModelCheckpoint>(m, "Model")
      .def_static(
          "random",
          [](std::size_t vocab_size, std::size_t hidden, std::size_t positions, std::uint64_t seed, double init_scale) {
            std::mt19937_64 rng(seed);
            return ModelCheckpoint{ModelParams::random({vocab_size, hidden, positions}, rng, init_scale), seed, ""};
          },
          py::arg("vocab_size"), py::arg("hidden") = 16, py::arg("positions") = 16, py::arg("seed") = 0,
          py::arg("init_scale") = 0.05)
      .def_static("load", &load_model, py::arg("path"))
      .def("save", [](const ModelCheckpoint& self, const std::filesystem::path& path) { save_model(self, path); })
      .def_property_readonly("vocab_size", [](const ModelCheckpoint& c) { return c.params.shape.vocab_size; })
      .def_property_readonly("hidden", [](const ModelCheckpoint& c) { return c.params.shape.hidden; })
      .def_property_readonly("positions", [](const ModelCheckpoint& c) { return c.params.shape.positions; })
      .def_readonly("seed", &ModelCheckpoint::seed)
      .def_readonly("stage", &ModelCheckpoint::stage)
      .def("encode",
           [](const ModelCheckpoint& self, std::string_view text, const Vocabulary& vocab) {
             const auto sv = encode_document(tokenize(text, vocab), self.params);
             return std::vector<float>(sv.values().begin(), sv.values().end());
           },
           py::arg("text"), py::arg("vocab"), "Dense per-token scores for a document.")
      .def("__eq__", [](const ModelCheckpoint& a, const ModelCheckpoint& b) { return a == b; });

  m.def("ndcg_at_k",
        [](const std::vector<std::string>& ranked, const std::map<std::string, int>& judged, std::size_t k) {
          const auto j = to_judgments(judged);
          return ndcg_at_k(ranked, &j, k);
        });
  m.def("recall_at_k",
        [](const std::vector<std::string>& ranked, const std::map<std::string, int>& judged, std::size_t k) {
          const auto j = to_judgments(judged);
          return recall_at_k(ranked, &j, k);
        });
  m.def("mrr_at_k", [](const std::vector<std::string>& ranked, const std::map<std::string, int>& judged, std::size_t k) {
    const auto j = to_judgments(judged);
    return mrr_at_k(ranked, &j, k);
  });
  m.def(
      "evaluate_run",
      [](const std::filesystem::path& run, const std::filesystem::path& qrels, const std::vector<std::string>& names) {
        std::vector<MetricSpec> metrics;
        for (const auto& n : names) metrics.push_back(MetricSpec::parse(n));
        if (metrics.empty()) metrics = default_metrics();
        return evaluate_run(read_run(run), load_qrels(qrels), metrics).aggregate;
      },
      py::arg("run"), py::arg("qrels"), py::arg("metrics") = std::vector<std::string>{},
      "Mean metric values over judged queries.");

  m.def("estimate_flops", &estimate_flops, py::arg("query_len"), py::arg("num_docs"));
  m.def("flops_order", &flops_order, py::arg("flops"));

  py::class_<RunConfig>(m, "RunConfig")
      .def(py::init<>())
      .def_readwrite("corpus", &RunConfig::corpus)
      .def_readwrite("queries", &RunConfig::queries)
      .def_readwrite("qrels", &RunConfig::qrels)
      .def_readwrite("vocab", &RunConfig::vocab)
      .def_readwrite("index", &RunConfig::index)
      .def_readwrite("model", &RunConfig::model)
      .def_readwrite("vectors", &RunConfig::vectors)
      .def_readwrite("candidates", &RunConfig::candidates)
      .def_readwrite("output", &RunConfig::output)
      .def_readwrite("loss_csv", &RunConfig::loss_csv)
      .def_readwrite("init_model", &RunConfig::init_model)
      .def_readwrite("export_vectors", &RunConfig::export_vectors)
      .def_readwrite("scorer", &RunConfig::scorer)
      .def_readwrite("mode", &RunConfig::mode)
      .def_readwrite("stage", &RunConfig::stage)
      .def_readwrite("top_n", &RunConfig::top_n)
      .def_readwrite("sparsify_k", &RunConfig::sparsify_k)
      .def_readwrite("k1", &RunConfig::k1)
      .def_readwrite("b", &RunConfig::b)
      .def_readwrite("hidden", &RunConfig::hidden)
      .def_readwrite("positions", &RunConfig::positions)
      .def_readwrite("lr", &RunConfig::lr)
      .def_readwrite("steps", &RunConfig::steps)
      .def_readwrite("negatives", &RunConfig::negatives)
      .def_readwrite("total_passages", &RunConfig::total_passages)
      .def_readwrite("eval_every", &RunConfig::eval_every)
      .def_readwrite("init_scale", &RunConfig::init_scale)
      .def_readwrite("held_out_fraction", &RunConfig::held_out_fraction)
      .def_readwrite("seed", &RunConfig::seed)
      .def_readwrite("threads", &RunConfig::threads)
      .def_readwrite("metrics", &RunConfig::metrics)
      .def_readwrite("sweep_k", &RunConfig::sweep_k)
      .def_readwrite("top_terms", &RunConfig::top_terms)
      .def_readwrite("doc_ids", &RunConfig::doc_ids)
      .def_readwrite("query_len", &RunConfig::query_len)
      .def_readwrite("num_docs", &RunConfig::num_docs);

  // Pipeline commands; each returns what the CLI would print.
  m.def("cmd_build_index", &run_command<cmd_build_index>, py::arg("config"));
  m.def("cmd_retrieve", &run_command<cmd_retrieve>, py::arg("config"));
  m.def("cmd_rerank", &run_command<cmd_rerank>, py::arg("config"));
  m.def("cmd_train", &run_command<cmd_train>, py::arg("config"));
  m.def("cmd_evaluate", &run_command<cmd_evaluate>, py::arg("config"));
  m.def("cmd_sweep", &run_command<cmd_sweep>, py::arg("config"));
  m.def("cmd_flops", &run_command<cmd_flops>, py::arg("config"));
  m.def("cmd_top_terms", &run_command<cmd_top_terms>, py::arg("config"));
}
