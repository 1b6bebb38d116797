# Copyright 2026 The nail Authors
# Licensed under the Apache License, Version 2.0

import math
import os
from pathlib import Path

import pytest

import nail

DATA = Path(os.environ.get("NAIL_TEST_DATA_DIR", Path(__file__).resolve().parents[1] / "data")) / "tiny"


def toy_vocab():
    return nail.Vocabulary.from_tokens(["<unk>", "a", "ab", "b"])


def test_tokenize_and_featurize():
    v = toy_vocab()
    assert nail.tokenize("ab", v) == [2]
    assert nail.tokenize("ba", v) == [3, 1]
    assert nail.featurize_query("a a", v) == [(1, 2.0)]
    assert nail.featurize_query("a a b", v, binary=True) == [(1, 1.0), (3, 1.0)]


def test_sparsify_and_score_pair():
    assert nail.sparsify([5, 1, 9, 9], 2) == [(2, 9.0), (3, 9.0)]
    assert nail.score_pair([(0, 1.0), (2, 1.0)], [1, 0, 2]) == 3.0
    with pytest.raises(nail.ArgumentError):
        nail.sparsify([1.0], 0)


def test_bm25_single_doc():
    v = nail.Vocabulary.from_tokens(["<unk>", "x", "y"])
    hits = nail.Bm25Index([("d1", "x")], v).retrieve("x", 10)
    assert hits[0][0] == "d1"
    assert hits[0][1] == pytest.approx(math.log(4 / 3))


def test_index_round_trip(tmp_path):
    v = toy_vocab()
    index = nail.ImpactIndex.build([("d1", [0, 1, 0, 2]), ("d2", [0, 0, 3, 0])], v)
    assert index.num_docs == 2
    assert index.num_postings == 3
    assert index.retrieve([(3, 1.0)], 10) == [("d1", 2.0)]
    index.save(tmp_path / "i.bin")
    assert nail.ImpactIndex.load(tmp_path / "i.bin", v) == index
    other = nail.Vocabulary.from_tokens(["<unk>", "a", "b", "c"])
    with pytest.raises(nail.IncompatibleError):
        nail.ImpactIndex.load(tmp_path / "i.bin", other)


def test_model_round_trip(tmp_path):
    v = toy_vocab()
    model = nail.Model.random(len(v), hidden=4, positions=2, seed=3)
    model.save(tmp_path / "m.bin")
    back = nail.Model.load(tmp_path / "m.bin")
    assert back == model
    assert back.encode("ab b", v) == model.encode("ab b", v)
    assert len(model.encode("", v)) == len(v)


def test_metrics():
    assert nail.ndcg_at_k(["d1", "d2"], {"d2": 1}, 10) == pytest.approx(1 / math.log2(3))
    assert nail.mrr_at_k(["a", "b", "c", "d"], {"d": 1}, 10) == 0.25
    assert nail.recall_at_k(["a"], {"a": 1, "b": 1}, 10) == 0.5
    assert nail.estimate_flops(16, 100) == 1600
    assert nail.flops_order(1600) == 4


def test_pipeline(tmp_path):
    common = dict(
        corpus=DATA / "corpus.jsonl",
        queries=DATA / "queries.tsv",
        qrels=DATA / "qrels.txt",
        vocab=DATA / "vocab.txt",
    )
    nail.run("train", output=tmp_path / "m.bin", hidden=4, positions=2, steps=10, total_passages=8,
             negatives=1, threads=1, **common)
    nail.run("build-index", model=tmp_path / "m.bin", output=tmp_path / "i.bin", threads=1, **common)
    nail.run("retrieve", mode="bm25", output=tmp_path / "bm25.run", **common)
    nail.run("rerank", index=tmp_path / "i.bin", candidates=tmp_path / "bm25.run",
             output=tmp_path / "rerank.run", **common)
    metrics = nail.evaluate_run(tmp_path / "rerank.run", DATA / "qrels.txt", ["mrr@10"])
    assert 0.0 <= metrics["mrr@10"] <= 1.0
    assert nail.run("flops", query_len=16, num_docs=100) == "1600\n"
    with pytest.raises(nail.FormatError):
        nail.run("retrieve", mode="bm25", output=tmp_path / "x.run",
                 **{**common, "corpus": tmp_path / "missing.jsonl"})
    with pytest.raises(AttributeError):
        nail.config(no_such_field=1)
