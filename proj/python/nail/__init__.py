# Copyright 2026 The nail Authors
# Licensed under the Apache License, Version 2.0
"""Sparse lexical retrieval with precomputed document token scores."""

from ._core import (
    ArgumentError,
    Bm25Index,
    FormatError,
    ImpactIndex,
    IncompatibleError,
    InvariantError,
    Model,
    RunConfig,
    Vocabulary,
    cmd_build_index,
    cmd_evaluate,
    cmd_flops,
    cmd_rerank,
    cmd_retrieve,
    cmd_sweep,
    cmd_top_terms,
    cmd_train,
    estimate_flops,
    evaluate_run,
    featurize_query,
    flops_order,
    mrr_at_k,
    ndcg_at_k,
    recall_at_k,
    score_pair,
    sparsify,
    tokenize,
)

_COMMANDS = {
    "build-index": cmd_build_index,
    "retrieve": cmd_retrieve,
    "rerank": cmd_rerank,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "flops": cmd_flops,
    "top-terms": cmd_top_terms,
}


def config(**options):
    """RunConfig with the given fields set; unknown names raise AttributeError."""
    cfg = RunConfig()
    for name, value in options.items():
        if not hasattr(cfg, name):
            raise AttributeError(f"RunConfig has no field {name!r}")
        setattr(cfg, name, value)
    return cfg


def run(command, **options):
    """Runs a pipeline command by its CLI name and returns its printed output."""
    try:
        fn = _COMMANDS[command]
    except KeyError:
        raise ValueError(f"unknown command {command!r}") from None
    return fn(config(**options))


__all__ = [name for name in dir() if not name.startswith("_")]
