# SPDX-License-Identifier: Apache-2.0
"""Modular co-attention visual-dialog answer ranking.

Thin wrapper over the C++ core: synthetic corpora, the six model variants,
curriculum training, retrieval metrics, and the annotation/phenomena tools.
"""

from ._mcavd import (  # noqa: F401
    DenseAnnotation,
    DialogCorpus,
    DialogModel,
    FeatureStore,
    McavdError,
    build_model,
    correct_gt_relevance,
    count_pronouns,
    detect_ellipsis,
    evaluate,
    finetune_dense,
    gen_synthetic,
    load_checkpoint,
    load_corpus,
    load_dense,
    load_features,
    ndcg,
    phenomena_report,
    rank_candidates,
    relevance_stats,
    save_checkpoint,
    save_corpus,
    save_dense,
    single_gt_metrics,
    tokenize,
    train_sparse,
    write_features,
)

__all__ = [
    "DenseAnnotation",
    "DialogCorpus",
    "DialogModel",
    "FeatureStore",
    "McavdError",
    "build_model",
    "correct_gt_relevance",
    "count_pronouns",
    "detect_ellipsis",
    "evaluate",
    "finetune_dense",
    "gen_synthetic",
    "load_checkpoint",
    "load_corpus",
    "load_dense",
    "load_features",
    "ndcg",
    "phenomena_report",
    "rank_candidates",
    "relevance_stats",
    "save_checkpoint",
    "save_corpus",
    "save_dense",
    "single_gt_metrics",
    "tokenize",
    "train_sparse",
    "write_features",
]
