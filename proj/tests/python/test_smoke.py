# SPDX-License-Identifier: Apache-2.0
"""Smoke tests for the python bindings."""

import math

import pytest

import mcavd


def test_tokenize():
    assert mcavd.tokenize("Is it sunny?") == ["is", "it", "sunny", "?"]
    assert mcavd.tokenize("") == []


def test_metrics_hand_values():
    assert mcavd.rank_candidates([0.1, 0.9, 0.5]) == [3, 1, 2]
    value = mcavd.ndcg([2, 1, 3], [1.0, 0.5, 0.0])
    assert abs(value - 0.85972) < 1e-5
    mrr, r1, r5, r10, rank = mcavd.single_gt_metrics(4, 100)
    assert (mrr, r1, r5, r10, rank) == (0.25, 0, 1, 1, 4)


def test_gen_synthetic_deterministic():
    corpus_a, feats_a, dense_a = mcavd.gen_synthetic(n_dialogs=3, seed=7)
    corpus_b, feats_b, dense_b = mcavd.gen_synthetic(n_dialogs=3, seed=7)
    assert corpus_a.n_dialogs == 3
    assert corpus_a.image_ids() == corpus_b.image_ids()
    assert feats_a.n_images == 3
    assert len(dense_a) == len(dense_b)


def test_pronoun_and_ellipsis_rules():
    assert mcavd.count_pronouns(["is", "it", "sunny", "?"]) == (1, 0)
    assert mcavd.count_pronouns(["what", "about", "the", "other", "?"]) == (1, 1)
    assert mcavd.count_pronouns(["about", "how", "many", "?"]) == (0, 0)
    assert not mcavd.detect_ellipsis("(SQ (VBZ is) (NP (PRP it)) (ADJP (JJ sunny)))")
    assert mcavd.detect_ellipsis("(FRAG (NN what))")


def test_model_roundtrip(tmp_path):
    corpus, features, dense = mcavd.gen_synthetic(
        n_dialogs=3, seed=5, feature_dim=8, n_boxes=4, n_candidates=8
    )
    model = mcavd.build_model(
        corpus,
        "mca-i",
        num_layers=1,
        num_heads=2,
        model_dim=16,
        embed_dim=12,
        feature_dim=8,
        n_boxes=4,
        n_candidates=8,
        seed=3,
    )
    assert model.variant == "mca-i"
    assert model.n_parameters > 0

    report = mcavd.evaluate(model, corpus, features, dense=dense)
    assert report["gt_rounds"] == 30
    assert 1.0 <= report["mean_rank"] <= 8.0
    assert "ndcg" in report

    path = tmp_path / "model.mcav"
    mcavd.save_checkpoint(model, str(path))
    loaded = mcavd.load_checkpoint(str(path))
    again = mcavd.evaluate(loaded, corpus, features, dense=dense)
    assert again == report


def test_training_step_runs():
    corpus, features, _ = mcavd.gen_synthetic(
        n_dialogs=2, seed=9, feature_dim=8, n_boxes=4, n_candidates=8
    )
    model = mcavd.build_model(
        corpus,
        "mca-i",
        num_layers=1,
        num_heads=2,
        model_dim=16,
        embed_dim=12,
        feature_dim=8,
        n_boxes=4,
        n_candidates=8,
    )
    result = mcavd.train_sparse(model, corpus, features, epochs=1, early_stop_patience=0)
    assert result["epochs_run"] == 1
    assert math.isfinite(result["best_val_ndcg"])


def test_audit_tools():
    corpus, _, dense = mcavd.gen_synthetic(n_dialogs=4, seed=11, dense_fraction=1.0)
    stats = mcavd.relevance_stats(dense, corpus)
    assert stats["total_rounds"] == len(dense)
    corrected, modified, indices = mcavd.correct_gt_relevance(dense, corpus)
    assert modified == 0  # synthetic ground truth already carries relevance 1
    assert len(corrected) == len(dense)
    assert indices == []

    report = mcavd.phenomena_report(corpus)
    assert report["dialog_count"] == 4
    assert sum(report["pronouns_per_dialog"].values()) == 4


def test_errors_surface_as_mcavd_error(tmp_path):
    with pytest.raises(mcavd.McavdError):
        mcavd.load_corpus(str(tmp_path / "missing.json"))
    with pytest.raises(mcavd.McavdError):
        mcavd.single_gt_metrics(0, 10)
