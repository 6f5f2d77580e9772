import json
from itertools import combinations
from pathlib import Path

import numpy as np
import pytest

from deepfuse.ensemble import (
    argmax_predict,
    drop_last_layers,
    make_classifier_id,
    pool_from_scores,
    sffs_select,
    split_classifier_id,
    sum_rule,
)

FIXTURES = Path(__file__).parent / "fixtures"


def stochastic_pool(rng, n_classifiers=4, n_samples=12, n_classes=3, layer_per=None):
    entries = []
    for i in range(n_classifiers):
        raw = rng.random((n_samples, n_classes))
        layer = layer_per[i] if layer_per else f"layer{i}"
        entries.append((f"{layer}:m{i}", raw / raw.sum(axis=1, keepdims=True)))
    return pool_from_scores(entries)


def fixture_pool(seed, n_classifiers=6, n_samples=40, n_classes=3):
    """Pool construction mirrored from the committed fixture generator."""
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, n_classes, n_samples)
    matrices = []
    for _ in range(n_classifiers):
        quality = rng.uniform(0.15, 0.6)
        raw = rng.random((n_samples, n_classes)) + quality * np.eye(n_classes)[labels]
        matrices.append(raw / raw.sum(axis=1, keepdims=True))
    pool = pool_from_scores(
        [(f"layer{i}:m", matrices[i]) for i in range(n_classifiers)]
    )
    return labels, matrices, pool


def test_classifier_id_round_trip():
    cid = make_classifier_id("conv5", "dct")
    assert cid == "conv5:dct"
    assert split_classifier_id(cid) == ("conv5", "dct")


def test_sum_rule_single_subset_is_identity():
    pool = stochastic_pool(np.random.default_rng(0))
    cid = pool.ids()[0]
    assert np.array_equal(sum_rule(pool, [cid]), pool.get(cid).scores)


def test_sum_rule_identical_matrices():
    rng = np.random.default_rng(1)
    raw = rng.random((6, 3))
    scores = raw / raw.sum(axis=1, keepdims=True)
    pool = pool_from_scores([("a:x", scores), ("b:x", scores.copy())])
    assert np.allclose(sum_rule(pool, ["a:x", "b:x"]), scores)


def test_sum_rule_symmetry():
    pool = pool_from_scores(
        [("a:x", np.array([[1.0, 0.0]])), ("b:x", np.array([[0.0, 1.0]]))]
    )
    assert sum_rule(pool, ["a:x", "b:x"]).tolist() == [[0.5, 0.5]]


def test_sum_rule_rows_sum_to_one():
    rng = np.random.default_rng(2)
    pool = stochastic_pool(rng, n_classifiers=5)
    fused = sum_rule(pool, pool.ids())
    assert np.max(np.abs(fused.sum(axis=1) - 1.0)) < 1e-9


def test_sum_rule_rejects_empty_and_unknown():
    pool = stochastic_pool(np.random.default_rng(3))
    with pytest.raises(ValueError):
        sum_rule(pool, [])
    with pytest.raises(ValueError):
        sum_rule(pool, ["missing:c"])


def test_argmax_predict_basics_and_ties():
    scores = np.array([[0.2, 0.5, 0.3], [0.5, 0.5, 0.0]])
    assert argmax_predict(scores).tolist() == [1, 0]


def test_argmax_invariant_under_positive_scaling():
    rng = np.random.default_rng(4)
    scores = rng.random((20, 4))
    scaled = scores * rng.uniform(0.1, 7.0)
    assert np.array_equal(argmax_predict(scores), argmax_predict(scaled))


def test_argmax_invariant_without_count_normalization():
    rng = np.random.default_rng(5)
    pool = stochastic_pool(rng, n_classifiers=5)
    subset = pool.ids()[:3]
    fused = sum_rule(pool, subset)
    unnormalized = sum(pool.get(c).scores for c in subset)
    assert np.array_equal(argmax_predict(fused), argmax_predict(unnormalized))


def test_drop_last_layers():
    layer_order = ["45", "47", "48", "49", "50"]
    rng = np.random.default_rng(6)
    pool = stochastic_pool(rng, n_classifiers=5, layer_per=layer_order)
    dropped = drop_last_layers(pool, layer_order, k=2)
    assert len(dropped) == 3
    assert all(e.layer_id in {"45", "47", "48"} for e in dropped.entries)


def test_drop_zero_layers_is_identity():
    pool = stochastic_pool(np.random.default_rng(7))
    assert drop_last_layers(pool, ["layer0", "layer1", "layer2", "layer3"], k=0) is pool


def test_drop_too_many_layers_rejected():
    pool = stochastic_pool(np.random.default_rng(8))
    with pytest.raises(ValueError):
        drop_last_layers(pool, ["layer0", "layer1", "layer2", "layer3"], k=4)


def test_sffs_single_classifier_pool():
    rng = np.random.default_rng(9)
    labels = rng.integers(0, 3, 12)
    raw = rng.random((12, 3)) + np.eye(3)[labels]
    pool = pool_from_scores([("l:m", raw / raw.sum(axis=1, keepdims=True))])
    selection = sffs_select(pool, labels, max_size=3)
    assert selection.chosen_ids == ("l:m",)
    expected = float((pool.entries[0].scores.argmax(axis=1) == labels).mean())
    assert selection.criterion_trace == (expected,)


def test_sffs_dominant_classifier_selected_alone():
    labels = np.array([0, 1, 2] * 4)
    perfect = np.eye(3)[labels]
    noise_rng = np.random.default_rng(10)
    junk = noise_rng.random((12, 3))
    junk = junk / junk.sum(axis=1, keepdims=True)
    # adding junk to perfect can only hurt, so no addition improves
    pool = pool_from_scores([("a:good", perfect), ("b:junk", junk)])
    selection = sffs_select(pool, labels, max_size=2)
    assert selection.chosen_ids == ("a:good",)
    assert selection.criterion_trace == (1.0,)


def test_sffs_criterion_trace_non_decreasing():
    for seed in range(10):
        labels, _, pool = fixture_pool(seed)
        selection = sffs_select(pool, labels, max_size=6)
        trace = selection.criterion_trace
        assert all(b >= a for a, b in zip(trace, trace[1:]))


def test_sffs_deterministic():
    labels, _, pool = fixture_pool(3)
    a = sffs_select(pool, labels, max_size=4)
    b = sffs_select(pool, labels, max_size=4)
    assert a == b


def test_sffs_respects_max_size():
    labels, _, pool = fixture_pool(5)
    selection = sffs_select(pool, labels, max_size=2)
    assert len(selection.chosen_ids) <= 2


def test_sffs_against_committed_exhaustive_fixture():
    doc = json.loads((FIXTURES / "sffs_pools.json").read_text())
    assert doc["n_trials"] == 50
    matches = 0
    for trial in doc["trials"]:
        labels, matrices, pool = fixture_pool(
            trial["seed"], doc["n_classifiers"], doc["n_samples"], doc["n_classes"]
        )
        selection = sffs_select(pool, labels, max_size=doc["n_classifiers"])
        achieved = selection.criterion_trace[-1]
        assert achieved >= trial["best_single"] - 1e-12
        assert achieved <= trial["exhaustive_best"] + 1e-12
        assert achieved == pytest.approx(trial["sffs_accuracy"], abs=1e-12)
        matches += trial["matches_exhaustive"]
    assert matches / doc["n_trials"] == pytest.approx(doc["match_fraction"])
    assert matches / doc["n_trials"] >= 0.6


def test_sffs_exhaustive_oracle_consistency():
    # re-derive the exhaustive optimum for a few trials and cross-check the fixture
    doc = json.loads((FIXTURES / "sffs_pools.json").read_text())
    for trial in doc["trials"][:5]:
        labels, matrices, _ = fixture_pool(trial["seed"])
        best = max(
            float(
                ((sum(matrices[i] for i in subset) / len(subset)).argmax(axis=1) == labels).mean()
            )
            for size in range(1, 7)
            for subset in combinations(range(6), size)
        )
        assert best == pytest.approx(trial["exhaustive_best"], abs=1e-12)
