import numpy as np
import pytest

from deepfuse.transforms import chi2_scores, chi2_select


def chi2_oracle(column, labels, bins=10):
    """Loop-based contingency-table chi-square, independent of the implementation."""
    column = list(map(float, column))
    labels = list(map(int, labels))
    lo, hi = min(column), max(column)
    if hi == lo:
        return 0.0
    table = {}
    for value, label in zip(column, labels):
        b = int((value - lo) / (hi - lo) * bins)
        b = min(b, bins - 1)
        table.setdefault(b, {})
        table[b][label] = table[b].get(label, 0) + 1
    n = len(column)
    classes = sorted(set(labels))
    row_totals = {b: sum(row.values()) for b, row in table.items()}
    col_totals = {c: sum(row.get(c, 0) for row in table.values()) for c in classes}
    stat = 0.0
    for b, row in table.items():
        for c in classes:
            expected = row_totals[b] * col_totals[c] / n
            observed = row.get(c, 0)
            stat += (observed - expected) ** 2 / expected
    return stat


def test_perfect_association_equals_n():
    labels = np.array([0] * 10 + [1] * 10)
    assert chi2_scores(labels.astype(float), labels) == pytest.approx(20.0, abs=1e-12)


def test_constant_column_scores_zero():
    labels = np.array([0, 1] * 10)
    assert chi2_scores(np.full(20, 3.3), labels) == 0.0


def test_independent_symmetric_feature_scores_zero():
    # identical per-class value distribution: observed == expected everywhere
    column = np.array([0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0])
    labels = np.array([0, 0, 0, 0, 1, 1, 1, 1])
    assert chi2_scores(column, labels) == pytest.approx(0.0, abs=1e-12)


def test_matches_contingency_oracle_on_random_columns():
    rng = np.random.default_rng(0)
    for trial in range(100):
        n = int(rng.integers(5, 60))
        column = rng.normal(size=n) * rng.uniform(0.1, 10)
        labels = rng.integers(0, rng.integers(2, 5), size=n)
        if len(np.unique(labels)) < 2:
            labels[0] = (labels[0] + 1) % 2
        mine = chi2_scores(column, labels)
        assert mine == pytest.approx(chi2_oracle(column, labels), abs=1e-9), f"trial {trial}"
        assert mine >= 0.0


def test_score_invariant_under_joint_permutation():
    rng = np.random.default_rng(1)
    column = rng.normal(size=40)
    labels = rng.integers(0, 3, size=40)
    perm = rng.permutation(40)
    assert chi2_scores(column, labels) == pytest.approx(
        chi2_scores(column[perm], labels[perm]), abs=1e-12
    )


def test_needs_two_samples():
    with pytest.raises(ValueError):
        chi2_scores([1.0], [0])


def test_select_top_scores():
    assert chi2_select([3.0, 1.0, 2.0], keep=2).tolist() == [0, 2]


def test_select_breaks_ties_by_index():
    assert chi2_select([5.0, 5.0, 5.0], keep=2).tolist() == [0, 1]


def test_select_matches_sort_oracle():
    rng = np.random.default_rng(2)
    for _ in range(50):
        scores = rng.random(100)
        keep = int(rng.integers(1, 100))
        mine = chi2_select(scores, keep).tolist()
        oracle = sorted(sorted(range(100), key=lambda i: (-scores[i], i))[:keep])
        assert mine == oracle


def test_select_caps_at_length():
    assert chi2_select([1.0, 2.0], keep=10).tolist() == [0, 1]
    with pytest.raises(ValueError):
        chi2_select([1.0], keep=0)
