"""Score fusion by sum rule, layer dropping, and floating-forward selection."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


def make_classifier_id(layer_id: str, method: str) -> str:
    return f"{layer_id}:{method}"


def split_classifier_id(classifier_id: str):
    layer_id, _, method = classifier_id.rpartition(":")
    return layer_id, method


@dataclass(frozen=True)
class PoolEntry:
    classifier_id: str
    layer_id: str
    method: str
    scores: np.ndarray  # (n_samples, n_classes), stochastic rows


@dataclass(frozen=True)
class ClassifierPool:
    """Ordered per-(layer, method) score matrices over the same samples."""

    entries: tuple

    def __post_init__(self):
        ids = [e.classifier_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("classifier ids must be unique")
        shapes = {e.scores.shape for e in self.entries}
        if len(shapes) > 1:
            raise ValueError(f"score matrices disagree on shape: {sorted(shapes)}")

    def __len__(self) -> int:
        return len(self.entries)

    def ids(self) -> list:
        return [e.classifier_id for e in self.entries]

    def get(self, classifier_id: str) -> PoolEntry:
        for entry in self.entries:
            if entry.classifier_id == classifier_id:
                return entry
        raise ValueError(f"unknown classifier id {classifier_id!r}")


def pool_from_scores(scored: Sequence) -> ClassifierPool:
    """Build a pool from (classifier_id, scores) pairs, parsing layer/method from the id."""
    entries = []
    for classifier_id, scores in scored:
        layer_id, method = split_classifier_id(classifier_id)
        entries.append(
            PoolEntry(
                classifier_id=classifier_id,
                layer_id=layer_id,
                method=method,
                scores=np.asarray(scores, dtype=np.float64),
            )
        )
    return ClassifierPool(entries=tuple(entries))


def sum_rule(pool: ClassifierPool, subset: Sequence) -> np.ndarray:
    """Mean of the subset's score matrices; rows stay stochastic."""
    subset = list(subset)
    if not subset:
        raise ValueError("fusion subset must not be empty")
    total = None
    for classifier_id in subset:
        scores = pool.get(classifier_id).scores
        total = scores.copy() if total is None else total + scores
    return total / len(subset)


def argmax_predict(scores) -> np.ndarray:
    """Per-row argmax; ties resolve to the lowest class index."""
    return np.argmax(np.asarray(scores), axis=1)


def drop_last_layers(pool: ClassifierPool, layer_order: Sequence, k: int = 2) -> ClassifierPool:
    """Remove classifiers built on the last ``k`` layers of ``layer_order``."""
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    distinct = {e.layer_id for e in pool.entries}
    if k >= len(distinct):
        raise ValueError(
            f"cannot drop {k} layers from a pool spanning {len(distinct)} layers"
        )
    if k == 0:
        return pool
    dropped = set(list(layer_order)[-k:])
    kept = tuple(e for e in pool.entries if e.layer_id not in dropped)
    return ClassifierPool(entries=kept)


@dataclass(frozen=True)
class EnsembleSelection:
    chosen_ids: tuple  # in inclusion order
    criterion_trace: tuple  # criterion value at each accepted step


def sffs_select(pool: ClassifierPool, validation_labels, max_size: int) -> EnsembleSelection:
    """Floating forward selection of classifiers by fused-subset accuracy.

    Each forward step adds the classifier whose inclusion maximizes sum-rule
    accuracy; a floating backward step then keeps removing whichever member's
    removal strictly improves accuracy (while more than one member remains).
    Additions stop at ``max_size`` or when no addition strictly improves.
    Ties always resolve to the lower pool index, so selection is
    deterministic for a fixed pool order.
    """
    if len(pool) == 0:
        raise ValueError("pool must not be empty")
    labels = np.asarray(validation_labels, dtype=np.intp)
    n_rows = pool.entries[0].scores.shape[0]
    if labels.size != n_rows:
        raise ValueError(f"labels length {labels.size} != score rows {n_rows}")
    if max_size < 1:
        raise ValueError(f"max_size must be >= 1, got {max_size}")

    matrices = [e.scores for e in pool.entries]

    def subset_accuracy(indices) -> float:
        fused = sum(matrices[i] for i in indices) / len(indices)
        return float((np.argmax(fused, axis=1) == labels).mean())

    chosen: list = []
    best = -np.inf
    trace: list = []
    while len(chosen) < max_size:
        candidates = [i for i in range(len(matrices)) if i not in chosen]
        if not candidates:
            break
        add_scores = [subset_accuracy(chosen + [i]) for i in candidates]
        pick = int(np.argmax(add_scores))  # first max wins: lower pool index
        if add_scores[pick] <= best:
            break
        chosen.append(candidates[pick])
        best = add_scores[pick]
        trace.append(best)
        while len(chosen) > 1:
            removal_best = -np.inf
            removal_member = None
            for member in sorted(chosen):  # ascending pool index breaks ties
                acc = subset_accuracy([j for j in chosen if j != member])
                if acc > removal_best:
                    removal_best = acc
                    removal_member = member
            if removal_best > best:
                chosen.remove(removal_member)
                best = removal_best
                trace.append(best)
            else:
                break
    ids = pool.ids()
    return EnsembleSelection(
        chosen_ids=tuple(ids[i] for i in chosen),
        criterion_trace=tuple(trace),
    )
