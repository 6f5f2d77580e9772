"""Linear SVMs trained in the dual by coordinate ascent, with multiclass codings.

The binary solver optimizes the box-constrained dual of the L1-loss linear
SVM. The bias is handled by augmenting every sample with a constant 1
feature, which keeps each coordinate update an exact box-clamped minimizer,
so the dual objective never decreases across epochs. Coordinate order is
reshuffled every epoch from a seeded generator; retraining with the same seed
reproduces the model bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import TrainingError
from .sidecar import load_sidecar, save_sidecar

CODING_ONE_VS_ALL = "one_vs_all"
CODING_ONE_VS_ONE = "one_vs_one"
CODINGS = (CODING_ONE_VS_ALL, CODING_ONE_VS_ONE)


@dataclass(frozen=True)
class StandardizationStats:
    """Per-feature mean and std from training rows; zero stds become 1."""

    mean: np.ndarray
    std: np.ndarray

    def apply(self, rows: np.ndarray) -> np.ndarray:
        return (rows - self.mean) / self.std


def fit_standardization(rows) -> StandardizationStats:
    rows = np.asarray(rows, dtype=np.float64)
    # exactly constant columns must map to exactly 0, and float round-off can
    # leave their computed std at ~1e-16 instead of 0, so detect them directly
    constant = (rows == rows[0]).all(axis=0)
    mean = np.where(constant, rows[0], rows.mean(axis=0))
    std = np.where(constant, 1.0, rows.std(axis=0))
    std = np.where(std == 0.0, 1.0, std)
    return StandardizationStats(mean=mean, std=std)


@dataclass(frozen=True)
class BinarySvmModel:
    weights: np.ndarray  # (d,)
    bias: float
    c: float
    epochs_run: int
    kkt_violation: float
    dual_objectives: tuple  # objective value after each epoch

    def decision(self, rows: np.ndarray) -> np.ndarray:
        return rows @ self.weights + self.bias


def train_binary(
    rows,
    labels,
    c: float = 1.0,
    tol: float = 1e-4,
    max_epochs: int = 1000,
    seed: int = 0,
) -> BinarySvmModel:
    """Dual coordinate ascent for the L1-loss linear SVM with +-1 labels.

    Stops when the largest projected-gradient violation in an epoch drops
    below ``tol``, or after ``max_epochs``.
    """
    x = np.asarray(rows, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"rows must be 2-D, got shape {x.shape}")
    n = x.shape[0]
    if n < 2:
        raise TrainingError(f"need at least 2 samples, got {n}")
    if not (np.all(np.isin(y, (-1.0, 1.0))) and y.size == n):
        raise ValueError("labels must be +-1 and match the row count")
    if (y > 0).all() or (y < 0).all():
        raise TrainingError("both classes must be present")

    aug = np.hstack([x, np.ones((n, 1))])
    yx = aug * y[:, None]
    diag = np.einsum("ij,ij->i", aug, aug)  # >= 1 thanks to the bias column
    alpha = np.zeros(n)
    w = np.zeros(aug.shape[1])
    rng = np.random.default_rng(seed)

    objectives = []
    max_violation = np.inf
    for _ in range(max_epochs):
        max_violation = 0.0
        for i in rng.permutation(n):
            gradient = y[i] * (w @ aug[i]) - 1.0
            if alpha[i] <= 0.0:
                violation = min(gradient, 0.0)
            elif alpha[i] >= c:
                violation = max(gradient, 0.0)
            else:
                violation = gradient
            max_violation = max(max_violation, abs(violation))
            if violation != 0.0:
                updated = min(max(alpha[i] - gradient / diag[i], 0.0), c)
                if updated != alpha[i]:
                    w = w + (updated - alpha[i]) * yx[i]
                    alpha[i] = updated
        objectives.append(alpha.sum() - 0.5 * (w @ w))
        if max_violation < tol:
            break
    return BinarySvmModel(
        weights=w[:-1].copy(),
        bias=float(w[-1]),
        c=c,
        epochs_run=len(objectives),
        kkt_violation=float(max_violation),
        dual_objectives=tuple(objectives),
    )


@dataclass(frozen=True)
class MulticlassSvmModel:
    """Binary SVMs under a coding scheme, plus the training standardization.

    ``assignments`` pairs with ``binaries``: under one-vs-all each entry is
    (class,) except for the degenerate two-class case, which collapses to a
    single (0, 1) problem in both codings; under one-vs-one each entry is a
    lexicographic class pair (i, j) where +1 means class i.
    """

    n_classes: int
    coding: str
    binaries: tuple  # of BinarySvmModel
    assignments: tuple  # of tuples of class indices
    stats: StandardizationStats

    @property
    def n_features(self) -> int:
        return self.stats.mean.size


def train_multiclass(
    rows,
    labels,
    coding: str = CODING_ONE_VS_ALL,
    c: float = 1.0,
    tol: float = 1e-4,
    max_epochs: int = 1000,
    seed: int = 0,
    n_classes: Optional[int] = None,
) -> MulticlassSvmModel:
    x = np.asarray(rows, dtype=np.float64)
    y = np.asarray(labels, dtype=np.intp)
    if coding not in CODINGS:
        raise ValueError(f"unknown coding {coding!r}, expected one of {CODINGS}")
    present = np.unique(y)
    k = int(n_classes if n_classes is not None else present.max() + 1)
    if k < 2:
        raise TrainingError(f"need at least 2 classes, got {k}")
    missing = sorted(set(range(k)) - set(present.tolist()))
    if missing:
        raise TrainingError(f"classes {missing} have no training samples")

    stats = fit_standardization(x)
    z = stats.apply(x)

    binaries = []
    assignments = []
    if k == 2 or coding == CODING_ONE_VS_ONE:
        for a in range(k):
            for b in range(a + 1, k):
                subset = np.flatnonzero((y == a) | (y == b))
                signs = np.where(y[subset] == a, 1.0, -1.0)
                binaries.append(
                    train_binary(z[subset], signs, c=c, tol=tol, max_epochs=max_epochs, seed=seed)
                )
                assignments.append((a, b))
    else:
        for cls in range(k):
            signs = np.where(y == cls, 1.0, -1.0)
            binaries.append(
                train_binary(z, signs, c=c, tol=tol, max_epochs=max_epochs, seed=seed)
            )
            assignments.append((cls,))
    return MulticlassSvmModel(
        n_classes=k,
        coding=coding,
        binaries=tuple(binaries),
        assignments=tuple(assignments),
        stats=stats,
    )


def _softmax_rows(decisions: np.ndarray) -> np.ndarray:
    shifted = decisions - decisions.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def predict_scores(model: MulticlassSvmModel, rows) -> np.ndarray:
    """Probability-like per-class scores; every row is nonnegative and sums to 1.

    One-vs-all takes a softmax over the class decision values; one-vs-one
    counts pairwise wins and normalizes by the number of pairs.
    """
    x = np.asarray(rows, dtype=np.float64)
    x = np.atleast_2d(x)
    if x.shape[1] != model.n_features:
        raise ValueError(
            f"feature dim {x.shape[1]} does not match model dim {model.n_features}"
        )
    z = model.stats.apply(x)
    k = model.n_classes
    pairwise = k == 2 or model.coding == CODING_ONE_VS_ONE
    if pairwise and model.coding == CODING_ONE_VS_ALL:
        # degenerate two-class one-vs-all: one decision, softmax over (+d, -d)
        d = model.binaries[0].decision(z)
        return _softmax_rows(np.column_stack([d, -d]))
    if model.coding == CODING_ONE_VS_ALL:
        decisions = np.column_stack([b.decision(z) for b in model.binaries])
        return _softmax_rows(decisions)
    votes = np.zeros((z.shape[0], k))
    for (a, b), binary in zip(model.assignments, model.binaries):
        d = binary.decision(z)
        votes[:, a] += d >= 0
        votes[:, b] += d < 0
    scores = votes / (k * (k - 1) / 2)
    return scores / scores.sum(axis=1, keepdims=True)


# --- serialization ---------------------------------------------------------

_SIDECAR_KIND = "svm"


def save_model(model: MulticlassSvmModel, path) -> None:
    meta = {
        "n_classes": model.n_classes,
        "coding": model.coding,
        "n_binaries": len(model.binaries),
        "c": model.binaries[0].c,
    }
    arrays = {
        "stats.mean": model.stats.mean,
        "stats.std": model.stats.std,
        "weights": np.stack([b.weights for b in model.binaries]),
        "biases": np.array([b.bias for b in model.binaries]),
        "epochs": np.array([b.epochs_run for b in model.binaries], dtype=np.int64),
        "violations": np.array([b.kkt_violation for b in model.binaries]),
        "assignments": np.array(
            [list(a) + [-1] * (2 - len(a)) for a in model.assignments], dtype=np.int64
        ),
    }
    save_sidecar(path, _SIDECAR_KIND, meta, arrays)


def load_model(path) -> MulticlassSvmModel:
    meta, arrays = load_sidecar(path, _SIDECAR_KIND)
    binaries = []
    assignments = []
    for i in range(meta["n_binaries"]):
        binaries.append(
            BinarySvmModel(
                weights=arrays["weights"][i],
                bias=float(arrays["biases"][i]),
                c=meta["c"],
                epochs_run=int(arrays["epochs"][i]),
                kkt_violation=float(arrays["violations"][i]),
                dual_objectives=(),
            )
        )
        pair = tuple(int(v) for v in arrays["assignments"][i] if v >= 0)
        assignments.append(pair)
    return MulticlassSvmModel(
        n_classes=meta["n_classes"],
        coding=meta["coding"],
        binaries=tuple(binaries),
        assignments=tuple(assignments),
        stats=StandardizationStats(mean=arrays["stats.mean"], std=arrays["stats.std"]),
    )


def hinge_loss(model: BinarySvmModel, rows, labels) -> float:
    """Total hinge loss sum(max(0, 1 - y * decision)) on the given rows."""
    rows = np.asarray(rows, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    margins = 1.0 - y * model.decision(rows)
    return float(np.maximum(margins, 0.0).sum())
