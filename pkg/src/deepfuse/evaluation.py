"""Cross-validation driver, accuracy, and the Wilcoxon signed-rank test."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.special import ndtr
from scipy.stats import rankdata

from . import ensemble as ens
from . import reducers, svm
from .errors import ConfigError
from .reducers import Method, ReductionPlan
from .tensor_store import DatasetManifest, FoldSpec

EXACT_WILCOXON_LIMIT = 25


def accuracy(predicted, truth) -> float:
    """Fraction of exact matches between two equal-length class lists."""
    predicted = np.asarray(predicted)
    truth = np.asarray(truth)
    if predicted.shape != truth.shape or predicted.size == 0:
        raise ValueError(
            f"prediction and truth must be equal non-empty lengths, "
            f"got {predicted.shape} vs {truth.shape}"
        )
    return float((predicted == truth).mean())


@dataclass(frozen=True)
class WilcoxonResult:
    n_effective: int
    w_statistic: float
    p_value: float
    method: str  # "exact" | "normal-approximation"


def wilcoxon_signed_rank(a, b) -> WilcoxonResult:
    """Two-sided Wilcoxon signed-rank test on paired values.

    Zero differences are dropped; tied absolute differences get average
    ranks. W is the smaller signed-rank sum. The p-value is exact (over all
    sign assignments) up to 25 effective pairs, and a tie- and
    continuity-corrected normal approximation beyond that.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or a.size < 1:
        raise ValueError(f"need equal-length 1-D inputs, got {a.shape} vs {b.shape}")
    diff = a - b
    diff = diff[diff != 0.0]
    n = diff.size
    if n == 0:
        return WilcoxonResult(n_effective=0, w_statistic=0.0, p_value=1.0, method="exact")
    ranks = rankdata(np.abs(diff))
    w_pos = float(ranks[diff > 0].sum())
    w_neg = float(ranks[diff < 0].sum())
    w = min(w_pos, w_neg)
    if n <= EXACT_WILCOXON_LIMIT:
        p = _exact_two_sided_p(ranks, w)
        return WilcoxonResult(n_effective=n, w_statistic=w, p_value=p, method="exact")
    mean = n * (n + 1) / 4.0
    _, tie_counts = np.unique(np.abs(diff), return_counts=True)
    correction = float(((tie_counts**3 - tie_counts) / 48.0).sum())
    variance = n * (n + 1) * (2 * n + 1) / 24.0 - correction
    z = (w - mean + 0.5) / math.sqrt(variance)
    p = min(1.0, max(2.0 * float(ndtr(z)), np.nextafter(0.0, 1.0)))
    return WilcoxonResult(
        n_effective=n, w_statistic=w, p_value=p, method="normal-approximation"
    )


def _exact_two_sided_p(ranks: np.ndarray, w: float) -> float:
    """P(min rank-sum <= w) over all 2^n sign assignments, counted exactly.

    Average ranks are half-integers, so doubling them makes every attainable
    sum an integer; the assignment counts per sum come from a subset-sum
    convolution, equivalent to enumerating every assignment.
    """
    doubled = np.rint(2.0 * ranks).astype(np.int64)
    total = int(doubled.sum())
    counts = np.zeros(total + 1)
    counts[0] = 1.0
    for r in doubled:
        counts[r:] += counts[: counts.size - r].copy()
    w2 = int(np.rint(2.0 * w))
    low = counts[: w2 + 1].sum()
    high = counts[total - w2 :].sum()
    overlap = counts[total - w2 : w2 + 1].sum() if w2 >= total - w2 else 0.0
    return float((low + high - overlap) / 2.0 ** len(doubled))


# --- cross-validation driver -------------------------------------------------


@dataclass(frozen=True)
class RowSpec:
    """One reported method row: a fusion subset or an SFFS selection."""

    name: str
    methods: tuple = ()  # reduction method names fused in this row
    drop_last: int = 0  # exclude classifiers from this many trailing layers
    sffs: bool = False
    max_size: Optional[int] = None  # SFFS cap


@dataclass(frozen=True)
class SvmSettings:
    coding: str = svm.CODING_ONE_VS_ALL
    c: float = 1.0
    tol: float = 1e-4
    max_epochs: int = 1000
    seed: int = 0


@dataclass(frozen=True)
class SffsSettings:
    validation_fraction: float = 0.2
    seed: int = 0


@dataclass
class CvResult:
    row: RowSpec
    fold_accuracies: list
    mean_accuracy: float
    fold_scores: list = field(default_factory=list)  # fused test-fold matrices
    selections: Optional[list] = None  # per-fold EnsembleSelection for SFFS rows


def inner_validation_split(labels, fraction: float, seed: int):
    """Stratified (fit, validation) index split within a training fold.

    Every class keeps at least one fit sample; singleton classes contribute
    nothing to validation.
    """
    labels = np.asarray(labels, dtype=np.intp)
    rng = np.random.default_rng(seed)
    val = []
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        n_val = min(len(idx) - 1, max(1, round(fraction * len(idx))))
        if n_val > 0:
            val.extend(rng.permutation(idx)[:n_val].tolist())
    val = np.array(sorted(val), dtype=np.intp)
    fit = np.setdiff1d(np.arange(labels.size), val)
    return fit, val


@dataclass(frozen=True)
class _FoldTask:
    manifest: DatasetManifest
    fold: int
    train_idx: np.ndarray
    test_idx: np.ndarray
    layer_ids: tuple
    forced_raw: tuple
    plans: dict  # method name -> ReductionPlan
    needed_methods: tuple
    svm_settings: SvmSettings
    sffs_needed: bool
    sffs_settings: SffsSettings
    sink: Optional[str]


def _classifier_ids_for(task: _FoldTask):
    """(classifier id, layer id, effective plan, tail flag) for every needed classifier."""
    out = {}
    for layer_id in task.layer_ids:
        layer = task.manifest.layer(layer_id)
        tail = layer_id in task.forced_raw
        for method_name in task.needed_methods:
            eff = reducers.effective_method(Method(method_name), layer.flat_dim, tail)
            cid = ens.make_classifier_id(layer_id, eff.value)
            if cid not in out:
                plan = task.plans.get(eff.value, ReductionPlan(method=Method.RAW))
                out[cid] = (layer_id, plan, tail)
    return out


def _score_classifiers(task: _FoldTask, fit_idx, eval_idx, labels, sink_dir=None):
    """Fit reducers and SVMs on fit_idx samples, score eval_idx samples."""
    samples = task.manifest.samples
    fit_labels = labels[fit_idx]
    by_layer: dict = {}
    for cid, (layer_id, plan, tail) in _classifier_ids_for(task).items():
        by_layer.setdefault(layer_id, []).append((cid, plan, tail))
    scored = []
    for layer_id in task.layer_ids:
        fit_tensors = [task.manifest.load_tensor(samples[i], layer_id) for i in fit_idx]
        eval_tensors = [task.manifest.load_tensor(samples[i], layer_id) for i in eval_idx]
        for cid, plan, tail in by_layer[layer_id]:
            fitted, fit_features = reducers.reduce_layer(
                plan, fit_tensors, fit_labels, fit_tensors, tail_layer=tail
            )
            model = svm.train_multiclass(
                fit_features,
                fit_labels,
                coding=task.svm_settings.coding,
                c=task.svm_settings.c,
                tol=task.svm_settings.tol,
                max_epochs=task.svm_settings.max_epochs,
                seed=task.svm_settings.seed,
                n_classes=len(task.manifest.classes),
            )
            scores = svm.predict_scores(model, fitted.transform(eval_tensors))
            scored.append((cid, scores))
            if sink_dir is not None:
                safe = cid.replace(":", "__")
                reducers.save_reducer(fitted, Path(sink_dir) / f"{safe}.reducer")
                svm.save_model(model, Path(sink_dir) / f"{safe}.svm")
    return ens.pool_from_scores(scored)


def _run_fold(task: _FoldTask):
    labels = task.manifest.labels()
    sink_dir = None
    if task.sink is not None:
        sink_dir = Path(task.sink) / f"fold{task.fold}"
        sink_dir.mkdir(parents=True, exist_ok=True)
    pool = _score_classifiers(task, task.train_idx, task.test_idx, labels, sink_dir)
    inner_pool = None
    inner_labels = None
    if task.sffs_needed:
        train_labels = labels[task.train_idx]
        fit_rel, val_rel = inner_validation_split(
            train_labels, task.sffs_settings.validation_fraction, task.sffs_settings.seed
        )
        inner_pool = _score_classifiers(
            task, task.train_idx[fit_rel], task.train_idx[val_rel], labels
        )
        inner_labels = train_labels[val_rel]
    return pool, labels[task.test_idx], inner_pool, inner_labels


def run_cv(
    manifest: DatasetManifest,
    fold_spec: FoldSpec,
    plans: dict,
    rows: Sequence[RowSpec],
    svm_settings: SvmSettings = SvmSettings(),
    sffs_settings: SffsSettings = SffsSettings(),
    raw_tail: int = 4,
    layer_ids: Optional[Sequence] = None,
    jobs: int = 1,
    sink=None,
) -> list:
    """Cross-validated evaluation of every configured method row.

    Per fold, reducers and SVMs are fitted on the training folds only and
    scored on the test fold; each row then fuses its classifier subset by sum
    rule. SFFS rows choose their subset on an inner validation split carved
    out of the training folds.
    """
    manifest.validate()
    if len(fold_spec.assignment) != len(manifest.samples):
        raise ConfigError(
            f"fold assignment covers {len(fold_spec.assignment)} samples, "
            f"manifest has {len(manifest.samples)}"
        )
    all_layer_ids = [l.id for l in manifest.layers]
    if layer_ids is None:
        layer_ids = all_layer_ids
    else:
        unknown = [l for l in layer_ids if l not in all_layer_ids]
        if unknown:
            raise ConfigError(f"unknown layers {unknown}; manifest has {all_layer_ids}")
        layer_ids = [l for l in all_layer_ids if l in set(layer_ids)]
    if not layer_ids:
        raise ConfigError("no layers selected")

    method_names = set()
    for row in rows:
        if row.sffs and not row.methods:
            method_names.update(plans.keys())
        method_names.update(row.methods)
    unknown_methods = sorted(m for m in method_names if m not in plans and m != "raw")
    if unknown_methods:
        raise ConfigError(
            f"rows reference undeclared methods {unknown_methods}; "
            f"declared: {sorted(plans)}"
        )
    for row in rows:
        if row.drop_last >= len(layer_ids):
            raise ConfigError(
                f"row {row.name!r} drops {row.drop_last} of {len(layer_ids)} layers"
            )
        if row.sffs and (row.max_size is None or row.max_size < 1):
            raise ConfigError(f"SFFS row {row.name!r} needs max_size >= 1")

    forced_raw = tuple(layer_ids[len(layer_ids) - min(raw_tail, len(layer_ids)) :]) if raw_tail > 0 else ()
    tasks = [
        _FoldTask(
            manifest=manifest,
            fold=f,
            train_idx=fold_spec.train_indices(f),
            test_idx=fold_spec.test_indices(f),
            layer_ids=tuple(layer_ids),
            forced_raw=forced_raw,
            plans=plans,
            needed_methods=tuple(sorted(method_names)),
            svm_settings=svm_settings,
            sffs_needed=any(row.sffs for row in rows),
            sffs_settings=sffs_settings,
            sink=str(sink) if sink is not None else None,
        )
        for f in range(fold_spec.k)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            fold_outputs = list(executor.map(_run_fold, tasks))
    else:
        fold_outputs = [_run_fold(t) for t in tasks]

    results = []
    for row in rows:
        fold_accuracies = []
        fold_scores = []
        selections = [] if row.sffs else None
        for task, (pool, test_labels, inner_pool, inner_labels) in zip(tasks, fold_outputs):
            if row.sffs:
                candidate_pool = inner_pool
                if row.drop_last:
                    candidate_pool = ens.drop_last_layers(
                        candidate_pool, task.layer_ids, row.drop_last
                    )
                selection = ens.sffs_select(candidate_pool, inner_labels, row.max_size)
                subset = list(selection.chosen_ids)
                selections.append(selection)
            else:
                subset = _row_subset(row, task)
            fused = ens.sum_rule(pool, subset)
            fold_scores.append(fused)
            fold_accuracies.append(accuracy(ens.argmax_predict(fused), test_labels))
        results.append(
            CvResult(
                row=row,
                fold_accuracies=fold_accuracies,
                mean_accuracy=float(np.mean(fold_accuracies)),
                fold_scores=fold_scores,
                selections=selections,
            )
        )
    return results


def _row_subset(row: RowSpec, task: _FoldTask) -> list:
    kept_layers = list(task.layer_ids)
    if row.drop_last:
        kept_layers = kept_layers[: len(kept_layers) - row.drop_last]
    subset = []
    for layer_id in kept_layers:
        layer = task.manifest.layer(layer_id)
        tail = layer_id in task.forced_raw
        for method_name in row.methods:
            eff = reducers.effective_method(Method(method_name), layer.flat_dim, tail)
            cid = ens.make_classifier_id(layer_id, eff.value)
            if cid not in subset:
                subset.append(cid)
    if not subset:
        raise ConfigError(f"row {row.name!r} selects no classifiers")
    return subset
