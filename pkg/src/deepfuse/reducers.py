"""Layer selection, reduction budgets, and the per-layer reduction pipeline.

A :class:`ReductionPlan` names one of the supported methods; fitting it on
training tensors yields a :class:`FittedReducer` whose transform is pure and
deterministic. Local methods run per channel and concatenate their outputs in
channel order; the global DCT runs on the flattened layer vector; the pooling
methods (cooc/gep/gmtp) emit exactly one value per channel.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from . import transforms
from .errors import ConfigError
from .sidecar import load_sidecar, save_sidecar
from .tensor_store import ActivationTensor, flatten
from .transforms import PcaState

REDUCTION_THRESHOLD = 5000


def select_layers(layer_count: int, stride: int = 10, tail: int = 4) -> list:
    """1-based layer picks: the middle layer, every ``stride`` after it, and
    the last ``tail`` layers; deduplicated, ascending."""
    if layer_count < 1:
        raise ValueError(f"layer count must be >= 1, got {layer_count}")
    middle = (layer_count + 1) // 2
    picks = set(range(middle, layer_count + 1, stride))
    picks.update(range(max(1, layer_count - tail + 1), layer_count + 1))
    return sorted(picks)


def needs_reduction(flattened_dim: int) -> bool:
    """True iff a layer's flattened feature count exceeds 5000 (strictly)."""
    if flattened_dim < 1:
        raise ValueError(f"dim must be >= 1, got {flattened_dim}")
    return flattened_dim > REDUCTION_THRESHOLD


def channel_budget(channel_count: int, total: int = 1000) -> int:
    """Features kept per channel: floor(total / channels), at least 1."""
    if channel_count < 1:
        raise ValueError(f"channel count must be >= 1, got {channel_count}")
    return max(1, total // channel_count)


class Method(str, Enum):
    DCT = "dct"
    GDCT = "gdct"
    PCA = "pca"
    CHI = "chi"
    LBP_CHI = "lbp_chi"
    COOC = "cooc"
    GEP = "gep"
    GMTP = "gmtp"
    RAW = "raw"


class Scope(str, Enum):
    LOCAL = "local"
    GLOBAL = "global"


_GLOBAL_ONLY = {Method.GDCT}
_LOCAL_ONLY = {
    Method.DCT,
    Method.PCA,
    Method.CHI,
    Method.LBP_CHI,
    Method.COOC,
    Method.GEP,
    Method.GMTP,
}


def default_scope(method: Method) -> Scope:
    return Scope.GLOBAL if method in _GLOBAL_ONLY or method is Method.RAW else Scope.LOCAL


@dataclass(frozen=True)
class ReductionPlan:
    """Which reduction to run on a layer and with what budget."""

    method: Method
    scope: Optional[Scope] = None
    target_dim: int = 1000
    pca_postprocess: bool = False
    pca_postprocess_dim: Optional[int] = None
    chi_bins: int = 10
    cooc_radius: int = 1
    cooc_epsilon: float = 0.0

    def __post_init__(self):
        method = Method(self.method)
        scope = Scope(self.scope) if self.scope is not None else default_scope(method)
        object.__setattr__(self, "method", method)
        object.__setattr__(self, "scope", scope)
        if method in _GLOBAL_ONLY and scope is not Scope.GLOBAL:
            raise ConfigError(f"{method.value} requires global scope")
        if method in _LOCAL_ONLY and scope is not Scope.LOCAL:
            raise ConfigError(
                f"{method.value} requires local scope (global is only supported for gdct)"
            )
        if self.target_dim < 1:
            raise ConfigError(f"target_dim must be >= 1, got {self.target_dim}")
        if self.chi_bins < 2:
            raise ConfigError(f"chi_bins must be >= 2, got {self.chi_bins}")
        if self.cooc_radius < 1:
            raise ConfigError(f"cooc_radius must be >= 1, got {self.cooc_radius}")


@dataclass(frozen=True)
class ChiState:
    """Selected feature indices with the training bin edges they were scored on."""

    indices: np.ndarray
    bin_edges: np.ndarray  # (len(indices), bins + 1)


@dataclass(frozen=True)
class FittedReducer:
    """Fitted state for one (layer, method); transform is pure after fit."""

    plan: ReductionPlan
    channels: int
    height: int
    width: int
    keep: int  # per-channel keep for local methods, total keep for gdct
    per_channel: tuple = ()  # PcaState or ChiState per channel, when stateful
    postprocess: Optional[PcaState] = None

    @property
    def map_size(self) -> int:
        return self.height * self.width

    def transform(self, tensors: Sequence[ActivationTensor]) -> np.ndarray:
        rows = np.stack([self._reduce_one(t) for t in tensors])
        if self.postprocess is not None:
            rows = transforms.pca_project(self.postprocess, rows)
        return rows

    def transform_one(self, tensor: ActivationTensor) -> np.ndarray:
        return self.transform([tensor])[0]

    def _reduce_one(self, tensor: ActivationTensor) -> np.ndarray:
        if tensor.values.shape != (self.channels, self.height, self.width):
            raise ConfigError(
                f"tensor dims {tensor.values.shape} do not match fitted dims "
                f"({self.channels}, {self.height}, {self.width})"
            )
        method = self.plan.method
        maps = tensor.values
        if method is Method.RAW:
            return flatten(tensor).astype(np.float64)
        if method is Method.GDCT:
            return transforms.dct_global(flatten(tensor), self.keep)
        if method is Method.DCT:
            return np.concatenate(
                [transforms.dct_channel(maps[c], self.keep) for c in range(self.channels)]
            )
        if method is Method.PCA:
            return np.concatenate(
                [
                    transforms.pca_project(self.per_channel[c], maps[c].reshape(-1))
                    for c in range(self.channels)
                ]
            )
        if method is Method.CHI:
            return np.concatenate(
                [
                    maps[c].reshape(-1)[self.per_channel[c].indices]
                    for c in range(self.channels)
                ]
            )
        if method is Method.LBP_CHI:
            return np.concatenate(
                [
                    transforms.lbp_histogram(maps[c])[self.per_channel[c].indices]
                    for c in range(self.channels)
                ]
            )
        if method is Method.COOC:
            cooc = transforms.cooc_tensor(
                tensor, radius=self.plan.cooc_radius, epsilon=self.plan.cooc_epsilon
            )
            return transforms.cooc_channel_values(cooc)
        if method is Method.GEP:
            return np.array([transforms.gep_value(maps[c]) for c in range(self.channels)])
        if method is Method.GMTP:
            return transforms.gmtp_values(tensor)
        raise ConfigError(f"unhandled method {method!r}")


def _check_same_dims(tensors: Sequence[ActivationTensor]) -> tuple:
    dims = tensors[0].values.shape
    for t in tensors[1:]:
        if t.values.shape != dims:
            raise ConfigError(
                f"tensors disagree on dims: {dims} vs {t.values.shape}"
            )
    return dims


def fit_reducer(
    plan: ReductionPlan,
    train_tensors: Sequence[ActivationTensor],
    train_labels,
    tail_layer: bool = False,
) -> FittedReducer:
    """Learn any per-channel state from training tensors only."""
    if not train_tensors:
        raise ConfigError("cannot fit a reducer on zero tensors")
    d, m, n = _check_same_dims(train_tensors)
    labels = np.asarray(train_labels, dtype=np.intp)
    if labels.size != len(train_tensors):
        raise ConfigError("training labels and tensors differ in length")
    method = plan.method
    map_size = m * n
    budget = channel_budget(d, plan.target_dim)

    keep = 0
    per_channel: tuple = ()
    if method is Method.RAW:
        if d * map_size > REDUCTION_THRESHOLD and not tail_layer:
            raise ConfigError(
                f"raw plan on a {d * map_size}-dim layer; raw is only allowed for "
                f"layers with <= {REDUCTION_THRESHOLD} features or tail layers"
            )
    elif method is Method.GDCT:
        keep = min(plan.target_dim, d * map_size)
    elif method is Method.DCT:
        keep = min(budget, map_size)
    elif method is Method.PCA:
        keep = min(budget, map_size)
        channel_rows = _channel_rows(train_tensors, d)
        per_channel = tuple(transforms.pca_fit(channel_rows[c], keep) for c in range(d))
    elif method is Method.CHI:
        keep = min(budget, map_size)
        channel_rows = _channel_rows(train_tensors, d)
        per_channel = tuple(
            _fit_chi(channel_rows[c], labels, keep, plan.chi_bins) for c in range(d)
        )
    elif method is Method.LBP_CHI:
        if m < 3 or n < 3:
            raise ConfigError(f"lbp_chi needs maps of at least 3x3, got {m}x{n}")
        keep = min(budget, transforms.LBP_BINS)
        histograms = np.stack(
            [
                np.stack([transforms.lbp_histogram(t.values[c]) for t in train_tensors])
                for c in range(d)
            ]
        )
        per_channel = tuple(
            _fit_chi(histograms[c], labels, keep, plan.chi_bins) for c in range(d)
        )
    elif method in (Method.COOC, Method.GEP, Method.GMTP):
        keep = 1  # one value per channel by construction

    fitted = FittedReducer(
        plan=replace(plan, pca_postprocess=False),
        channels=d,
        height=m,
        width=n,
        keep=keep,
        per_channel=per_channel,
    )
    if plan.pca_postprocess:
        reduced = fitted.transform(train_tensors)
        post_keep = plan.pca_postprocess_dim or max(
            1, min(reduced.shape[1], len(train_tensors) - 1)
        )
        post = transforms.pca_fit(reduced, post_keep)
        fitted = replace(fitted, plan=plan, postprocess=post)
    return fitted


def _channel_rows(tensors: Sequence[ActivationTensor], d: int) -> np.ndarray:
    """(channels, samples, map_size) training matrix view."""
    stacked = np.stack([t.values.reshape(d, -1) for t in tensors])
    return np.swapaxes(stacked, 0, 1).astype(np.float64)


def _fit_chi(rows: np.ndarray, labels: np.ndarray, keep: int, bins: int) -> ChiState:
    scores = np.array(
        [transforms.chi2_scores(rows[:, j], labels, bins=bins) for j in range(rows.shape[1])]
    )
    indices = transforms.chi2_select(scores, keep)
    edges = np.stack([transforms.chi2_bin_edges(rows[:, j], bins=bins) for j in indices])
    return ChiState(indices=indices, bin_edges=edges)


def reduce_layer(
    plan: ReductionPlan,
    train_tensors: Sequence[ActivationTensor],
    train_labels,
    apply_tensors: Sequence[ActivationTensor],
    tail_layer: bool = False,
):
    """Fit on training tensors, then transform ``apply_tensors``."""
    fitted = fit_reducer(plan, train_tensors, train_labels, tail_layer=tail_layer)
    return fitted, fitted.transform(apply_tensors)


# --- serialization ---------------------------------------------------------

_SIDECAR_KIND = "reducer"


def save_reducer(fitted: FittedReducer, path) -> None:
    plan = fitted.plan
    meta = {
        "method": plan.method.value,
        "scope": plan.scope.value,
        "target_dim": plan.target_dim,
        "pca_postprocess": plan.pca_postprocess,
        "pca_postprocess_dim": plan.pca_postprocess_dim,
        "chi_bins": plan.chi_bins,
        "cooc_radius": plan.cooc_radius,
        "cooc_epsilon": plan.cooc_epsilon,
        "channels": fitted.channels,
        "height": fitted.height,
        "width": fitted.width,
        "keep": fitted.keep,
        "state": _state_tag(fitted),
    }
    arrays = {}
    for c, state in enumerate(fitted.per_channel):
        if isinstance(state, PcaState):
            arrays[f"ch{c}.mean"] = state.mean
            arrays[f"ch{c}.components"] = state.components
            arrays[f"ch{c}.variance"] = state.explained_variance
        else:
            arrays[f"ch{c}.indices"] = state.indices
            arrays[f"ch{c}.edges"] = state.bin_edges
    if fitted.postprocess is not None:
        arrays["post.mean"] = fitted.postprocess.mean
        arrays["post.components"] = fitted.postprocess.components
        arrays["post.variance"] = fitted.postprocess.explained_variance
    save_sidecar(path, _SIDECAR_KIND, meta, arrays)


def _state_tag(fitted: FittedReducer) -> str:
    if not fitted.per_channel:
        return "none"
    return "pca" if isinstance(fitted.per_channel[0], PcaState) else "chi"


def load_reducer(path) -> FittedReducer:
    meta, arrays = load_sidecar(path, _SIDECAR_KIND)
    plan = ReductionPlan(
        method=Method(meta["method"]),
        scope=Scope(meta["scope"]),
        target_dim=meta["target_dim"],
        pca_postprocess=meta["pca_postprocess"],
        pca_postprocess_dim=meta["pca_postprocess_dim"],
        chi_bins=meta["chi_bins"],
        cooc_radius=meta["cooc_radius"],
        cooc_epsilon=meta["cooc_epsilon"],
    )
    per_channel = []
    if meta["state"] == "pca":
        for c in range(meta["channels"]):
            per_channel.append(
                PcaState(
                    mean=arrays[f"ch{c}.mean"],
                    components=arrays[f"ch{c}.components"],
                    explained_variance=arrays[f"ch{c}.variance"],
                )
            )
    elif meta["state"] == "chi":
        for c in range(meta["channels"]):
            per_channel.append(
                ChiState(indices=arrays[f"ch{c}.indices"], bin_edges=arrays[f"ch{c}.edges"])
            )
    postprocess = None
    if "post.mean" in arrays:
        postprocess = PcaState(
            mean=arrays["post.mean"],
            components=arrays["post.components"],
            explained_variance=arrays["post.variance"],
        )
    return FittedReducer(
        plan=plan,
        channels=meta["channels"],
        height=meta["height"],
        width=meta["width"],
        keep=meta["keep"],
        per_channel=tuple(per_channel),
        postprocess=postprocess,
    )


def effective_method(method: Method, flat_dim: int, tail_layer: bool) -> Method:
    """Resolve the method actually applied to a layer.

    Tail layers and layers at or below the reduction threshold keep their raw
    features; everything else gets the requested reduction.
    """
    if tail_layer or not needs_reduction(flat_dim):
        return Method.RAW
    return method


def valid_method_names() -> list:
    return [m.value for m in Method]
