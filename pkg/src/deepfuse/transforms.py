"""Feature transforms applied to activation maps and layer vectors.

All DCTs are orthonormal (type II with ``norm="ortho"``), so full-coefficient
round-trips are exact up to float error and Parseval holds as a contract.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft
from scipy.ndimage import uniform_filter

from .errors import TrainingError
from .tensor_store import ActivationTensor


@lru_cache(maxsize=128)
def zigzag_order(m: int, n: int) -> np.ndarray:
    """Flat indices of an m*n grid in zigzag order (lowest frequency first).

    Cells are visited by ascending anti-diagonal i+j; even diagonals run
    bottom-left to top-right, odd ones the reverse (JPEG convention).
    """
    order = np.empty(m * n, dtype=np.intp)
    pos = 0
    for s in range(m + n - 1):
        lo, hi = max(0, s - n + 1), min(s, m - 1)
        rows = range(hi, lo - 1, -1) if s % 2 == 0 else range(lo, hi + 1)
        for i in rows:
            order[pos] = i * n + (s - i)
            pos += 1
    order.setflags(write=False)
    return order


def dct_channel(channel_map, keep: int) -> np.ndarray:
    """First ``keep`` coefficients of the orthonormal 2-D DCT-II, zigzag order."""
    a = np.asarray(channel_map, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"channel map must be 2-D, got shape {a.shape}")
    m, n = a.shape
    if not 1 <= keep <= m * n:
        raise ValueError(f"keep must be in [1, {m * n}], got {keep}")
    coeffs = scipy.fft.dctn(a, type=2, norm="ortho")
    return coeffs.reshape(-1)[zigzag_order(m, n)][:keep]


def dct_channel_inverse(coeffs, m: int, n: int) -> np.ndarray:
    """Invert ``dct_channel``; missing high-frequency coefficients read as 0."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.size > m * n:
        raise ValueError(f"got {coeffs.size} coefficients for a {m}x{n} map")
    full = np.zeros(m * n)
    full[zigzag_order(m, n)[: coeffs.size]] = coeffs
    return scipy.fft.idctn(full.reshape(m, n), type=2, norm="ortho")


def dct_global(vector, keep: int = 1000) -> np.ndarray:
    """First ``keep`` coefficients of the orthonormal 1-D DCT-II."""
    v = np.asarray(vector, dtype=np.float64).reshape(-1)
    if not 1 <= keep <= v.size:
        raise ValueError(f"keep must be in [1, {v.size}], got {keep}")
    return scipy.fft.dct(v, type=2, norm="ortho")[:keep]


def dct_global_inverse(coeffs, length: int) -> np.ndarray:
    coeffs = np.asarray(coeffs, dtype=np.float64).reshape(-1)
    if coeffs.size > length:
        raise ValueError(f"got {coeffs.size} coefficients for length {length}")
    full = np.zeros(length)
    full[: coeffs.size] = coeffs
    return scipy.fft.idct(full, type=2, norm="ortho")


@dataclass(frozen=True)
class PcaState:
    """Mean and orthonormal principal directions learned from training rows."""

    mean: np.ndarray  # (d,)
    components: np.ndarray  # (k, d), rows orthonormal
    explained_variance: np.ndarray  # (k,), non-increasing

    @property
    def n_components(self) -> int:
        return self.components.shape[0]


def pca_fit(train_rows, keep: int) -> PcaState:
    """Top principal directions of mean-centered rows, sign-normalized.

    Keeps k = min(keep, d, n-1) components. Each component's sign is fixed so
    its largest-magnitude entry is positive, making fits reproducible.
    """
    x = np.asarray(train_rows, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"train rows must be 2-D, got shape {x.shape}")
    n, d = x.shape
    if n < 2:
        raise TrainingError(f"PCA needs at least 2 rows, got {n}")
    if keep < 1:
        raise ValueError(f"keep must be >= 1, got {keep}")
    mean = x.mean(axis=0)
    _, singular, vt = np.linalg.svd(x - mean, full_matrices=False)
    k = min(keep, d, n - 1)
    components = vt[:k].copy()
    for row in components:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return PcaState(
        mean=mean,
        components=components,
        explained_variance=singular[:k] ** 2 / (n - 1),
    )


def pca_project(state: PcaState, rows) -> np.ndarray:
    """Project rows onto the fitted directions: (rows - mean) @ components.T."""
    rows = np.asarray(rows, dtype=np.float64)
    single = rows.ndim == 1
    rows = np.atleast_2d(rows)
    if rows.shape[1] != state.mean.size:
        raise ValueError(
            f"row length {rows.shape[1]} does not match fitted dim {state.mean.size}"
        )
    out = (rows - state.mean) @ state.components.T
    return out[0] if single else out


def chi2_scores(feature_column, labels, bins: int = 10) -> float:
    """Chi-square association between a binned feature column and the labels.

    The column is discretized into equal-width bins over its [min, max];
    empty bins are dropped. Constant columns score 0.
    """
    col = np.asarray(feature_column, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.intp)
    n = col.size
    if n < 2:
        raise ValueError(f"need at least 2 samples, got {n}")
    if labels.size != n:
        raise ValueError("feature column and labels differ in length")
    lo, hi = col.min(), col.max()
    if hi == lo:
        return 0.0
    binned = np.clip(((col - lo) / (hi - lo) * bins).astype(np.intp), 0, bins - 1)
    classes, class_idx = np.unique(labels, return_inverse=True)
    table = np.zeros((bins, classes.size))
    np.add.at(table, (binned, class_idx), 1.0)
    table = table[table.sum(axis=1) > 0]
    expected = np.outer(table.sum(axis=1), table.sum(axis=0)) / n
    return float(((table - expected) ** 2 / expected).sum())


def chi2_bin_edges(feature_column, bins: int = 10) -> np.ndarray:
    """Equal-width bin edges used by ``chi2_scores`` on this column."""
    col = np.asarray(feature_column, dtype=np.float64)
    return np.linspace(col.min(), col.max(), bins + 1)


def chi2_select(scores, keep: int) -> np.ndarray:
    """Ascending indices of the ``keep`` largest scores; ties go to lower index."""
    if keep < 1:
        raise ValueError(f"keep must be >= 1, got {keep}")
    scores = np.asarray(scores, dtype=np.float64)
    top = np.argsort(-scores, kind="stable")[:keep]
    return np.sort(top)


# --- uniform LBP(8,1) ---------------------------------------------------

# Neighbor 0 sits east of the center; the ring proceeds counter-clockwise.
_LBP_OFFSETS = ((0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1))


def _uniform_bin_table() -> np.ndarray:
    table = np.empty(256, dtype=np.intp)
    uniform = []
    for pattern in range(256):
        rotated = ((pattern >> 1) | ((pattern & 1) << 7)) & 0xFF
        if bin(pattern ^ rotated).count("1") <= 2:
            uniform.append(pattern)
    for pattern in range(256):
        table[pattern] = uniform.index(pattern) if pattern in uniform else len(uniform)
    return table


_UNIFORM_BIN = _uniform_bin_table()
LBP_BINS = 59  # 58 uniform patterns + 1 shared non-uniform bin


def lbp_histogram(channel_map) -> np.ndarray:
    """Normalized 59-bin uniform LBP(8,1) histogram of a 2-D map.

    Each interior pixel yields an 8-bit pattern: bit n is 1 iff neighbor n is
    >= the center (so equal values count as 1). Patterns with at most two
    circular 0/1 transitions get their own bin, in ascending pattern order;
    all other patterns share the last bin.
    """
    a = np.asarray(channel_map, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < 3 or a.shape[1] < 3:
        raise ValueError(f"map must be at least 3x3, got shape {a.shape}")
    m, n = a.shape
    center = a[1:-1, 1:-1]
    patterns = np.zeros(center.shape, dtype=np.intp)
    for bit, (di, dj) in enumerate(_LBP_OFFSETS):
        neighbor = a[1 + di : m - 1 + di, 1 + dj : n - 1 + dj]
        patterns |= (neighbor >= center).astype(np.intp) << bit
    hist = np.bincount(_UNIFORM_BIN[patterns.reshape(-1)], minlength=LBP_BINS)
    return hist / patterns.size


# --- co-occurrence of activations ----------------------------------------


def cooc_tensor(activation: ActivationTensor, radius: int = 1, epsilon: float = 0.0) -> np.ndarray:
    """Cross-channel co-occurrence tensor of shape (M, N, D).

    Activations above the global mean are kept (strict threshold); each kept
    position accumulates the thresholded activations inside its
    (2*radius+1)^2 window across all channels, with the position's own
    channel weighted by ``epsilon`` and every other channel by 1. Borders are
    zero-padded.
    """
    if radius < 1:
        raise ValueError(f"radius must be >= 1, got {radius}")
    values = activation.values.astype(np.float64)
    mask = (values > values.mean()).astype(np.float64)
    kept = values * mask
    size = 2 * radius + 1
    # uniform_filter averages over the window including zero padding, so
    # multiplying by the window area recovers the box sum.
    box = uniform_filter(kept, size=(1, size, size), mode="constant") * (size * size)
    cross = box.sum(axis=0)
    cooc = mask * (cross + (epsilon - 1.0) * box)
    return np.moveaxis(cooc, 0, 2)


def cooc_channel_values(cooc) -> np.ndarray:
    """Spatial sum of each channel of a co-occurrence tensor: D floats."""
    cooc = np.asarray(cooc, dtype=np.float64)
    if cooc.ndim != 3:
        raise ValueError(f"co-occurrence tensor must be 3-D, got shape {cooc.shape}")
    return cooc.sum(axis=(0, 1))


# --- global pooling measurements ------------------------------------------


def gep_value(channel_map) -> float:
    """Entropy of the map's 256-bin intensity histogram, in [0, ln 256].

    The map is min-max normalized to [0, 255] (constant maps collapse into
    bin 0) and binned by floor, with 255 clamped into the top bin.
    """
    a = np.asarray(channel_map, dtype=np.float64).reshape(-1)
    lo, hi = a.min(), a.max()
    if hi == lo:
        return 0.0
    binned = np.minimum(((a - lo) / (hi - lo) * 255).astype(np.intp), 255)
    p = np.bincount(binned, minlength=256) / a.size
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def gmtp_values(activation: ActivationTensor) -> np.ndarray:
    """Per channel, the fraction of values strictly below the layer-wide mean."""
    values = activation.values.astype(np.float64)
    threshold = values.mean()
    return (values < threshold).mean(axis=(1, 2))
