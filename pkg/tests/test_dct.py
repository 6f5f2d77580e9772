import numpy as np
import pytest

from deepfuse.transforms import (
    dct_channel,
    dct_channel_inverse,
    dct_global,
    dct_global_inverse,
    zigzag_order,
)


def dct_basis_matrix(n):
    """Explicit orthonormal DCT-II basis: row k is the k-th cosine basis vector."""
    basis = np.zeros((n, n))
    for k in range(n):
        scale = np.sqrt(1.0 / n) if k == 0 else np.sqrt(2.0 / n)
        for i in range(n):
            basis[k, i] = scale * np.cos(np.pi * (2 * i + 1) * k / (2 * n))
    return basis


def zigzag_oracle(m, n):
    """Independent zigzag enumeration: by anti-diagonal, alternating direction."""
    cells = []
    for s in range(m + n - 1):
        diag = [(i, s - i) for i in range(max(0, s - n + 1), min(s, m - 1) + 1)]
        if s % 2 == 0:
            diag = diag[::-1]
        cells.extend(diag)
    return [i * n + j for i, j in cells]


def dct2_oracle(a):
    m, n = a.shape
    return dct_basis_matrix(m) @ a @ dct_basis_matrix(n).T


def test_zigzag_matches_oracle():
    for m, n in [(1, 1), (1, 5), (5, 1), (3, 3), (4, 7), (8, 8), (16, 16)]:
        assert zigzag_order(m, n).tolist() == zigzag_oracle(m, n)


def test_constant_map_has_only_dc():
    out = dct_channel(np.full((4, 4), 2.0), keep=3)
    assert out == pytest.approx([8.0, 0.0, 0.0], abs=1e-12)  # dc = c * sqrt(m*n)


def test_channel_dct_matches_basis_matrix_oracle():
    rng = np.random.default_rng(0)
    for _ in range(40):
        m, n = rng.integers(1, 17, size=2)
        a = rng.normal(size=(m, n))
        mine = dct_channel(a, keep=m * n)
        oracle = dct2_oracle(a).reshape(-1)[zigzag_oracle(m, n)]
        assert np.max(np.abs(mine - oracle)) < 1e-9


def test_channel_round_trip_full_retention():
    rng = np.random.default_rng(1)
    for _ in range(20):
        m, n = rng.integers(2, 13, size=2)
        a = rng.normal(size=(m, n))
        coeffs = dct_channel(a, keep=m * n)
        assert np.max(np.abs(dct_channel_inverse(coeffs, m, n) - a)) < 1e-6


def test_channel_parseval():
    rng = np.random.default_rng(2)
    for _ in range(20):
        m, n = rng.integers(1, 17, size=2)
        a = rng.normal(size=(m, n))
        coeffs = dct_channel(a, keep=m * n)
        assert abs((coeffs**2).sum() - (a**2).sum()) < 1e-6


def test_channel_keep_bounds():
    with pytest.raises(ValueError):
        dct_channel(np.ones((2, 2)), keep=5)
    with pytest.raises(ValueError):
        dct_channel(np.ones((2, 2)), keep=0)


def test_global_constant_signal():
    out = dct_global(np.ones(6000), keep=2)
    assert out[0] == pytest.approx(np.sqrt(6000), abs=1e-9)
    assert out[1] == pytest.approx(0.0, abs=1e-9)


def test_global_matches_basis_matrix_oracle():
    rng = np.random.default_rng(3)
    for _ in range(40):
        length = int(rng.integers(1, 257))
        v = rng.normal(size=length)
        mine = dct_global(v, keep=length)
        oracle = dct_basis_matrix(length) @ v
        assert np.max(np.abs(mine - oracle)) < 1e-9


def test_global_round_trip_and_parseval():
    rng = np.random.default_rng(4)
    for _ in range(20):
        length = int(rng.integers(2, 129))
        v = rng.normal(size=length)
        coeffs = dct_global(v, keep=length)
        assert np.max(np.abs(dct_global_inverse(coeffs, length) - v)) < 1e-6
        assert abs((coeffs**2).sum() - (v**2).sum()) < 1e-6


def test_global_keep_bounds():
    with pytest.raises(ValueError):
        dct_global(np.ones(4), keep=5)


def test_truncated_coefficients_keep_low_frequencies():
    # a pure low-frequency signal survives truncation almost exactly
    m = n = 8
    grid = np.cos(np.pi * (2 * np.arange(m) + 1) / (2 * m))
    a = np.outer(grid, grid)
    coeffs = dct_channel(a, keep=6)
    recon = dct_channel_inverse(coeffs, m, n)
    assert np.max(np.abs(recon - a)) < 1e-9
