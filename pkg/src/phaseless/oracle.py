"""Brute-force references for tests: dense materialisation and exhaustive
tiny-instance decoding.  Never imported by the benchmark path."""

from __future__ import annotations

from itertools import combinations

import numpy as np

from .signals import SparseApprox, wrap_angle

MAX_DENSE_ENTRIES = 1 << 24


def materialize(ens) -> np.ndarray:
    """Dense m x n matrix equal entry-wise to the implicit operator."""
    m, n = ens.m, ens.n
    if m * n > MAX_DENSE_ENTRIES:
        raise ValueError(f"refusing to materialize {m}x{n} (> 2^24 entries)")
    dense = ens.dense()
    if dense.shape != (m, n):
        raise AssertionError(f"dense shape {dense.shape} != ({m}, {n})")
    return dense


def exhaustive_decode(y, Phi: np.ndarray, k: int, phase_grid, mag_levels) -> SparseApprox:
    """Smallest-residual grid signal: argmin over supports/values of || |Phi z| - y ||_2.

    Enumerates every support of size <= k with every combination of grid
    phases and magnitude levels.  Guarded to tiny instances.
    """
    m, n = Phi.shape
    if n > 12 or k > 3:
        raise ValueError("exhaustive search is limited to n <= 12, k <= 3")
    y = np.asarray(y, dtype=np.float64)
    phases = np.asarray(phase_grid.phases if hasattr(phase_grid, "phases") else phase_grid)
    mags = np.asarray(mag_levels, dtype=np.float64)
    values = (mags[:, None] * np.exp(1j * phases)[None, :]).ravel()

    best = (float(np.linalg.norm(y)), SparseApprox.zero())  # z = 0 candidate
    for s in range(1, k + 1):
        supports = list(combinations(range(n), s))
        grids = np.stack(np.meshgrid(*([values] * s), indexing="ij"), axis=-1).reshape(-1, s)
        for supp in supports:
            Z = np.zeros((len(grids), n), dtype=np.complex128)
            Z[:, supp] = grids
            resid = np.linalg.norm(np.abs(Z @ Phi.T) - y[None, :], axis=1)
            j = int(np.argmin(resid))
            if resid[j] < best[0] - 1e-12:
                best = (float(resid[j]), SparseApprox(np.array(supp), grids[j]))
    return best[1]


def true_phase_diff(x, i: int, j: int) -> float:
    """Oriented phase difference arg(x_j) - arg(x_i), mod 2*pi."""
    xv = np.asarray(x)
    if xv[i] == 0 or xv[j] == 0:
        raise ValueError("phase difference undefined for zero coordinates")
    return float(wrap_angle(np.angle(xv[j]) - np.angle(xv[i])))
