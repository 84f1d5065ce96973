"""Finite-difference and brute-force reference implementations for the test suite."""

from __future__ import annotations

from collections.abc import Callable

import numpy as np

STEP = 1e-3
TOLERANCE = 1e-4


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    scale = max(np.linalg.norm(a) + np.linalg.norm(b), 1e-12)
    return float(np.linalg.norm(a - b) / scale)


def numeric_grad(
    f: Callable[[], float],
    arr: np.ndarray,
    h: float = STEP,
    entries: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Central differences of ``f`` w.r.t. ``arr`` (perturbed in place).

    Returns (flat indices, derivatives); ``entries`` restricts the indices.
    """
    flat = arr.reshape(-1)
    idx = np.arange(flat.size) if entries is None else entries
    out = np.empty(len(idx))
    for k, i in enumerate(idx):
        orig = flat[i]
        flat[i] = orig + h
        plus = f()
        flat[i] = orig - h
        minus = f()
        flat[i] = orig
        out[k] = (plus - minus) / (2 * h)
    return idx, out


def brute_s2(grid: np.ndarray, max_lag: int) -> dict[int, np.ndarray]:
    """Per-axis S2 by enumerating every pair, keyed by array axis."""
    return _brute(grid, max_lag, lambda line, i, r: line[i] and line[i + r])


def brute_lineal(grid: np.ndarray, max_lag: int) -> dict[int, np.ndarray]:
    return _brute(grid, max_lag, lambda line, i, r: all(line[i : i + r + 1]))


def brute_cluster(labels: np.ndarray, max_lag: int) -> dict[int, np.ndarray]:
    return _brute(labels, max_lag, lambda line, i, r: line[i] > 0 and line[i] == line[i + r])


def _brute(grid: np.ndarray, max_lag: int, hit) -> dict[int, np.ndarray]:
    per_axis = {}
    for axis in range(grid.ndim):
        moved = np.moveaxis(grid, axis, -1)
        lines = moved.reshape(-1, moved.shape[-1])
        n = lines.shape[1]
        curve = []
        for r in range(max_lag + 1):
            hits = sum(1 for line in lines for i in range(n - r) if hit(line, i, r))
            curve.append(hits / (lines.shape[0] * (n - r)))
        per_axis[axis] = np.array(curve)
    return per_axis


def brute_window_counts(grid: np.ndarray, side: int) -> np.ndarray:
    out_shape = tuple(n - side + 1 for n in grid.shape)
    out = np.zeros(out_shape, dtype=np.int64)
    for corner in np.ndindex(*out_shape):
        window = tuple(slice(c, c + side) for c in corner)
        out[corner] = int(grid[window].sum())
    return out
