"""Statistical descriptors of binary grids: S2, L, C2, l_cor and local porosity.

All directional functions are computed along the coordinate axes only, with
non-periodic boundaries: a pair (or segment) that would cross the grid edge is
excluded, and each lag is normalized by its own count of valid pairs. Counts are
accumulated as integers and divided once, so results are reproducible bit for bit.
"""

from __future__ import annotations

import io
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from skimage.measure import label

from poreforge.core.volume import Image2D, PhaseFraction, Volume3D, grid_of

logger = logging.getLogger(__name__)

# Band and window used to read l_cor off an S2 curve.
LCOR_EPS_REL = 0.05
LCOR_WINDOW = 3

DEFAULT_LPD_WINDOW = 20
DEFAULT_LPD_BIN_WIDTH = 0.02


class DescriptorError(Exception):
    pass


@dataclass(frozen=True)
class DescriptorCurve:
    """A directional function sampled at integer lags 0..max_lag."""

    name: str
    lags: np.ndarray
    per_axis: dict[str, np.ndarray]
    mean: np.ndarray

    @property
    def axes(self) -> list[str]:
        return list(self.per_axis)

    def to_csv(self) -> str:
        """CSV with header ``r,x,y[,z],mean`` and 9 significant digits."""
        buf = io.StringIO()
        cols = self.axes
        buf.write(",".join(["r", *cols, "mean"]) + "\n")
        for i, r in enumerate(self.lags):
            values = [self.per_axis[a][i] for a in cols] + [self.mean[i]]
            buf.write(",".join([str(int(r)), *(f"{v:.9g}" for v in values)]) + "\n")
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "lags": self.lags.tolist(),
            "per_axis": {a: v.tolist() for a, v in self.per_axis.items()},
            "mean": self.mean.tolist(),
        }


@dataclass(frozen=True)
class CorrelationLength:
    l_cor: int
    converged: bool
    warnings: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class PorosityHistogram:
    bin_edges: np.ndarray
    probabilities: np.ndarray
    window_side: int

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("bin_start,bin_end,probability\n")
        for lo, hi, p in zip(self.bin_edges[:-1], self.bin_edges[1:], self.probabilities):
            buf.write(f"{lo:.9g},{hi:.9g},{p:.9g}\n")
        return buf.getvalue()


# Axis names for arrays laid out as (H, W) or (L, H, W).
def _axis_names(ndim: int) -> list[tuple[str, int]]:
    if ndim == 2:
        return [("x", 1), ("y", 0)]
    return [("x", 2), ("y", 1), ("z", 0)]


def _shifted(arr: np.ndarray, axis: int, r: int) -> tuple[np.ndarray, np.ndarray]:
    """Views (a, b) with b[i] = arr[i + r] along axis."""
    n = arr.shape[axis]
    head = [slice(None)] * arr.ndim
    tail = [slice(None)] * arr.ndim
    head[axis] = slice(0, n - r)
    tail[axis] = slice(r, n)
    return arr[tuple(head)], arr[tuple(tail)]


def mean_over_axes(per_axis: dict[str, np.ndarray]) -> np.ndarray:
    """Unweighted axis average, summed in the fixed order x, y, z."""
    total = np.zeros_like(next(iter(per_axis.values())), dtype=np.float64)
    for name in ("x", "y", "z"):
        if name in per_axis:
            total = total + per_axis[name]
    return total / len(per_axis)


def _check_lag(grid: np.ndarray, max_lag: int) -> None:
    if grid.size == 0:
        raise DescriptorError("Empty grid")
    if max_lag < 0:
        raise DescriptorError(f"max_lag must be non-negative, got {max_lag}")
    if max_lag >= min(grid.shape):
        raise DescriptorError(
            f"max_lag={max_lag} must be smaller than the smallest grid dimension {min(grid.shape)}"
        )


def _as_grid(g: Image2D | Volume3D | np.ndarray) -> np.ndarray:
    try:
        return grid_of(g).astype(bool)
    except Exception as exc:
        raise DescriptorError(str(exc)) from exc


def pair_counts(grid: np.ndarray, axis: int, max_lag: int) -> np.ndarray:
    """Number of pore-pore pairs at each lag along one axis."""
    out = np.zeros(max_lag + 1, dtype=np.int64)
    for r in range(max_lag + 1):
        a, b = _shifted(grid, axis, r)
        out[r] = np.count_nonzero(a & b)
    return out


def segment_counts(grid: np.ndarray, axis: int, max_lag: int) -> np.ndarray:
    """Number of all-pore segments of r + 1 voxels along one axis, per lag r."""
    out = np.zeros(max_lag + 1, dtype=np.int64)
    run = grid.copy()
    out[0] = np.count_nonzero(run)
    for r in range(1, max_lag + 1):
        a, b = _shifted(grid, axis, r)
        head = [slice(None)] * grid.ndim
        head[axis] = slice(0, grid.shape[axis] - r)
        run = run[tuple(head)] & b
        out[r] = np.count_nonzero(run)
    return out


def position_counts(shape: tuple[int, ...], axis: int, max_lag: int) -> np.ndarray:
    """Number of in-bounds pairs at each lag along one axis."""
    others = math.prod(shape) // shape[axis]
    return np.array([(shape[axis] - r) * others for r in range(max_lag + 1)], dtype=np.int64)


def _curve(name: str, grid: np.ndarray, max_lag: int, counter) -> DescriptorCurve:
    per_axis: dict[str, np.ndarray] = {}
    for axis_name, axis in _axis_names(grid.ndim):
        counts = counter(grid, axis, max_lag)
        per_axis[axis_name] = counts / position_counts(grid.shape, axis, max_lag)
    return DescriptorCurve(
        name=name,
        lags=np.arange(max_lag + 1),
        per_axis=per_axis,
        mean=mean_over_axes(per_axis),
    )


def two_point_probability(g: Image2D | Volume3D | np.ndarray, max_lag: int) -> DescriptorCurve:
    """S2(r): probability that two voxels r apart along an axis are both pore."""
    grid = _as_grid(g)
    _check_lag(grid, max_lag)
    return _curve("s2", grid, max_lag, pair_counts)


def linear_path(g: Image2D | Volume3D | np.ndarray, max_lag: int) -> DescriptorCurve:
    """L(r): probability that r + 1 consecutive voxels along an axis are all pore."""
    grid = _as_grid(g)
    _check_lag(grid, max_lag)
    return _curve("lineal_path", grid, max_lag, segment_counts)


def cluster_labels(grid: np.ndarray, full_connectivity: bool = False) -> np.ndarray:
    """Label connected pore clusters; face connectivity unless full is requested."""
    connectivity = grid.ndim if full_connectivity else 1
    return label(grid.astype(np.uint8), background=0, connectivity=connectivity)


def two_point_cluster(
    g: Image2D | Volume3D | np.ndarray,
    max_lag: int,
    full_connectivity: bool = False,
) -> DescriptorCurve:
    """C2(r): probability that two voxels r apart are pore and in the same cluster."""
    grid = _as_grid(g)
    _check_lag(grid, max_lag)
    labels = cluster_labels(grid, full_connectivity)

    def counter(_: np.ndarray, axis: int, lag: int) -> np.ndarray:
        out = np.zeros(lag + 1, dtype=np.int64)
        for r in range(lag + 1):
            a, b = _shifted(labels, axis, r)
            out[r] = np.count_nonzero((a > 0) & (a == b))
        return out

    return _curve("cluster", grid, max_lag, counter)


def autocorrelation_distance(
    curve: DescriptorCurve,
    phi: PhaseFraction,
    eps_rel: float = LCOR_EPS_REL,
    window: int = LCOR_WINDOW,
) -> CorrelationLength:
    """Smallest lag from which S2 stays within a band around phi^2.

    The band half-width is ``eps_rel * (phi - phi^2)`` and the curve must stay
    inside it for ``window`` consecutive lags. A curve that never settles is
    reported as not converged with l_cor equal to the largest lag.
    """
    if not 0.0 <= phi <= 1.0:
        raise DescriptorError(f"Porosity must lie in [0, 1], got {phi}")
    if phi in (0.0, 1.0):
        msg = f"Degenerate porosity {phi}: S2 is constant, l_cor set to 1"
        logger.warning(msg)
        return CorrelationLength(l_cor=1, converged=True, warnings=[msg])

    values = curve.mean
    max_lag = len(values) - 1
    band = eps_rel * (phi - phi * phi)
    inside = np.abs(values - phi * phi) <= band
    for r in range(0, max_lag - window + 2):
        if inside[r : r + window].all():
            return CorrelationLength(l_cor=max(1, r), converged=True)

    msg = f"S2 does not settle to phi^2 within {max_lag} lags; structure may be heterogeneous"
    logger.warning(msg)
    return CorrelationLength(l_cor=max(1, max_lag), converged=False, warnings=[msg])


def _integral(grid: np.ndarray) -> np.ndarray:
    """Zero-padded cumulative sum over every axis (summed-area table)."""
    table = grid.astype(np.int64)
    for axis in range(grid.ndim):
        table = np.cumsum(table, axis=axis)
    return np.pad(table, [(1, 0)] * grid.ndim)


def window_counts(grid: np.ndarray, side: int) -> np.ndarray:
    """Pore count in every fully interior hypercube window of the given side."""
    table = _integral(grid)
    out_shape = tuple(n - side + 1 for n in grid.shape)
    total = np.zeros(out_shape, dtype=np.int64)
    # Inclusion-exclusion over the 2^ndim corners of each window.
    for corner in np.ndindex(*(2,) * grid.ndim):
        index = tuple(
            slice(side, side + n) if c else slice(0, n) for c, n in zip(corner, out_shape)
        )
        sign = -1 if (grid.ndim - sum(corner)) % 2 else 1
        total += sign * table[index]
    return total


def local_porosity_distribution(
    v: Image2D | Volume3D | np.ndarray,
    window_side: int = DEFAULT_LPD_WINDOW,
    bin_width: float = DEFAULT_LPD_BIN_WIDTH,
) -> PorosityHistogram:
    """Histogram of porosities measured in a sliding window (stride 1).

    Bins are ``[k * bin_width, (k + 1) * bin_width)``; the last bin contains 1.0.
    Bin assignment uses exact rational arithmetic on the pore counts.
    """
    grid = _as_grid(v)
    if window_side < 1 or window_side > min(grid.shape):
        raise DescriptorError(
            f"window_side={window_side} must be in [1, {min(grid.shape)}] for grid {grid.shape}"
        )
    if not 0.0 < bin_width <= 1.0:
        raise DescriptorError(f"bin_width must be in (0, 1], got {bin_width}")

    width = Fraction(str(bin_width)).limit_denominator(10**9)
    n_bins = int(1 / width) + 1
    cells = window_side**grid.ndim
    counts = window_counts(grid, window_side).ravel()
    # k = floor(count / (cells * width)) with width = num / den
    bins = (counts * width.denominator) // (cells * width.numerator)
    hist = np.bincount(bins, minlength=n_bins)[:n_bins]
    probabilities = hist / counts.size
    edges = np.array([float(k * width) for k in range(n_bins + 1)])
    return PorosityHistogram(bin_edges=edges, probabilities=probabilities, window_side=window_side)


def mean_absolute_deviation(a: np.ndarray, b: np.ndarray) -> float:
    """Mean |a - b| over the common prefix of two curves."""
    n = min(len(a), len(b))
    if n == 0:
        raise DescriptorError("Cannot compare empty curves")
    return float(np.mean(np.abs(np.asarray(a[:n]) - np.asarray(b[:n]))))
