"""Simulated-annealing reconstruction by pore/solid swaps under the Metropolis rule.

The energy is a weighted squared mismatch between axis-mean descriptor curves of
the current grid and of the reference. Per-axis integer counts are kept for the
whole grid; a swap only touches the lines through the two swapped voxels, so
those lines are recounted and the energy is rebuilt from the updated counts with
the same arithmetic as a full recomputation.
"""

from __future__ import annotations

import io
import logging
import math
from dataclasses import dataclass

import numpy as np

from poreforge.core.descriptors import (
    DescriptorError,
    linear_path,
    mean_over_axes,
    pair_counts,
    position_counts,
    segment_counts,
    two_point_probability,
)
from poreforge.core.schema import AnnealConfig, AnnealReport
from poreforge.core.volume import Image2D, Volume3D, porosity

logger = logging.getLogger(__name__)

T0_FRACTION = 1e-3
SWAPS_PER_VOXEL = 10
MAX_3D_SIDE = 64

_COUNTERS = {"s2": pair_counts, "lineal_path": segment_counts}
_CURVES = {"s2": two_point_probability, "lineal_path": linear_path}


class AnnealError(Exception):
    pass


@dataclass(frozen=True)
class TraceRow:
    swap_index: int
    temperature: float
    energy: float
    accepted: bool


@dataclass(frozen=True)
class AnnealResult:
    grid: Image2D | Volume3D
    trace: list[TraceRow]
    best_energies: list[float]
    report: AnnealReport


def _axes(ndim: int) -> list[tuple[str, int]]:
    if ndim == 2:
        return [("x", 1), ("y", 0)]
    return [("x", 2), ("y", 1), ("z", 0)]


def reference_curves(
    ref: Image2D, terms: list[str], max_lag: int
) -> dict[str, np.ndarray]:
    """Axis-mean curves of the reference for every energy term."""
    try:
        return {t: _CURVES[t](ref, max_lag).mean for t in terms}
    except DescriptorError as exc:
        raise AnnealError(str(exc)) from exc


def energy(
    g: Image2D | Volume3D | np.ndarray,
    ref_curves: dict[str, np.ndarray],
    weights: dict[str, float],
) -> float:
    """E = sum over terms of w * sum_r (D_g(r) - D_ref(r))^2, computed from scratch."""
    total = 0.0
    for term, w in weights.items():
        target = ref_curves[term]
        curve = _CURVES[term](g, len(target) - 1).mean
        diff = curve - target
        total += w * float(np.sum(diff * diff))
    return total


class _CountState:
    """Per-term, per-axis integer counts of a grid, with line-local updates."""

    def __init__(self, grid: np.ndarray, terms: list[str], max_lag: int) -> None:
        self.grid = grid
        self.terms = terms
        self.max_lag = max_lag
        self.axes = _axes(grid.ndim)
        self.norm = {
            name: position_counts(grid.shape, axis, max_lag) for name, axis in self.axes
        }
        self.counts = {
            t: {name: _COUNTERS[t](grid, axis, max_lag) for name, axis in self.axes}
            for t in terms
        }

    def _line(self, index: tuple[int, ...], axis: int) -> tuple:
        return tuple(slice(None) if a == axis else c for a, c in enumerate(index))

    def _lines(self, p: tuple[int, ...], q: tuple[int, ...]) -> list[tuple[str, int, tuple]]:
        out = []
        for name, axis in self.axes:
            lp, lq = self._line(p, axis), self._line(q, axis)
            out.append((name, axis, lp))
            if lq != lp:
                out.append((name, axis, lq))
        return out

    def line_counts(self, line: tuple, term: str) -> np.ndarray:
        return _COUNTERS[term](self.grid[line], 0, self.max_lag)

    def swap(self, p: tuple[int, ...], q: tuple[int, ...]) -> None:
        """Flip p and q and update the counts of every line through them."""
        lines = self._lines(p, q)
        for t in self.terms:
            for name, _, line in lines:
                self.counts[t][name] -= self.line_counts(line, t)
        self.grid[p], self.grid[q] = self.grid[q], self.grid[p]
        for t in self.terms:
            for name, _, line in lines:
                self.counts[t][name] += self.line_counts(line, t)

    def energy(self, ref_curves: dict[str, np.ndarray], weights: dict[str, float]) -> float:
        total = 0.0
        for term, w in weights.items():
            per_axis = {name: self.counts[term][name] / self.norm[name] for name, _ in self.axes}
            diff = mean_over_axes(per_axis) - ref_curves[term]
            total += w * float(np.sum(diff * diff))
        return total


def _target_dims(ref: Image2D, cfg: AnnealConfig) -> tuple[int, ...]:
    dims = tuple(cfg.dims) if cfg.dims is not None else (ref.height, ref.width)
    if len(dims) == 3 and max(dims) > MAX_3D_SIDE:
        raise AnnealError(f"3D annealing is limited to {MAX_3D_SIDE} voxels per side")
    return dims


def trace_csv(trace: list[TraceRow]) -> str:
    buf = io.StringIO()
    buf.write("swap_index,temperature,energy,accepted\n")
    for row in trace:
        buf.write(
            f"{row.swap_index},{row.temperature:.9g},{row.energy:.9g},{int(row.accepted)}\n"
        )
    return buf.getvalue()


def anneal(ref: Image2D, cfg: AnnealConfig) -> AnnealResult:
    """Swap-based annealing towards the reference's descriptor curves.

    Returns the lowest-energy state seen, the per-move trace and the running
    best energy after every move.
    """
    phi = porosity(ref)
    if phi in (0.0, 1.0):
        raise AnnealError(f"Reference has a single phase (porosity {phi}); nothing to swap")
    dims = _target_dims(ref, cfg)
    weights = {t: w for t, w in cfg.weights.items() if w > 0}
    terms = list(weights)
    max_lag = cfg.max_lag
    if max_lag is None:
        max_lag = min(min(dims), ref.height, ref.width) // 2
    if max_lag >= min(dims):
        raise AnnealError(f"max_lag={max_lag} must be smaller than every grid dimension {dims}")
    targets = reference_curves(ref, terms, max_lag)

    rng = np.random.default_rng(cfg.seed)
    size = math.prod(dims)
    n_pore = int(np.floor(phi * size + 0.5))
    if n_pore in (0, size):
        raise AnnealError(f"Grid of {size} voxels at porosity {phi} has a single phase")
    flat = np.zeros(size, dtype=np.uint8)
    flat[rng.permutation(size)[:n_pore]] = 1
    grid = flat.reshape(dims)
    pores = np.flatnonzero(flat)
    solids = np.flatnonzero(flat == 0)

    state = _CountState(grid, terms, max_lag)
    current = state.energy(targets, weights)
    initial = current
    best, best_grid = current, grid.copy()
    t0 = cfg.t0 if cfg.t0 is not None else max(initial * T0_FRACTION, np.finfo(float).tiny)
    per_temp = cfg.swaps_per_temperature or SWAPS_PER_VOXEL * size
    temperature = t0
    trace: list[TraceRow] = []
    best_trace: list[float] = []
    accepted_count = 0

    swap = 0
    while swap < cfg.max_swaps and current > cfg.energy_threshold:
        i = int(rng.integers(len(pores)))
        j = int(rng.integers(len(solids)))
        p = np.unravel_index(pores[i], dims)
        q = np.unravel_index(solids[j], dims)
        state.swap(p, q)
        candidate = state.energy(targets, weights)
        if cfg.audit:
            full = energy(grid, targets, weights)
            if full != candidate:
                raise AnnealError(
                    f"Incremental energy {candidate!r} != full recomputation {full!r} "
                    f"at move {swap}"
                )
        delta = candidate - current
        accept = delta <= 0 or rng.random() < math.exp(-delta / temperature)
        if accept:
            current = candidate
            pores[i], solids[j] = solids[j], pores[i]
            accepted_count += 1
            if current < best:
                best, best_grid = current, grid.copy()
        else:
            state.swap(p, q)
        trace.append(TraceRow(swap, temperature, current, accept))
        best_trace.append(best)
        swap += 1
        if swap % per_temp == 0:
            logger.debug(
                "T=%.3g after %d swaps: energy %.6g best %.6g", temperature, swap, current, best
            )
            temperature *= cfg.cooling

    logger.info(
        "Annealed %s grid: %d swaps, %d accepted, energy %.6g -> best %.6g",
        "x".join(map(str, dims)),
        swap,
        accepted_count,
        initial,
        best,
    )
    result_grid: Image2D | Volume3D
    if len(dims) == 2:
        result_grid = Image2D(best_grid, pixel_size=ref.pixel_size)
    else:
        result_grid = Volume3D.from_labels(best_grid)
    report = AnnealReport(
        dims=list(dims),
        porosity=porosity(result_grid),
        initial_energy=initial,
        best_energy=best,
        final_energy=current,
        t0=t0,
        swaps=swap,
        accepted=accepted_count,
        audited=cfg.audit,
    )
    return AnnealResult(grid=result_grid, trace=trace, best_energies=best_trace, report=report)
