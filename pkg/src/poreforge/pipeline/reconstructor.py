"""Arbitrary-size reconstruction by tiled inference, and binarization.

The padded noise volume is never materialized: each tile reads its own padded
sub-block from the coordinate-indexed generator. With frozen batch-norm
statistics and the exact convolution path, every tiling of the same output
gives bit-identical continuous values.
"""

from __future__ import annotations

import itertools
import logging
import time
from dataclasses import dataclass

import numpy as np
from skimage.filters import threshold_otsu

from poreforge.core.schema import ReconReport, ReconstructConfig
from poreforge.core.volume import PhaseFraction, Volume3D, VolumeMode, porosity
from poreforge.nn.network import ModelParams, forward
from poreforge.pipeline.noise import noise_block

logger = logging.getLogger(__name__)


class ReconstructionError(Exception):
    pass


@dataclass(frozen=True)
class ReconResult:
    continuous: Volume3D
    binary: Volume3D
    report: ReconReport


def tile_origins(
    dims: tuple[int, int, int], block: tuple[int, int, int]
) -> list[tuple[int, int, int]]:
    """Tile corners in z-major order (z outermost, x innermost)."""
    if min(block) < 1:
        raise ReconstructionError(f"Sub-block dims must be at least 1, got {block}")
    ranges = [range(0, d, b) for d, b in zip(dims, block)]
    return list(itertools.product(*ranges))


def forward_tiled(
    params: ModelParams, dims: tuple[int, int, int], block: tuple[int, int, int], seed: int
) -> np.ndarray:
    """Inference output (L, H, W, 3) assembled tile by tile."""
    m = params.spec.m
    padded = tuple(d + 2 * m for d in dims)
    out = np.empty((*dims, params.spec.out_channels))
    origins = tile_origins(dims, block)
    for i, origin in enumerate(origins):
        shape = tuple(min(b, d - o) for b, d, o in zip(block, dims, origin))
        noise = noise_block(seed, padded, origin, tuple(s + 2 * m for s in shape))
        try:
            y = forward(params, noise[np.newaxis, np.newaxis], training=False)
        except MemoryError as exc:
            raise ReconstructionError(
                f"Out of memory on a {shape} tile; reduce reconstruct.sub_block"
            ) from exc
        z0, y0, x0 = origin
        out[z0 : z0 + shape[0], y0 : y0 + shape[1], x0 : x0 + shape[2]] = np.moveaxis(
            y[0], 0, -1
        )
        logger.debug("tile %d/%d at %s done", i + 1, len(origins), origin)
    return out


def channel_mean(v: Volume3D) -> np.ndarray:
    if v.mode is not VolumeMode.continuous:
        raise ReconstructionError("Binarization needs a continuous volume")
    return v.data.mean(axis=3)


def binarize(v: Volume3D, phi_target: PhaseFraction) -> Volume3D:
    """Mark the round(phi * V) voxels with the largest channel mean as pore.

    Ties are broken by voxel index, so the pore count is exact.
    """
    if not 0.0 <= phi_target <= 1.0:
        raise ReconstructionError(f"Target porosity must be in [0, 1], got {phi_target}")
    g = channel_mean(v)
    n_pore = int(np.floor(phi_target * g.size + 0.5))
    order = np.argsort(-g.ravel(), kind="stable")
    labels = np.zeros(g.size, dtype=np.uint8)
    labels[order[:n_pore]] = 1
    return Volume3D.from_labels(labels.reshape(g.shape))


def binarize_otsu(v: Volume3D) -> Volume3D:
    g = channel_mean(v)
    tau = threshold_otsu(g)
    return Volume3D.from_labels((g > tau).astype(np.uint8))


def reconstruct(
    params: ModelParams,
    cfg: ReconstructConfig,
    target_porosity: PhaseFraction | None = None,
    seed: int | None = None,
) -> ReconResult:
    """Tiled inference over a (L + 2m) x (H + 2m) x (W + 2m) noise volume, then binarize.

    ``cfg.porosity`` takes precedence over ``target_porosity`` (usually the
    reference porosity recorded at training time).
    """
    warnings: list[str] = []
    if params.has_untrained_statistics():
        msg = "Model batch-norm statistics are untrained (zero steps); output may be meaningless"
        logger.warning(msg)
        warnings.append(msg)
    dims = tuple(cfg.dims)
    block = tuple(cfg.sub_block) if cfg.sub_block is not None else dims
    seed = cfg.seed if seed is None else seed
    phi = cfg.porosity if cfg.porosity is not None else target_porosity
    if cfg.method == "quantile" and phi is None:
        raise ReconstructionError(
            "No target porosity: set reconstruct.porosity or keep the training report "
            "next to the model"
        )

    start = time.perf_counter()
    tiles = len(tile_origins(dims, block))
    continuous = Volume3D(forward_tiled(params, dims, block, seed), VolumeMode.continuous)
    binary = binarize(continuous, phi) if cfg.method == "quantile" else binarize_otsu(continuous)
    achieved = porosity(binary)
    wall = time.perf_counter() - start
    logger.info(
        "Reconstructed %s in %d tiles (%.1f s), porosity %.4f", dims, tiles, wall, achieved
    )
    report = ReconReport(
        seed=seed,
        dims=dims,
        sub_block=block,
        tiles=tiles,
        method=cfg.method,
        target_porosity=phi,
        achieved_porosity=achieved,
        wall_time_s=wall,
        warnings=warnings,
    )
    return ReconResult(continuous=continuous, binary=binary, report=report)
