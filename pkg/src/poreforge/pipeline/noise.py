"""Coordinate-indexed uniform noise.

Each voxel of a padded noise volume gets its value from a splitmix64 hash of
(seed, linear index), so any sub-block can be materialized on its own and
overlapping blocks always agree.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


class NoiseError(Exception):
    pass


def _splitmix64(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = x + _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))


def noise_block(
    seed: int,
    dims: tuple[int, int, int],
    origin: tuple[int, int, int],
    shape: tuple[int, int, int],
) -> np.ndarray:
    """Uniform [0, 1) values of the sub-block ``origin + shape`` of a ``dims`` volume."""
    if any(o < 0 or o + s > d for o, s, d in zip(origin, shape, dims)):
        raise NoiseError(f"Block at {origin} of shape {shape} exceeds volume {dims}")
    z, y, x = (np.arange(o, o + s, dtype=np.uint64) for o, s in zip(origin, shape))
    h, w = np.uint64(dims[1]), np.uint64(dims[2])
    index = (z[:, None, None] * h + y[None, :, None]) * w + x[None, None, :]
    key = np.uint64((seed * 0x9E3779B97F4A7C15) & _MASK64)
    with np.errstate(over="ignore"):
        bits = _splitmix64(index ^ key)
    return (bits >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


def noise_volume(seed: int, dims: tuple[int, int, int]) -> np.ndarray:
    return noise_block(seed, dims, (0, 0, 0), dims)
