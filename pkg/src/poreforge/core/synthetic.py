"""Synthetic binary references: thresholded Gaussian-smoothed noise and stripes.

The smoothing length sets the correlation scale; the threshold is chosen so the
pore count matches the requested porosity exactly.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter

from poreforge.core.volume import Image2D, PhaseFraction, Volume3D


class SyntheticError(Exception):
    pass


def smoothed_field(
    shape: tuple[int, ...], sigma: float, seed: int, periodic: bool = False
) -> np.ndarray:
    """White noise smoothed with an isotropic Gaussian of std ``sigma`` voxels."""
    if sigma < 0:
        raise SyntheticError(f"sigma must be non-negative, got {sigma}")
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(shape)
    if sigma == 0:
        return noise
    return gaussian_filter(noise, sigma=sigma, mode="wrap" if periodic else "reflect")


def threshold_to_porosity(field: np.ndarray, phi: PhaseFraction) -> np.ndarray:
    """Label the round(phi * size) highest values as pore."""
    if not 0.0 <= phi <= 1.0:
        raise SyntheticError(f"Porosity must be in [0, 1], got {phi}")
    n_pore = int(np.floor(phi * field.size + 0.5))
    order = np.argsort(-field.ravel(), kind="stable")
    labels = np.zeros(field.size, dtype=np.uint8)
    labels[order[:n_pore]] = 1
    return labels.reshape(field.shape)


def blob_image(
    size: int,
    phi: PhaseFraction,
    sigma: float,
    seed: int = 0,
    periodic: bool = False,
    pixel_size: float | None = None,
) -> Image2D:
    field = smoothed_field((size, size), sigma, seed, periodic)
    return Image2D(threshold_to_porosity(field, phi), pixel_size=pixel_size)


def blob_volume(
    size: int, phi: PhaseFraction, sigma: float, seed: int = 0, periodic: bool = False
) -> Volume3D:
    field = smoothed_field((size, size, size), sigma, seed, periodic)
    return Volume3D.from_labels(threshold_to_porosity(field, phi))


def stripe_image(
    size: int,
    period: int,
    width: int | None = None,
    axis: int = 1,
    pixel_size: float | None = None,
) -> Image2D:
    """Pore bands of ``width`` pixels repeating every ``period`` pixels along an axis."""
    if period < 2:
        raise SyntheticError(f"period must be at least 2, got {period}")
    width = period // 2 if width is None else width
    if not 0 < width < period:
        raise SyntheticError(f"width must be in (0, {period}), got {width}")
    band = (np.arange(size) % period < width).astype(np.uint8)
    data = np.broadcast_to(band[np.newaxis, :] if axis == 1 else band[:, np.newaxis], (size, size))
    return Image2D(np.array(data), pixel_size=pixel_size)
