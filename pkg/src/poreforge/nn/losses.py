"""Description functions comparing orthogonal output slices with reference images.

Two are provided:

- ``gram``: Gram matrices of a fixed random convolutional feature bank (reflect
  padding, LeakyReLU), compared layer by layer;
- ``acf``: the normalized autocorrelation table of the channel-mean slice.

Both return the loss and its analytic gradient with respect to every slice.
Reference images are lifted to 3 channels by replication, and their targets are
computed once and reused.
"""

from __future__ import annotations

import hashlib
import math
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from typing import Protocol, runtime_checkable

import numpy as np

from poreforge.core.volume import Image2D, PhaseFraction, porosity
from poreforge.nn.ops import (
    DEFAULT_SLOPE,
    ConvLayerParams,
    conv3d_backward,
    conv3d_forward,
    leaky_relu,
    leaky_relu_backward,
)

SLICE_CHANNELS = 3
DEFAULT_BANK_WIDTHS = (8, 16, 16, 16)
DEFAULT_ACF_MAX_LAG = 16


class LossError(Exception):
    pass


class Orientation(str, Enum):
    XY = "xy"
    XZ = "xz"
    YZ = "yz"


ORIENTATIONS = (Orientation.XY, Orientation.XZ, Orientation.YZ)


@dataclass(frozen=True)
class SlicePlane:
    """One axis-aligned plane of an output tensor, data shaped (C, S1, S2).

    XY planes are (C, H, W) at a fixed z, XZ planes (C, D, W) at a fixed y,
    YZ planes (C, D, H) at a fixed x.
    """

    orientation: Orientation
    index: int
    data: np.ndarray


@dataclass(frozen=True)
class ReferenceSet:
    """Reference image per slice orientation; isotropic sets share one image."""

    images: dict[Orientation, Image2D]

    @classmethod
    def isotropic(cls, image: Image2D) -> ReferenceSet:
        return cls({o: image for o in ORIENTATIONS})

    @classmethod
    def anisotropic(cls, xy: Image2D, xz: Image2D, yz: Image2D) -> ReferenceSet:
        return cls({Orientation.XY: xy, Orientation.XZ: xz, Orientation.YZ: yz})

    def __post_init__(self) -> None:
        missing = [o.value for o in ORIENTATIONS if o not in self.images]
        if missing:
            raise LossError(f"Reference set is missing orientations: {', '.join(missing)}")

    @property
    def is_isotropic(self) -> bool:
        first = self.images[Orientation.XY]
        return all(self.images[o] is first for o in ORIENTATIONS)

    @property
    def porosity(self) -> PhaseFraction:
        """Porosity of the reference; the mean over distinct orientations."""
        if self.is_isotropic:
            return porosity(self.images[Orientation.XY])
        return sum(porosity(self.images[o]) for o in ORIENTATIONS) / len(ORIENTATIONS)

    @property
    def min_side(self) -> int:
        return min(min(img.height, img.width) for img in self.images.values())


def lift(image: Image2D, channels: int = SLICE_CHANNELS) -> np.ndarray:
    """Binary image as a (channels, H, W) float map, value replicated."""
    return np.repeat(image.data.astype(np.float64)[np.newaxis], channels, axis=0)


def _image_key(image: Image2D) -> str:
    digest = hashlib.sha256(image.data.tobytes()).hexdigest()
    return f"{image.height}x{image.width}:{digest}"


# -- Slices --


def _plane_index(orientation: Orientation, point: tuple[int, int, int]) -> tuple:
    x, y, z = point
    if orientation is Orientation.XY:
        return (0, slice(None), z)
    if orientation is Orientation.XZ:
        return (0, slice(None), slice(None), y)
    return (0, slice(None), slice(None), slice(None), x)


def _plane_coord(orientation: Orientation, point: tuple[int, int, int]) -> int:
    x, y, z = point
    return {Orientation.XY: z, Orientation.XZ: y, Orientation.YZ: x}[orientation]


def extract_slices(y: np.ndarray, point: tuple[int, int, int]) -> list[SlicePlane]:
    """The XY, XZ and YZ planes of a (1, C, D, H, W) tensor through point (x, y, z)."""
    if y.ndim != 5 or y.shape[0] != 1:
        raise LossError(f"Expected a (1, C, D, H, W) tensor, got {y.shape}")
    d, h, w = y.shape[2:]
    x, yy, z = point
    if not (0 <= x < w and 0 <= yy < h and 0 <= z < d):
        raise LossError(f"Point {point} outside output bounds (x<{w}, y<{h}, z<{d})")
    return [
        SlicePlane(o, _plane_coord(o, point), y[_plane_index(o, point)].copy())
        for o in ORIENTATIONS
    ]


def scatter_slice_grads(
    shape: tuple[int, ...], point: tuple[int, int, int], grads: Sequence[np.ndarray]
) -> np.ndarray:
    """Place per-slice gradients back into a zero tensor; intersections add up."""
    out = np.zeros(shape)
    for orientation, g in zip(ORIENTATIONS, grads):
        out[_plane_index(orientation, point)] += g
    return out


# -- Gram --


@dataclass(frozen=True)
class GramMatrix:
    matrix: np.ndarray
    position_count: int

    @property
    def channels(self) -> int:
        return int(self.matrix.shape[0])


def gram(features: np.ndarray) -> GramMatrix:
    """G[i, j] = (1 / P) * sum_p F[i, p] * F[j, p] for F shaped (C, P)."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] < 1 or features.shape[0] < 1:
        raise LossError(f"Gram needs non-empty (C, P) features, got {features.shape}")
    p = features.shape[1]
    return GramMatrix(matrix=features @ features.T / p, position_count=p)


def _reflect_fold(grad_padded: np.ndarray) -> np.ndarray:
    """Adjoint of a width-1 reflect pad on the last two axes."""
    g = grad_padded
    for axis in (-2, -1):
        inner = np.take(g, range(1, g.shape[axis] - 1), axis=axis).copy()
        first = np.take(g, 0, axis=axis)
        last = np.take(g, g.shape[axis] - 1, axis=axis)
        idx_first = [slice(None)] * inner.ndim
        idx_last = [slice(None)] * inner.ndim
        idx_first[axis] = 1
        idx_last[axis] = inner.shape[axis] - 2
        inner[tuple(idx_first)] += first
        inner[tuple(idx_last)] += last
        g = inner
    return g


@dataclass
class FeatureBank:
    """Fixed random 2D convolution stack used as the style descriptor."""

    layers: list[ConvLayerParams]
    seed: int
    layer_weights: tuple[float, ...]
    slope: float = DEFAULT_SLOPE
    _targets: dict[str, list[GramMatrix]] = field(default_factory=dict, repr=False)

    @classmethod
    def create(
        cls,
        seed: int,
        widths: Sequence[int] = DEFAULT_BANK_WIDTHS,
        in_channels: int = SLICE_CHANNELS,
        layer_weights: Sequence[float] | None = None,
        slope: float = DEFAULT_SLOPE,
    ) -> FeatureBank:
        if not widths:
            raise LossError("Feature bank needs at least one layer")
        weights = tuple(layer_weights) if layer_weights is not None else (1.0,) * len(widths)
        if len(weights) != len(widths):
            raise LossError(f"{len(weights)} layer weights for {len(widths)} layers")
        rng = np.random.default_rng(seed)
        layers = []
        c_in = in_channels
        for width in widths:
            kernel = rng.normal(0.0, math.sqrt(2.0 / (c_in * 9)), size=(width, c_in, 3, 3))
            layers.append(ConvLayerParams(kernel=kernel, bias=np.zeros(width)))
            c_in = width
        return cls(layers=layers, seed=seed, layer_weights=weights, slope=slope)

    @property
    def in_channels(self) -> int:
        return self.layers[0].in_channels

    def features(self, img: np.ndarray) -> tuple[list[np.ndarray], list[tuple]]:
        """Per-layer activations (C_m, S1, S2) of a (C, S1, S2) map, plus a tape."""
        if img.ndim != 3 or img.shape[0] != self.in_channels:
            raise LossError(
                f"Feature bank expects ({self.in_channels}, S1, S2) input, got {img.shape}"
            )
        if min(img.shape[1:]) < 2:
            raise LossError(f"Slices must be at least 2x2 for reflect padding, got {img.shape}")
        h = img[np.newaxis]
        feats, tape = [], []
        for layer in self.layers:
            padded = np.pad(h, ((0, 0), (0, 0), (1, 1), (1, 1)), mode="reflect")
            z = conv3d_forward(padded, layer)
            h = leaky_relu(z, self.slope)
            tape.append((padded, z))
            feats.append(h[0])
        return feats, tape

    def backward(self, tape: list[tuple], feature_grads: list[np.ndarray]) -> np.ndarray:
        """Gradient w.r.t. the input map given gradients on every layer's features."""
        g = np.zeros_like(feature_grads[-1])[np.newaxis]
        for i in reversed(range(len(self.layers))):
            padded, z = tape[i]
            g = g + feature_grads[i][np.newaxis]
            g = leaky_relu_backward(z, self.slope, g)
            g_padded, _, _ = conv3d_backward(padded, self.layers[i], g)
            g = _reflect_fold(g_padded)
        return g[0]

    def grams(self, img: np.ndarray) -> list[GramMatrix]:
        feats, _ = self.features(img)
        return [gram(f.reshape(f.shape[0], -1)) for f in feats]

    def targets(self, image: Image2D) -> list[GramMatrix]:
        """Reference Gram matrices, computed once per distinct image."""
        key = _image_key(image)
        if key not in self._targets:
            self._targets[key] = self.grams(lift(image, self.in_channels))
        return self._targets[key]


def _gram_terms(
    data: np.ndarray, targets: Sequence[GramMatrix], bank: FeatureBank
) -> tuple[float, np.ndarray]:
    feats, tape = bank.features(data)
    loss = 0.0
    feature_grads = []
    for f, target, w in zip(feats, targets, bank.layer_weights):
        c = f.shape[0]
        flat = f.reshape(c, -1)
        g = gram(flat)
        diff = g.matrix - target.matrix
        scale = w / (c * c)
        loss += scale * float(np.sum(diff * diff))
        d_flat = (4.0 * scale / g.position_count) * (diff @ flat)
        feature_grads.append(d_flat.reshape(f.shape))
    return loss, bank.backward(tape, feature_grads)


def _reference_for(refs: Mapping[Orientation, Image2D], orientation: Orientation) -> Image2D:
    try:
        return refs[orientation]
    except KeyError as exc:
        raise LossError(f"No reference image for orientation {orientation.value}") from exc


def _images(refs: ReferenceSet | Mapping[Orientation, Image2D]) -> Mapping[Orientation, Image2D]:
    return refs.images if isinstance(refs, ReferenceSet) else refs


def gram_loss(
    slices: Sequence[SlicePlane],
    refs: ReferenceSet | Mapping[Orientation, Image2D],
    bank: FeatureBank,
) -> tuple[float, list[np.ndarray]]:
    """Sum over slices and bank layers of ``w_m / N_m^2 * ||G_slice - G_ref||_F^2``.

    N_m is the channel count of layer m. Returns the loss and one gradient per slice.
    """
    images = _images(refs)
    total = 0.0
    grads = []
    for plane in slices:
        if plane.data.shape[0] != bank.in_channels:
            raise LossError(
                f"{plane.orientation.value} slice has {plane.data.shape[0]} channels, "
                f"bank expects {bank.in_channels}"
            )
        targets = bank.targets(_reference_for(images, plane.orientation))
        loss, grad = _gram_terms(plane.data, targets, bank)
        total += loss
        grads.append(grad)
    return total, grads


# -- ACF --


def _autocorrelation(f: np.ndarray, max_lag: int) -> np.ndarray:
    s1, s2 = f.shape
    table = np.empty((max_lag + 1, max_lag + 1))
    for tau in range(max_lag + 1):
        for ups in range(max_lag + 1):
            prod = f[: s1 - tau, : s2 - ups] * f[tau:, ups:]
            table[tau, ups] = prod.sum() / ((s1 - tau) * (s2 - ups))
    return table


def _check_acf_lag(shape: tuple[int, ...], max_lag: int) -> None:
    if max_lag < 0 or max_lag >= min(shape):
        raise LossError(f"max_lag={max_lag} must lie in [0, {min(shape) - 1}] for size {shape}")


def acf(img: np.ndarray, max_lag: int) -> np.ndarray:
    """R(tau, ups) of the channel-mean map, normalized by the pair count of each lag.

    ``tau`` runs along the first spatial axis and ``ups`` along the second.
    """
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3:
        raise LossError(f"ACF expects a (C, S1, S2) map, got {img.shape}")
    _check_acf_lag(img.shape[1:], max_lag)
    return _autocorrelation(img.mean(axis=0), max_lag)


def _acf_terms(data: np.ndarray, target: np.ndarray, max_lag: int) -> tuple[float, np.ndarray]:
    _check_acf_lag(data.shape[1:], max_lag)
    f = data.mean(axis=0)
    s1, s2 = f.shape
    diff = _autocorrelation(f, max_lag) - target
    grad_f = np.zeros_like(f)
    for tau in range(max_lag + 1):
        for ups in range(max_lag + 1):
            a = 2.0 * diff[tau, ups] / ((s1 - tau) * (s2 - ups))
            grad_f[: s1 - tau, : s2 - ups] += a * f[tau:, ups:]
            grad_f[tau:, ups:] += a * f[: s1 - tau, : s2 - ups]
    grad = np.repeat((grad_f / data.shape[0])[np.newaxis], data.shape[0], axis=0)
    return float(np.sum(diff * diff)), grad


def acf_loss(
    slices: Sequence[SlicePlane],
    refs: ReferenceSet | Mapping[Orientation, Image2D],
    max_lag: int,
    cache: dict[str, np.ndarray] | None = None,
) -> tuple[float, list[np.ndarray]]:
    """Sum over slices and lags of ``(S_k(tau, ups) - R(tau, ups))^2``."""
    images = _images(refs)
    cache = {} if cache is None else cache
    total = 0.0
    grads = []
    for plane in slices:
        image = _reference_for(images, plane.orientation)
        key = f"{_image_key(image)}:{max_lag}"
        if key not in cache:
            cache[key] = acf(lift(image, 1), max_lag)
        loss, grad = _acf_terms(plane.data, cache[key], max_lag)
        total += loss
        grads.append(grad)
    return total, grads


# -- Registry --


@runtime_checkable
class DescriptionFunction(Protocol):
    """Similarity between three output slices and the reference set."""

    name: str

    def __call__(self, slices: Sequence[SlicePlane]) -> tuple[float, list[np.ndarray]]: ...


@dataclass
class GramDescription:
    refs: ReferenceSet
    bank: FeatureBank
    name: str = "gram"

    def __call__(self, slices: Sequence[SlicePlane]) -> tuple[float, list[np.ndarray]]:
        return gram_loss(slices, self.refs, self.bank)


@dataclass
class AcfDescription:
    refs: ReferenceSet
    max_lag: int = DEFAULT_ACF_MAX_LAG
    name: str = "acf"
    _acf_targets: dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    def __call__(self, slices: Sequence[SlicePlane]) -> tuple[float, list[np.ndarray]]:
        return acf_loss(slices, self.refs, self.max_lag, self._acf_targets)


def _make_gram(refs: ReferenceSet, **options) -> DescriptionFunction:
    bank = FeatureBank.create(
        seed=options.get("bank_seed", 0),
        widths=options.get("bank_widths", DEFAULT_BANK_WIDTHS),
        layer_weights=options.get("bank_layer_weights"),
        slope=options.get("slope", DEFAULT_SLOPE),
    )
    return GramDescription(refs=refs, bank=bank)


def _make_acf(refs: ReferenceSet, **options) -> DescriptionFunction:
    return AcfDescription(refs=refs, max_lag=options.get("acf_max_lag", DEFAULT_ACF_MAX_LAG))


_DESCRIPTIONS: dict[str, Callable[..., DescriptionFunction]] = {
    "gram": _make_gram,
    "acf": _make_acf,
}


def list_descriptions() -> list[str]:
    return list(_DESCRIPTIONS)


def get_description(name: str, refs: ReferenceSet, **options) -> DescriptionFunction:
    """Build the named description function for a reference set."""
    try:
        factory = _DESCRIPTIONS[name]
    except KeyError as exc:
        raise LossError(
            f"Unknown description function '{name}'. Available: {', '.join(_DESCRIPTIONS)}"
        ) from exc
    return factory(refs, **options)
