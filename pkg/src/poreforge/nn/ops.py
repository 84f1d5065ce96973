"""Differentiable building blocks: valid convolution, batch normalization, LeakyReLU.

Tensors are float64 arrays laid out as (N, C, *spatial) with one, two or three
spatial axes; the network uses (N, C, D, H, W) and the 2D feature bank uses
(N, C, H, W). Convolutions are cross-correlations (no kernel flip), stride 1,
no padding.

Two forward paths exist for convolution. The default one gathers each kernel
offset with a batched matmul and is used during training. The ``exact`` path
accumulates every product elementwise in a fixed order (bias, then offsets in
raster order, then input channels), so an output voxel depends only on its own
receptive field and never on the size of the array it was computed in. Tiled
reconstruction relies on this to be bit-identical to an untiled pass.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

# Float64 array shaped (N, C, *spatial).
Tensor5 = np.ndarray

DEFAULT_SLOPE = 0.2
DEFAULT_BN_EPS = 1e-5
DEFAULT_BN_MOMENTUM = 0.1


class EngineError(Exception):
    pass


class ShapeError(EngineError):
    pass


@dataclass
class ConvLayerParams:
    """Kernel (C_out, C_in, k, ..., k) and bias (C_out,)."""

    kernel: np.ndarray
    bias: np.ndarray

    @property
    def size(self) -> int:
        return int(self.kernel.shape[2])

    @property
    def in_channels(self) -> int:
        return int(self.kernel.shape[1])

    @property
    def out_channels(self) -> int:
        return int(self.kernel.shape[0])


@dataclass
class BatchNormParams:
    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = DEFAULT_BN_MOMENTUM
    eps: float = DEFAULT_BN_EPS

    @classmethod
    def identity(
        cls, channels: int, momentum: float = DEFAULT_BN_MOMENTUM, eps: float = DEFAULT_BN_EPS
    ) -> BatchNormParams:
        return cls(
            gamma=np.ones(channels),
            beta=np.zeros(channels),
            running_mean=np.zeros(channels),
            running_var=np.ones(channels),
            momentum=momentum,
            eps=eps,
        )

    @property
    def channels(self) -> int:
        return int(self.gamma.shape[0])


@dataclass
class BatchNormCache:
    x_hat: np.ndarray | None
    inv_std: np.ndarray
    gamma: np.ndarray
    training: bool
    shape: tuple[int, ...] = field(default=())


def receptive_field(m: int) -> int:
    """Side of the input cube that influences one output voxel of m kernel-3 blocks."""
    if m < 1:
        raise EngineError(f"Layer count must be at least 1, got {m}")
    return 3 + 2 * (m - 1)


def _check_finite(x: np.ndarray, what: str) -> None:
    if not np.isfinite(x).all():
        raise EngineError(f"Non-finite values in {what}")


def _channel_shape(x: np.ndarray) -> tuple[int, ...]:
    """Broadcast shape for a per-channel vector against x."""
    return (1, x.shape[1]) + (1,) * (x.ndim - 2)


def _reduce_axes(x: np.ndarray) -> tuple[int, ...]:
    return (0, *range(2, x.ndim))


def _check_conv(x: Tensor5, p: ConvLayerParams) -> tuple[int, ...]:
    if x.ndim < 3:
        raise ShapeError(f"Expected (N, C, *spatial), got shape {x.shape}")
    k = p.size
    nd = x.ndim - 2
    if p.kernel.shape != (p.out_channels, p.in_channels) + (k,) * nd:
        raise ShapeError(f"Kernel shape {p.kernel.shape} does not match a {nd}D input")
    if p.bias.shape != (p.out_channels,):
        raise ShapeError(f"Bias shape {p.bias.shape} does not match {p.out_channels} outputs")
    if x.shape[1] != p.in_channels:
        raise ShapeError(f"Input has {x.shape[1]} channels, kernel expects {p.in_channels}")
    out_spatial = tuple(s - k + 1 for s in x.shape[2:])
    if min(out_spatial) < 1:
        raise ShapeError(f"Spatial dims {x.shape[2:]} smaller than kernel size {k}")
    return out_spatial


def _window(x: np.ndarray, offset: tuple[int, ...], out_spatial: tuple[int, ...]) -> np.ndarray:
    index = (slice(None), slice(None)) + tuple(
        slice(o, o + s) for o, s in zip(offset, out_spatial)
    )
    return x[index]


def _offsets(k: int, nd: int):
    return itertools.product(range(k), repeat=nd)


def conv3d_forward(x: Tensor5, p: ConvLayerParams, exact: bool = False) -> Tensor5:
    """Valid cross-correlation; output spatial dims shrink by k - 1."""
    out_spatial = _check_conv(x, p)
    _check_finite(x, "convolution input")
    n = x.shape[0]
    nd = x.ndim - 2
    o = p.out_channels
    if exact:
        return _conv_exact(x, p, out_spatial)

    voxels = int(np.prod(out_spatial))
    out = np.empty((n, o, voxels))
    out[...] = p.bias[np.newaxis, :, np.newaxis]
    for offset in _offsets(p.size, nd):
        w = p.kernel[(slice(None), slice(None)) + offset]
        cols = np.ascontiguousarray(_window(x, offset, out_spatial)).reshape(n, x.shape[1], voxels)
        out += np.matmul(w, cols)
    return out.reshape((n, o) + out_spatial)


def _conv_exact(x: Tensor5, p: ConvLayerParams, out_spatial: tuple[int, ...]) -> Tensor5:
    n = x.shape[0]
    nd = x.ndim - 2
    o = p.out_channels
    out = np.empty((n, o) + out_spatial)
    out[...] = p.bias.reshape((1, o) + (1,) * nd)
    tmp = np.empty_like(out)
    for offset in _offsets(p.size, nd):
        win = _window(x, offset, out_spatial)
        for c in range(p.in_channels):
            w = p.kernel[(slice(None), c) + offset].reshape((1, o) + (1,) * nd)
            np.multiply(w, win[:, c : c + 1], out=tmp)
            np.add(out, tmp, out=out)
    return out


def conv3d_backward(
    x: Tensor5, p: ConvLayerParams, grad_out: Tensor5
) -> tuple[Tensor5, np.ndarray, np.ndarray]:
    """Return (grad_x, grad_kernel, grad_bias) for the valid cross-correlation."""
    out_spatial = _check_conv(x, p)
    expected = (x.shape[0], p.out_channels) + out_spatial
    if grad_out.shape != expected:
        raise ShapeError(f"grad_out shape {grad_out.shape} does not match output {expected}")
    n = x.shape[0]
    nd = x.ndim - 2
    axes = [0, *range(2, x.ndim)]
    voxels = int(np.prod(out_spatial))
    g = grad_out.reshape(n, p.out_channels, voxels)

    grad_x = np.zeros_like(x, dtype=np.float64)
    grad_kernel = np.zeros_like(p.kernel, dtype=np.float64)
    grad_bias = grad_out.sum(axis=tuple(axes))
    for offset in _offsets(p.size, nd):
        idx = (slice(None), slice(None)) + offset
        win = _window(x, offset, out_spatial)
        grad_kernel[idx] = np.tensordot(grad_out, win, axes=(axes, axes))
        back = np.matmul(p.kernel[idx].T, g).reshape((n, p.in_channels) + out_spatial)
        _window(grad_x, offset, out_spatial)[...] += back
    return grad_x, grad_kernel, grad_bias


def batchnorm_forward(
    x: Tensor5, p: BatchNormParams, training: bool
) -> tuple[Tensor5, BatchNormCache]:
    """Per-channel normalization over batch and spatial positions.

    Training mode uses batch statistics and updates the running estimates in
    place: ``running = (1 - momentum) * running + momentum * batch``. The
    running variance tracks the biased (population) batch variance. Inference
    mode reads the running estimates only.
    """
    if x.ndim < 3 or x.shape[1] != p.channels:
        raise ShapeError(f"Input shape {x.shape} does not match {p.channels} BN channels")
    _check_finite(x, "batch-norm input")
    bshape = _channel_shape(x)
    if training:
        axes = _reduce_axes(x)
        count = x.size // x.shape[1]
        if count < 2:
            raise EngineError("Training-mode batch norm needs at least 2 positions per channel")
        mean = x.mean(axis=axes)
        centered = x - mean.reshape(bshape)
        var = (centered * centered).mean(axis=axes)
        inv_std = 1.0 / np.sqrt(var + p.eps)
        x_hat = centered * inv_std.reshape(bshape)
        p.running_mean *= 1.0 - p.momentum
        p.running_mean += p.momentum * mean
        p.running_var *= 1.0 - p.momentum
        p.running_var += p.momentum * var
    else:
        inv_std = 1.0 / np.sqrt(p.running_var + p.eps)
        x_hat = (x - p.running_mean.reshape(bshape)) * inv_std.reshape(bshape)
    y = x_hat * p.gamma.reshape(bshape) + p.beta.reshape(bshape)
    cache = BatchNormCache(
        x_hat=x_hat, inv_std=inv_std, gamma=p.gamma.copy(), training=training, shape=x.shape
    )
    return y, cache


def batchnorm_backward(
    cache: BatchNormCache, grad_out: Tensor5
) -> tuple[Tensor5, np.ndarray, np.ndarray]:
    """Return (grad_x, grad_gamma, grad_beta); a cache can be consumed once."""
    if cache.x_hat is None:
        raise EngineError("Stale batch-norm cache: backward was already run on it")
    if grad_out.shape != cache.shape:
        raise ShapeError(f"grad_out shape {grad_out.shape} does not match cache {cache.shape}")
    x_hat = cache.x_hat
    axes = _reduce_axes(grad_out)
    bshape = _channel_shape(grad_out)
    grad_gamma = (grad_out * x_hat).sum(axis=axes)
    grad_beta = grad_out.sum(axis=axes)
    d_hat = grad_out * cache.gamma.reshape(bshape)
    if cache.training:
        mean_d = d_hat.mean(axis=axes).reshape(bshape)
        mean_dx = (d_hat * x_hat).mean(axis=axes).reshape(bshape)
        grad_x = (d_hat - mean_d - x_hat * mean_dx) * cache.inv_std.reshape(bshape)
    else:
        grad_x = d_hat * cache.inv_std.reshape(bshape)
    cache.x_hat = None
    return grad_x, grad_gamma, grad_beta


def leaky_relu(x: Tensor5, slope: float = DEFAULT_SLOPE) -> Tensor5:
    if not 0.0 < slope < 1.0:
        raise EngineError(f"LeakyReLU slope must be in (0, 1), got {slope}")
    _check_finite(x, "activation input")
    return np.where(x > 0, x, slope * x)


def leaky_relu_backward(x: Tensor5, slope: float, grad_out: Tensor5) -> Tensor5:
    """Gradient of :func:`leaky_relu`; the subgradient at 0 is ``slope``."""
    if grad_out.shape != x.shape:
        raise ShapeError(f"grad_out shape {grad_out.shape} does not match input {x.shape}")
    return grad_out * np.where(x > 0, 1.0, slope)
