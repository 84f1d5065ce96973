"""LmCn network: m Conv3-blocks of width n followed by one Conv1-block with 3 outputs.

Each block is convolution -> batch norm -> LeakyReLU. The depth rule ties the
receptive field to the autocorrelation distance of the reference, so that the
network sees a region close to (or slightly larger than) the decorrelation scale.

Model files use the "MM01" container: a fixed header, shape-tagged float64
arrays in block order, and a trailing CRC32.
"""

from __future__ import annotations

import hashlib
import logging
import math
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from poreforge.core.descriptors import CorrelationLength
from poreforge.nn.ops import (
    DEFAULT_BN_EPS,
    DEFAULT_BN_MOMENTUM,
    DEFAULT_SLOPE,
    BatchNormCache,
    BatchNormParams,
    ConvLayerParams,
    Tensor5,
    batchnorm_backward,
    batchnorm_forward,
    conv3d_backward,
    conv3d_forward,
    leaky_relu,
    leaky_relu_backward,
    receptive_field,
)

logger = logging.getLogger(__name__)

DEFAULT_WIDTH = 16
DEFAULT_M_CAP = 12
OUT_CHANNELS = 3

MM01_MAGIC = b"MM01"
MM01_VERSION = 1
_MM01_HEADER = struct.Struct("<4sHIIQIddd")
_CRC = struct.Struct("<I")
_ARRAY_FIELDS = ("kernel", "bias", "gamma", "beta", "running_mean", "running_var")


class NetworkError(Exception):
    pass


class ModelFormatError(Exception):
    pass


@dataclass(frozen=True)
class NetworkSpec:
    m: int
    n: int = DEFAULT_WIDTH
    out_channels: int = OUT_CHANNELS
    warnings: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.m < 1:
            raise NetworkError(f"Depth m must be at least 1, got {self.m}")
        if self.n < 1:
            raise NetworkError(f"Width n must be at least 1, got {self.n}")
        if self.out_channels != OUT_CHANNELS:
            raise NetworkError(f"The final block has {OUT_CHANNELS} channels")

    @property
    def receptive_field(self) -> int:
        return receptive_field(self.m)

    @property
    def name(self) -> str:
        return f"L{self.m}C{self.n}"

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "n": self.n,
            "out_channels": self.out_channels,
            "receptive_field": self.receptive_field,
            "name": self.name,
            "warnings": list(self.warnings),
        }


def design_from_prior(
    l_cor: CorrelationLength,
    n_override: int | None = None,
    m_cap: int = DEFAULT_M_CAP,
    m_override: int | None = None,
) -> NetworkSpec:
    """Pick the depth whose receptive field first reaches l_cor.

    ``m = ceil((l_cor - 3) / 2) + 1`` clamped to ``[1, m_cap]``. A non-converged
    correlation length gives ``m_cap`` with a warning; ``m_override`` bypasses
    the rule entirely.
    """
    if m_cap < 1:
        raise NetworkError(f"m_cap must be at least 1, got {m_cap}")
    n = DEFAULT_WIDTH if n_override is None else n_override
    warnings = list(l_cor.warnings)
    if m_override is not None:
        return NetworkSpec(m=m_override, n=n, warnings=tuple(warnings))
    if not l_cor.converged:
        msg = (
            f"Autocorrelation distance did not converge; using m_cap={m_cap}. "
            "The reference may be heterogeneous; consider sweeping m by hand"
        )
        logger.warning(msg)
        warnings.append(msg)
        return NetworkSpec(m=m_cap, n=n, warnings=tuple(warnings))
    m = math.ceil((l_cor.l_cor - 3) / 2) + 1
    clamped = min(max(m, 1), m_cap)
    if clamped != m:
        msg = f"Depth {m} for l_cor={l_cor.l_cor} clamped to {clamped}"
        logger.warning(msg)
        warnings.append(msg)
    return NetworkSpec(m=clamped, n=n, warnings=tuple(warnings))


@dataclass
class Block:
    conv: ConvLayerParams
    bn: BatchNormParams


@dataclass
class ModelParams:
    spec: NetworkSpec
    blocks: list[Block]
    seed: int
    steps: int = 0
    slope: float = DEFAULT_SLOPE

    def trainable(self) -> dict[str, np.ndarray]:
        """Named views of every trainable array, updated in place by the optimizer."""
        out: dict[str, np.ndarray] = {}
        for i, block in enumerate(self.blocks):
            out[f"block{i}.kernel"] = block.conv.kernel
            out[f"block{i}.bias"] = block.conv.bias
            out[f"block{i}.gamma"] = block.bn.gamma
            out[f"block{i}.beta"] = block.bn.beta
        return out

    def has_untrained_statistics(self) -> bool:
        """True when running statistics are still at their initial values."""
        if self.steps > 0:
            return False
        return all(
            np.all(b.bn.running_mean == 0.0) and np.all(b.bn.running_var == 1.0)
            for b in self.blocks
        )


def expected_shapes(spec: NetworkSpec) -> list[dict[str, tuple[int, ...]]]:
    shapes = []
    for i in range(spec.m + 1):
        final = i == spec.m
        c_in = 1 if i == 0 else spec.n
        c_out = spec.out_channels if final else spec.n
        k = 1 if final else 3
        shapes.append(
            {
                "kernel": (c_out, c_in, k, k, k),
                "bias": (c_out,),
                "gamma": (c_out,),
                "beta": (c_out,),
                "running_mean": (c_out,),
                "running_var": (c_out,),
            }
        )
    return shapes


def init_params(
    spec: NetworkSpec,
    seed: int,
    slope: float = DEFAULT_SLOPE,
    bn_eps: float = DEFAULT_BN_EPS,
    bn_momentum: float = DEFAULT_BN_MOMENTUM,
) -> ModelParams:
    """He-normal kernels (variance 2 / fan_in), zero bias, identity batch norm."""
    rng = np.random.default_rng(seed)
    blocks = []
    for shapes in expected_shapes(spec):
        k_shape = shapes["kernel"]
        fan_in = int(np.prod(k_shape[1:]))
        kernel = rng.normal(0.0, math.sqrt(2.0 / fan_in), size=k_shape)
        conv = ConvLayerParams(kernel=kernel, bias=np.zeros(k_shape[0]))
        bn = BatchNormParams.identity(k_shape[0], momentum=bn_momentum, eps=bn_eps)
        blocks.append(Block(conv=conv, bn=bn))
    return ModelParams(spec=spec, blocks=blocks, seed=seed, slope=slope)


@dataclass
class BlockTape:
    x: np.ndarray
    bn_cache: BatchNormCache
    pre_activation: np.ndarray


@dataclass
class Tape:
    blocks: list[BlockTape] = field(default_factory=list)

    def activation_masks(self) -> list[np.ndarray]:
        return [b.pre_activation > 0 for b in self.blocks]


def _check_input(params: ModelParams, x: Tensor5) -> None:
    if x.ndim != 5 or x.shape[1] != 1:
        raise NetworkError(f"Expected single-channel (N, 1, D, H, W) input, got {x.shape}")
    rf = params.spec.receptive_field
    if min(x.shape[2:]) < rf:
        raise NetworkError(f"Input spatial dims {x.shape[2:]} smaller than receptive field {rf}")


def forward_with_tape(params: ModelParams, x: Tensor5, training: bool) -> tuple[Tensor5, Tape]:
    """Forward pass that keeps what :func:`backward` needs."""
    _check_input(params, x)
    tape = Tape()
    h = np.asarray(x, dtype=np.float64)
    for block in params.blocks:
        z = conv3d_forward(h, block.conv, exact=not training)
        z, cache = batchnorm_forward(z, block.bn, training)
        tape.blocks.append(BlockTape(x=h, bn_cache=cache, pre_activation=z))
        h = leaky_relu(z, params.slope)
    return h, tape


def forward(params: ModelParams, x: Tensor5, training: bool = False) -> Tensor5:
    """Map (N, 1, D, H, W) noise to (N, 3, D - 2m, H - 2m, W - 2m) output.

    Inference mode uses frozen statistics and the exact convolution path, so the
    result for a voxel is independent of the extent of ``x``.
    """
    _check_input(params, x)
    h = np.asarray(x, dtype=np.float64)
    for block in params.blocks:
        z = conv3d_forward(h, block.conv, exact=not training)
        z, _ = batchnorm_forward(z, block.bn, training)
        h = leaky_relu(z, params.slope)
    return h


def backward(
    params: ModelParams, tape: Tape, grad_out: Tensor5
) -> tuple[dict[str, np.ndarray], Tensor5]:
    """Gradients for every trainable array plus the input gradient."""
    if len(tape.blocks) != len(params.blocks):
        raise NetworkError("Tape does not belong to this network")
    grads: dict[str, np.ndarray] = {}
    g = grad_out
    for i in reversed(range(len(params.blocks))):
        block, rec = params.blocks[i], tape.blocks[i]
        g = leaky_relu_backward(rec.pre_activation, params.slope, g)
        g, grads[f"block{i}.gamma"], grads[f"block{i}.beta"] = batchnorm_backward(rec.bn_cache, g)
        g, grads[f"block{i}.kernel"], grads[f"block{i}.bias"] = conv3d_backward(
            rec.x, block.conv, g
        )
    return grads, g


# -- MM01 --


def _pack_array(arr: np.ndarray) -> bytes:
    head = struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape)
    return head + np.ascontiguousarray(arr, dtype="<f8").tobytes()


def save_model(params: ModelParams, path: Path | str) -> None:
    spec = params.spec
    first_bn = params.blocks[0].bn
    body = bytearray(
        _MM01_HEADER.pack(
            MM01_MAGIC,
            MM01_VERSION,
            spec.m,
            spec.n,
            params.seed,
            params.steps,
            params.slope,
            first_bn.eps,
            first_bn.momentum,
        )
    )
    for block in params.blocks:
        for name in _ARRAY_FIELDS:
            owner = block.conv if name in ("kernel", "bias") else block.bn
            body += _pack_array(getattr(owner, name))
    body += _CRC.pack(zlib.crc32(body))
    Path(path).write_bytes(bytes(body))


class _Reader:
    def __init__(self, raw: bytes, path: Path | str) -> None:
        self.raw = raw
        self.pos = 0
        self.path = path

    def take(self, count: int) -> bytes:
        if self.pos + count > len(self.raw):
            raise ModelFormatError(f"{self.path}: truncated model payload")
        chunk = self.raw[self.pos : self.pos + count]
        self.pos += count
        return chunk

    def array(self) -> np.ndarray:
        (ndim,) = struct.unpack("<B", self.take(1))
        shape = struct.unpack(f"<{ndim}I", self.take(4 * ndim))
        count = int(np.prod(shape)) if shape else 1
        data = np.frombuffer(self.take(8 * count), dtype="<f8")
        return data.astype(np.float64).reshape(shape)


def load_model(path: Path | str) -> ModelParams:
    raw = Path(path).read_bytes()
    if len(raw) < _MM01_HEADER.size + _CRC.size:
        raise ModelFormatError(f"{path}: file shorter than the MM01 header")
    body, (crc,) = raw[: -_CRC.size], _CRC.unpack(raw[-_CRC.size :])
    magic, version = raw[:4], struct.unpack_from("<H", raw, 4)[0]
    if magic != MM01_MAGIC:
        raise ModelFormatError(f"{path}: bad magic {magic!r}, expected {MM01_MAGIC!r}")
    if version != MM01_VERSION:
        raise ModelFormatError(f"{path}: unsupported MM01 version {version}")
    if zlib.crc32(body) != crc:
        raise ModelFormatError(f"{path}: checksum mismatch (corrupt or truncated payload)")

    reader = _Reader(body, path)
    _, _, m, n, seed, steps, slope, eps, momentum = _MM01_HEADER.unpack(
        reader.take(_MM01_HEADER.size)
    )
    try:
        spec = NetworkSpec(m=m, n=n)
    except NetworkError as exc:
        raise ModelFormatError(f"{path}: {exc}") from exc

    blocks = []
    for i, shapes in enumerate(expected_shapes(spec)):
        arrays = {}
        for name in _ARRAY_FIELDS:
            arr = reader.array()
            if arr.shape != shapes[name]:
                raise ModelFormatError(
                    f"{path}: block {i} {name} has shape {arr.shape}, expected {shapes[name]}"
                )
            arrays[name] = arr
        conv = ConvLayerParams(kernel=arrays["kernel"], bias=arrays["bias"])
        bn = BatchNormParams(
            gamma=arrays["gamma"],
            beta=arrays["beta"],
            running_mean=arrays["running_mean"],
            running_var=arrays["running_var"],
            momentum=momentum,
            eps=eps,
        )
        blocks.append(Block(conv=conv, bn=bn))
    if reader.pos != len(body):
        raise ModelFormatError(f"{path}: {len(body) - reader.pos} trailing bytes after arrays")
    return ModelParams(spec=spec, blocks=blocks, seed=seed, steps=steps, slope=slope)


def model_hash(path: Path | str) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
