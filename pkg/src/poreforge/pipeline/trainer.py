"""Training loops for the LmCn network.

``train_basic`` forwards a fresh noise cube every step and reads three slices
of the output. ``train_improved`` draws one persistent noise volume up front and
forwards only the three thin slabs whose outputs are exactly the slices needed,
which cuts compute and memory from cubic to quadratic in the slice size.
"""

from __future__ import annotations

import logging
import time
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from poreforge.core.schema import AdamConfig, SpecSummary, TrainConfig, TrainReport
from poreforge.nn.losses import (
    AcfDescription,
    DescriptionFunction,
    LossError,
    Orientation,
    ReferenceSet,
    SlicePlane,
    extract_slices,
    get_description,
    scatter_slice_grads,
)
from poreforge.nn.network import (
    ModelParams,
    NetworkSpec,
    backward,
    forward_with_tape,
    init_params,
)
from poreforge.nn.optimizer import AdamHyperparams, AdamState, adam_step

logger = logging.getLogger(__name__)

NOISE_MARGIN = 32
NOISE_RATIO = 100
_ACTIVATION_COPIES = 4

# Normal axis of each plane within a (C, D, H, W) output.
_NORMAL_AXIS = {Orientation.XY: 1, Orientation.XZ: 2, Orientation.YZ: 3}

Grads = dict[str, np.ndarray]


class TrainingError(Exception):
    pass


@dataclass(frozen=True)
class SlabWindow:
    """Where a slab sits in the noise volume and which output plane it produces."""

    orientation: Orientation
    coord: int
    noise: tuple[slice, slice, slice]
    output: tuple[slice, slice, slice]


def adam_hyperparams(adam: AdamConfig | AdamHyperparams | None) -> AdamHyperparams:
    if adam is None:
        return AdamHyperparams()
    if isinstance(adam, AdamHyperparams):
        return adam
    return AdamHyperparams(lr=adam.lr, beta1=adam.beta1, beta2=adam.beta2, eps=adam.eps)


def spec_summary(spec: NetworkSpec) -> SpecSummary:
    return SpecSummary(**spec.to_dict())


def slice_size(refs: ReferenceSet, cfg: TrainConfig) -> int:
    return cfg.slice_size if cfg.slice_size is not None else refs.min_side


def default_noise_side(size: int, spec: NetworkSpec) -> int:
    return size + 2 * spec.m + NOISE_MARGIN


def estimate_memory_mb(spec: NetworkSpec, input_voxels: int) -> float:
    """Upper bound on activation memory for one training forward and backward."""
    per_block = _ACTIVATION_COPIES * max(spec.n, spec.out_channels) * input_voxels * 8
    return per_block * (spec.m + 1) / 2**20


def _check_memory(spec: NetworkSpec, cfg: TrainConfig, voxels: int) -> None:
    needed = estimate_memory_mb(spec, voxels)
    if needed > cfg.memory_budget_mb:
        raise TrainingError(
            f"Training input of {voxels} voxels needs about {needed:.0f} MB, over the "
            f"{cfg.memory_budget_mb:.0f} MB budget; reduce train.slice_size or use improved mode"
        )


def _prepare(
    refs: ReferenceSet,
    spec: NetworkSpec,
    cfg: TrainConfig,
    description: DescriptionFunction | None,
) -> tuple[int, DescriptionFunction]:
    size = slice_size(refs, cfg)
    if size < spec.receptive_field:
        raise TrainingError(
            f"Slice size {size} is smaller than the receptive field {spec.receptive_field}"
        )
    if description is None:
        try:
            description = get_description(cfg.descriptor, refs)
        except LossError as exc:
            raise TrainingError(str(exc)) from exc
    if isinstance(description, AcfDescription):
        limit = min(size, refs.min_side)
        if description.max_lag >= limit:
            raise TrainingError(
                f"ACF max_lag={description.max_lag} must be smaller than the slice and "
                f"reference side ({limit})"
            )
    return size, description


def _accumulate(total: Grads | None, grads: Grads) -> Grads:
    if total is None:
        return {k: v.copy() for k, v in grads.items()}
    for k, v in grads.items():
        total[k] += v
    return total


def _run(
    refs: ReferenceSet,
    spec: NetworkSpec,
    cfg: TrainConfig,
    step: Callable[[ModelParams], tuple[float, Grads]],
    adam: AdamHyperparams,
    params: ModelParams | None,
    warnings: list[str],
    **report_fields,
) -> tuple[ModelParams, TrainReport]:
    if params is None:
        params = init_params(spec, cfg.seed)
    state = AdamState(hyper=adam)
    trainable = params.trainable()
    losses: list[float] = []
    start = time.perf_counter()
    for it in range(cfg.iterations):
        total: Grads | None = None
        loss_sum = 0.0
        # Batch elements are reduced in draw order.
        for _ in range(cfg.batch_size):
            loss, grads = step(params)
            loss_sum += loss
            total = _accumulate(total, grads)
        adam_step(state, trainable, {k: v / cfg.batch_size for k, v in total.items()})
        losses.append(loss_sum / cfg.batch_size)
        if (it + 1) % cfg.log_every == 0 or it + 1 == cfg.iterations:
            logger.info("iteration %d/%d loss %.6g", it + 1, cfg.iterations, losses[-1])
    # Running statistics are frozen from here on; reconstruction uses inference mode.
    params.steps += cfg.iterations
    wall = time.perf_counter() - start
    logger.info("Trained %s for %d iterations in %.1f s", spec.name, cfg.iterations, wall)
    report = TrainReport(
        mode=cfg.mode,
        iterations=cfg.iterations,
        batch_size=cfg.batch_size,
        seed=cfg.seed,
        losses=losses,
        wall_time_s=wall,
        reference_porosity=refs.porosity,
        spec=spec_summary(spec),
        config=cfg.model_dump(mode="json"),
        warnings=list(spec.warnings) + warnings,
        **report_fields,
    )
    return params, report


def train_basic(
    refs: ReferenceSet,
    spec: NetworkSpec,
    cfg: TrainConfig,
    *,
    adam: AdamConfig | AdamHyperparams | None = None,
    description: DescriptionFunction | None = None,
    params: ModelParams | None = None,
) -> tuple[ModelParams, TrainReport]:
    """Each step forwards a fresh (S + 2m)^3 noise cube and slices its output."""
    size, describe = _prepare(refs, spec, cfg, description)
    side = size + 2 * spec.m
    _check_memory(spec, cfg, side**3)
    rng = np.random.default_rng([cfg.seed, 1])

    def step(p: ModelParams) -> tuple[float, Grads]:
        x = rng.random((1, 1, side, side, side))
        y, tape = forward_with_tape(p, x, training=True)
        point = tuple(int(v) for v in rng.integers(0, size, size=3))
        loss, slice_grads = describe(extract_slices(y, point))
        grads, _ = backward(p, tape, scatter_slice_grads(y.shape, point, slice_grads))
        return loss, grads

    return _run(
        refs,
        spec,
        cfg,
        step,
        adam_hyperparams(adam),
        params,
        [],
        descriptor=describe.name,
        slice_size=size,
    )


def slab_windows(
    anchor: tuple[int, int, int], size: int, m: int, side: int
) -> list[SlabWindow]:
    """Slabs through an output anchor (x, y, z) of a ``side``-voxel noise volume.

    A full forward of the volume has output side ``side - 2m``. Each slab covers
    (S + 2m) x (S + 2m) voxels in plane and 2m + 1 along the normal, so its own
    forward is the S x S output plane through the anchor. The in-plane origin is
    centred on the anchor and clamped to the volume.
    """
    out_side = side - 2 * m
    if out_side < size:
        raise TrainingError(f"Noise side {side} too small for {size}-voxel slices with m={m}")
    if not all(0 <= c < out_side for c in anchor):
        raise TrainingError(f"Anchor {anchor} outside output range [0, {out_side})")
    x, y, z = anchor

    def origin(c: int) -> int:
        return min(max(c - size // 2, 0), out_side - size)

    def span(o: int) -> slice:
        return slice(o, o + size)

    def padded(o: int) -> slice:
        return slice(o, o + size + 2 * m)

    def thin(c: int) -> slice:
        return slice(c, c + 2 * m + 1)

    def at(c: int) -> slice:
        return slice(c, c + 1)

    oz, oy, ox = origin(z), origin(y), origin(x)
    xy = SlabWindow(
        Orientation.XY, z, (thin(z), padded(oy), padded(ox)), (at(z), span(oy), span(ox))
    )
    xz = SlabWindow(
        Orientation.XZ, y, (padded(oz), thin(y), padded(ox)), (span(oz), at(y), span(ox))
    )
    yz = SlabWindow(
        Orientation.YZ, x, (padded(oz), padded(oy), thin(x)), (span(oz), span(oy), at(x))
    )
    return [xy, xz, yz]


def slab_plane(y: np.ndarray, orientation: Orientation) -> np.ndarray:
    """Squeeze a slab output (1, C, ...) to its (C, S1, S2) plane."""
    return np.take(y[0], 0, axis=_NORMAL_AXIS[orientation])


def train_improved(
    refs: ReferenceSet,
    spec: NetworkSpec,
    cfg: TrainConfig,
    *,
    adam: AdamConfig | AdamHyperparams | None = None,
    description: DescriptionFunction | None = None,
    params: ModelParams | None = None,
) -> tuple[ModelParams, TrainReport]:
    """One persistent noise volume; three thin slab forwards per batch element."""
    size, describe = _prepare(refs, spec, cfg, description)
    m = spec.m
    side = cfg.noise_side if cfg.noise_side is not None else default_noise_side(size, spec)
    if side < size + 2 * m + 1:
        raise TrainingError(
            f"train.noise_side={side} must be at least S + 2m + 1 = {size + 2 * m + 1}"
        )
    _check_memory(spec, cfg, (size + 2 * m) ** 2 * (2 * m + 1))
    warnings: list[str] = []
    draws = cfg.batch_size * cfg.iterations
    if side**3 < NOISE_RATIO * draws:
        msg = (
            f"Noise volume {side}^3 = {side**3} voxels is small for K*T = {draws} anchor "
            f"draws (want at least {NOISE_RATIO}x); slabs will overlap heavily"
        )
        logger.warning(msg)
        warnings.append(msg)

    rng = np.random.default_rng([cfg.seed, 1])
    noise = rng.random((side, side, side))
    noise.flags.writeable = False
    out_side = side - 2 * m

    def step(p: ModelParams) -> tuple[float, Grads]:
        anchor = tuple(int(v) for v in rng.integers(0, out_side, size=3))
        windows = slab_windows(anchor, size, m, side)
        planes, tapes = [], []
        for w in windows:
            y, tape = forward_with_tape(p, noise[w.noise][np.newaxis, np.newaxis], training=True)
            planes.append(SlicePlane(w.orientation, w.coord, slab_plane(y, w.orientation)))
            tapes.append(tape)
        loss, slice_grads = describe(planes)
        total: Grads | None = None
        for w, tape, g in zip(windows, tapes, slice_grads):
            grad_y = np.expand_dims(g, axis=_NORMAL_AXIS[w.orientation])[np.newaxis]
            grads, _ = backward(p, tape, grad_y)
            total = _accumulate(total, grads)
        return loss, total

    return _run(
        refs,
        spec,
        cfg,
        step,
        adam_hyperparams(adam),
        params,
        warnings,
        descriptor=describe.name,
        slice_size=size,
        noise_side=side,
    )


def train(
    refs: ReferenceSet, spec: NetworkSpec, cfg: TrainConfig, **kwargs
) -> tuple[ModelParams, TrainReport]:
    """Dispatch on ``cfg.mode``."""
    fn = train_basic if cfg.mode == "basic" else train_improved
    return fn(refs, spec, cfg, **kwargs)
