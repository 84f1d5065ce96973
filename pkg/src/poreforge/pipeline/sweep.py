"""Depth and width sweep: one model per (m, n), each judged by its reconstruction.

Every model is trained with the same settings and reconstructs a cube of the
reference side. The reconstruction's porosity, autocorrelation distance and
S2 deviation from the reference sit next to the network's receptive field.
"""

from __future__ import annotations

import itertools
import logging
import time
from dataclasses import dataclass

from poreforge.core.descriptors import (
    autocorrelation_distance,
    mean_absolute_deviation,
    two_point_probability,
)
from poreforge.core.schema import RunConfig, SweepReport, SweepRow, TrainReport
from poreforge.core.volume import porosity
from poreforge.nn.losses import Orientation, ReferenceSet
from poreforge.nn.network import ModelParams, NetworkSpec
from poreforge.pipeline.reconstructor import reconstruct
from poreforge.pipeline.runs import analyze_image, default_max_lag, train_from_config

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SweepEntry:
    params: ModelParams
    train_report: TrainReport
    row: SweepRow


@dataclass(frozen=True)
class SweepResult:
    entries: list[SweepEntry]
    report: SweepReport


def sweep(cfg: RunConfig, refs: ReferenceSet) -> SweepResult:
    image = refs.images[Orientation.XY]
    side = cfg.sweep.side if cfg.sweep.side is not None else refs.min_side
    max_lag = min(default_max_lag(image), side - 1)
    design = cfg.design.model_copy(update={"max_lag": max_lag})
    prior = analyze_image(image, design)
    widths = cfg.sweep.widths if cfg.sweep.widths is not None else [cfg.design.n]
    block = cfg.reconstruct.sub_block
    if block is not None:
        block = tuple(min(b, side) for b in block)
    recon_cfg = cfg.reconstruct.model_copy(
        update={"dims": (side, side, side), "sub_block": block, "count": 1}
    )

    entries: list[SweepEntry] = []
    warnings: list[str] = list(prior.correlation.warnings)
    for m, n in itertools.product(cfg.sweep.depths, widths):
        spec = NetworkSpec(m=m, n=n)
        start = time.perf_counter()
        params, train_report = train_from_config(cfg, refs, spec)
        result = reconstruct(params, recon_cfg, target_porosity=train_report.reference_porosity)
        curve = two_point_probability(result.binary, max_lag)
        phi = porosity(result.binary)
        corr = autocorrelation_distance(curve, phi, cfg.design.lcor_eps_rel, cfg.design.lcor_window)
        warnings.extend(f"{spec.name}: {w}" for w in corr.warnings)
        row = SweepRow(
            m=m,
            n=n,
            name=spec.name,
            receptive_field=spec.receptive_field,
            final_loss=train_report.losses[-1],
            porosity=phi,
            l_cor=corr.l_cor,
            converged=corr.converged,
            s2_mad=mean_absolute_deviation(curve.mean, prior.curve.mean),
            wall_time_s=time.perf_counter() - start,
        )
        logger.info(
            "%s: RF %d, l_cor %d (reference %d), S2 MAD %.4g",
            spec.name,
            row.receptive_field,
            row.l_cor,
            prior.correlation.l_cor,
            row.s2_mad,
        )
        entries.append(SweepEntry(params=params, train_report=train_report, row=row))

    report = SweepReport(
        reference_porosity=prior.phi,
        reference_l_cor=prior.correlation.l_cor,
        side=side,
        max_lag=max_lag,
        rows=[e.row for e in entries],
        warnings=warnings,
    )
    return SweepResult(entries=entries, report=report)
