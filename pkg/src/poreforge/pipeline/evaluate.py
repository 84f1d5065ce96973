"""Descriptor comparison of reconstructions against a target.

The target is a ground-truth volume or, failing that, the 2D reference image;
3D curves are then compared with the reference's axis-mean curves. Local
porosity histograms are only compared between volumes.
"""

from __future__ import annotations

import logging
from collections.abc import Mapping
from dataclasses import dataclass

from poreforge.core.descriptors import (
    DescriptorCurve,
    DescriptorError,
    PorosityHistogram,
    autocorrelation_distance,
    linear_path,
    local_porosity_distribution,
    mean_absolute_deviation,
    two_point_cluster,
    two_point_probability,
)
from poreforge.core.schema import CurveComparison, DesignConfig, EvaluateConfig, EvaluationReport
from poreforge.core.volume import Image2D, Volume3D, VolumeMode, grid_of, porosity

logger = logging.getLogger(__name__)

TARGET_LABEL = "target"
REFERENCE_LABEL = "reference"
_CURVE_DESCRIPTORS = ("s2", "lineal_path", "cluster")


class EvaluationError(Exception):
    pass


@dataclass(frozen=True)
class EvaluationResult:
    report: EvaluationReport
    files: dict[str, str]


def _curve(
    name: str, g: Image2D | Volume3D, max_lag: int, full_connectivity: bool
) -> DescriptorCurve:
    if name == "s2":
        return two_point_probability(g, max_lag)
    if name == "lineal_path":
        return linear_path(g, max_lag)
    return two_point_cluster(g, max_lag, full_connectivity)


def _check_binary(label: str, v: Volume3D) -> None:
    if v.mode is not VolumeMode.binary:
        raise EvaluationError(f"Volume '{label}' is continuous; evaluate binarized volumes")


def _effective(requested: int, limit: int, what: str, warnings: list[str]) -> int:
    if requested <= limit:
        return requested
    msg = f"{what}={requested} exceeds what the smallest grid allows; using {limit}"
    logger.warning(msg)
    warnings.append(msg)
    return limit


def evaluate(
    volumes: Mapping[str, Volume3D],
    cfg: EvaluateConfig,
    ground_truth: Volume3D | None = None,
    reference: Image2D | None = None,
    design: DesignConfig | None = None,
) -> EvaluationResult:
    """Compute the configured descriptors for every volume and compare with the target.

    ``design`` supplies the l_cor band and window, so correlation lengths match
    the ones the prior reports.

    Returns the summary report and the CSV files keyed by file name
    (``<label>_<descriptor>.csv``).
    """
    if not volumes:
        raise EvaluationError("Nothing to evaluate")
    design = design if design is not None else DesignConfig()
    if ground_truth is not None and reference is not None:
        raise EvaluationError("Give either a ground-truth volume or a reference image, not both")
    for label, v in volumes.items():
        if label in (TARGET_LABEL, REFERENCE_LABEL):
            raise EvaluationError(f"Volume label '{label}' is reserved")
        _check_binary(label, v)
    if ground_truth is not None:
        _check_binary(TARGET_LABEL, ground_truth)
        for label, v in volumes.items():
            if v.dims != ground_truth.dims:
                raise EvaluationError(
                    f"Volume '{label}' has dims {v.dims}, ground truth has {ground_truth.dims}"
                )

    grids: dict[str, Image2D | Volume3D] = dict(volumes)
    target_label: str | None = None
    if ground_truth is not None:
        target_label = TARGET_LABEL
        grids[TARGET_LABEL] = ground_truth
    elif reference is not None:
        target_label = REFERENCE_LABEL
        grids[REFERENCE_LABEL] = reference

    warnings: list[str] = []
    smallest = min(min(grid_of(g).shape) for g in grids.values())
    max_lag = _effective(cfg.max_lag, smallest - 1, "evaluate.max_lag", warnings)
    smallest_volume = min(min(v.dims) for v in grids.values() if isinstance(v, Volume3D))
    window = _effective(cfg.lpd_window, smallest_volume, "evaluate.lpd_window", warnings)

    files: dict[str, str] = {}
    curves: dict[str, dict[str, DescriptorCurve]] = {}
    l_cor: dict[str, int] = {}
    try:
        for label, g in grids.items():
            curves[label] = {}
            for name in _CURVE_DESCRIPTORS:
                if name in cfg.descriptors or name == "s2":
                    curves[label][name] = _curve(name, g, max_lag, cfg.full_connectivity)
            corr = autocorrelation_distance(
                curves[label]["s2"], porosity(g), design.lcor_eps_rel, design.lcor_window
            )
            l_cor[label] = corr.l_cor
            warnings.extend(f"{label}: {w}" for w in corr.warnings)

        histograms: dict[str, PorosityHistogram] = {}
        if "lpd" in cfg.descriptors:
            for label, g in grids.items():
                if isinstance(g, Volume3D):
                    histograms[label] = local_porosity_distribution(g, window, cfg.lpd_bin_width)
    except DescriptorError as exc:
        raise EvaluationError(str(exc)) from exc

    comparisons: list[CurveComparison] = []
    for name in cfg.descriptors:
        for label in grids:
            if name == "lpd":
                if label not in histograms:
                    continue
                csv_name = f"{label}_lpd.csv"
                files[csv_name] = histograms[label].to_csv()
                target = target_label if target_label in histograms else None
                deviation = None
                if target is not None and label != target:
                    deviation = mean_absolute_deviation(
                        histograms[label].probabilities, histograms[target].probabilities
                    )
            else:
                csv_name = f"{label}_{name}.csv"
                files[csv_name] = curves[label][name].to_csv()
                target = target_label
                deviation = None
                if target is not None and label != target:
                    deviation = mean_absolute_deviation(
                        curves[label][name].mean, curves[target][name].mean
                    )
            comparisons.append(
                CurveComparison(
                    descriptor=name,
                    volume=label,
                    target=target if label != target else None,
                    mean_absolute_deviation=deviation,
                    csv=csv_name,
                )
            )
            if deviation is not None:
                logger.info("%s %s vs %s: MAD %.6g", name, label, target, deviation)

    report = EvaluationReport(
        volumes=list(volumes),
        reference=target_label,
        max_lag=max_lag,
        lpd_window=window if "lpd" in cfg.descriptors else None,
        porosity={label: porosity(g) for label, g in grids.items()},
        curves=comparisons,
        l_cor=l_cor,
        warnings=warnings,
    )
    return EvaluationResult(report=report, files=files)
