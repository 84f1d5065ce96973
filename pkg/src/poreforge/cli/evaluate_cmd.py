"""evaluate command: descriptor curves and deviations of volumes against a target."""

from __future__ import annotations

from pathlib import Path
from typing import Optional

import typer

from poreforge.cli._shared import (
    CONFIG_OPTION,
    FORMAT_OPTION,
    OUT_OPTION,
    SET_OPTION,
    handle_errors,
    load_config,
)
from poreforge.core.volume import load_image, load_volume
from poreforge.pipeline.evaluate import evaluate
from poreforge.utils.output import output, output_table
from poreforge.utils.paths import run_dir, write_json, write_manifest, write_text

REPORT_FILE = "evaluation.json"


def _labels(paths: list[Path]) -> list[str]:
    """File stems, suffixed with their position when two stems collide."""
    stems = [p.stem for p in paths]
    return [s if stems.count(s) == 1 else f"{s}_{i}" for i, s in enumerate(stems)]


def evaluate_command(
    volumes: list[Path] = typer.Argument(..., help="Binary reconstructions (.mv01)"),
    target: Optional[Path] = typer.Option(None, "--target", "-t", help="Ground-truth volume"),
    reference: Optional[Path] = typer.Option(
        None, "--reference", "-r", help="2D reference image, when no ground truth exists"
    ),
    max_lag: Optional[int] = typer.Option(None, "--max-lag", min=0),
    lpd_window: Optional[int] = typer.Option(None, "--lpd-window", min=1),
    config: Optional[Path] = CONFIG_OPTION,
    out: Optional[Path] = OUT_OPTION,
    overrides: Optional[list[str]] = SET_OPTION,
    fmt: Optional[str] = FORMAT_OPTION,
) -> None:
    """Compute S2, L, C2 and LPD; writes one CSV per curve plus evaluation.json."""
    flags = {"evaluate.max_lag": max_lag, "evaluate.lpd_window": lpd_window, "output_dir": out}
    cfg = load_config(config, overrides, flags)
    with handle_errors():
        loaded = {label: load_volume(p) for label, p in zip(_labels(volumes), volumes)}
        ground_truth = load_volume(target) if target is not None else None
        image = load_image(reference) if reference is not None else None
        result = evaluate(
            loaded, cfg.evaluate, ground_truth=ground_truth, reference=image, design=cfg.design
        )
        directory = run_dir(cfg.output_dir)
        files = [write_text(directory / name, text) for name, text in result.files.items()]
        files.append(write_json(directory / REPORT_FILE, result.report))
        write_manifest("evaluate", directory, files, config=cfg)

    report = result.report
    if fmt == "json":
        output(report, fmt="json")
        return
    rows = [
        {
            "descriptor": c.descriptor,
            "volume": c.volume,
            "target": c.target or "",
            "MAD": c.mean_absolute_deviation if c.mean_absolute_deviation is not None else "",
        }
        for c in report.curves
    ]
    output_table(rows, ["descriptor", "volume", "target", "MAD"], fmt="text", title="Curves")
    summary = [
        {"volume": label, "porosity": phi, "l_cor": report.l_cor.get(label, "")}
        for label, phi in report.porosity.items()
    ]
    output_table(summary, ["volume", "porosity", "l_cor"], fmt="text", title="Volumes")
