"""sa command: simulated-annealing baseline reconstruction."""

from __future__ import annotations

from pathlib import Path
from typing import Optional

import typer

from poreforge.cli._shared import (
    CONFIG_OPTION,
    FORMAT_OPTION,
    OUT_OPTION,
    SEED_OPTION,
    SET_OPTION,
    handle_errors,
    load_config,
    show_summary,
)
from poreforge.core.volume import Image2D, save_image, save_volume
from poreforge.pipeline.anneal import anneal, trace_csv
from poreforge.pipeline.runs import RunError, load_reference
from poreforge.utils.paths import run_dir, write_json, write_manifest, write_text

_FIELDS = [
    "dims",
    "porosity",
    "initial_energy",
    "best_energy",
    "final_energy",
    "t0",
    "swaps",
    "accepted",
    "audited",
    "result_path",
]


def sa_command(
    image: Optional[Path] = typer.Argument(None, help="Reference image (else input.reference)"),
    max_swaps: Optional[int] = typer.Option(None, "--max-swaps", min=1),
    audit: Optional[bool] = typer.Option(
        None, "--audit/--no-audit", help="Check incremental energy against a full recount"
    ),
    seed: Optional[int] = SEED_OPTION,
    config: Optional[Path] = CONFIG_OPTION,
    out: Optional[Path] = OUT_OPTION,
    overrides: Optional[list[str]] = SET_OPTION,
    fmt: Optional[str] = FORMAT_OPTION,
) -> None:
    """Anneal a random grid towards the reference's S2 / lineal-path curves."""
    flags = {"sa.max_swaps": max_swaps, "sa.audit": audit, "sa.seed": seed, "output_dir": out}
    cfg = load_config(config, overrides, flags)
    with handle_errors():
        path = image if image is not None else cfg.input.reference
        if path is None:
            raise RunError("No image given and input.reference is not set")
        result = anneal(load_reference(path, cfg.input.crop), cfg.sa)
        directory = run_dir(cfg.output_dir)
        if isinstance(result.grid, Image2D):
            result_path = directory / "sa_result.pgm"
            save_image(result.grid, result_path)
        else:
            result_path = directory / "sa_result.mv01"
            save_volume(result.grid, result_path)
        trace_path = write_text(directory / "sa_trace.csv", trace_csv(result.trace))
        report = result.report.model_copy(
            update={"result_path": str(result_path), "trace_path": str(trace_path)}
        )
        json_path = write_json(directory / "sa.json", report)
        write_manifest(
            "sa",
            directory,
            [result_path, trace_path, json_path],
            config=cfg,
            seeds={"sa": cfg.sa.seed},
        )
    show_summary(report, fmt, "Simulated annealing", _FIELDS)
