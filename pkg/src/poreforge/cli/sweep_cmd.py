"""sweep command: train and reconstruct once per network depth (and width)."""

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
)
from poreforge.nn.network import model_hash, save_model
from poreforge.pipeline.runs import load_references
from poreforge.pipeline.sweep import sweep
from poreforge.utils.config import ConfigError
from poreforge.utils.output import output, output_table
from poreforge.utils.paths import report_path, run_dir, write_json, write_manifest

REPORT_FILE = "sweep.json"

_COLUMNS = ["name", "receptive_field", "final_loss", "porosity", "l_cor", "converged", "s2_mad"]


def _int_list(raw: Optional[str]) -> Optional[list[int]]:
    if raw is None:
        return None
    try:
        return [int(v) for v in raw.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"Expected comma-separated integers, got '{raw}'") from exc


def sweep_command(
    image: Optional[Path] = typer.Argument(None, help="Reference image (else input.reference)"),
    depths: Optional[str] = typer.Option(None, "--depths", help="Comma-separated m values"),
    widths: Optional[str] = typer.Option(None, "--widths", help="Comma-separated n values"),
    side: Optional[int] = typer.Option(None, "--side", min=2, help="Reconstruction cube side"),
    iterations: Optional[int] = typer.Option(None, "--iterations", "-n", min=1),
    seed: Optional[int] = SEED_OPTION,
    config: Optional[Path] = CONFIG_OPTION,
    out: Optional[Path] = OUT_OPTION,
    overrides: Optional[list[str]] = SET_OPTION,
    fmt: Optional[str] = FORMAT_OPTION,
) -> None:
    """One model per (m, n); reports porosity, l_cor and S2 deviation of each."""
    with handle_errors():
        flags = {
            "input.reference": image.resolve() if image is not None else None,
            "sweep.depths": _int_list(depths),
            "sweep.widths": _int_list(widths),
            "sweep.side": side,
            "train.iterations": iterations,
            "train.seed": seed,
            "output_dir": out,
        }
    cfg = load_config(config, overrides, flags)
    with handle_errors():
        result = sweep(cfg, load_references(cfg.input))
        directory = run_dir(cfg.output_dir)
        files = []
        for entry in result.entries:
            model_path = directory / f"{entry.row.name}.mm01"
            save_model(entry.params, model_path)
            train_report = entry.train_report.model_copy(
                update={"model_path": str(model_path), "model_sha256": model_hash(model_path)}
            )
            files += [model_path, write_json(report_path(model_path), train_report)]
        files.append(write_json(directory / REPORT_FILE, result.report))
        seeds = {"train": cfg.train.seed, "reconstruct": cfg.reconstruct.seed}
        write_manifest("sweep", directory, files, config=cfg, seeds=seeds)

    if fmt == "json":
        output(result.report, fmt="json")
    else:
        rows = [r.model_dump() for r in result.report.rows]
        title = f"Sweep (reference l_cor {result.report.reference_l_cor})"
        output_table(rows, _COLUMNS, fmt="text", title=title)
