"""train command: design and optimize an LmCn generator on the reference."""

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
from poreforge.nn.network import model_hash, save_model
from poreforge.pipeline.runs import load_references, train_from_config
from poreforge.utils.paths import report_path, run_dir, write_json, write_manifest

MODEL_FILE = "model.mm01"

_TRAIN_FIELDS = [
    "mode",
    "descriptor",
    "iterations",
    "batch_size",
    "slice_size",
    "noise_side",
    "seed",
    "reference_porosity",
    "wall_time_s",
    "model_path",
]


def train_command(
    image: Optional[Path] = typer.Argument(None, help="Reference image (else input.reference)"),
    iterations: Optional[int] = typer.Option(None, "--iterations", "-n", min=1),
    mode: Optional[str] = typer.Option(None, "--mode", help="basic or improved"),
    descriptor: Optional[str] = typer.Option(None, "--descriptor", help="gram or acf"),
    m: Optional[int] = typer.Option(None, "--m", min=1, help="Force the network depth"),
    seed: Optional[int] = SEED_OPTION,
    config: Optional[Path] = CONFIG_OPTION,
    out: Optional[Path] = OUT_OPTION,
    overrides: Optional[list[str]] = SET_OPTION,
    fmt: Optional[str] = FORMAT_OPTION,
) -> None:
    """Train a generator; writes model.mm01, its report and a manifest."""
    flags = {
        "input.reference": image.resolve() if image is not None else None,
        "train.iterations": iterations,
        "train.mode": mode,
        "train.descriptor": descriptor,
        "train.seed": seed,
        "design.m": m,
        "output_dir": out,
    }
    cfg = load_config(config, overrides, flags)
    with handle_errors():
        refs = load_references(cfg.input)
        params, report = train_from_config(cfg, refs)
        directory = run_dir(cfg.output_dir)
        model_path = directory / MODEL_FILE
        save_model(params, model_path)
        report = report.model_copy(
            update={"model_path": str(model_path), "model_sha256": model_hash(model_path)}
        )
        json_path = write_json(report_path(model_path), report)
        write_manifest(
            "train", directory, [model_path, json_path], config=cfg, seeds={"train": cfg.train.seed}
        )
    show_summary(report, fmt, f"Trained {report.spec.name}", _TRAIN_FIELDS)
    if fmt != "json":
        typer.echo(f"final loss: {report.losses[-1]:.6g}")
