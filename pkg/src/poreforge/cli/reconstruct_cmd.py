"""reconstruct command: tiled inference from a trained model, one or more realizations."""

from __future__ import annotations

import logging
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
from poreforge.core.schema import ReconReport, TrainReport
from poreforge.core.volume import save_volume
from poreforge.nn.network import load_model, model_hash
from poreforge.pipeline.reconstructor import reconstruct
from poreforge.utils.output import output, output_table
from poreforge.utils.paths import (
    realization_name,
    report_path,
    run_dir,
    write_json,
    write_manifest,
)

logger = logging.getLogger(__name__)

_COLUMNS = ["seed", "dims", "tiles", "target_porosity", "achieved_porosity", "wall_time_s"]


def _training_porosity(model: Path) -> float | None:
    path = report_path(model)
    if not path.exists():
        logger.debug("No training report at %s", path)
        return None
    return TrainReport.model_validate_json(path.read_text()).reference_porosity


def reconstruct_command(
    model: Path = typer.Argument(..., help="Trained model (.mm01)"),
    dims: Optional[tuple[int, int, int]] = typer.Option(
        None, "--dims", help="Output size L H W"
    ),
    sub_block: Optional[tuple[int, int, int]] = typer.Option(
        None, "--sub-block", help="Tile size L H W"
    ),
    porosity: Optional[float] = typer.Option(None, "--porosity", help="Target porosity"),
    method: Optional[str] = typer.Option(None, "--method", help="quantile or otsu"),
    count: Optional[int] = typer.Option(None, "--count", "-k", min=1, help="Realizations"),
    seed: Optional[int] = SEED_OPTION,
    config: Optional[Path] = CONFIG_OPTION,
    out: Optional[Path] = OUT_OPTION,
    overrides: Optional[list[str]] = SET_OPTION,
    fmt: Optional[str] = FORMAT_OPTION,
) -> None:
    """Generate 3D volumes; realization k uses seed + k."""
    flags = {
        "reconstruct.dims": list(dims) if dims is not None else None,
        "reconstruct.sub_block": list(sub_block) if sub_block is not None else None,
        "reconstruct.porosity": porosity,
        "reconstruct.method": method,
        "reconstruct.count": count,
        "reconstruct.seed": seed,
        "output_dir": out,
    }
    cfg = load_config(config, overrides, flags)
    rc = cfg.reconstruct
    reports: list[ReconReport] = []
    with handle_errors():
        params = load_model(model)
        digest = model_hash(model)
        target = _training_porosity(model)
        directory = run_dir(cfg.output_dir)
        files: list[Path] = []
        for k in range(rc.count):
            name = realization_name("recon", k, rc.count)
            result = reconstruct(params, rc, target_porosity=target, seed=rc.seed + k)
            binary_path = directory / f"{name}.mv01"
            save_volume(result.binary, binary_path)
            files.append(binary_path)
            update = {
                "model_path": str(model),
                "model_sha256": digest,
                "binary_path": str(binary_path),
            }
            if rc.save_continuous:
                continuous_path = directory / f"{name}_continuous.mv01"
                save_volume(result.continuous, continuous_path)
                files.append(continuous_path)
                update["continuous_path"] = str(continuous_path)
            report = result.report.model_copy(update=update)
            files.append(write_json(directory / f"{name}.report.json", report))
            reports.append(report)
        seeds = {"reconstruct": rc.seed, "train": params.seed}
        write_manifest("reconstruct", directory, files, config=cfg, seeds=seeds)

    if fmt == "json":
        output([r.model_dump(mode="json") for r in reports], fmt="json")
    else:
        rows = [r.model_dump(mode="json") for r in reports]
        output_table(rows, _COLUMNS, fmt="text", title=f"Reconstructions from {model.name}")
