"""synth command: synthetic binary references for smoke runs and tests."""

from __future__ import annotations

from pathlib import Path
from typing import Optional

import typer

from poreforge.cli._shared import FORMAT_OPTION, OUT_OPTION, SEED_OPTION, handle_errors
from poreforge.core.synthetic import SyntheticError, blob_image, blob_volume, stripe_image
from poreforge.core.volume import porosity, save_image, save_volume
from poreforge.utils.output import output, output_table
from poreforge.utils.paths import run_dir, write_manifest

DEFAULT_OUT = Path("runs")


def synth_command(
    size: int = typer.Option(128, "--size", min=2, help="Side length in voxels"),
    phi: float = typer.Option(0.3, "--porosity", "-p", help="Target porosity"),
    sigma: float = typer.Option(3.0, "--sigma", help="Gaussian smoothing length"),
    dim: int = typer.Option(2, "--dim", min=2, max=3, help="2 (PGM) or 3 (MV01)"),
    periodic: bool = typer.Option(False, "--periodic", help="Wrap-around smoothing"),
    stripes: Optional[int] = typer.Option(
        None, "--stripes", min=2, help="Pore bands with this period instead of blobs (2D)"
    ),
    pixel_size: Optional[float] = typer.Option(None, "--pixel-size", help="Micrometers"),
    name: str = typer.Option("synthetic", "--name", help="Output file stem"),
    seed: Optional[int] = SEED_OPTION,
    out: Optional[Path] = OUT_OPTION,
    fmt: Optional[str] = FORMAT_OPTION,
) -> None:
    """Thresholded smoothed noise at an exact porosity, or a stripe pattern."""
    seed = 0 if seed is None else seed
    with handle_errors():
        directory = run_dir(out if out is not None else DEFAULT_OUT)
        if dim == 3:
            if stripes is not None:
                raise SyntheticError("Stripe references are 2D only")
            grid = blob_volume(size, phi, sigma, seed, periodic)
            path = directory / f"{name}.mv01"
            save_volume(grid, path)
        else:
            if stripes is not None:
                grid = stripe_image(size, stripes, pixel_size=pixel_size)
            else:
                grid = blob_image(size, phi, sigma, seed, periodic, pixel_size)
            path = directory / f"{name}.pgm"
            save_image(grid, path)
        write_manifest("synth", directory, [path], seeds={"synth": seed})

    summary = {"path": str(path), "size": size, "dim": dim, "porosity": porosity(grid)}
    if fmt == "json":
        output(summary, fmt="json")
    else:
        rows = [{"field": k, "value": v} for k, v in summary.items()]
        output_table(rows, ["field", "value"], fmt="text", title="Synthetic reference")
