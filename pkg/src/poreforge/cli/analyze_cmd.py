"""Root commands analyze and design: prior extraction and network recommendation."""

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
    show_summary,
)
from poreforge.core.descriptors import CorrelationLength
from poreforge.core.schema import RunConfig
from poreforge.nn.network import design_from_prior
from poreforge.pipeline.runs import RunError, analyze_image, load_reference, prior_report
from poreforge.pipeline.trainer import spec_summary
from poreforge.utils.paths import run_dir, write_json, write_manifest, write_text

_PRIOR_FIELDS = [
    "image",
    "height",
    "width",
    "porosity",
    "max_lag",
    "l_cor",
    "l_cor_um",
    "converged",
    "s2_csv",
]
_SPEC_FIELDS = ["name", "m", "n", "receptive_field"]


def _image_path(image: Optional[Path], cfg: RunConfig) -> Path:
    if image is not None:
        return image
    if cfg.input.reference is None:
        raise RunError("No image given and input.reference is not set")
    return cfg.input.reference


def register_analyze_commands(app: typer.Typer) -> None:
    """Register analyze and design as root commands."""

    @app.command()
    def analyze(
        image: Optional[Path] = typer.Argument(None, help="Binary PGM reference image"),
        max_lag: Optional[int] = typer.Option(None, "--max-lag", min=1, help="Largest S2 lag"),
        config: Optional[Path] = CONFIG_OPTION,
        out: Optional[Path] = OUT_OPTION,
        overrides: Optional[list[str]] = SET_OPTION,
        fmt: Optional[str] = FORMAT_OPTION,
    ) -> None:
        """Porosity, S2, autocorrelation distance and recommended network of an image."""
        cfg = load_config(config, overrides, {"design.max_lag": max_lag, "output_dir": out})
        with handle_errors():
            path = _image_path(image, cfg)
            prior = analyze_image(load_reference(path, cfg.input.crop), cfg.design)
            directory = run_dir(cfg.output_dir)
            csv_path = write_text(directory / f"{path.stem}_s2.csv", prior.curve.to_csv())
            report = prior_report(prior, str(path), s2_csv=str(csv_path))
            json_path = write_json(directory / f"{path.stem}_prior.json", report)
            write_manifest("analyze", directory, [csv_path, json_path], config=cfg)
        show_summary(report, fmt, f"Prior: {path.name}", _PRIOR_FIELDS)
        if fmt != "json":
            show_summary(report.recommended, fmt, "Recommended network", _SPEC_FIELDS)

    @app.command()
    def design(
        image: Optional[Path] = typer.Argument(None, help="Binary PGM reference image"),
        l_cor: Optional[int] = typer.Option(
            None, "--l-cor", min=1, help="Use this autocorrelation distance instead of an image"
        ),
        n: Optional[int] = typer.Option(None, "--n", min=1, help="Channels per block"),
        m_cap: Optional[int] = typer.Option(None, "--m-cap", min=1, help="Largest depth"),
        m: Optional[int] = typer.Option(None, "--m", min=1, help="Force the depth"),
        config: Optional[Path] = CONFIG_OPTION,
        overrides: Optional[list[str]] = SET_OPTION,
        fmt: Optional[str] = FORMAT_OPTION,
    ) -> None:
        """Recommend LmCn from an image or a known autocorrelation distance."""
        cfg = load_config(
            config, overrides, {"design.n": n, "design.m_cap": m_cap, "design.m": m}
        )
        with handle_errors():
            if l_cor is not None:
                d = cfg.design
                spec = design_from_prior(CorrelationLength(l_cor, True), d.n, d.m_cap, d.m)
            else:
                path = _image_path(image, cfg)
                spec = analyze_image(load_reference(path, cfg.input.crop), cfg.design).spec
        show_summary(spec_summary(spec), fmt, "Recommended network", [*_SPEC_FIELDS, "warnings"])
