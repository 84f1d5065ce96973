"""Run directories, artifact naming, file hashes and run manifests."""

from __future__ import annotations

import hashlib
import logging
import platform
from collections.abc import Iterable, Mapping
from pathlib import Path

import numpy as np
from pydantic import BaseModel

from poreforge import __version__
from poreforge.core.schema import RunConfig, RunManifest

logger = logging.getLogger(__name__)

MANIFEST_FILE = "manifest.json"
REPORT_SUFFIX = ".report.json"
_CHUNK = 1 << 20


def run_dir(out: Path | str) -> Path:
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def sha256_file(path: Path | str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        while chunk := f.read(_CHUNK):
            digest.update(chunk)
    return digest.hexdigest()


def report_path(model_path: Path | str) -> Path:
    """Training report sitting next to a model: ``model.mm01`` -> ``model.report.json``."""
    path = Path(model_path)
    return path.with_name(path.stem + REPORT_SUFFIX)


def write_text(path: Path | str, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def write_json(path: Path | str, model: BaseModel) -> Path:
    return write_text(path, model.model_dump_json(indent=2) + "\n")


def realization_name(stem: str, index: int, count: int) -> str:
    """``stem`` for a single realization, ``stem_003`` style when there are several."""
    if count <= 1:
        return stem
    width = max(3, len(str(count - 1)))
    return f"{stem}_{index:0{width}d}"


def build_manifest(
    command: str,
    out_dir: Path | str,
    files: Iterable[Path | str],
    config: RunConfig | None = None,
    seeds: Mapping[str, int] | None = None,
) -> RunManifest:
    """Manifest with versions, the resolved config and sha256 of each file.

    File keys are paths relative to ``out_dir`` when the file lives under it.
    """
    root = Path(out_dir).resolve()
    hashes: dict[str, str] = {}
    for f in files:
        path = Path(f).resolve()
        try:
            key = str(path.relative_to(root))
        except ValueError:
            key = str(path)
        hashes[key] = sha256_file(path)
    return RunManifest(
        command=command,
        poreforge_version=__version__,
        numpy_version=np.__version__,
        python_version=platform.python_version(),
        config=config.model_dump(mode="json") if config is not None else {},
        seeds=dict(seeds or {}),
        files=dict(sorted(hashes.items())),
    )


def write_manifest(
    command: str,
    out_dir: Path | str,
    files: Iterable[Path | str],
    config: RunConfig | None = None,
    seeds: Mapping[str, int] | None = None,
) -> Path:
    manifest = build_manifest(command, out_dir, files, config, seeds)
    path = write_json(Path(out_dir) / MANIFEST_FILE, manifest)
    logger.debug("Wrote manifest for %s with %d files", command, len(manifest.files))
    return path
