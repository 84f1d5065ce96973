"""Tests for artifact naming and run manifests."""

from __future__ import annotations

import hashlib
import json

from poreforge import __version__
from poreforge.core.schema import RunConfig
from poreforge.utils.paths import (
    MANIFEST_FILE,
    realization_name,
    report_path,
    run_dir,
    sha256_file,
    write_manifest,
    write_text,
)


def test_report_path():
    assert report_path("runs/model.mm01").name == "model.report.json"


def test_realization_names():
    assert realization_name("recon", 0, 1) == "recon"
    assert realization_name("recon", 2, 5) == "recon_002"
    assert realization_name("recon", 7, 1200) == "recon_0007"


def test_sha256(tmp_path):
    path = write_text(tmp_path / "a.txt", "hello")
    assert sha256_file(path) == hashlib.sha256(b"hello").hexdigest()


def test_manifest(tmp_path):
    out = run_dir(tmp_path / "run")
    a = write_text(out / "a.csv", "r\n0\n")
    b = write_text(out / "nested" / "b.txt", "x")
    path = write_manifest("analyze", out, [b, a], config=RunConfig(), seeds={"train": 4})
    assert path.name == MANIFEST_FILE
    data = json.loads(path.read_text())
    assert data["command"] == "analyze"
    assert data["poreforge_version"] == __version__
    assert list(data["files"]) == ["a.csv", "nested/b.txt"]
    assert data["files"]["a.csv"] == sha256_file(a)
    assert data["seeds"] == {"train": 4}
    assert data["config"]["train"]["iterations"] == 1000
