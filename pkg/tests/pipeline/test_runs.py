"""Tests for config-driven stage wiring and the depth sweep."""

from __future__ import annotations

import pytest

from poreforge.core.schema import DesignConfig, InputConfig, RunConfig
from poreforge.core.synthetic import blob_image
from poreforge.core.volume import save_image
from poreforge.nn.losses import Orientation
from poreforge.pipeline.runs import (
    RunError,
    analyze_image,
    crop_center,
    description_for,
    design_for,
    load_references,
    prior_report,
    train_from_config,
)
from poreforge.pipeline.sweep import sweep


def _tiny_config(**sections) -> RunConfig:
    data = {
        "design": {"m": 1, "n": 2},
        "train": {"iterations": 1, "slice_size": 8},
        "bank": {"widths": [4]},
    }
    data.update(sections)
    return RunConfig.model_validate(data)


class TestReferences:
    def test_crop_is_centered(self, blob_ref):
        crop = crop_center(blob_ref, 10)
        assert (crop.height, crop.width) == (10, 10)
        assert (crop.data == blob_ref.data[11:21, 11:21]).all()

    def test_crop_too_large(self, blob_ref):
        with pytest.raises(RunError):
            crop_center(blob_ref, 40)

    def test_single_reference_is_isotropic(self, ref_pgm):
        refs = load_references(InputConfig(reference=ref_pgm, crop=16))
        assert refs.is_isotropic
        assert refs.min_side == 16

    def test_three_references(self, tmp_path, blob_ref, stripes):
        paths = {}
        for name, image in (("xy", blob_ref), ("xz", stripes), ("yz", blob_ref)):
            paths[name] = tmp_path / f"{name}.pgm"
            save_image(image, paths[name])
        refs = load_references(InputConfig(references=paths))
        assert not refs.is_isotropic
        assert refs.min_side == 16

    def test_no_reference(self):
        with pytest.raises(RunError):
            load_references(InputConfig())


class TestAnalyze:
    def test_prior(self, blob_ref):
        prior = analyze_image(blob_ref, DesignConfig())
        assert len(prior.curve.lags) == 17
        assert prior.phi == pytest.approx(0.3, abs=1e-3)
        assert 1 <= prior.spec.m <= 12
        if prior.correlation.converged:
            assert prior.spec.receptive_field >= prior.correlation.l_cor

    def test_report_in_microns(self):
        image = blob_image(32, 0.3, sigma=2.0, seed=7, pixel_size=2.0)
        report = prior_report(analyze_image(image, DesignConfig()), "img.pgm")
        assert report.l_cor_um == 2.0 * report.l_cor
        assert report.recommended.name == f"L{report.recommended.m}C16"

    def test_lag_must_fit(self, blob_ref):
        with pytest.raises(RunError):
            analyze_image(blob_ref, DesignConfig(max_lag=32))

    def test_anisotropic_design_uses_deepest_plane(self, tmp_path, blob_ref, stripes):
        paths = {}
        for name, image in (("xy", blob_ref), ("xz", stripes), ("yz", blob_ref)):
            paths[name] = tmp_path / f"{name}.pgm"
            save_image(image, paths[name])
        refs = load_references(InputConfig(references=paths))
        assert design_for(refs, DesignConfig(m_cap=9)).m == 9


class TestTrainFromConfig:
    def test_uses_design_and_bank(self, ref_pgm):
        cfg = _tiny_config()
        refs = load_references(InputConfig(reference=ref_pgm))
        params, report = train_from_config(cfg, refs)
        assert params.spec.name == "L1C2"
        assert report.iterations == 1
        assert description_for(cfg, refs).bank.layers[0].out_channels == 4

    def test_acf_description(self, ref_pgm):
        train = {"iterations": 1, "slice_size": 8, "descriptor": "acf"}
        cfg = _tiny_config(train=train, acf={"max_lag": 3})
        refs = load_references(InputConfig(reference=ref_pgm))
        assert description_for(cfg, refs).max_lag == 3


class TestSweep:
    def test_one_row_per_model(self, ref_pgm):
        cfg = _tiny_config(sweep={"depths": [1, 2], "widths": [2], "side": 8})
        refs = load_references(InputConfig(reference=ref_pgm))
        result = sweep(cfg, refs)
        assert [r.name for r in result.report.rows] == ["L1C2", "L2C2"]
        assert result.report.side == 8
        assert result.report.max_lag == 7
        for row in result.report.rows:
            assert row.porosity == pytest.approx(result.report.reference_porosity, abs=1 / 512)
            assert row.s2_mad >= 0
        assert result.entries[1].params.spec.m == 2
        assert refs.images[Orientation.XY].height == 32
