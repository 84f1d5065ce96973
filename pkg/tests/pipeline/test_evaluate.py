"""Tests for descriptor comparison of reconstructions."""

from __future__ import annotations

import numpy as np
import pytest

from poreforge.core.descriptors import autocorrelation_distance, two_point_probability
from poreforge.core.schema import DesignConfig, EvaluateConfig
from poreforge.core.synthetic import blob_volume
from poreforge.core.volume import Volume3D, VolumeMode, porosity
from poreforge.pipeline.evaluate import EvaluationError, evaluate


@pytest.fixture
def volumes() -> dict[str, Volume3D]:
    return {
        "a": blob_volume(10, 0.3, sigma=1.0, seed=1),
        "b": blob_volume(10, 0.3, sigma=2.0, seed=2),
    }


def _rows(report, descriptor):
    return {c.volume: c for c in report.curves if c.descriptor == descriptor}


class TestAgainstReference:
    def test_curves_and_files(self, volumes, blob_ref):
        cfg = EvaluateConfig(max_lag=5, lpd_window=4)
        result = evaluate(volumes, cfg, reference=blob_ref)
        report = result.report
        assert report.reference == "reference"
        assert report.volumes == ["a", "b"]
        assert set(report.porosity) == {"a", "b", "reference"}
        s2 = _rows(report, "s2")
        assert s2["a"].target == "reference"
        assert s2["a"].mean_absolute_deviation >= 0
        assert s2["reference"].target is None
        assert s2["reference"].mean_absolute_deviation is None
        assert "a_cluster.csv" in result.files
        assert "reference_lineal_path.csv" in result.files
        assert result.files["a_s2.csv"].startswith("r,x,y,z,mean\n")
        assert result.files["reference_s2.csv"].startswith("r,x,y,mean\n")

    def test_local_porosity_only_for_volumes(self, volumes, blob_ref):
        result = evaluate(volumes, EvaluateConfig(max_lag=5, lpd_window=4), reference=blob_ref)
        lpd = _rows(result.report, "lpd")
        assert set(lpd) == {"a", "b"}
        assert lpd["a"].mean_absolute_deviation is None
        assert "reference_lpd.csv" not in result.files
        assert result.report.lpd_window == 4


class TestAgainstGroundTruth:
    def test_identical_volume_has_zero_deviation(self, volumes):
        truth = volumes["a"]
        result = evaluate({"copy": truth}, EvaluateConfig(max_lag=5, lpd_window=4), truth)
        for row in result.report.curves:
            if row.volume == "copy":
                assert row.target == "target"
                assert row.mean_absolute_deviation == 0.0

    def test_dims_must_match(self, volumes):
        truth = blob_volume(8, 0.3, sigma=1.0)
        with pytest.raises(EvaluationError, match="dims"):
            evaluate(volumes, EvaluateConfig(), ground_truth=truth)


class TestOptions:
    def test_clamps_lag_and_window(self, volumes):
        result = evaluate(volumes, EvaluateConfig(max_lag=40, lpd_window=30))
        assert result.report.max_lag == 9
        assert result.report.lpd_window == 10
        assert len(result.report.warnings) >= 2

    def test_descriptor_subset_still_reports_l_cor(self, volumes):
        cfg = EvaluateConfig(descriptors=["lineal_path"], max_lag=5)
        result = evaluate(volumes, cfg)
        assert set(result.files) == {"a_lineal_path.csv", "b_lineal_path.csv"}
        assert set(result.report.l_cor) == {"a", "b"}
        assert result.report.lpd_window is None
        assert result.report.reference is None

    def test_l_cor_follows_design_band(self, volumes):
        loose = DesignConfig(lcor_eps_rel=2.0, lcor_window=1)
        result = evaluate(volumes, EvaluateConfig(max_lag=5), design=loose)
        assert result.report.l_cor == {"a": 1, "b": 1}

        tight = DesignConfig(lcor_eps_rel=0.01, lcor_window=2)
        result = evaluate(volumes, EvaluateConfig(max_lag=5), design=tight)
        for label, v in volumes.items():
            curve = two_point_probability(v, 5)
            expected = autocorrelation_distance(curve, porosity(v), 0.01, 2).l_cor
            assert result.report.l_cor[label] == expected


class TestErrors:
    def test_empty(self):
        with pytest.raises(EvaluationError):
            evaluate({}, EvaluateConfig())

    def test_both_targets(self, volumes, blob_ref):
        with pytest.raises(EvaluationError, match="either"):
            evaluate(volumes, EvaluateConfig(), volumes["a"], blob_ref)

    def test_reserved_label(self, volumes):
        with pytest.raises(EvaluationError, match="reserved"):
            evaluate({"target": volumes["a"]}, EvaluateConfig())

    def test_continuous_volume(self):
        v = Volume3D(np.zeros((4, 4, 4, 3)), VolumeMode.continuous)
        with pytest.raises(EvaluationError, match="continuous"):
            evaluate({"c": v}, EvaluateConfig())
