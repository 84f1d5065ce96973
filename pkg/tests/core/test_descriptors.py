"""Tests for S2, lineal path, two-point cluster, l_cor and local porosity."""

from __future__ import annotations

import numpy as np
import pytest

from poreforge.core.descriptors import (
    DescriptorError,
    autocorrelation_distance,
    cluster_labels,
    linear_path,
    local_porosity_distribution,
    mean_absolute_deviation,
    two_point_cluster,
    two_point_probability,
    window_counts,
)
from poreforge.core.synthetic import stripe_image
from poreforge.core.volume import Image2D, Volume3D, porosity
from tests.helpers import (
    brute_cluster,
    brute_lineal,
    brute_s2,
    brute_window_counts,
)


def _axes(ndim: int) -> list[tuple[str, int]]:
    return [("x", 1), ("y", 0)] if ndim == 2 else [("x", 2), ("y", 1), ("z", 0)]


def _random_grids(count: int, seed: int = 0):
    r = np.random.default_rng(seed)
    for _ in range(count):
        ndim = int(r.integers(2, 4))
        shape = tuple(int(s) for s in r.integers(3, 17 if ndim == 2 else 9, size=ndim))
        phi = r.uniform(0.1, 0.9)
        yield (r.random(shape) < phi).astype(np.uint8)


class TestBruteForceOracle:
    def test_s2_lineal_cluster_match_enumeration(self):
        for grid in _random_grids(100):
            max_lag = min(grid.shape) - 1
            s2 = two_point_probability(grid, max_lag)
            lp = linear_path(grid, max_lag)
            c2 = two_point_cluster(grid, max_lag)
            ref_s2 = brute_s2(grid, max_lag)
            ref_lp = brute_lineal(grid, max_lag)
            ref_c2 = brute_cluster(cluster_labels(grid.astype(bool)), max_lag)
            for name, axis in _axes(grid.ndim):
                assert np.array_equal(s2.per_axis[name], ref_s2[axis])
                assert np.array_equal(lp.per_axis[name], ref_lp[axis])
                assert np.array_equal(c2.per_axis[name], ref_c2[axis])
            assert np.all(c2.mean <= s2.mean + 1e-15)
            assert np.all(lp.mean <= s2.mean + 1e-15)

    def test_lineal_path_never_increases(self):
        for grid in _random_grids(100, seed=2):
            lp = linear_path(grid, min(grid.shape) - 1)
            for values in lp.per_axis.values():
                assert np.all(np.diff(values) <= 0)
            assert np.all(np.diff(lp.mean) <= 1e-15)

    def test_window_counts_match_enumeration(self):
        for grid in _random_grids(30, seed=1):
            side = max(1, min(grid.shape) // 2)
            assert np.array_equal(window_counts(grid, side), brute_window_counts(grid, side))


class TestTwoPoint:
    def test_lag_zero_is_porosity(self, blob_ref):
        curve = two_point_probability(blob_ref, 10)
        assert curve.mean[0] == pytest.approx(porosity(blob_ref), abs=1e-15)

    def test_all_pore_volume(self):
        v = Volume3D.from_labels(np.ones((4, 4, 4), dtype=np.uint8))
        assert np.all(two_point_probability(v, 3).mean == 1.0)

    def test_max_lag_must_fit(self):
        with pytest.raises(DescriptorError):
            two_point_probability(np.ones((4, 4), dtype=np.uint8), 4)

    def test_stripes_alternate(self):
        img = stripe_image(16, period=4)
        x = two_point_probability(img, 4).per_axis["x"]
        # Bands of width 2 every 4 columns; lag 4 realigns every band.
        assert x[0] == 0.5
        assert x[2] == 0.0
        assert x[4] == 0.5

    def test_csv_layout(self):
        curve = two_point_probability(np.ones((3, 3), dtype=np.uint8), 1)
        lines = curve.to_csv().splitlines()
        assert lines[0] == "r,x,y,mean"
        assert lines[1] == "0,1,1,1"


class TestCluster:
    def test_disconnected_pores_do_not_count(self):
        grid = np.array([[1, 0, 1, 0, 1]], dtype=np.uint8)
        c2 = two_point_cluster(np.vstack([grid, np.zeros_like(grid)]), 1)
        assert c2.per_axis["x"][0] == pytest.approx(0.3)
        assert c2.per_axis["x"][1] == 0.0

    def test_full_connectivity_joins_diagonals(self):
        grid = np.array([[1, 0], [0, 1]], dtype=np.uint8)
        face = cluster_labels(grid.astype(bool))
        full = cluster_labels(grid.astype(bool), full_connectivity=True)
        assert face.max() == 2
        assert full.max() == 1


class TestAutocorrelationDistance:
    def test_degenerate_porosity(self):
        img = Image2D(np.ones((8, 8), dtype=np.uint8))
        corr = autocorrelation_distance(two_point_probability(img, 4), 1.0)
        assert corr.l_cor == 1
        assert corr.converged
        assert corr.warnings

    def test_uncorrelated_noise_settles_immediately(self):
        r = np.random.default_rng(3)
        grid = (r.random((256, 256)) < 0.4).astype(np.uint8)
        corr = autocorrelation_distance(two_point_probability(grid, 20), porosity(grid))
        assert corr.converged
        assert corr.l_cor <= 2

    def test_periodic_structure_never_settles(self):
        img = stripe_image(32, period=8)
        curve = two_point_probability(img, 12)
        corr = autocorrelation_distance(curve, porosity(img))
        assert not corr.converged
        assert corr.l_cor == 12


class TestLocalPorosity:
    def test_probabilities_sum_to_one(self, blob_ref):
        hist = local_porosity_distribution(blob_ref, window_side=8, bin_width=0.1)
        assert hist.probabilities.sum() == pytest.approx(1.0)
        assert len(hist.probabilities) == 11
        assert len(hist.bin_edges) == 12

    def test_full_window_lands_in_last_bin(self):
        hist = local_porosity_distribution(np.ones((4, 4, 4), dtype=np.uint8), 2, 0.25)
        assert hist.probabilities[-1] == 1.0

    def test_exact_bin_boundaries(self):
        # Every 2x2 window of a checkerboard holds exactly half pore.
        grid = (np.indices((6, 6)).sum(axis=0) % 2).astype(np.uint8)
        hist = local_porosity_distribution(grid, 2, 0.1)
        assert hist.probabilities[5] == 1.0

    def test_window_too_large(self):
        with pytest.raises(DescriptorError):
            local_porosity_distribution(np.ones((4, 4), dtype=np.uint8), 5)


def test_mean_absolute_deviation_uses_common_prefix():
    assert mean_absolute_deviation(np.array([1.0, 2.0, 3.0]), np.array([1.0, 1.0])) == 0.5
