"""Tests for swap-based simulated annealing."""

from __future__ import annotations

import numpy as np
import pytest

from poreforge.core.schema import AnnealConfig
from poreforge.core.synthetic import blob_image, stripe_image
from poreforge.core.volume import Image2D, Volume3D, porosity
from poreforge.pipeline.anneal import (
    AnnealError,
    TraceRow,
    anneal,
    energy,
    reference_curves,
    trace_csv,
)


@pytest.fixture
def small_ref() -> Image2D:
    return blob_image(16, 0.3, sigma=1.5, seed=1)


class TestAnneal:
    def test_porosity_is_conserved(self, small_ref):
        result = anneal(small_ref, AnnealConfig(max_swaps=300, seed=2))
        assert isinstance(result.grid, Image2D)
        assert porosity(result.grid) == porosity(small_ref)
        assert result.report.swaps == 300
        assert len(result.trace) == 300

    def test_best_energy_never_increases(self, small_ref):
        result = anneal(small_ref, AnnealConfig(max_swaps=500, seed=3))
        best = np.array(result.best_energies)
        assert np.all(np.diff(best) <= 0)
        assert result.report.best_energy == best[-1]
        assert result.report.best_energy <= result.report.initial_energy

    def test_returned_grid_has_best_energy(self, small_ref):
        cfg = AnnealConfig(max_swaps=400, seed=4, weights={"s2": 1.0, "lineal_path": 0.5})
        result = anneal(small_ref, cfg)
        targets = reference_curves(small_ref, ["s2", "lineal_path"], 8)
        assert energy(result.grid, targets, cfg.weights) == result.report.best_energy

    def test_incremental_energy_matches_recount(self, blob_ref):
        weights = {"s2": 1.0, "lineal_path": 1.0}
        cfg = AnnealConfig(max_swaps=2000, seed=5, audit=True, weights=weights)
        result = anneal(blob_ref, cfg)
        assert result.report.audited
        assert result.report.swaps == 2000

    def test_three_dimensional(self, small_ref):
        cfg = AnnealConfig(dims=[6, 6, 6], max_swaps=200, seed=6, audit=True)
        result = anneal(small_ref, cfg)
        assert isinstance(result.grid, Volume3D)
        assert result.grid.dims == (6, 6, 6)
        assert porosity(result.grid) == round(porosity(small_ref) * 216) / 216

    def test_same_seed_same_result(self, small_ref):
        cfg = AnnealConfig(max_swaps=200, seed=8)
        a, b = anneal(small_ref, cfg), anneal(small_ref, cfg)
        assert np.array_equal(a.grid.data, b.grid.data)
        assert a.trace == b.trace

    def test_energy_threshold_stops_early(self, small_ref):
        result = anneal(small_ref, AnnealConfig(max_swaps=100, energy_threshold=1e9))
        assert result.report.swaps == 0

    def test_single_phase_reference(self):
        with pytest.raises(AnnealError, match="single phase"):
            anneal(Image2D(np.ones((8, 8), dtype=np.uint8)), AnnealConfig(max_swaps=1))

    def test_lag_must_fit(self, small_ref):
        with pytest.raises(AnnealError):
            anneal(small_ref, AnnealConfig(dims=[4, 4], max_lag=4, max_swaps=1))

    @pytest.mark.slow
    def test_stripe_reference_energy_falls(self):
        ref = stripe_image(32, period=8)
        result = anneal(ref, AnnealConfig(max_swaps=200_000, seed=0))
        assert porosity(result.grid) == porosity(ref)
        assert result.report.best_energy < 0.05 * result.report.initial_energy


def test_trace_csv():
    text = trace_csv([TraceRow(0, 0.5, 1.25, True), TraceRow(1, 0.5, 1.0, False)])
    assert text.splitlines() == [
        "swap_index,temperature,energy,accepted",
        "0,0.5,1.25,1",
        "1,0.5,1,0",
    ]
