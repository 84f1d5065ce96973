"""Tests for slab geometry and the two training loops."""

from __future__ import annotations

import numpy as np
import pytest

from poreforge.core.schema import TrainConfig
from poreforge.core.synthetic import stripe_image
from poreforge.nn.losses import AcfDescription, Orientation, ReferenceSet
from poreforge.nn.network import NetworkSpec, forward, init_params
from poreforge.nn.optimizer import AdamHyperparams
from poreforge.pipeline import trainer
from poreforge.pipeline.trainer import (
    TrainingError,
    default_noise_side,
    estimate_memory_mb,
    slab_plane,
    slab_windows,
    train,
    train_basic,
    train_improved,
)


@pytest.fixture
def refs(blob_ref) -> ReferenceSet:
    return ReferenceSet.isotropic(blob_ref)


def _short(**kwargs) -> TrainConfig:
    base = {"iterations": 2, "slice_size": 8, "log_every": 1, "seed": 5}
    base.update(kwargs)
    return TrainConfig(**base)


class TestSlabWindows:
    def test_slabs_reproduce_full_output_planes(self, tiny_params):
        m, size, side = 2, 6, 13
        noise = np.random.default_rng(0).random((side, side, side))
        full = forward(tiny_params, noise[np.newaxis, np.newaxis])
        picks = np.random.default_rng(1).integers(0, side - 2 * m, size=(6, 3))
        anchors = [(0, 0, 0), (8, 8, 8), (4, 1, 7), (2, 6, 3)] + [tuple(map(int, a)) for a in picks]
        for anchor in anchors:
            for w in slab_windows(anchor, size, m, side):
                y = forward(tiny_params, noise[w.noise][np.newaxis, np.newaxis])
                expected = full[0][(slice(None), *w.output)]
                assert np.array_equal(y[0], expected)
                assert slab_plane(y, w.orientation).shape == (3, size, size)

    def test_window_geometry(self):
        xy, xz, yz = slab_windows((5, 5, 5), 4, 1, 12)
        assert xy.orientation is Orientation.XY
        assert xy.coord == 5
        assert xy.noise == (slice(5, 8), slice(3, 9), slice(3, 9))
        assert xy.output == (slice(5, 6), slice(3, 7), slice(3, 7))
        assert xz.noise[1] == slice(5, 8)
        assert yz.noise[2] == slice(5, 8)

    def test_anchor_near_edge_is_clamped(self):
        xy, _, _ = slab_windows((9, 9, 0), 4, 1, 12)
        assert xy.output[1] == slice(6, 10)

    def test_anchor_outside(self):
        with pytest.raises(TrainingError):
            slab_windows((10, 0, 0), 4, 1, 12)

    def test_volume_too_small(self):
        with pytest.raises(TrainingError):
            slab_windows((0, 0, 0), 8, 2, 10)


class TestImproved:
    def test_short_run(self, refs):
        spec = NetworkSpec(m=1, n=4)
        params, report = train_improved(refs, spec, _short())
        assert len(report.losses) == 2
        assert all(np.isfinite(report.losses))
        assert params.steps == 2
        assert not params.has_untrained_statistics()
        assert report.noise_side == default_noise_side(8, spec)
        assert report.spec.name == "L1C4"
        assert report.reference_porosity == refs.porosity

    def test_same_seed_same_model(self, refs):
        spec = NetworkSpec(m=1, n=2)
        a, ra = train_improved(refs, spec, _short())
        b, rb = train_improved(refs, spec, _short())
        assert ra.losses == rb.losses
        assert np.array_equal(a.blocks[0].conv.kernel, b.blocks[0].conv.kernel)

    def test_small_noise_volume_warns(self, refs):
        cfg = _short(slice_size=6, noise_side=9, batch_size=4)
        _, report = train_improved(refs, NetworkSpec(m=1, n=2), cfg)
        assert any("overlap" in w for w in report.warnings)

    def test_noise_side_too_small(self, refs):
        with pytest.raises(TrainingError, match="noise_side"):
            train_improved(refs, NetworkSpec(m=1, n=2), _short(noise_side=10))

    @pytest.mark.slow
    def test_stripe_reference_loss_drops(self):
        stripes = ReferenceSet.isotropic(stripe_image(64, period=8))
        cfg = TrainConfig(iterations=300, seed=0, log_every=100)
        _, report = train_improved(stripes, NetworkSpec(m=3, n=8), cfg)
        assert len(report.losses) == 300
        assert np.mean(report.losses[-10:]) < 0.25 * report.losses[0]

    def test_persistent_noise_is_read_only(self, refs, monkeypatch):
        writable = []
        real = trainer.forward_with_tape

        def recording(p, x, training=False):
            writable.append(x.flags.writeable)
            return real(p, x, training=training)

        monkeypatch.setattr(trainer, "forward_with_tape", recording)
        train_improved(refs, NetworkSpec(m=1, n=2), _short())
        assert len(writable) == 6
        assert not any(writable)

    def test_acf_description(self, refs):
        description = AcfDescription(refs=refs, max_lag=3)
        _, report = train(refs, NetworkSpec(m=1, n=2), _short(), description=description)
        assert report.descriptor == "acf"


class TestBasic:
    def test_short_run(self, refs):
        params, report = train_basic(refs, NetworkSpec(m=1, n=2), _short(mode="basic"))
        assert report.mode == "basic"
        assert report.noise_side is None
        assert len(report.losses) == 2
        assert params.steps == 2

    def test_dispatch(self, refs):
        _, report = train(refs, NetworkSpec(m=1, n=2), _short(mode="basic", iterations=1))
        assert report.mode == "basic"

    def test_zero_learning_rate_only_moves_running_statistics(self, refs):
        spec = NetworkSpec(m=1, n=2)
        cfg = _short(mode="basic", iterations=1, batch_size=1)
        params, _ = train_basic(refs, spec, cfg, adam=AdamHyperparams(lr=0.0))
        initial = init_params(spec, cfg.seed)
        for name, value in params.trainable().items():
            assert np.array_equal(value, initial.trainable()[name]), name
        assert np.any(params.blocks[0].bn.running_mean != 0.0)
        assert np.any(params.blocks[0].bn.running_var != 1.0)

    def test_same_seed_same_model(self, refs):
        spec = NetworkSpec(m=1, n=2)
        cfg = _short(mode="basic", iterations=3, batch_size=2)
        a, ra = train_basic(refs, spec, cfg)
        b, rb = train_basic(refs, spec, cfg)
        assert ra.losses == rb.losses
        for name, value in a.trainable().items():
            assert np.array_equal(value, b.trainable()[name]), name
        for x, y in zip(a.blocks, b.blocks):
            assert np.array_equal(x.bn.running_mean, y.bn.running_mean)
            assert np.array_equal(x.bn.running_var, y.bn.running_var)

    def test_every_step_draws_new_noise(self, refs, monkeypatch):
        inputs = []
        real = trainer.forward_with_tape

        def recording(p, x, training=False):
            inputs.append(x.copy())
            return real(p, x, training=training)

        monkeypatch.setattr(trainer, "forward_with_tape", recording)
        train_basic(refs, NetworkSpec(m=1, n=2), _short(mode="basic", iterations=3, batch_size=2))
        assert len(inputs) == 6
        for i in range(len(inputs)):
            for j in range(i + 1, len(inputs)):
                assert not np.array_equal(inputs[i], inputs[j])


class TestErrors:
    def test_slice_smaller_than_receptive_field(self, refs):
        with pytest.raises(TrainingError, match="receptive field"):
            train_improved(refs, NetworkSpec(m=4, n=2), _short(slice_size=8))

    def test_acf_lag_too_large(self, refs):
        description = AcfDescription(refs=refs, max_lag=8)
        with pytest.raises(TrainingError, match="max_lag"):
            train_improved(refs, NetworkSpec(m=1, n=2), _short(), description=description)

    def test_memory_budget(self, refs):
        with pytest.raises(TrainingError, match="budget"):
            train_basic(refs, NetworkSpec(m=1, n=2), _short(memory_budget_mb=1e-3))

    def test_memory_estimate_grows_with_depth(self):
        assert estimate_memory_mb(NetworkSpec(m=4), 1000) > estimate_memory_mb(
            NetworkSpec(m=2), 1000
        )
