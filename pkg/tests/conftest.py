"""Shared fixtures: small synthetic references, tiny networks, logger reset."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
import pytest

from poreforge.core.synthetic import blob_image, stripe_image
from poreforge.core.volume import Image2D, save_image
from poreforge.nn.network import NetworkSpec, init_params


@pytest.fixture(autouse=True)
def _reset_package_logger():
    """The CLI installs a rich handler and stops propagation; undo it after each test."""
    yield
    logger = logging.getLogger("poreforge")
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
    logger.setLevel(logging.NOTSET)
    logger.propagate = True


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def blob_ref() -> Image2D:
    """32x32 smoothed-noise reference at porosity 0.3."""
    return blob_image(32, 0.3, sigma=2.0, seed=7)


@pytest.fixture
def stripes() -> Image2D:
    return stripe_image(16, period=4)


@pytest.fixture
def tiny_params():
    """L2C4 with non-trivial batch-norm statistics, as after training."""
    params = init_params(NetworkSpec(m=2, n=4), seed=3)
    r = np.random.default_rng(5)
    for block in params.blocks:
        c = block.bn.channels
        block.bn.running_mean[:] = r.normal(0.0, 0.1, c)
        block.bn.running_var[:] = r.uniform(0.5, 1.5, c)
        block.bn.gamma[:] = r.uniform(0.8, 1.2, c)
        block.bn.beta[:] = r.normal(0.0, 0.1, c)
        block.conv.bias[:] = r.normal(0.0, 0.1, c)
    params.steps = 10
    return params


@pytest.fixture
def ref_pgm(tmp_path: Path, blob_ref: Image2D) -> Path:
    path = tmp_path / "ref.pgm"
    save_image(blob_ref, path)
    return path
