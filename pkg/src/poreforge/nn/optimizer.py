"""Adam with bias correction, applied in place to named parameter arrays."""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np


class OptimizerError(Exception):
    pass


@dataclass(frozen=True)
class AdamHyperparams:
    lr: float = 0.1
    beta1: float = 0.1
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self) -> None:
        if self.lr < 0:
            raise OptimizerError(f"Learning rate must be non-negative, got {self.lr}")
        for name in ("beta1", "beta2"):
            value = getattr(self, name)
            if not 0.0 <= value < 1.0:
                raise OptimizerError(f"{name} must be in [0, 1), got {value}")
        if self.eps <= 0:
            raise OptimizerError(f"eps must be positive, got {self.eps}")


def default_hyperparams() -> AdamHyperparams:
    return AdamHyperparams()


@dataclass
class AdamState:
    hyper: AdamHyperparams = field(default_factory=default_hyperparams)
    t: int = 0
    first: dict[str, np.ndarray] = field(default_factory=dict)
    second: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    state: AdamState, params: Mapping[str, np.ndarray], grads: Mapping[str, np.ndarray]
) -> AdamState:
    """One Adam update; ``params`` arrays are modified in place.

    The step counter is incremented before the bias corrections are formed.
    """
    if set(params) != set(grads):
        raise OptimizerError(
            f"Gradient names do not match parameters: {sorted(set(params) ^ set(grads))}"
        )
    for name, g in grads.items():
        if g.shape != params[name].shape:
            raise OptimizerError(f"{name}: gradient shape {g.shape} != {params[name].shape}")
        if not np.isfinite(g).all():
            raise OptimizerError(f"{name}: non-finite gradient")

    h = state.hyper
    state.t += 1
    bc1 = 1.0 - h.beta1**state.t
    bc2 = 1.0 - h.beta2**state.t
    for name in params:
        g = grads[name]
        if name not in state.first:
            state.first[name] = np.zeros_like(params[name])
            state.second[name] = np.zeros_like(params[name])
        m = state.first[name]
        v = state.second[name]
        m *= h.beta1
        m += (1.0 - h.beta1) * g
        v *= h.beta2
        v += (1.0 - h.beta2) * (g * g)
        p = params[name]
        p -= h.lr * (m / bc1) / (np.sqrt(v / bc2) + h.eps)
    return state
