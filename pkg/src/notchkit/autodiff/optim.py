"""Adam with bias correction, operating on named parameter dicts."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import NumericError
from .tensor import Tensor


@dataclass
class OptimizerState:
    """First/second moment estimates plus the step counter for Adam.

    Moments are keyed by parameter name and start at zero the first time a
    parameter is seen, so the same state object can be built empty and fed
    straight into ``adam_step``.
    """
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.lr <= 0:
            raise ValueError(f"learning rate must be positive, got {self.lr}")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("betas must lie in [0, 1)")


def adam_step(params: dict[str, Tensor], state: OptimizerState) -> OptimizerState:
    """One in-place Adam update from the gradients stored on ``params``.

    Parameters with no accumulated gradient are treated as zero-gradient
    (their moments still decay).  Returns ``state`` for chaining; the update
    is fully deterministic given identical inputs.
    """
    state.step += 1
    t = state.step
    b1, b2 = np.float32(state.beta1), np.float32(state.beta2)
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    scale = np.float32(state.lr / c1)
    for name, p in params.items():
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for parameter '{name}'")
        m = state.m.get(name)
        if m is None:
            m = np.zeros_like(p.data)
            state.m[name] = m
            state.v[name] = np.zeros_like(p.data)
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * np.square(g)
        p.data -= scale * m / (np.sqrt(v / np.float32(c2)) + np.float32(state.eps))
    return state
