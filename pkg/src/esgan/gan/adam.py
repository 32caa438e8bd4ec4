"""Adaptive-moment optimizer.

Implements the recursion

    v_k = beta2 * v_{k-1} + (1 - beta2) * g * g
    m_k = beta1 * m_{k-1} + (1 - beta1) * g
    w   = w - gamma * sqrt(1 - beta2^(k+1)) / (1 - beta1^(k+1)) * m_k / (sqrt(v_k) + delta)

with k the zero-based step index and zero initial moments. The sign is
always descent; callers maximizing an objective pass the gradient of its
negation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class AdamParams:
    gamma: float = 0.0002
    beta1: float = 0.5
    beta2: float = 0.999
    delta: float = 1e-7

    def __post_init__(self):
        if not (0.0 < self.beta1 < 1.0 and 0.0 < self.beta2 < 1.0):
            raise ValueError("beta1 and beta2 must lie strictly in (0, 1)")
        if self.gamma <= 0.0 or self.delta <= 0.0:
            raise ValueError("gamma and delta must be positive")

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "delta": self.delta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AdamParams":
        return cls(**d)


class AdamState:
    """First/second moment accumulators for a list of parameter arrays."""

    def __init__(self, params: Sequence[np.ndarray]):
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.step = 0            # number of completed updates


def adam_step(
    params: Sequence[np.ndarray],
    grads: Sequence[np.ndarray],
    state: AdamState,
    constants: AdamParams,
    step_index: int | None = None,
) -> tuple[Sequence[np.ndarray], AdamState]:
    """Apply one descent update in place; returns (params, state).

    ``step_index`` defaults to the state's own counter; passing it
    explicitly allows single-step evaluation at a chosen k.
    """
    k = state.step if step_index is None else step_index
    if k < 0:
        raise ValueError("step index must be non-negative")
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("parameter, gradient and state lists differ in length")

    b1, b2 = constants.beta1, constants.beta2
    scale = constants.gamma * np.sqrt(1.0 - b2 ** (k + 1)) / (1.0 - b1 ** (k + 1))
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {p.shape}")
        if not np.isfinite(g).all():
            raise ValueError("non-finite gradient")
        v *= b2
        v += (1.0 - b2) * g * g
        m *= b1
        m += (1.0 - b1) * g
        p -= scale * m / (np.sqrt(v) + constants.delta)
    state.step = k + 1
    return params, state
