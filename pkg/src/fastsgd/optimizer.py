"""Adam updates applied sparsely to the coordinates present in a gradient.

There is no bias correction, and epsilon sits inside the square root:
theta <- theta - lr * m / sqrt(v + eps).  Coordinates absent from the
gradient keep their moments and parameter values untouched; a dense
reference mode updates every coordinate (absent ones with gradient 0) for
equivalence checks on small models.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codec import SparseGradient


@dataclass(frozen=True)
class AdamConfig:
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError(f"learning rate must be > 0, got {self.lr}")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in (0, 1)")
        if not self.eps > 0:
            raise ValueError(f"eps must be > 0, got {self.eps}")


class AdamState:
    """First and second moment accumulators, one slot per model parameter."""

    __slots__ = ("m", "v")

    def __init__(self, m: np.ndarray, v: np.ndarray):
        if m.shape != v.shape or m.ndim != 1:
            raise ValueError("moment vectors must be 1-d and the same length")
        if np.any(v < 0):
            raise ValueError("second moments must be non-negative")
        self.m = m
        self.v = v

    @classmethod
    def zeros(cls, dimension: int) -> "AdamState":
        return cls(np.zeros(dimension), np.zeros(dimension))


def adam_step(state: AdamState, theta: np.ndarray, grad: SparseGradient,
              cfg: AdamConfig, dense: bool = False) -> None:
    """One in-place update of the moments and parameters."""
    if theta.shape != state.m.shape:
        raise ValueError("theta and moment vectors must have the same length")
    if grad.nnz and grad.keys[-1] >= theta.shape[0]:
        raise ValueError(
            f"gradient key {int(grad.keys[-1])} out of range for {theta.shape[0]} parameters"
        )
    if dense:
        g = np.zeros(theta.shape[0])
        g[grad.keys] = grad.values
        state.m[:] = cfg.beta1 * state.m + (1 - cfg.beta1) * g
        state.v[:] = cfg.beta2 * state.v + (1 - cfg.beta2) * g * g
        theta -= cfg.lr * state.m / np.sqrt(state.v + cfg.eps)
        return
    if grad.nnz == 0:
        return
    k, g = grad.keys, grad.values
    m = cfg.beta1 * state.m[k] + (1 - cfg.beta1) * g
    v = cfg.beta2 * state.v[k] + (1 - cfg.beta2) * g * g
    state.m[k] = m
    state.v[k] = v
    theta[k] -= cfg.lr * m / np.sqrt(v + cfg.eps)
