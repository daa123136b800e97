"""Deterministic synthetic gradients and datasets for benchmarks and tests."""

from __future__ import annotations

import numpy as np

from .codec import SparseGradient
from .sparse_data import Dataset, Instance


def synthetic_gradient(entries: int, dimension: int, seed: int,
                       distribution: str = "lognormal",
                       key_gaps: str = "uniform",
                       mean_gap: float | None = None) -> SparseGradient:
    """Random sparse gradient with controllable magnitude and key-gap shape.

    key_gaps "uniform" spreads keys evenly over [0, dimension); "geometric"
    draws gaps from a geometric distribution with the given mean (defaults
    to dimension / entries).
    """
    if entries < 1 or dimension < entries:
        raise ValueError("need 1 <= entries <= dimension")
    rng = np.random.default_rng(seed)
    if key_gaps == "uniform":
        keys = np.sort(rng.choice(dimension, size=entries, replace=False))
    elif key_gaps == "geometric":
        if mean_gap is None:
            mean_gap = dimension / entries
        gaps = rng.geometric(1.0 / mean_gap, size=entries)
        keys = np.cumsum(gaps) - 1
        keys = keys[keys < dimension]
        if keys.size == 0:
            raise ValueError("geometric gaps produced no keys inside the dimension")
    else:
        raise ValueError(f"unknown key_gaps {key_gaps!r}")

    n = keys.size
    if distribution == "lognormal":
        magnitudes = rng.lognormal(mean=0.0, sigma=2.0, size=n)
    elif distribution == "uniform":
        magnitudes = rng.uniform(1e-6, 1.0, size=n)
    else:
        raise ValueError(f"unknown distribution {distribution!r}")
    signs = rng.choice([-1.0, 1.0], size=n)
    return SparseGradient(keys, signs * magnitudes, dimension)


def evenly_spaced_gradient(entries: int, dimension: int, seed: int = 0) -> SparseGradient:
    """Keys at a constant stride; used for space-formula checks."""
    stride = dimension // entries
    if stride < 1:
        raise ValueError("dimension must be at least entries")
    keys = np.arange(entries, dtype=np.int64) * stride
    rng = np.random.default_rng(seed)
    values = rng.choice([-1.0, 1.0], size=entries) * rng.lognormal(0.0, 1.0, size=entries)
    return SparseGradient(keys, values, dimension)


def separable_classification_dataset(n: int, dimension: int, nnz: int,
                                     seed: int, name: str = "synthetic") -> Dataset:
    """Linearly separable +1/-1 instances with ~nnz random features each."""
    rng = np.random.default_rng(seed)
    true_theta = rng.normal(size=dimension)
    instances = []
    for _ in range(n):
        keys = np.sort(rng.choice(dimension, size=nnz, replace=False))
        values = rng.normal(size=nnz)
        margin = true_theta[keys] @ values
        label = 1.0 if margin > 0 else -1.0
        instances.append(Instance(keys, values, label))
    return Dataset(tuple(instances), dimension, name)
