"""Loss and gradient evaluation for the three generalized linear models.

Regularization is lazy: the lambda * theta term is applied only to
coordinates touched by the current batch, which keeps batch gradients as
sparse as the data.  The penalty enters the loss as (lambda/2) * ||theta||^2
restricted to the same touched coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .codec import SparseGradient
from .sparse_data import Instance


class ModelKind(str, Enum):
    LINEAR = "linear"
    LOGISTIC = "lr"
    SVM = "svm"


@dataclass(frozen=True)
class Model:
    kind: ModelKind
    lam: float = 0.0

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"regularizer must be >= 0, got {self.lam}")


def _margins(theta: np.ndarray, batch: Sequence[Instance]) -> np.ndarray:
    return np.array([theta[inst.keys] @ inst.values for inst in batch])


def _data_terms(kind: ModelKind, margins: np.ndarray,
                labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-instance gradient coefficient on x_i, and per-instance loss."""
    y = labels
    if kind is ModelKind.LINEAR:
        residuals = y - margins
        return -residuals, residuals ** 2
    if kind is ModelKind.LOGISTIC:
        ym = y * margins
        # -y * sigmoid(-y m), computed without overflowing exp
        coef = -y * 0.5 * (1.0 - np.tanh(0.5 * ym))
        return coef, np.logaddexp(0.0, -ym)
    if kind is ModelKind.SVM:
        active = y * margins < 1.0
        return np.where(active, -y, 0.0), np.maximum(0.0, 1.0 - y * margins)
    raise ValueError(f"unknown model kind {kind!r}")


def batch_gradient(model: Model, theta: np.ndarray,
                   batch: Sequence[Instance]) -> tuple[SparseGradient, float]:
    """Summed (not averaged) gradient and loss of the batch objective."""
    if not batch:
        raise ValueError("batch must be nonempty")
    for inst in batch:
        if inst.keys.size and inst.keys[-1] >= theta.shape[0]:
            raise ValueError(
                f"instance key {int(inst.keys[-1])} out of range for {theta.shape[0]} parameters"
            )
    labels = np.array([inst.label for inst in batch])
    coef, losses = _data_terms(model.kind, _margins(theta, batch), labels)

    all_keys = np.concatenate([inst.keys for inst in batch])
    all_vals = np.concatenate([c * inst.values for c, inst in zip(coef, batch)])
    touched, inverse = np.unique(all_keys, return_inverse=True)
    grad = np.zeros(touched.size)
    np.add.at(grad, inverse, all_vals)
    if model.lam:
        grad += model.lam * theta[touched]

    loss = float(np.sum(losses))
    if model.lam:
        loss += 0.5 * model.lam * float(np.sum(theta[touched] ** 2))
    return SparseGradient(touched, grad, theta.shape[0]), loss


def predict_loss(model: Model, theta: np.ndarray, data: Sequence[Instance]) -> float:
    """Mean per-instance loss without regularization (validation metric)."""
    if not data:
        raise ValueError("data must be nonempty")
    labels = np.array([inst.label for inst in data])
    _, losses = _data_terms(model.kind, _margins(theta, data), labels)
    return float(np.mean(losses))
