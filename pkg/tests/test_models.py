import math

import numpy as np
import pytest

from fastsgd.models import Model, ModelKind, batch_gradient, predict_loss
from fastsgd.sparse_data import Instance


def inst(pairs, label):
    keys, values = zip(*pairs)
    return Instance(np.array(keys, dtype=np.int64), np.array(values, float), float(label))


def dense_gradient(grad, dim):
    out = np.zeros(dim)
    out[grad.keys] = grad.values
    return out


def generating_objective(model, theta, batch):
    """The scalar whose gradient batch_gradient computes.

    The reported linear loss is the squared residual sum, but the gradient
    convention -(y - theta.x) x corresponds to half of it; the oracle must
    differentiate the generating objective, not the reported metric.
    """
    _, loss = batch_gradient(model, theta, batch)
    if model.kind is ModelKind.LINEAR:
        reg = 0.0
        if model.lam:
            touched = {int(k) for inst in batch for k in inst.keys}
            reg = 0.5 * model.lam * sum(theta[k] ** 2 for k in touched)
        return 0.5 * (loss - reg) + reg
    return loss


def finite_difference(model, theta, batch, coords, step=1e-6):
    """Central differences of the generating objective, the independent oracle."""
    out = {}
    for k in coords:
        plus = theta.copy()
        plus[k] += step
        minus = theta.copy()
        minus[k] -= step
        lp = generating_objective(model, plus, batch)
        lm = generating_objective(model, minus, batch)
        out[k] = (lp - lm) / (2 * step)
    return out


def test_lr_gradient_at_zero_is_half_label():
    x = inst([(0, 1.0), (3, 2.0)], +1)
    grad, loss = batch_gradient(Model(ModelKind.LOGISTIC), np.zeros(5), [x])
    assert loss == pytest.approx(math.log(2))
    assert dict(zip(grad.keys.tolist(), grad.values)) == pytest.approx({0: -0.5, 3: -1.0})


def test_svm_inactive_instance_contributes_nothing():
    theta = np.zeros(4)
    theta[1] = 2.0  # margin y * theta.x = 2 >= 1
    x = inst([(1, 1.0)], +1)
    grad, loss = batch_gradient(Model(ModelKind.SVM), theta, [x])
    assert grad.nnz == 0
    assert loss == 0.0


def test_linear_single_instance():
    grad, loss = batch_gradient(Model(ModelKind.LINEAR), np.zeros(3),
                                [inst([(0, 2.0)], 3)])
    assert dict(zip(grad.keys.tolist(), grad.values)) == {0: -6.0}
    assert loss == 9.0


def test_gradient_keys_limited_to_touched_coordinates():
    theta = np.ones(6)
    model = Model(ModelKind.LINEAR, lam=0.5)
    batch = [inst([(1, 1.0)], 0), inst([(4, 2.0)], 1)]
    grad, _ = batch_gradient(model, theta, batch)
    assert set(grad.keys.tolist()) <= {1, 4}


def test_dimension_mismatch_rejected():
    with pytest.raises(ValueError):
        batch_gradient(Model(ModelKind.LINEAR), np.zeros(2), [inst([(5, 1.0)], 1)])


@pytest.mark.parametrize("kind", [ModelKind.LINEAR, ModelKind.LOGISTIC])
@pytest.mark.parametrize("lam", [0.0, 0.1])
def test_smooth_gradients_match_finite_differences(kind, lam):
    rng = np.random.default_rng(17)
    dim = 30
    model = Model(kind, lam)
    theta = rng.normal(size=dim) * 0.5
    batch = []
    for _ in range(8):
        keys = np.sort(rng.choice(dim, size=5, replace=False))
        label = 1.0 if kind is ModelKind.LOGISTIC and rng.random() < 0.5 else -1.0
        if kind is ModelKind.LINEAR:
            label = float(rng.normal())
        batch.append(Instance(keys, rng.normal(size=5), label))
    grad, _ = batch_gradient(model, theta, batch)
    dense = dense_gradient(grad, dim)
    fd = finite_difference(model, theta, batch, grad.keys.tolist())
    for k, expected in fd.items():
        assert dense[k] == pytest.approx(expected, rel=1e-5, abs=1e-8)


def test_svm_gradient_matches_finite_differences_away_from_hinge():
    rng = np.random.default_rng(8)
    dim = 20
    model = Model(ModelKind.SVM, 0.05)
    theta = rng.normal(size=dim)
    batch = []
    while len(batch) < 6:
        keys = np.sort(rng.choice(dim, size=4, replace=False))
        values = rng.normal(size=4)
        label = 1.0 if rng.random() < 0.5 else -1.0
        margin = label * theta[keys] @ values
        if abs(margin - 1.0) > 1e-3:
            batch.append(Instance(keys, values, label))
    grad, _ = batch_gradient(model, theta, batch)
    dense = dense_gradient(grad, dim)
    fd = finite_difference(model, theta, batch, grad.keys.tolist())
    for k, expected in fd.items():
        assert dense[k] == pytest.approx(expected, rel=1e-5, abs=1e-7)


def test_predict_loss_at_zero():
    data = [inst([(0, 1.0)], +1), inst([(1, 2.0)], -1)]
    assert predict_loss(Model(ModelKind.LOGISTIC), np.zeros(3), data) == pytest.approx(math.log(2))
    assert predict_loss(Model(ModelKind.SVM), np.zeros(3), data) == pytest.approx(1.0)


def test_predict_loss_excludes_regularization():
    data = [inst([(0, 1.0)], +1)]
    theta = np.zeros(2)
    a = predict_loss(Model(ModelKind.LOGISTIC, lam=0.0), theta, data)
    b = predict_loss(Model(ModelKind.LOGISTIC, lam=10.0), theta, data)
    assert a == b
