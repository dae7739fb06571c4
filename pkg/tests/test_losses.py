import math

import numpy as np
import pytest
import torch

from ncbf.errors import ShapeMismatch
from ncbf.estimator.losses import LOSSES, LossKind, circular_error, cmae, rmse


def test_wrapped_phase_error():
    assert float(cmae([3.1], [-3.1])) == pytest.approx(0.08319, abs=1e-5)
    assert float(cmae([3.1], [-3.1])) == pytest.approx(2 * math.pi - 6.2, abs=1e-12)


def test_cmae_matches_direct_evaluation(rng):
    pred = rng.uniform(-10, 10, size=(1000, 24))
    target = rng.uniform(-math.pi, math.pi, size=(1000, 24))
    total = 0.0
    for p_row, t_row in zip(pred, target):
        for p, t in zip(p_row, t_row):
            m = (p - t) % (2 * math.pi)
            total += min(m, 2 * math.pi - m)
    expected = total / pred.size
    assert float(cmae(pred, target)) == pytest.approx(expected, abs=1e-12)


def test_rmse_matches_direct_evaluation(rng):
    pred = rng.normal(-15, 5, size=(1000, 24))
    target = rng.normal(-15, 5, size=(1000, 24))
    per_sample = [
        math.sqrt(sum((p - t) ** 2 for p, t in zip(p_row, t_row)) / len(p_row))
        for p_row, t_row in zip(pred, target)
    ]
    expected = sum(per_sample) / len(per_sample)
    assert float(rmse(pred, target)) == pytest.approx(expected, abs=1e-12)


def test_perfect_prediction_has_zero_loss_and_gradient():
    target = torch.tensor([[0.5, -1.0, 2.0]], dtype=torch.float64)
    pred = target.clone().requires_grad_()
    loss = rmse(pred, target)
    loss.backward()
    assert float(loss) == 0
    assert torch.all(pred.grad == 0)


def test_circular_error_gradient_follows_branch():
    pred = torch.tensor([0.1, 6.2], dtype=torch.float64, requires_grad=True)
    target = torch.zeros(2, dtype=torch.float64)
    circular_error(pred, target).sum().backward()
    assert pred.grad.tolist() == [1.0, -1.0]


def test_circular_error_tie_takes_direct_branch():
    pred = torch.tensor([math.pi, -math.pi], dtype=torch.float64, requires_grad=True)
    error = circular_error(pred, torch.zeros(2, dtype=torch.float64))
    assert error.tolist() == [math.pi, math.pi]
    error.sum().backward()
    # d/dpred |pred| on both sides
    assert pred.grad.tolist() == [1.0, -1.0]


@pytest.mark.parametrize("kind", list(LossKind))
def test_shape_mismatch(kind):
    with pytest.raises(ShapeMismatch):
        LOSSES[kind](np.zeros((2, 3)), np.zeros((2, 4)))


def test_single_vector_and_batch_agree(rng):
    pred = rng.normal(size=8)
    target = rng.normal(size=8)
    for loss in (cmae, rmse):
        assert float(loss(pred, target)) == pytest.approx(
            float(loss(pred[np.newaxis], target[np.newaxis]))
        )
