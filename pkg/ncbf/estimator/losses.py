"""Training and evaluation losses.

Both losses average per-element errors over the last axis and then over the
batch, so a single vector and a batch of vectors use the same code.
"""

import enum
import math

import torch

from ncbf._compat import StrEnum
from ncbf.errors import ShapeMismatch

TWO_PI = 2 * math.pi


class LossKind(StrEnum):
    CMAE = "cmae"  # phase estimators, radians
    RMSE = "rmse"  # magnitude estimators, dB


def _as_pair(pred, target) -> tuple[torch.Tensor, torch.Tensor]:
    pred = torch.as_tensor(pred, dtype=torch.float64)
    target = torch.as_tensor(target, dtype=torch.float64)
    if pred.shape != target.shape:
        raise ShapeMismatch(
            f"prediction shape {tuple(pred.shape)} != target {tuple(target.shape)}"
        )
    return pred, target


def circular_error(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """min(|d|, 2pi - |d|) with |d| reduced to [0, 2pi).

    The gradient follows whichever branch attains the minimum; ties take the
    non-wrapped branch, whose slope is sign(d) for both d = pi and d = -pi.
    """
    m = torch.remainder(torch.abs(pred - target), TWO_PI)
    return torch.where(m <= TWO_PI - m, m, TWO_PI - m)


def cmae(pred, target) -> torch.Tensor:
    pred, target = _as_pair(pred, target)
    return circular_error(pred, target).mean()


def rmse(pred, target) -> torch.Tensor:
    pred, target = _as_pair(pred, target)
    mse = ((pred - target) ** 2).mean(dim=-1)
    # sqrt has an infinite slope at 0; keep the value exact and the gradient 0
    root = torch.sqrt(mse.clamp_min(torch.finfo(mse.dtype).tiny))
    return torch.where(mse > 0, root, torch.zeros_like(mse)).mean()


LOSSES = {
    LossKind.CMAE: cmae,
    LossKind.RMSE: rmse,
}
