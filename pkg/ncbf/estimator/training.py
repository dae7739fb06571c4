import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd
import torch

from ncbf.errors import ConfigError, NonFiniteLoss, ShapeMismatch

from .losses import LOSSES, LossKind
from .mlp import MlpModel


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 1000
    learning_rate: float = 1e-3
    decay: float = 0.97
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    seed: int = 0
    loss: LossKind = LossKind.CMAE
    threads: int = 1

    def __post_init__(self):
        violations = self.violations()
        if violations:
            raise ConfigError(violations)

    def violations(self) -> list[str]:
        found = []
        if self.epochs < 1:
            found.append(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            found.append(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0 < self.decay <= 1:
            found.append(f"decay must lie in (0, 1], got {self.decay}")
        if self.learning_rate < 0:
            found.append(f"learning_rate must be >= 0, got {self.learning_rate}")
        return found


@dataclass
class TrainReport:
    loss: LossKind
    train_losses: list[float] = field(default_factory=list)
    test_losses: list[float] = field(default_factory=list)
    learning_rates: list[float] = field(default_factory=list)
    wall_time: float = 0.0
    final_train_loss: float = math.nan
    final_test_loss: float = math.nan

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "epoch": range(len(self.train_losses)),
                "learning_rate": self.learning_rates,
                "train_loss": self.train_losses,
                "test_loss": self.test_losses,
            }
        )

    def to_dict(self) -> dict:
        data = asdict(self)
        data["loss"] = str(self.loss)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "TrainReport":
        return cls(**{**data, "loss": LossKind(data["loss"])})


def _tensor(array) -> torch.Tensor:
    return torch.as_tensor(np.asarray(array, dtype=np.float64))


def evaluate(model: MlpModel, inputs, targets, loss: LossKind) -> float:
    with torch.no_grad():
        return float(LOSSES[loss](model(_tensor(inputs)), _tensor(targets)))


def train(
    model: MlpModel, train_set, test_set, config: TrainConfig
) -> tuple[MlpModel, TrainReport]:
    """Mini-batch Adam with a per-epoch learning rate lr0 * decay**epoch.

    `train_set` and `test_set` are (inputs, targets) pairs. Batches follow a
    permutation seeded by (seed, epoch); the last short batch is kept. The
    returned model is rounded to float32 storage precision.
    """
    x_train, y_train = (_tensor(a) for a in train_set)
    x_test, y_test = (_tensor(a) for a in test_set)
    for name, x, y in (("train", x_train, y_train), ("test", x_test, y_test)):
        if len(x) == 0 or len(x) != len(y):
            raise ShapeMismatch(f"{name} set has {len(x)} inputs, {len(y)} targets")
        if x.shape[-1] != model.dims[0] or y.shape[-1] != model.dims[-1]:
            raise ShapeMismatch(
                f"{name} set widths ({x.shape[-1]}, {y.shape[-1]}) do not match "
                f"model dims ({model.dims[0]}, {model.dims[-1]})"
            )

    if config.threads:
        torch.set_num_threads(config.threads)
    loss_fn = LOSSES[config.loss]
    optimizer = torch.optim.Adam(
        model.parameters(),
        lr=config.learning_rate,
        betas=config.betas,
        eps=config.eps,
    )
    scheduler = torch.optim.lr_scheduler.LambdaLR(
        optimizer, lambda epoch: config.decay**epoch
    )

    report = TrainReport(loss=config.loss)
    started = time.perf_counter()
    n = len(x_train)
    for epoch in range(config.epochs):
        report.learning_rates.append(optimizer.param_groups[0]["lr"])
        rng = np.random.default_rng([config.seed, epoch])
        order = torch.from_numpy(rng.permutation(n))
        model.train()
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            optimizer.zero_grad()
            loss = loss_fn(model(x_train[idx]), y_train[idx])
            if not torch.isfinite(loss):
                raise NonFiniteLoss(
                    f"{config.loss} loss became {float(loss)} at epoch {epoch}, "
                    f"batch starting at {start}"
                )
            loss.backward()
            optimizer.step()
        scheduler.step()

        model.eval()
        train_loss = evaluate(model, x_train, y_train, config.loss)
        test_loss = evaluate(model, x_test, y_test, config.loss)
        if not (math.isfinite(train_loss) and math.isfinite(test_loss)):
            raise NonFiniteLoss(
                f"epoch {epoch}: train {train_loss}, test {test_loss} ({config.loss})"
            )
        report.train_losses.append(train_loss)
        report.test_losses.append(test_loss)
        logging.debug(
            f"epoch {epoch:3d} lr={report.learning_rates[-1]:.3e} "
            f"train={train_loss:.5f} test={test_loss:.5f}"
        )

    model.quantize_()
    report.wall_time = time.perf_counter() - started
    report.final_train_loss = evaluate(model, x_train, y_train, config.loss)
    report.final_test_loss = evaluate(model, x_test, y_test, config.loss)
    return model, report
