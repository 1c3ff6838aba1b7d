"""Single-model training: Adam on mean squared error of ln(gamma_inf), plateau
learning-rate decay, early stopping and restoration of the best validation
state."""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .autodiff import AdamState, Tensor, adam_step, backward, mean, square, sub
from .dataset import DataRecord, batches

logger = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    initial_lr: float = 1e-3
    lr_decay: float = 0.8
    lr_patience: int = 3
    batch_size: int = 64
    max_epochs: int = 300
    early_stop_patience: int = 25
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("initial_lr", "lr_decay", "lr_patience", "batch_size", "max_epochs",
                     "early_stop_patience"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        return cls(**{k: v for k, v in data.items() if k in cls.__dataclass_fields__})

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    val_mae: list[float] = field(default_factory=list)
    lr: list[float] = field(default_factory=list)
    wall_time: list[float] = field(default_factory=list)
    best_epoch: int = 0  # 1-based; 0 before the first epoch

    def __len__(self) -> int:
        return len(self.val_loss)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["epoch", "train_loss", "val_loss", "val_mae", "lr", "wall_time_s"])
            for i in range(len(self)):
                writer.writerow([
                    i + 1, repr(self.train_loss[i]), repr(self.val_loss[i]),
                    repr(self.val_mae[i]), repr(self.lr[i]), f"{self.wall_time[i]:.3f}",
                ])


class PlateauScheduler:
    """Multiply the learning rate by ``decay`` after ``patience`` epochs
    without a strict improvement; the counter resets on improvement or decay.

    The rate is recomputed as ``initial * decay**k`` after the k-th decay
    instead of by repeated multiplication, so it equals that product exactly.
    """

    def __init__(self, lr: float, decay: float = 0.8, patience: int = 3) -> None:
        self.initial = lr
        self.lr = lr
        self.decay = decay
        self.patience = patience
        self.best = math.inf
        self.stale = 0
        self.num_decays = 0

    def step(self, val_loss: float) -> float:
        if val_loss < self.best:
            self.best = val_loss
            self.stale = 0
        else:
            self.stale += 1
            if self.stale >= self.patience:
                self.num_decays += 1
                self.lr = self.initial * self.decay**self.num_decays
                self.stale = 0
        return self.lr


def lr_schedule(state: PlateauScheduler, val_loss: float) -> float:
    return state.step(val_loss)


class EarlyStopping:
    def __init__(self, patience: int = 25) -> None:
        self.patience = patience
        self.best = math.inf
        self.best_epoch = 0
        self.epoch = 0

    def step(self, val_loss: float) -> bool:
        """Record one epoch; return True when training should stop."""
        self.epoch += 1
        if val_loss < self.best:
            self.best = val_loss
            self.best_epoch = self.epoch
        return self.epoch - self.best_epoch >= self.patience

    @property
    def improved(self) -> bool:
        return self.best_epoch == self.epoch


def mse_loss(pred: Tensor, target: np.ndarray) -> Tensor:
    return mean(square(sub(pred, target)))


def evaluate_loss(model, records: Sequence[DataRecord]) -> tuple[float, float]:
    """(MSE, MAE) of ln(gamma_inf) in inference mode."""
    pred = model.predict(records)
    err = pred - np.array([r.ln_gamma for r in records])
    return float(np.mean(err * err)), float(np.mean(np.abs(err)))


def train(
    model,
    train_records: Sequence[DataRecord],
    val_records: Sequence[DataRecord],
    config: TrainConfig | None = None,
    on_epoch: Callable[[int, TrainHistory], bool | None] | None = None,
):
    """Train ``model`` in place and return it with its history.

    The model must provide ``parameters()``, ``fit_normalization(records)``,
    ``make_batch(records)``, ``forward(batch, training, rng)`` and
    ``predict(records)``. Temperature scaling is fitted on the training
    records only. ``on_epoch`` may return True to end training early.
    """
    config = config or TrainConfig()
    if not train_records:
        raise ValueError("empty training set")
    if not val_records:
        raise ValueError("empty validation set")
    model.fit_normalization(train_records)
    params = model.parameters()
    shuffle_rng = np.random.default_rng([config.seed, 1])
    dropout_rng = np.random.default_rng([config.seed, 2])
    adam = AdamState()
    scheduler = PlateauScheduler(config.initial_lr, config.lr_decay, config.lr_patience)
    stopper = EarlyStopping(config.early_stop_patience)
    history = TrainHistory()
    best_state = model.state_dict()
    started = time.perf_counter()

    for epoch in range(1, config.max_epochs + 1):
        lr = scheduler.lr
        total, count = 0.0, 0
        order_seed = int(shuffle_rng.integers(2**63 - 1))
        for idx in batches(len(train_records), config.batch_size, order_seed):
            batch = model.make_batch([train_records[i] for i in idx])
            loss = mse_loss(model.forward(batch, training=True, rng=dropout_rng), batch.targets)
            value = loss.item()
            if not math.isfinite(value):
                raise TrainingDiverged(
                    f"non-finite training loss {value} at epoch {epoch} (lr={lr:g})"
                )
            backward(loss, params)
            adam_step(params, adam, lr)
            total += value * len(idx)
            count += len(idx)
        val_loss, val_mae = evaluate_loss(model, val_records)
        if not math.isfinite(val_loss):
            raise TrainingDiverged(f"non-finite validation loss at epoch {epoch}")
        history.train_loss.append(total / count)
        history.val_loss.append(val_loss)
        history.val_mae.append(val_mae)
        history.lr.append(lr)
        history.wall_time.append(time.perf_counter() - started)
        stop = stopper.step(val_loss)
        if stopper.improved:
            best_state = model.state_dict()
            history.best_epoch = epoch
        scheduler.step(val_loss)
        logger.info(
            "epoch %d train %.5f val %.5f mae %.4f lr %.2e", epoch, total / count,
            val_loss, val_mae, lr,
        )
        if on_epoch is not None and on_epoch(epoch, history):
            stop = True
        if stop:
            break

    model.load_state_dict(best_state)
    return model, history
