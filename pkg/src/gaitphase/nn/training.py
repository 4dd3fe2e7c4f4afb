"""Mini-batch training with Adam and early stopping on the validation loss."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import InvalidParameterError, TrainingDivergedError
from .model import LOSSES, MlpModel, backward, forward, loss, make_dropout_masks
from .optim import AdamState, adam_step

log = logging.getLogger(__name__)

EVAL_CHUNK = 8192


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int
    dropout_rate: float
    patience: int
    loss: str
    learning_rate: float = 1e-3
    max_epochs: int = 200
    seed: int = 0
    min_delta: float = 0.0

    def __post_init__(self):
        if self.batch_size < 1:
            raise InvalidParameterError("batch_size must be >= 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise InvalidParameterError("dropout_rate must lie in [0, 1)")
        if self.patience < 1:
            raise InvalidParameterError("patience must be >= 1")
        if self.loss not in LOSSES:
            raise InvalidParameterError(f"loss must be one of {LOSSES}")
        if not self.learning_rate > 0:
            raise InvalidParameterError("learning_rate must be > 0")
        if self.max_epochs < 1:
            raise InvalidParameterError("max_epochs must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


def regressor_train_config(**overrides) -> TrainConfig:
    base = dict(batch_size=2048, dropout_rate=0.0, patience=4, loss="mse")
    base.update(overrides)
    return TrainConfig(**base)


def classifier_train_config(**overrides) -> TrainConfig:
    base = dict(batch_size=256, dropout_rate=0.15, patience=10, loss="cross_entropy")
    base.update(overrides)
    return TrainConfig(**base)


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    best_epoch: int = 0  # 1-based, 0 = none yet
    stopped_epoch: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


class EarlyStopping:
    """Stop after ``patience`` consecutive epochs without a new best validation loss."""

    def __init__(self, patience: int, min_delta: float = 0.0):
        self.patience = patience
        self.min_delta = min_delta
        self.best = math.inf
        self.best_epoch = 0
        self.wait = 0

    def update(self, epoch: int, val_loss: float) -> bool:
        """Record ``val_loss`` for 1-based ``epoch``; True when training should stop."""
        if val_loss < self.best - self.min_delta:
            self.best = val_loss
            self.best_epoch = epoch
            self.wait = 0
            return False
        self.wait += 1
        return self.wait >= self.patience


class ArrayDataset:
    def __init__(self, x, y):
        self.x = np.asarray(x, dtype=float)
        self.y = np.asarray(y, dtype=float)
        if len(self.x) != len(self.y):
            raise InvalidParameterError("inputs and targets differ in length")

    def __len__(self) -> int:
        return len(self.x)

    def take(self, idx):
        return self.x[idx], self.y[idx]


def _as_dataset(data):
    if hasattr(data, "take"):
        return data
    x, y = data
    return ArrayDataset(x, y)


def evaluate_loss(model: MlpModel, data, kind: str, chunk: int = EVAL_CHUNK) -> float:
    data = _as_dataset(data)
    n = len(data)
    total = 0.0
    for start in range(0, n, chunk):
        idx = np.arange(start, min(n, start + chunk))
        x, y = data.take(idx)
        total += loss(forward(model, x), y, kind) * len(idx)
    return total / n


def train(model: MlpModel, train_data, val_data, config: TrainConfig, progress=None):
    """Train a copy of ``model``; returns the parameters of the best validation epoch.

    ``train_data``/``val_data`` are ``(X, Y)`` pairs or objects with
    ``__len__`` and ``take(indices) -> (X, Y)``. Shuffling and dropout draw
    from generators seeded by ``config.seed`` only.
    """
    train_data = _as_dataset(train_data)
    val_data = _as_dataset(val_data)
    n = len(train_data)
    if n == 0 or len(val_data) == 0:
        raise InvalidParameterError("training and validation data must be non-empty")

    model = model.copy()
    params = model.parameters()
    state = AdamState.zeros_like(params)
    seeds = np.random.SeedSequence(config.seed).spawn(2)
    shuffle_rng = np.random.default_rng(seeds[0])
    dropout_rng = np.random.default_rng(seeds[1])

    history = TrainHistory()
    stopper = EarlyStopping(config.patience, config.min_delta)
    best_params = [p.copy() for p in params]

    for epoch in range(1, config.max_epochs + 1):
        order = shuffle_rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = np.sort(order[start:start + config.batch_size])
            x, y = train_data.take(idx)
            masks = make_dropout_masks(model, len(idx), config.dropout_rate, dropout_rng)
            # overflow shows up as a non-finite loss, reported below
            with np.errstate(over="ignore", invalid="ignore"):
                value, grads = backward(model, x, y, config.loss, masks)
            if not math.isfinite(value):
                history.stopped_epoch = epoch
                raise TrainingDivergedError(f"non-finite training loss in epoch {epoch}", history)
            total += value * len(idx)
            adam_step(params, [g for pair in grads for g in pair], state, config.learning_rate)
        train_loss = total / n
        val_loss = evaluate_loss(model, val_data, config.loss)
        if not math.isfinite(val_loss):
            history.stopped_epoch = epoch
            raise TrainingDivergedError(f"non-finite validation loss in epoch {epoch}", history)
        history.train_loss.append(train_loss)
        history.val_loss.append(val_loss)
        stop = stopper.update(epoch, val_loss)
        if stopper.best_epoch == epoch:
            best_params = [p.copy() for p in params]
        history.best_epoch = stopper.best_epoch
        history.stopped_epoch = epoch
        log.info("epoch %d train %.6g val %.6g", epoch, train_loss, val_loss)
        if progress is not None:
            progress(epoch, train_loss, val_loss)
        if stop:
            break

    model.load_parameters(best_params)
    model.meta["training"] = {
        "config": config.to_dict(),
        "best_epoch": history.best_epoch,
        "stopped_epoch": history.stopped_epoch,
        "best_val_loss": stopper.best,
    }
    return model, history
