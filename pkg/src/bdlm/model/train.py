"""Adam training of the trainable parameter subset with per-epoch validation
and best-checkpoint selection."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DivergedLoss, EmptyDataset, InvalidConfig
from .config import ModelConfig
from .network import forward, forward_backward
from .params import ModelState, ParameterSet, init_parameters

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class TrainHyper:
    lr: float = 0.001
    epochs: int = 50
    batch_size: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.lr <= 0 or self.epochs < 1 or self.batch_size < 1:
            raise InvalidConfig(
                f"bad hyperparameters lr={self.lr} epochs={self.epochs} batch={self.batch_size}")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_accuracy: float


@dataclass
class TrainResult:
    state: ModelState
    log: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0

    @property
    def best_val_accuracy(self) -> float:
        return self.log[self.best_epoch - 1].val_accuracy


def _one_hot(y: np.ndarray, n_classes: int) -> np.ndarray:
    out = np.zeros((y.size, n_classes))
    out[np.arange(y.size), y] = 1.0
    return out


def predict(state: ModelState, x: np.ndarray, batch_size: int = 256) -> np.ndarray:
    """Argmax class indices for a batch of windows."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    preds = []
    for lo in range(0, x.shape[0], batch_size):
        logits = forward(x[lo:lo + batch_size], state.params, state.config)
        preds.append(np.argmax(logits, axis=1))
    return np.concatenate(preds) if preds else np.empty(0, dtype=np.int64)


def evaluate_accuracy(state: ModelState, x: np.ndarray, y: np.ndarray,
                      batch_size: int = 256) -> float:
    return float(np.mean(predict(state, x, batch_size) == np.asarray(y)))


def pooled_features(state: ModelState, x: np.ndarray, batch_size: int = 256) -> np.ndarray:
    """Penultimate representation (post-pool, pre-head) per window."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    chunks = []
    for lo in range(0, x.shape[0], batch_size):
        _, pooled = forward(x[lo:lo + batch_size], state.params, state.config,
                            return_pooled=True)
        chunks.append(pooled)
    return np.concatenate(chunks) if chunks else np.empty((0, state.config.d_model))


class _Adam:
    def __init__(self, names, params, lr):
        self.lr = lr
        self.t = 0
        self.m = {n: np.zeros_like(params[n]) for n in names}
        self.v = {n: np.zeros_like(params[n]) for n in names}

    def step(self, params: dict, grads: dict):
        self.t += 1
        c1 = 1.0 - ADAM_BETA1 ** self.t
        c2 = 1.0 - ADAM_BETA2 ** self.t
        for name, g in grads.items():
            m = self.m[name]
            v = self.v[name]
            m *= ADAM_BETA1
            m += (1.0 - ADAM_BETA1) * g
            v *= ADAM_BETA2
            v += (1.0 - ADAM_BETA2) * (g * g)
            params[name] -= self.lr * (m / c1) / (np.sqrt(v / c2) + ADAM_EPS)


def train(train_x: np.ndarray, train_y: np.ndarray, val_x: np.ndarray, val_y: np.ndarray,
          config: ModelConfig, hyper: TrainHyper,
          init_state: ModelState | None = None) -> TrainResult:
    """Train the trainable subset with Adam; return the checkpoint with the
    best validation accuracy (earliest epoch on ties).

    ``init_state`` continues training from an existing checkpoint with fresh
    optimizer moments; otherwise parameters are initialized from config.seed.
    Deterministic for fixed inputs, config and hyper.
    """
    train_x = np.asarray(train_x, dtype=np.float64)
    train_y = np.asarray(train_y, dtype=np.int64)
    val_x = np.asarray(val_x, dtype=np.float64)
    val_y = np.asarray(val_y, dtype=np.int64)
    if train_x.size == 0 or val_x.size == 0:
        raise EmptyDataset("train and validation sets must be nonempty",
                           train=train_x.shape[0] if train_x.ndim == 2 else 0,
                           val=val_x.shape[0] if val_x.ndim == 2 else 0)
    for name, y in (("train", train_y), ("val", val_y)):
        if y.size and (y.min() < 0 or y.max() >= config.n_classes):
            raise InvalidConfig(f"{name} labels outside [0, {config.n_classes})")

    if init_state is not None:
        pset = init_state.params.copy()
        if init_state.config.n_classes != config.n_classes:
            raise InvalidConfig("continued training requires a matching class count")
    else:
        pset = init_parameters(config)

    onehot = _one_hot(train_y, config.n_classes)
    rng = np.random.default_rng(hyper.seed)
    optimizer = _Adam(sorted(pset.trainable), pset.params, hyper.lr)
    state = ModelState(config=config, params=pset)

    best_params: ParameterSet | None = None
    best_acc = -1.0
    best_epoch = 0
    log: list[EpochRecord] = []
    n = train_x.shape[0]
    for epoch in range(1, hyper.epochs + 1):
        order = rng.permutation(n)
        loss_sum = 0.0
        for lo in range(0, n, hyper.batch_size):
            idx = order[lo:lo + hyper.batch_size]
            loss, grads, _ = forward_backward(train_x[idx], onehot[idx], pset, config)
            if not np.isfinite(loss):
                raise DivergedLoss(f"non-finite loss at epoch {epoch}", epoch=epoch)
            optimizer.step(pset.params, grads)
            loss_sum += loss * idx.size
        val_acc = evaluate_accuracy(state, val_x, val_y,
                                    batch_size=max(hyper.batch_size, 64))
        log.append(EpochRecord(epoch=epoch, train_loss=loss_sum / n, val_accuracy=val_acc))
        if val_acc > best_acc:
            best_acc = val_acc
            best_epoch = epoch
            best_params = pset.copy()

    return TrainResult(state=ModelState(config=config, params=best_params),
                       log=log, best_epoch=best_epoch)
