"""Adam and the mini-batch training loop."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .network import (
    ModelParams,
    ModelVariant,
    WindowSet,
    backward,
    forward,
    init_params,
    mse_loss,
    param_count,
    predict,
    unflatten,
)

log = logging.getLogger(__name__)


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def fresh(cls, n: int, lr: float = 1e-3) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), 0, lr)


def adam_step(params: np.ndarray, grads: np.ndarray, state: AdamState) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update. Returns new params and a new state."""
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise ValueError(
            f"adam_step: params {params.shape}, grads {grads.shape}, state {state.m.shape} must match"
        )
    if state.t < 0:
        raise ValueError("adam_step: step counter must be non-negative")
    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    v = state.beta2 * state.v + (1.0 - state.beta2) * grads * grads
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    new = params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return new, AdamState(m, v, t, state.lr, state.beta1, state.beta2, state.eps)


@dataclass
class TrainConfig:
    variant: ModelVariant = field(default_factory=ModelVariant)
    epochs: int = 100
    batch_size: int = 128
    lr: float = 1e-3
    seed: int = 0
    clip_norm: float | None = None  # off by default

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.lr < 0:
            raise ValueError("lr must be non-negative")


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    valid_loss: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.train_loss)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "train_mse", "valid_mse", "train_mse_x1000", "valid_mse_x1000"])
            for k, tr in enumerate(self.train_loss):
                va = self.valid_loss[k] if self.valid_loss else ""
                w.writerow([k + 1, repr(tr), repr(va) if va != "" else "", repr(tr * 1000), repr(va * 1000) if va != "" else ""])

    @classmethod
    def from_csv(cls, path: str | Path) -> "TrainHistory":
        h = cls()
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                h.train_loss.append(float(row["train_mse"]))
                if row["valid_mse"]:
                    h.valid_loss.append(float(row["valid_mse"]))
        return h


def set_loss(p: ModelParams, v: ModelVariant, data: WindowSet) -> float:
    return mse_loss(predict(data.lags, data.exo, p, v), data.target)


def train(
    train_set: WindowSet,
    valid_set: WindowSet | None,
    cfg: TrainConfig,
    init: ModelParams | None = None,
) -> tuple[ModelParams, TrainHistory]:
    """Fit a model with Adam on batch-mean MSE gradients.

    Each epoch shuffles window order with a generator seeded from
    ``cfg.seed``, walks sequential mini-batches (the last one may be short),
    and records the full-set train and validation MSE at epoch end.
    """
    if len(train_set) == 0:
        raise ValueError("training set is empty")
    v = cfg.variant
    p = init if init is not None else init_params(v, cfg.seed)
    theta = p.flatten()
    state = AdamState.fresh(theta.size, cfg.lr)
    rng = np.random.default_rng([cfg.seed, 1])
    history = TrainHistory()
    n = len(train_set)
    log.info("training %s: %d parameters, %d windows", v.kind, param_count(p), n)

    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            cur = unflatten(theta, v)
            pred, tape = forward(train_set.lags[idx], train_set.exo[idx], cur, v)
            g = backward(tape, train_set.target[idx], cur, v)
            if cfg.clip_norm is not None:
                norm = np.linalg.norm(g)
                if norm > cfg.clip_norm:
                    g = g * (cfg.clip_norm / norm)
            theta, state = adam_step(theta, g, state)
        cur = unflatten(theta, v)
        history.train_loss.append(set_loss(cur, v, train_set))
        if valid_set is not None and len(valid_set):
            history.valid_loss.append(set_loss(cur, v, valid_set))
        va = history.valid_loss[-1] * 1000 if history.valid_loss else float("nan")
        log.info("epoch %d train_mse_x1000=%.3f valid_mse_x1000=%.3f", epoch + 1, history.train_loss[-1] * 1000, va)
        if not np.isfinite(history.train_loss[-1]):
            raise FloatingPointError(f"training diverged at epoch {epoch + 1}")

    return unflatten(theta, v), history
