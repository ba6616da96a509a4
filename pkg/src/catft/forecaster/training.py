"""Mini-batch Adam training and the finite-difference gradient check."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .model import ForecasterParams, loss_and_grad


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, loss: float):
        super().__init__(f"non-finite loss {loss} at epoch {epoch}")
        self.epoch = epoch
        self.loss = loss


@dataclass(frozen=True)
class TrainingSample:
    inputs: np.ndarray
    target: float
    positions: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "inputs", np.asarray(self.inputs, dtype=np.float64))
        if self.positions is None:
            object.__setattr__(self, "positions", np.arange(1, len(self.inputs) + 1, dtype=np.float64))


@dataclass
class TrainingReport:
    epoch_losses: list[float] = field(default_factory=list)
    sample_count: int = 0

    @property
    def final_loss(self) -> float | None:
        return self.epoch_losses[-1] if self.epoch_losses else None


def samples_from_windows(windows: np.ndarray) -> list[TrainingSample]:
    """Window-aligned samples: first n-1 values in, the n-th value as target."""
    windows = np.asarray(windows, dtype=np.float64)
    return [TrainingSample(w[:-1], float(w[-1])) for w in windows]


def stack_samples(samples: Sequence[TrainingSample]):
    X = np.stack([s.inputs for s in samples])
    P = np.stack([s.positions for s in samples])
    Y = np.array([s.target for s in samples], dtype=np.float64)
    return X, P, Y


class Adam:
    def __init__(self, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for k, g in grads.items():
            if k not in self.m:
                self.m[k] = np.zeros_like(g)
                self.v[k] = np.zeros_like(g)
            self.m[k] *= self.beta1
            self.m[k] += (1.0 - self.beta1) * g
            self.v[k] *= self.beta2
            self.v[k] += (1.0 - self.beta2) * (g * g)
            params[k] -= self.lr * (self.m[k] / bc1) / (np.sqrt(self.v[k] / bc2) + self.eps)


def train(params: ForecasterParams, samples, config=None, epochs: int | None = None):
    """Fit ``params`` to ``samples``; returns (new params, TrainingReport).

    ``samples`` is a list of TrainingSample or an (X, P, Y) array triple. Epoch order
    is shuffled with an RNG seeded from the config seed. The input params are not
    modified.
    """
    cfg = config or params.config
    if isinstance(samples, tuple):
        X, P, Y = samples
    else:
        if len(samples) == 0:
            raise ValueError("cannot train on an empty sample list")
        X, P, Y = stack_samples(samples)
    if len(Y) == 0:
        raise ValueError("cannot train on an empty sample list")
    n_epochs = cfg.epochs if epochs is None else epochs

    out = params.copy()
    report = TrainingReport(sample_count=len(Y))
    rng = np.random.default_rng(cfg.seed)
    opt = Adam(cfg.learning_rate)
    for epoch in range(n_epochs):
        order = rng.permutation(len(Y))
        total = 0.0
        for start in range(0, len(Y), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            loss, grads = loss_and_grad(out, X[idx], P[idx], Y[idx])
            loss = float(loss)
            if not np.isfinite(loss):
                raise TrainingDiverged(epoch, loss)
            total += loss * len(idx)
            opt.step(out.tensors, grads)
        report.epoch_losses.append(total / len(Y))
    if report.epoch_losses:
        out.meta = {"final_loss": report.final_loss, "sample_count": report.sample_count,
                    "epochs": n_epochs}
    return out, report


def numerical_gradient(params: ForecasterParams, values, positions, targets, step: float = 1e-5,
                       names: Sequence[str] | None = None, dtype=np.longdouble) -> dict[str, np.ndarray]:
    """Central differences of the loss, one parameter entry at a time.

    Loss evaluations run in ``dtype`` (extended precision by default) so that the
    cancellation in (up - down) does not swamp small gradient entries.
    """
    work = params.copy(dtype)
    values = np.asarray(values, dtype=dtype)
    positions = np.asarray(positions, dtype=dtype)
    targets = np.asarray(targets, dtype=dtype)
    grads = {}
    for name in names or list(work.tensors):
        arr = work.tensors[name]
        g = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + step
            up, _ = loss_and_grad(work, values, positions, targets, with_grad=False)
            flat[i] = old - step
            down, _ = loss_and_grad(work, values, positions, targets, with_grad=False)
            flat[i] = old
            gflat[i] = (up - down) / (2.0 * step)
        grads[name] = g.astype(np.float64)
    return grads


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> np.ndarray:
    return np.abs(analytic - numeric) / np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)


def gradient_check(params: ForecasterParams, sample: TrainingSample, step: float = 1e-5,
                   dtype=np.longdouble) -> float:
    """Max relative error between backprop and central differences over every parameter."""
    X = sample.inputs[None, :]
    P = sample.positions[None, :]
    Y = np.array([sample.target])
    _, analytic = loss_and_grad(params, X, P, Y)
    numeric = numerical_gradient(params, X, P, Y, step, dtype=dtype)
    worst = 0.0
    for name in analytic:
        err = relative_error(analytic[name], numeric[name])
        worst = max(worst, float(err.max(initial=0.0)))
    return worst
