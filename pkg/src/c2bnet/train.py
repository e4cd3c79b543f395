"""Full-batch empirical-risk training, evaluation and deterministic data splits."""

from __future__ import annotations

import math
import sys
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .grids import batch_relative_errors, make_quadrature
from .model import C2BNet, fit_standardizer, quadrature_loss_grad
from .nn import AdamState, Mlp, adam_step, mlp_backward, mlp_forward
from .numkit import NumericError


@dataclass
class TrainConfig:
    lr: float = 1e-3
    max_epochs: int = 30_000
    window: int = 500
    rel_improvement: float = 1e-8
    seed: int = 0
    freeze_mask: list[bool] | None = None
    log_every: int = 0
    standardize: str = "global"

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError("learning rate must be positive")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown train config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class TrainReport:
    loss_curve: np.ndarray
    best_curve: np.ndarray
    final_loss: float
    best_loss: float
    wall_time: float
    epochs: int
    stop_reason: str
    meta: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "final_loss": self.final_loss,
            "best_loss": self.best_loss,
            "wall_time": self.wall_time,
            "epochs": self.epochs,
            "stop_reason": self.stop_reason,
        }


def _snapshot(net: Mlp) -> list[np.ndarray]:
    return [p.copy() for p in net.parameters()]


def _restore(net: Mlp, params: list[np.ndarray]) -> None:
    for dst, src in zip(net.parameters(), params):
        dst[...] = src


def fit_mlp(
    mlp: Mlp,
    x: np.ndarray,
    y: np.ndarray,
    weights: np.ndarray,
    cfg: TrainConfig,
    mask=None,
) -> tuple[Mlp, TrainReport]:
    """Minimise the quadrature loss of ``mlp(x)`` against ``y`` with full-batch Adam.

    Returns a copy holding the best parameters seen. Training stops early
    once the best loss has improved by less than ``cfg.rel_improvement``
    (relative) over the last ``cfg.window`` epochs.
    """
    start = time.perf_counter()
    net = mlp.copy()
    mask = cfg.freeze_mask if mask is None else mask
    if cfg.max_epochs == 0:
        return net, TrainReport(np.zeros(0), np.zeros(0), np.nan, np.nan, 0.0, 0, "budget")
    state = AdamState.for_net(net)
    curve = np.empty(cfg.max_epochs)
    best_track = np.empty(cfg.max_epochs)
    best = np.inf
    best_params = _snapshot(net)
    reason = "budget"
    epochs = cfg.max_epochs
    for e in range(cfg.max_epochs):
        pred, cache = mlp_forward(net, x)
        loss, dl = quadrature_loss_grad(pred, y, weights)
        if not np.isfinite(loss):
            raise NumericError(f"non-finite loss at epoch {e}")
        curve[e] = loss
        if loss < best:
            best = loss
            best_params = _snapshot(net)
        best_track[e] = best
        if cfg.log_every and e % cfg.log_every == 0:
            print(f"epoch={e} loss={loss:.6e}", file=sys.stderr)
        if best == 0.0:
            epochs, reason = e + 1, "exact"
            break
        if e >= cfg.window:
            ref = best_track[e - cfg.window]
            if ref - best <= cfg.rel_improvement * ref:
                epochs, reason = e + 1, "plateau"
                break
        grads = mlp_backward(net, cache, dl)
        adam_step(net, grads, state, cfg.lr, mask)
    _restore(net, best_params)
    net.version += 1
    report = TrainReport(
        loss_curve=curve[:epochs].copy(),
        best_curve=best_track[:epochs].copy(),
        final_loss=float(curve[epochs - 1]),
        best_loss=float(best),
        wall_time=time.perf_counter() - start,
        epochs=epochs,
        stop_reason=reason,
    )
    return net, report


def _check_grids(net: C2BNet, data) -> None:
    if data.inputs.shape[1] != net.in_dim or data.outputs.shape[1] != net.out_dim:
        raise ValueError(
            f"dataset dims ({data.inputs.shape[1]}, {data.outputs.shape[1]}) do not match "
            f"network dims ({net.in_dim}, {net.out_dim})"
        )
    if net.input_grid is not None and data.input_grid != net.input_grid:
        raise ValueError("dataset input grid differs from the network's")
    if net.output_grid is not None and data.output_grid != net.output_grid:
        raise ValueError("dataset output grid differs from the network's")


def train(net: C2BNet, data, cfg: TrainConfig) -> tuple[C2BNet, TrainReport]:
    _check_grids(net, data)
    out = net.copy()
    if cfg.max_epochs == 0:
        return out, fit_mlp(out.mlp, data.inputs, data.outputs, np.ones(net.out_dim), cfg)[1]
    fit_standardizer(out, data.inputs, cfg.standardize)
    out.input_grid, out.output_grid = data.input_grid, data.output_grid
    q = make_quadrature(data.output_grid)
    out.mlp, report = fit_mlp(out.mlp, out.standardize(data.inputs), data.outputs, q.weights, cfg)
    return out, report


def evaluate(net: C2BNet, test, norm: str = "l2") -> tuple[float, np.ndarray]:
    """Mean and per-sample relative test errors in the quadrature norm."""
    if len(test) == 0:
        raise ValueError("cannot evaluate on an empty test set")
    _check_grids(net, test)
    pred = net(test.inputs)
    errs = batch_relative_errors(pred, test.outputs, make_quadrature(test.output_grid), norm)
    return math.fsum(errs) / errs.size, errs


def split(data, n_train: int):
    """Leading ``n_train`` rows for training, the trailing block for testing."""
    n = len(data)
    if not 0 < n_train < n:
        raise ValueError(f"n_train={n_train} must lie strictly between 0 and {n}")
    return data.take(np.arange(n_train)), data.take(np.arange(n_train, n))
