"""Fully connected ReLU networks with hand-written backpropagation and Adam."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Literal, Sequence

import numpy as np

from .numkit import NumericError, Rng

Activation = Literal["relu", "identity"]


@dataclass(frozen=True)
class LayerSpec:
    in_dim: int
    out_dim: int
    has_bias: bool = True
    activation: Activation = "relu"

    def __post_init__(self):
        if self.in_dim < 1 or self.out_dim < 1:
            raise ValueError("layer dimensions must be >= 1")
        if self.activation not in ("relu", "identity"):
            raise ValueError(f"unknown activation {self.activation!r}")


@dataclass
class Layer:
    weights: np.ndarray  # (in_dim, out_dim); applied as X @ W
    bias: np.ndarray | None
    activation: Activation

    @property
    def spec(self) -> LayerSpec:
        i, o = self.weights.shape
        return LayerSpec(i, o, self.bias is not None, self.activation)

    def n_params(self) -> int:
        return self.weights.size + (0 if self.bias is None else self.bias.size)


@dataclass
class Mlp:
    layers: list[Layer]
    version: int = field(default=0, compare=False)

    @property
    def specs(self) -> list[LayerSpec]:
        return [layer.spec for layer in self.layers]

    @property
    def in_dim(self) -> int:
        return self.layers[0].weights.shape[0]

    @property
    def out_dim(self) -> int:
        return self.layers[-1].weights.shape[1]

    def copy(self) -> "Mlp":
        return Mlp(
            [
                Layer(l.weights.copy(), None if l.bias is None else l.bias.copy(), l.activation)
                for l in self.layers
            ]
        )

    def parameters(self) -> list[np.ndarray]:
        """Flat list of parameter arrays in layer order (weights, then bias)."""
        out = []
        for layer in self.layers:
            out.append(layer.weights)
            if layer.bias is not None:
                out.append(layer.bias)
        return out


def check_specs(specs: Sequence[LayerSpec]) -> None:
    if not specs:
        raise ValueError("a network needs at least one layer")
    for k, (a, b) in enumerate(zip(specs, specs[1:])):
        if a.out_dim != b.in_dim:
            raise ValueError(
                f"layer {k} outputs {a.out_dim} features but layer {k + 1} expects {b.in_dim}"
            )
    if specs[-1].activation != "identity":
        raise ValueError("the final layer must use the identity activation")


def mlp_init(specs: Sequence[LayerSpec], rng: Rng, gain: float = 1.0) -> Mlp:
    """He-normal weights (std ``gain * sqrt(2 / in_dim)``) and zero biases."""
    check_specs(specs)
    layers = []
    for s in specs:
        w = rng.normal(0.0, gain * np.sqrt(2.0 / s.in_dim), size=(s.in_dim, s.out_dim))
        b = np.zeros(s.out_dim) if s.has_bias else None
        layers.append(Layer(w, b, s.activation))
    return Mlp(layers)


@dataclass
class ForwardCache:
    inputs: list[np.ndarray]  # input to each layer
    pre: list[np.ndarray]  # pre-activation of each layer
    version: int


def mlp_forward(net: Mlp, x) -> tuple[np.ndarray, ForwardCache]:
    h = np.asarray(x, dtype=np.float64)
    if h.ndim == 1:
        h = h[None, :]
    if h.shape[1] != net.in_dim:
        raise ValueError(f"input has {h.shape[1]} features, network expects {net.in_dim}")
    inputs, pre = [], []
    for k, layer in enumerate(net.layers):
        inputs.append(h)
        z = h @ layer.weights
        if layer.bias is not None:
            z = z + layer.bias
        pre.append(z)
        h = np.maximum(z, 0.0) if layer.activation == "relu" else z
    if not np.isfinite(h.sum()):
        bad = next(k for k, z in enumerate(pre) if not np.all(np.isfinite(z)))
        raise NumericError(f"non-finite activations in layer {bad}")
    return h, ForwardCache(inputs, pre, net.version)


Grads = list[tuple[np.ndarray, "np.ndarray | None"]]


def mlp_backward(net: Mlp, cache: ForwardCache, dl_dy) -> Grads:
    """Reverse-mode gradients per layer as ``(dW, db)``; ReLU'(0) is taken as 0."""
    if cache.version != net.version or len(cache.pre) != len(net.layers):
        raise ValueError("stale forward cache: parameters changed since the forward pass")
    g = np.asarray(dl_dy, dtype=np.float64)
    if g.ndim == 1:
        g = g[None, :]
    grads: Grads = [None] * len(net.layers)  # type: ignore[list-item]
    for k in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[k]
        if layer.activation == "relu":
            g = g * (cache.pre[k] > 0.0)
        dw = cache.inputs[k].T @ g
        db = g.sum(axis=0) if layer.bias is not None else None
        grads[k] = (dw, db)
        if k > 0:
            g = g @ layer.weights.T
    return grads


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_net(cls, net: Mlp, **kw) -> "AdamState":
        params = net.parameters()
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], **kw)


def adam_step(
    net: Mlp,
    grads: Grads,
    state: AdamState,
    lr: float = 1e-3,
    mask: Sequence[bool] | None = None,
) -> tuple[Mlp, AdamState]:
    """One in-place Adam update. ``mask[k]`` False freezes layer ``k`` (values and moments)."""
    if len(grads) != len(net.layers):
        raise ValueError("gradient list does not match the network layers")
    if mask is not None and len(mask) != len(net.layers):
        raise ValueError("freeze mask must have one flag per layer")
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    slot = 0
    for k, (layer, (dw, db)) in enumerate(zip(net.layers, grads)):
        pairs = [(layer.weights, dw)]
        if layer.bias is not None:
            pairs.append((layer.bias, db))
        trainable = mask is None or mask[k]
        for p, g in pairs:
            if trainable:
                if g is None or g.shape != p.shape:
                    raise ValueError(f"gradient shape mismatch in layer {k}")
                if not np.isfinite(g.sum()):
                    raise NumericError(f"non-finite gradient in layer {k}")
                m = state.m[slot]
                v = state.v[slot]
                m *= state.beta1
                m += (1.0 - state.beta1) * g
                v *= state.beta2
                v += (1.0 - state.beta2) * (g * g)
                denom = np.sqrt(v * (1.0 / c2))
                denom += state.eps
                p -= (lr / c1) * m / denom
            slot += 1
    net.version += 1
    return net, state


def count_params(net: Mlp) -> int:
    return sum(layer.n_params() for layer in net.layers)


def squared_loss(y: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Sum of squared residuals and its gradient."""
    r = y - target
    return float(np.sum(r * r)), 2.0 * r


LossFn = Callable[[np.ndarray, np.ndarray], "tuple[float, np.ndarray]"]


def finite_diff_grad_check(
    net: Mlp,
    x,
    target,
    loss: LossFn = squared_loss,
    h: float = 1e-6,
    grads: Grads | None = None,
    scale: str = "global",
) -> float:
    """Largest relative gap between backprop and central-difference gradients.

    By default (``scale="global"``) every gap is divided by the largest
    gradient entry of either kind, so tiny entries, whose central difference
    is dominated by round-off in the loss, do not swamp the measure.
    ``scale="entry"`` divides each gap by the larger of its two entries.
    ``grads`` overrides the backprop gradients, which lets a caller confirm the
    detector flags a corrupted gradient.
    """
    if scale not in ("entry", "global"):
        raise ValueError("scale must be 'entry' or 'global'")
    target = np.asarray(target, dtype=np.float64)
    if grads is None:
        y, cache = mlp_forward(net, x)
        _, dl_dy = loss(y, target)
        grads = mlp_backward(net, cache, dl_dy)
    worst, gap, top = 0.0, 0.0, 0.0
    for layer, (dw, db) in zip(net.layers, grads):
        pairs = [(layer.weights, dw)]
        if layer.bias is not None:
            pairs.append((layer.bias, db))
        for p, g in pairs:
            flat = p.reshape(-1)
            gflat = np.asarray(g).reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                lp, _ = loss(mlp_forward(net, x)[0], target)
                flat[i] = orig - h
                lm, _ = loss(mlp_forward(net, x)[0], target)
                flat[i] = orig
                fd = (lp - lm) / (2.0 * h)
                a = float(gflat[i])
                worst = max(worst, abs(a - fd) / max(abs(a), abs(fd), 1e-8))
                gap = max(gap, abs(a - fd))
                top = max(top, abs(a), abs(fd))
    if scale == "global":
        return gap / max(top, 1e-300)
    return worst
