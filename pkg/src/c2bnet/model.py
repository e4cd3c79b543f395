"""Coefficient network followed by a bias-free linear basis layer, plus last-layer fine-tuning."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .grids import Grid, Quadrature, make_quadrature
from .nn import LayerSpec, Layer, Mlp, count_params, mlp_forward, mlp_init
from .numkit import Rng

log = logging.getLogger(__name__)

HIDDEN = (100, 100, 100)
RIDGE = 1e-10


@dataclass
class C2BNet:
    """``basis^T . coef(standardise(u))``.

    ``mlp`` holds the whole network; its last layer (identity, no bias) is the
    basis matrix of shape ``(d_low, D2)`` and the layers before it (ReLU
    hidden layers, then the latent layer) form the coefficient network.
    """

    mlp: Mlp
    mean: np.ndarray
    std: np.ndarray
    input_grid: Grid | None = None
    output_grid: Grid | None = None
    meta: dict = field(default_factory=dict)

    @property
    def d_low(self) -> int:
        return self.mlp.layers[-1].weights.shape[0]

    @property
    def in_dim(self) -> int:
        return self.mlp.in_dim

    @property
    def out_dim(self) -> int:
        return self.mlp.out_dim

    @property
    def basis(self) -> np.ndarray:
        return self.mlp.layers[-1].weights

    @property
    def coef_net(self) -> Mlp:
        return Mlp(self.mlp.layers[:-1])

    def copy(self) -> "C2BNet":
        return C2BNet(
            self.mlp.copy(), self.mean.copy(), self.std.copy(), self.input_grid, self.output_grid, dict(self.meta)
        )

    def standardize(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        if u.shape[-1] != self.in_dim:
            raise ValueError(f"input has {u.shape[-1]} features, network expects {self.in_dim}")
        return (u - self.mean) / self.std

    def coefficients(self, u) -> np.ndarray:
        """Latent coefficients, one row per input."""
        h, _ = mlp_forward(self.coef_net, self.standardize(u))
        return h

    def __call__(self, u) -> np.ndarray:
        return c2bnet_forward(self, u)[0]


def c2bnet_new(
    d_in: int,
    d_low: int,
    d_out: int,
    rng: Rng,
    hidden: tuple[int, ...] = HIDDEN,
    input_grid: Grid | None = None,
    output_grid: Grid | None = None,
    init_gain: float = 1.0,
    latent_activation: str = "identity",
) -> C2BNet:
    """Fresh network ``d_in -> hidden... -> d_low -> d_out``.

    Hidden layers are biased ReLU; the latent layer is biased with
    ``latent_activation``; the basis layer has neither bias nor activation.
    """
    if min(d_in, d_low, d_out) < 1:
        raise ValueError("network dimensions must be >= 1")
    widths = (d_in, *hidden)
    specs = [LayerSpec(a, b, True, "relu") for a, b in zip(widths, widths[1:])]
    specs.append(LayerSpec(widths[-1], d_low, True, latent_activation))
    specs.append(LayerSpec(d_low, d_out, False, "identity"))
    return C2BNet(
        mlp_init(specs, rng, gain=init_gain), np.zeros(d_in), np.ones(d_in), input_grid, output_grid
    )


STANDARDIZE_MODES = ("global", "grand", "feature", "none")


def fit_standardizer(net: C2BNet, inputs, mode: str = "global") -> None:
    """Centre every feature and rescale.

    ``global`` divides by one scale (the RMS of the centred data), keeping the
    relative size of features; ``grand`` divides by the standard deviation of all
    entries about their grand mean, which also counts the spread between feature
    means and so leaves small fluctuations small; ``feature`` is the per-feature z-score, with
    (near-)constant features left at unit scale; ``none`` is the identity.
    """
    x = np.asarray(inputs, dtype=np.float64)
    if mode == "none":
        net.mean, net.std = np.zeros(x.shape[1]), np.ones(x.shape[1])
        return
    mean = x.mean(axis=0)
    if mode == "feature":
        std = x.std(axis=0)
        flat = std <= 1e-12 * np.maximum(np.abs(mean), 1.0)
        std[flat] = 1.0
    elif mode == "global":
        s = float(np.sqrt(np.mean((x - mean) ** 2)))
        std = np.full(x.shape[1], s if s > 0 else 1.0)
    elif mode == "grand":
        s = float(x.std())
        std = np.full(x.shape[1], s if s > 0 else 1.0)
    else:
        raise ValueError(f"unknown standardisation {mode!r}; expected one of {STANDARDIZE_MODES}")
    net.mean, net.std = mean, std


def c2bnet_forward(net: C2BNet, u) -> tuple[np.ndarray, np.ndarray]:
    """Outputs and latent coefficients. A 1-D ``u`` yields 1-D results."""
    single = np.ndim(u) == 1
    alpha = net.coefficients(u)
    y = alpha @ net.basis
    if single:
        return y[0], alpha[0]
    return y, alpha


def quadrature_loss(preds, targets, q: Quadrature | np.ndarray) -> float:
    """Mean over samples of the squared quadrature norm of the residual."""
    return quadrature_loss_grad(preds, targets, q)[0]


def quadrature_loss_grad(preds, targets, q: Quadrature | np.ndarray) -> tuple[float, np.ndarray]:
    w = q.weights if isinstance(q, Quadrature) else np.asarray(q, dtype=np.float64)
    p = np.atleast_2d(np.asarray(preds, dtype=np.float64))
    t = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    if p.shape != t.shape or p.shape[1] != w.shape[0]:
        raise ValueError(f"shape mismatch: preds {p.shape}, targets {t.shape}, weights {w.shape}")
    r = p - t
    n = p.shape[0]
    return float(np.sum(w * r * r) / n), (2.0 / n) * w * r


# ---------------------------------------------------------------------------
# transfer to a new output discretisation
# ---------------------------------------------------------------------------


def _check_transfer(net: C2BNet, data) -> None:
    if net.input_grid is not None and data.input_grid != net.input_grid:
        raise ValueError("fine-tuning data must share the network's input grid")
    if data.inputs.shape[1] != net.in_dim:
        raise ValueError("fine-tuning inputs do not match the network input dimension")


def with_basis(net: C2BNet, basis: np.ndarray, output_grid: Grid | None) -> C2BNet:
    """Copy of ``net`` with the last layer replaced; every other array is copied verbatim."""
    out = net.copy()
    out.mlp.layers[-1] = Layer(np.array(basis, dtype=np.float64), None, "identity")
    out.output_grid = output_grid
    return out


def interpolate_basis(basis: np.ndarray, old: Grid, new: Grid) -> np.ndarray:
    """Carry basis vectors to a finer grid by (bi)linear interpolation."""
    from scipy.interpolate import RegularGridInterpolator

    if old.kind != new.kind or old.kind not in ("line1d", "rect2d"):
        raise ValueError("warm start needs two grids of the same 1-D or 2-D kind")
    if old.kind == "line1d":
        return np.stack([np.interp(new.nodes(), old.nodes(), b) for b in basis])
    pts = new.nodes()[:, ::-1]  # (y, x) order to match reshape(ny, nx)
    rows = []
    for b in basis:
        f = RegularGridInterpolator(
            (old.axis(1), old.axis(0)), b.reshape(old.shape), bounds_error=False, fill_value=None
        )
        rows.append(f(pts))
    return np.stack(rows)


def trainable_params(net: C2BNet, last_layer_only: bool) -> int:
    if last_layer_only:
        return net.mlp.layers[-1].n_params()
    return count_params(net.mlp)


def finetune_gradient(net: C2BNet, new_data, cfg, warm_start: bool = False) -> C2BNet:
    """Re-learn only the basis layer by Adam on the quadrature loss.

    Features from the frozen coefficient network are computed once; the
    optimisation then runs on a one-layer linear model.
    """
    from .train import fit_mlp

    _check_transfer(net, new_data)
    d_out = new_data.outputs.shape[1]
    if warm_start:
        if net.output_grid == new_data.output_grid:
            basis = net.basis.copy()
        else:
            basis = interpolate_basis(net.basis, net.output_grid, new_data.output_grid)
    else:
        spec = LayerSpec(net.d_low, d_out, False, "identity")
        basis = mlp_init([spec], Rng(cfg.seed).split("finetune")).layers[0].weights
    head = Mlp([Layer(basis, None, "identity")])
    phi = net.coefficients(new_data.inputs)
    q = make_quadrature(new_data.output_grid)
    head, report = fit_mlp(head, phi, new_data.outputs, q.weights, cfg)
    out = with_basis(net, head.layers[0].weights, new_data.output_grid)
    out.meta = {**net.meta, "finetune": "gradient", "finetune_report": report.summary()}
    return out


def solve_basis(phi: np.ndarray, targets: np.ndarray, ridge: float = RIDGE) -> tuple[np.ndarray, float]:
    """Ridge-regularised normal equations ``(Phi^T Phi + lam I) W = Phi^T V``.

    The quadrature weight of each output node scales its column of the
    residual, so it drops out of that column's minimiser and the systems are
    unweighted. ``lam`` is ``ridge`` times the mean Gram diagonal. Returns
    the basis and the 2-norm condition number of the regularised Gram.
    """
    gram = phi.T @ phi
    d = gram.shape[0]
    scale = float(np.trace(gram)) / d if d else 0.0
    lam = ridge * (scale if scale > 0 else 1.0)
    reg = gram + lam * np.eye(d)
    chol = np.linalg.cholesky(reg)
    rhs = phi.T @ targets
    y = np.linalg.solve(chol, rhs)
    w = np.linalg.solve(chol.T, y)
    ev = np.linalg.eigvalsh(reg)
    return w, float(ev[-1] / ev[0])


def finetune_exact(net: C2BNet, new_data, ridge: float = RIDGE) -> C2BNet:
    """Closed-form least-squares basis for frozen coefficient features."""
    _check_transfer(net, new_data)
    phi = net.coefficients(new_data.inputs)
    w, cond = solve_basis(phi, new_data.outputs, ridge)
    log.info("exact fine-tune: feature Gram condition %.3e", cond)
    out = with_basis(net, w, new_data.output_grid)
    out.meta = {**net.meta, "finetune": "exact", "gram_condition": cond}
    return out
