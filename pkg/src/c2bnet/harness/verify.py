"""Self-checks behind the ``verify`` command: backprop against finite differences,
solver oracles with closed-form answers, and quadrature exactness."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..grids import line1d, make_quadrature, rect2d
from ..model import c2bnet_new, quadrature_loss_grad
from ..nn import finite_diff_grad_check
from ..numkit import Rng
from ..pde import elliptic, heat, rte


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    threshold: float
    passed: bool

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: {self.value:.3e} (limit {self.threshold:.1e})"


def _check(name: str, value: float, threshold: float, ok: bool | None = None) -> Check:
    return Check(name, float(value), threshold, bool(value < threshold if ok is None else ok))


def gradient_errors(n_nets: int = 100, seed: int = 7, h: float = 1e-6) -> np.ndarray:
    """Worst finite-difference disagreement for each of ``n_nets`` random small networks
    trained against the quadrature loss."""
    root = Rng(seed)
    out = np.empty(n_nets)
    for k in range(n_nets):
        rng = root.split(k)
        d_in, d_low, d_out = (int(v) for v in rng.integers(2, 7, size=3))
        hidden = tuple(int(v) for v in rng.integers(3, 8, size=int(rng.integers(1, 4))))
        net = c2bnet_new(d_in, d_low, d_out, rng.split("init"), hidden=hidden)
        # zero initial biases over a dead layer put ReLU inputs exactly on the kink
        for j, layer in enumerate(net.mlp.layers):
            if layer.bias is not None:
                layer.bias[:] = rng.split(f"bias:{j}").normal(scale=0.5, size=layer.bias.shape)
        x = rng.normal(size=(int(rng.integers(2, 6)), d_in))
        y = rng.normal(size=(x.shape[0], d_out))
        w = rng.uniform(0.1, 1.0, size=d_out)
        out[k] = finite_diff_grad_check(
            net.mlp, x, y, loss=lambda p, t, w=w: quadrature_loss_grad(p, t, w), h=h
        )
    return out


def elliptic_manufactured(n_intervals: int) -> float:
    """Max nodal error for ``kappa = 1``, ``u = sin(pi x) sin(pi y)``."""
    grid = elliptic.solve_grid(n_intervals)
    f = lambda x, y: 2 * math.pi**2 * np.sin(math.pi * x) * np.sin(math.pi * y)  # noqa: E731
    sol = elliptic.solve_elliptic(lambda x, y: np.ones_like(x), f, grid, tol=1e-13)
    xy = grid.nodes()
    exact = np.sin(math.pi * xy[:, 0]) * np.sin(math.pi * xy[:, 1])
    return float(np.max(np.abs(sol.values - exact)))


def elliptic_order(coarse: int = 32, fine: int = 64) -> tuple[float, float]:
    e_c, e_f = elliptic_manufactured(coarse), elliptic_manufactured(fine)
    return e_f, math.log(e_c / e_f) / math.log(fine / coarse)


def heat_mode_error(T: float = 0.01) -> float:
    """Max deviation of the ``sin(pi x)`` mode from ``exp(-pi^2 T) sin(pi x)``."""
    sol = heat.solve_heat(lambda x: np.sin(math.pi * x), T=T)
    x = sol.grid.nodes()
    return float(np.max(np.abs(sol.values - math.exp(-math.pi**2 * T) * np.sin(math.pi * x))))


def rte_constant_error(n: int = 32) -> float:
    """With no scattering and unit inflow on every side, the intensity is identically 1."""
    sides = dict.fromkeys(("left", "right", "bottom", "top"), 1.0)
    intensity, _ = rte.solve_rte(np.zeros((n, n)), inflow=sides)
    return float(np.max(np.abs(intensity - 1.0)))


def quadrature_errors() -> dict[str, float]:
    """Trapezoid and midpoint rules are exact for affine integrands on any mesh."""
    out = {}
    line = line1d(0.0, 2.0, 64)
    x = line.nodes()
    out["trapezoid"] = abs(float(make_quadrature(line).weights @ (3 * x + 1)) - 8.0)
    cells = rect2d(10, 10)
    xy = cells.nodes()
    out["midpoint"] = abs(float(make_quadrature(cells).weights @ (xy[:, 0] + 2 * xy[:, 1])) - 1.5)
    ang = rte.observation_grid()
    out["angular_mass"] = abs(float(make_quadrature(ang).weights.sum()) - 1.0)
    return out


def run_all(n_nets: int = 100) -> list[Check]:
    checks = [_check("gradient max relative error", gradient_errors(n_nets).max(), 1e-5)]
    err, order = elliptic_order()
    checks.append(_check("elliptic manufactured max error (64x64)", err, 1e-2))
    checks.append(Check("elliptic observed order", order, 2.0, abs(order - 2.0) <= 0.4))
    checks.append(_check("heat sin mode decay error", heat_mode_error(), 1e-5))
    checks.append(_check("rte constant solution error", rte_constant_error(), 1e-12))
    for name, v in quadrature_errors().items():
        checks.append(_check(f"quadrature {name} error", v, 1e-12))
    return checks
