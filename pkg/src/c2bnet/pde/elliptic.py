"""Variable-coefficient Poisson problem ``-div(kappa grad u) = f`` on the unit square."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..grids import DiscreteField, Grid, rect2d
from ..numkit import Rng, conjugate_gradient

KAPPA_OFFSET = 4.1


@dataclass(frozen=True)
class EllipticParams:
    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64)
        if w.shape != (4,) or np.any(np.abs(w) > 1.0):
            raise ValueError("elliptic weights must be 4 values in [-1, 1]")
        object.__setattr__(self, "w", w)

    def kappa(self) -> Callable:
        w1, w2, w3, w4 = self.w

        def kappa(x, y):
            s = np.asarray(x) + np.asarray(y)
            return (
                w1 * np.sin(s) + w2 * np.cos(s) + w3 * np.sin(2 * s) + w4 * np.cos(2 * s) + KAPPA_OFFSET
            )

        return kappa


def sample_elliptic_kappa(rng: Rng) -> tuple[EllipticParams, Callable]:
    p = EllipticParams(rng.uniform(-1.0, 1.0, size=4))
    return p, p.kappa()


def solve_grid(n_intervals: int = 64) -> Grid:
    """Node grid (boundary included) with ``n_intervals`` cells per side."""
    return rect2d(n_intervals + 1, n_intervals + 1, "endpoints")


def solve_elliptic(
    kappa: Callable,
    f: Callable | float,
    grid: Grid | None = None,
    tol: float = 1e-10,
    max_iter: int = 20_000,
) -> DiscreteField:
    """Five-point flux-form finite differences with homogeneous Dirichlet data.

    Face coefficients are arithmetic means of the neighbouring nodal values.
    The interior system is symmetric positive definite and solved by CG.
    """
    grid = grid or solve_grid()
    if grid.kind != "rect2d" or grid.placement != "endpoints":
        raise ValueError("elliptic solve grid must be a 2-D endpoint grid")
    nx, ny = grid.n
    hx, hy = grid.spacing(0), grid.spacing(1)
    xs, ys = grid.axis(0), grid.axis(1)
    xx, yy = np.meshgrid(xs, ys)
    k = np.broadcast_to(np.asarray(kappa(xx, yy), dtype=np.float64), xx.shape)
    if np.any(k <= 0) or not np.all(np.isfinite(k)):
        raise ValueError("kappa must be positive and finite on the solve grid")
    rhs_full = np.broadcast_to(np.asarray(f(xx, yy) if callable(f) else f, dtype=np.float64), xx.shape)

    # face coefficients; kx[j, i] sits between nodes (i, j) and (i+1, j)
    kx = 0.5 * (k[:, 1:] + k[:, :-1]) / hx**2
    ky = 0.5 * (k[1:, :] + k[:-1, :]) / hy**2
    kx_in = kx[1:-1, :]
    ky_in = ky[:, 1:-1]
    diag = kx_in[:, :-1] + kx_in[:, 1:] + ky_in[:-1, :] + ky_in[1:, :]
    shape = (ny - 2, nx - 2)

    def apply_a(v):
        u = np.zeros((ny, nx))
        u[1:-1, 1:-1] = v.reshape(shape)
        out = diag * u[1:-1, 1:-1]
        out -= kx_in[:, 1:] * u[1:-1, 2:] + kx_in[:, :-1] * u[1:-1, :-2]
        out -= ky_in[1:, :] * u[2:, 1:-1] + ky_in[:-1, :] * u[:-2, 1:-1]
        return out.ravel()

    b = rhs_full[1:-1, 1:-1].ravel().copy()
    u_in, _ = conjugate_gradient(apply_a, b, tol=tol, max_iter=max_iter)
    u = np.zeros((ny, nx))
    u[1:-1, 1:-1] = u_in.reshape(shape)
    return DiscreteField(grid, u.ravel())


def restrict_nearest(field: DiscreteField, target: Grid) -> np.ndarray:
    """Value of the nearest solve-grid node at every target node."""
    src = field.grid
    ix = np.clip(np.rint((target.axis(0) - src.bounds[0]) / src.spacing(0)).astype(int), 0, src.n[0] - 1)
    iy = np.clip(np.rint((target.axis(1) - src.bounds[2]) / src.spacing(1)).astype(int), 0, src.n[1] - 1)
    u = field.values.reshape(src.shape)
    return u[np.ix_(iy, ix)].ravel()
