"""Steady radiative transfer on the unit square with four discrete ordinates.

The scattering kernel is the directional average: ``s . grad I = sigma (mean_j I_j - I)``,
so isotropic fields are fixed points of the collision term.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..grids import DiscreteField, Grid, angular_product, direction_angles, rect2d
from ..numkit import ConvergenceError, Rng

N_CHANNELS = 5
CENTERLINES = (0.1, 0.3, 0.5, 0.7, 0.9)
LENGTH_RANGE = (0.3, 1.0)
WIDTH_RANGE = (0.02, 0.08)
SIGMA_LO = 0.1
SIGMA_HI = 1.0
N_DIRS = 4


@dataclass(frozen=True)
class RteSigma:
    """Five horizontal channels anchored at ``x = 0`` over a uniform background."""

    lengths: np.ndarray
    widths: np.ndarray
    sigma_lo: float = SIGMA_LO
    sigma_hi: float = SIGMA_HI

    def __post_init__(self):
        for name in ("lengths", "widths"):
            v = np.asarray(getattr(self, name), dtype=np.float64)
            if v.shape != (N_CHANNELS,):
                raise ValueError(f"need {N_CHANNELS} channel {name}")
            object.__setattr__(self, name, v)
        c = np.asarray(CENTERLINES)
        if np.any(self.lengths > 1.0) or np.any(c - self.widths / 2 < 0) or np.any(c + self.widths / 2 > 1):
            raise ValueError("channels must stay inside the unit square")

    def rectangles(self) -> np.ndarray:
        """Rows of ``(x0, x1, y0, y1)``."""
        c = np.asarray(CENTERLINES)
        half = self.widths / 2
        return np.column_stack([np.zeros(N_CHANNELS), self.lengths, c - half, c + half])

    def sigma(self) -> Callable:
        rects = self.rectangles()

        def sigma(x, y):
            x = np.asarray(x, dtype=np.float64)
            y = np.asarray(y, dtype=np.float64)
            inside = np.zeros(np.broadcast(x, y).shape, dtype=bool)
            for x0, x1, y0, y1 in rects:
                inside |= (x >= x0) & (x <= x1) & (y >= y0) & (y <= y1)
            return np.where(inside, self.sigma_hi, self.sigma_lo)

        return sigma

    def cell_average(self, grid: Grid) -> np.ndarray:
        """Exact mean of sigma over every cell of a cell-centred rectangular grid."""
        if grid.kind != "rect2d" or grid.placement != "cell":
            raise ValueError("cell averages need a cell-centred rectangular grid")
        hx, hy = grid.spacing(0), grid.spacing(1)
        x0 = grid.bounds[0] + hx * np.arange(grid.n[0])
        y0 = grid.bounds[2] + hy * np.arange(grid.n[1])
        frac = np.zeros(grid.shape)
        for rx0, rx1, ry0, ry1 in self.rectangles():
            ox = np.clip(np.minimum(x0 + hx, rx1) - np.maximum(x0, rx0), 0.0, None) / hx
            oy = np.clip(np.minimum(y0 + hy, ry1) - np.maximum(y0, ry0), 0.0, None) / hy
            frac += np.outer(oy, ox)
        return (self.sigma_lo + (self.sigma_hi - self.sigma_lo) * frac).ravel()


def sample_rte_sigma(rng: Rng) -> tuple[RteSigma, Callable]:
    lengths = rng.uniform(*LENGTH_RANGE, size=N_CHANNELS)
    widths = rng.uniform(*WIDTH_RANGE, size=N_CHANNELS)
    s = RteSigma(lengths, widths)
    return s, s.sigma()


def solve_grid(n: int = 64) -> Grid:
    return rect2d(n, n, "cell")


def observation_grid(n_nodes: int = 11, n_dirs: int = N_DIRS) -> Grid:
    return angular_product(rect2d(n_nodes, n_nodes, "endpoints"), n_dirs)


def _sweep_operator(sigma: np.ndarray, hx: float, hy: float, cx: float, cy: float):
    """Upwind transport matrix for one direction, ordered so it is lower triangular.

    Returns the factorised operator and the index permutation mapping sweep
    order back to row-major cell order.
    """
    ny, nx = sigma.shape
    a = abs(cx) / hx
    b = abs(cy) / hy
    ii = np.arange(nx) if cx > 0 else np.arange(nx)[::-1]
    jj = np.arange(ny) if cy > 0 else np.arange(ny)[::-1]
    # sweep-ordered copy of sigma: upstream neighbours have smaller indices
    s = sigma[np.ix_(jj, ii)]
    idx = np.arange(nx * ny).reshape(ny, nx)
    rows = [idx.ravel()]
    cols = [idx.ravel()]
    vals = [(a + b + s).ravel()]
    rows.append(idx[:, 1:].ravel())
    cols.append(idx[:, :-1].ravel())
    vals.append(np.full(ny * (nx - 1), -a))
    rows.append(idx[1:, :].ravel())
    cols.append(idx[:-1, :].ravel())
    vals.append(np.full((ny - 1) * nx, -b))
    mat = sp.csc_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(nx * ny,) * 2
    )
    lu = spla.splu(mat, permc_spec="NATURAL", diag_pivot_thresh=0.0)
    perm = np.ix_(jj, ii)
    return lu, perm, a, b


def _inflow_value(inflow: Mapping[str, float], side: str) -> float:
    return float(inflow.get(side, 0.0))


def solve_rte(
    sigma: np.ndarray,
    i_in: float = 1.0,
    inflow: Mapping[str, float] | None = None,
    tol: float = 1e-10,
    max_sweeps: int = 10_000,
    n_dirs: int = N_DIRS,
) -> tuple[np.ndarray, int]:
    """Source iteration with first-order upwind sweeps on a cell-centred grid.

    ``sigma`` has shape ``(ny, nx)`` on the unit square. ``inflow`` maps a side
    (``left``/``right``/``bottom``/``top``) to the incoming intensity for every
    direction entering through it; the default lights the left side with
    ``i_in``. Returns the cell intensities, shape ``(n_dirs, ny, nx)``, and the
    number of sweeps performed.
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    if np.any(sigma < 0):
        raise ValueError("scattering coefficient must be non-negative")
    if inflow is None:
        inflow = {"left": i_in}
    ny, nx = sigma.shape
    hx, hy = 1.0 / nx, 1.0 / ny
    thetas = direction_angles(n_dirs)
    ops = []
    for th in thetas:
        cx, cy = np.cos(th), np.sin(th)
        lu, perm, a, b = _sweep_operator(sigma, hx, hy, cx, cy)
        # boundary source in sweep order: first column gets the x-inflow, first row the y-inflow
        bc = np.zeros((ny, nx))
        bc[:, 0] += a * _inflow_value(inflow, "left" if cx > 0 else "right")
        bc[0, :] += b * _inflow_value(inflow, "bottom" if cy > 0 else "top")
        ops.append((lu, perm, bc))
    intensity = np.zeros((n_dirs, ny, nx))
    phi = np.zeros((ny, nx))
    for sweep in range(1, max_sweeps + 1):
        new = np.empty_like(intensity)
        src = sigma * phi
        for d, (lu, perm, bc) in enumerate(ops):
            rhs = src[perm] + bc
            sol = lu.solve(rhs.ravel()).reshape(ny, nx)
            out = np.empty((ny, nx))
            out[perm] = sol
            new[d] = out
        change = float(np.max(np.abs(new - intensity)))
        intensity = new
        phi = intensity.mean(axis=0)
        if change < tol:
            return intensity, sweep
    raise ConvergenceError("source iteration did not converge", change, max_sweeps)


def restrict_bilinear(cells: np.ndarray, target: Grid) -> np.ndarray:
    """Bilinear interpolation of cell-centred values to target nodes (clamped at the edges)."""
    ny, nx = cells.shape

    def weights(coords, n):
        pos = np.clip(coords * n - 0.5, 0.0, n - 1.0)
        i0 = np.minimum(np.floor(pos).astype(int), n - 2)
        return i0, pos - i0

    ix, fx = weights(target.axis(0), nx)
    iy, fy = weights(target.axis(1), ny)
    c00 = cells[np.ix_(iy, ix)]
    c01 = cells[np.ix_(iy, ix + 1)]
    c10 = cells[np.ix_(iy + 1, ix)]
    c11 = cells[np.ix_(iy + 1, ix + 1)]
    fx = fx[None, :]
    fy = fy[:, None]
    return ((1 - fy) * ((1 - fx) * c00 + fx * c01) + fy * ((1 - fx) * c10 + fx * c11)).ravel()


def observe(intensity: np.ndarray, grid: Grid) -> DiscreteField:
    """Restrict per-direction cell intensities onto an angular observation grid."""
    if grid.kind != "angular" or grid.n_dirs != intensity.shape[0]:
        raise ValueError("observation grid must be an angular product with matching directions")
    vals = np.concatenate([restrict_bilinear(intensity[d], grid.spatial) for d in range(grid.n_dirs)])
    return DiscreteField(grid, vals)
