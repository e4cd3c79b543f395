"""Sampling grids, quadrature weights and the weighted inner products built on them."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np

Placement = Literal["endpoints", "cell"]


@dataclass(frozen=True)
class Grid:
    """A tensor grid on an interval, a rectangle, or a rectangle times directions.

    2-D node ordering is row-major in ``y``: ``values.reshape(ny, nx)[j, i]``
    is the node ``(x_i, y_j)``. Angular products are direction-major:
    ``values.reshape(n_dirs, spatial.size)``.
    """

    kind: Literal["line1d", "rect2d", "angular"]
    placement: Placement = "endpoints"
    n: tuple[int, ...] = ()
    bounds: tuple[float, ...] = ()
    spatial: "Grid | None" = None
    n_dirs: int = 0

    def __post_init__(self):
        if self.kind == "angular":
            if self.spatial is None or self.n_dirs < 1:
                raise ValueError("angular grid needs a spatial grid and n_dirs >= 1")
            return
        if any(k < 2 for k in self.n):
            raise ValueError(f"every axis needs at least 2 nodes, got {self.n}")
        if self.placement not in ("endpoints", "cell"):
            raise ValueError(f"unknown node placement {self.placement!r}")
        for lo, hi in zip(self.bounds[::2], self.bounds[1::2]):
            if not hi > lo:
                raise ValueError("grid bounds must be increasing")

    @property
    def size(self) -> int:
        if self.kind == "angular":
            return self.spatial.size * self.n_dirs
        return int(np.prod(self.n))

    @property
    def shape(self) -> tuple[int, ...]:
        if self.kind == "line1d":
            return (self.n[0],)
        if self.kind == "rect2d":
            return (self.n[1], self.n[0])
        return (self.n_dirs,) + self.spatial.shape

    @property
    def volume(self) -> float:
        if self.kind == "angular":
            return self.spatial.volume
        b = self.bounds
        return float(np.prod([hi - lo for lo, hi in zip(b[::2], b[1::2])]))

    def axis(self, i: int) -> np.ndarray:
        lo, hi = self.bounds[2 * i], self.bounds[2 * i + 1]
        m = self.n[i]
        if self.placement == "endpoints":
            return np.linspace(lo, hi, m)
        h = (hi - lo) / m
        return lo + h * (np.arange(m) + 0.5)

    def spacing(self, i: int) -> float:
        lo, hi = self.bounds[2 * i], self.bounds[2 * i + 1]
        m = self.n[i]
        return (hi - lo) / (m - 1 if self.placement == "endpoints" else m)

    def nodes(self) -> np.ndarray:
        """Node coordinates, shape ``(size,)`` in 1-D and ``(size, dim)`` otherwise."""
        if self.kind == "line1d":
            return self.axis(0)
        if self.kind == "rect2d":
            xx, yy = np.meshgrid(self.axis(0), self.axis(1))
            return np.column_stack([xx.ravel(), yy.ravel()])
        sp = self.spatial.nodes()
        if sp.ndim == 1:
            sp = sp[:, None]
        theta = direction_angles(self.n_dirs)
        reps = np.tile(sp, (self.n_dirs, 1))
        return np.column_stack([reps, np.repeat(theta, self.spatial.size)])

    def to_dict(self) -> dict:
        if self.kind == "angular":
            return {"kind": "angular", "spatial": self.spatial.to_dict(), "n_dirs": self.n_dirs}
        return {
            "kind": self.kind,
            "placement": self.placement,
            "n": list(self.n),
            "bounds": list(self.bounds),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Grid":
        if d["kind"] == "angular":
            return angular_product(cls.from_dict(d["spatial"]), int(d["n_dirs"]))
        return cls(
            kind=d["kind"],
            placement=d["placement"],
            n=tuple(int(k) for k in d["n"]),
            bounds=tuple(float(b) for b in d["bounds"]),
        )


def line1d(a: float, b: float, n: int, placement: Placement = "endpoints") -> Grid:
    return Grid("line1d", placement, (int(n),), (float(a), float(b)))


def rect2d(
    nx: int,
    ny: int,
    placement: Placement = "cell",
    bounds: tuple[float, float, float, float] = (0.0, 1.0, 0.0, 1.0),
) -> Grid:
    return Grid("rect2d", placement, (int(nx), int(ny)), tuple(float(b) for b in bounds))


def angular_product(spatial: Grid, n_dirs: int) -> Grid:
    if spatial.kind == "angular":
        raise ValueError("cannot nest angular products")
    return Grid("angular", spatial.placement, spatial=spatial, n_dirs=int(n_dirs))


def direction_angles(n_dirs: int) -> np.ndarray:
    """Evenly spaced directions on the circle, offset so none is axis-aligned."""
    return np.pi / n_dirs + 2.0 * np.pi * np.arange(n_dirs) / n_dirs


@dataclass(frozen=True)
class Quadrature:
    weights: np.ndarray

    def norm(self, values, kind: str = "l2") -> float:
        values = np.asarray(values, dtype=np.float64)
        if kind == "l2":
            return float(np.sqrt(np.sum(self.weights * values * values)))
        if kind == "l1":
            return float(np.sum(self.weights * np.abs(values)))
        raise ValueError(f"unknown norm {kind!r}")


def _axis_weights(grid: Grid, i: int) -> np.ndarray:
    m = grid.n[i]
    h = grid.spacing(i)
    w = np.full(m, h)
    if grid.placement == "endpoints":
        w[0] = w[-1] = 0.5 * h
    return w


def make_quadrature(grid: Grid) -> Quadrature:
    """Composite trapezoid weights on endpoint grids, midpoint weights on cell grids."""
    if grid.kind == "line1d":
        w = _axis_weights(grid, 0)
    elif grid.kind == "rect2d":
        w = np.outer(_axis_weights(grid, 1), _axis_weights(grid, 0)).ravel()
    else:
        w = np.tile(make_quadrature(grid.spatial).weights / grid.n_dirs, grid.n_dirs)
    return Quadrature(np.ascontiguousarray(w, dtype=np.float64))


@dataclass(frozen=True)
class DiscreteField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (self.grid.size,):
            raise ValueError(f"field has {v.shape} values for a grid of size {self.grid.size}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", v)


def _check_same(u: DiscreteField, v: DiscreteField, q: Quadrature):
    if u.grid != v.grid:
        raise ValueError("fields live on different grids")
    if q.weights.shape != (u.grid.size,):
        raise ValueError("quadrature does not match the field grid")


def inner_product(u: DiscreteField, v: DiscreteField, q: Quadrature) -> float:
    _check_same(u, v, q)
    return float(np.sum(q.weights * u.values * v.values))


def relative_error(pred: DiscreteField, truth: DiscreteField, q: Quadrature, norm: str = "l2") -> float:
    _check_same(pred, truth, q)
    denom = q.norm(truth.values, norm)
    if denom == 0.0:
        raise ValueError("relative error is undefined for a zero-norm reference")
    return q.norm(pred.values - truth.values, norm) / denom


def batch_relative_errors(pred, truth, q: Quadrature, norm: str = "l2") -> np.ndarray:
    """Row-wise relative errors of two ``(n, D)`` arrays sharing one grid."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    w = q.weights
    err = pred - truth
    if norm == "l2":
        num = np.sqrt(np.sum(w * err * err, axis=1))
        den = np.sqrt(np.sum(w * truth * truth, axis=1))
    elif norm == "l1":
        num = np.sum(w * np.abs(err), axis=1)
        den = np.sum(w * np.abs(truth), axis=1)
    else:
        raise ValueError(f"unknown norm {norm!r}")
    if np.any(den == 0.0):
        raise ValueError("relative error is undefined for a zero-norm reference")
    return num / den


def sample_on_grid(f: Callable, grid: Grid) -> DiscreteField:
    """Evaluate ``f`` at every node; ``f`` takes one coordinate array per axis."""
    nodes = grid.nodes()
    if nodes.ndim == 1:
        vals = f(nodes)
    else:
        vals = f(*nodes.T)
    vals = np.broadcast_to(np.asarray(vals, dtype=np.float64), (grid.size,)).copy()
    bad = ~np.isfinite(vals)
    if np.any(bad):
        k = int(np.argmax(bad))
        raise ValueError(f"non-finite value at node {nodes[k]!r}")
    return DiscreteField(grid, vals)
