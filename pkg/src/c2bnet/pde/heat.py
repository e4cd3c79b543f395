"""1-D heat equation on [0, 2]: random trigonometric initial data, Crank-Nicolson stepping."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..grids import DiscreteField, line1d
from ..numkit import Rng, thomas_solve

DOMAIN = (0.0, 2.0)


@dataclass(frozen=True)
class HeatIC:
    w: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        for name in ("w", "p"):
            v = np.asarray(getattr(self, name), dtype=np.float64)
            if v.shape != (3,):
                raise ValueError(f"{name} must hold 3 coefficients")
            object.__setattr__(self, name, v)

    def u0(self) -> Callable:
        w, p = self.w, self.p

        def u0(x):
            x = np.asarray(x, dtype=np.float64)
            out = np.zeros_like(x)
            for i in range(3):
                out = out + w[i] * np.sin((i + 1) * np.pi * x) + p[i] * np.cos((i + 1) * np.pi * x)
            return out

        return u0


def sample_heat_ic(rng: Rng) -> tuple[HeatIC, Callable]:
    c = rng.uniform(-1.0, 1.0, size=6)
    ic = HeatIC(c[:3], c[3:])
    return ic, ic.u0()


def solve_heat(u0: Callable, T: float = 0.01, n_intervals: int = 256, n_steps: int = 100) -> DiscreteField:
    """Crank-Nicolson for ``u_t = u_xx`` with boundary values frozen at the initial trace."""
    if T <= 0:
        raise ValueError("final time must be positive")
    grid = line1d(*DOMAIN, n_intervals + 1)
    x = grid.nodes()
    u = np.asarray(u0(x), dtype=np.float64).copy()
    h = grid.spacing(0)
    r = (T / n_steps) / h**2
    m = n_intervals - 1
    lower = np.full(m - 1, -0.5 * r)
    upper = np.full(m - 1, -0.5 * r)
    diag = np.full(m, 1.0 + r)
    left, right = u[0], u[-1]
    for _ in range(n_steps):
        rhs = (1.0 - r) * u[1:-1] + 0.5 * r * (u[:-2] + u[2:])
        # boundary values are the same at both time levels
        rhs[0] += 0.5 * r * left
        rhs[-1] += 0.5 * r * right
        u[1:-1] = thomas_solve(lower, diag, upper, rhs)
    return DiscreteField(grid, u)
