"""The three inverse problems: how a sample is drawn, forward-solved and discretised."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from ..grids import Grid, line1d, rect2d, sample_on_grid
from ..numkit import Rng
from . import elliptic, heat, rte

PROFILES = ("fast", "paper")


@dataclass(frozen=True)
class Problem:
    tag: str
    input_grid: Grid
    output_grid: Grid
    transfer_grid: Grid
    metric: str
    d_low: int
    intrinsic_dim: int
    sample: Callable[[Rng], Any]
    forward: Callable[[Any, str], np.ndarray]
    discretize: Callable[[Any, Grid], np.ndarray]


def _elliptic_forward(params: elliptic.EllipticParams, profile: str) -> np.ndarray:
    u = elliptic.solve_elliptic(params.kappa(), 1.0, elliptic.solve_grid(64))
    return elliptic.restrict_nearest(u, ELLIPTIC.input_grid)


def _elliptic_discretize(params: elliptic.EllipticParams, grid: Grid) -> np.ndarray:
    return sample_on_grid(params.kappa(), grid).values


def _heat_forward(ic: heat.HeatIC, profile: str) -> np.ndarray:
    u = heat.solve_heat(ic.u0(), T=0.01)
    return np.interp(HEAT.input_grid.nodes(), u.grid.nodes(), u.values)


def _heat_discretize(ic: heat.HeatIC, grid: Grid) -> np.ndarray:
    return sample_on_grid(ic.u0(), grid).values


def _rte_forward(s: rte.RteSigma, profile: str) -> np.ndarray:
    n = 64 if profile == "paper" else 32
    sigma = s.cell_average(rte.solve_grid(n)).reshape(n, n)
    intensity, _ = rte.solve_rte(sigma, i_in=1.0)
    return rte.observe(intensity, RTE.input_grid).values


def _rte_discretize(s: rte.RteSigma, grid: Grid) -> np.ndarray:
    return s.cell_average(grid)


ELLIPTIC = Problem(
    tag="elliptic",
    input_grid=rect2d(10, 10, "cell"),
    output_grid=rect2d(10, 10, "cell"),
    transfer_grid=rect2d(20, 20, "cell"),
    metric="l2",
    d_low=12,
    intrinsic_dim=4,
    sample=lambda rng: elliptic.sample_elliptic_kappa(rng)[0],
    forward=_elliptic_forward,
    discretize=_elliptic_discretize,
)

HEAT = Problem(
    tag="heat",
    input_grid=line1d(0.0, 2.0, 64),
    output_grid=line1d(0.0, 2.0, 64),
    transfer_grid=line1d(0.0, 2.0, 127),
    metric="l2",
    d_low=20,
    intrinsic_dim=6,
    sample=lambda rng: heat.sample_heat_ic(rng)[0],
    forward=_heat_forward,
    discretize=_heat_discretize,
)

RTE = Problem(
    tag="rte",
    input_grid=rte.observation_grid(11),
    output_grid=rect2d(10, 10, "cell"),
    transfer_grid=rect2d(20, 20, "cell"),
    metric="l1",
    d_low=50,
    intrinsic_dim=10,
    sample=lambda rng: rte.sample_rte_sigma(rng)[0],
    forward=_rte_forward,
    discretize=_rte_discretize,
)

PROBLEMS = {p.tag: p for p in (ELLIPTIC, HEAT, RTE)}


def get_problem(tag: str) -> Problem:
    try:
        return PROBLEMS[tag]
    except KeyError:
        raise ValueError(f"unknown problem {tag!r}; expected one of {sorted(PROBLEMS)}") from None
