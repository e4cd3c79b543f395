from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from ..grids import Grid
from ..numkit import Rng
from .problems import get_problem


class SampleError(RuntimeError):
    def __init__(self, index: int, cause: Exception):
        super().__init__(f"sample {index} failed: {cause}")
        self.index = index


@dataclass
class Dataset:
    """Paired discretised solutions (inputs) and parameters (outputs), one sample per row."""

    problem: str
    inputs: np.ndarray
    outputs: np.ndarray
    input_grid: Grid
    output_grid: Grid
    seeds: np.ndarray
    noise_sigma: float = 0.0
    profile: str = "fast"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.inputs = np.ascontiguousarray(self.inputs, dtype=np.float64)
        self.outputs = np.ascontiguousarray(self.outputs, dtype=np.float64)
        self.seeds = np.ascontiguousarray(self.seeds, dtype=np.uint64)
        n = self.inputs.shape[0]
        if self.outputs.shape[0] != n or self.seeds.shape != (n,):
            raise ValueError("inputs, outputs and seeds must have one row per sample")
        if self.inputs.shape[1] != self.input_grid.size or self.outputs.shape[1] != self.output_grid.size:
            raise ValueError("dataset columns do not match the declared grids")

    def __len__(self) -> int:
        return self.inputs.shape[0]

    def take(self, index) -> "Dataset":
        index = np.asarray(index)
        if index.size == 0:
            index = index.astype(np.intp)
        return replace(
            self,
            inputs=self.inputs[index],
            outputs=self.outputs[index],
            seeds=self.seeds[index],
            meta=dict(self.meta),
        )


def sample_seed(master_seed: int, index: int) -> int:
    return Rng(master_seed).split(f"sample:{index}").seed


def _one_sample(args):
    tag, seed, output_grid, noise_sigma, profile = args
    problem = get_problem(tag)
    rng = Rng(seed)
    params = problem.sample(rng.split("params"))
    u = problem.forward(params, profile)
    v = _discretize_with_noise(problem, params, rng, output_grid, noise_sigma)
    return u, v


def _discretize_with_noise(problem, params, rng: Rng, grid: Grid, noise_sigma: float) -> np.ndarray:
    v = problem.discretize(params, grid)
    if noise_sigma > 0:
        v = v + rng.split("noise").normal(0.0, noise_sigma, size=v.shape)
    return v


def generate_dataset(
    problem: str,
    n: int,
    master_seed: int,
    noise_sigma: float = 0.0,
    output_grid: Grid | None = None,
    profile: str = "fast",
    workers: int = 1,
) -> Dataset:
    """Draw ``n`` parameters, forward-solve each, and pair solutions with parameters.

    Every sample owns a stream split from ``master_seed`` by index, so rows
    do not depend on ``workers`` or completion order.
    """
    if n < 1:
        raise ValueError("a dataset needs at least one sample")
    prob = get_problem(problem)
    grid = output_grid or prob.output_grid
    seeds = [sample_seed(master_seed, i) for i in range(n)]
    return from_seeds(problem, seeds, noise_sigma, grid, profile, workers, master_seed=master_seed)


def from_seeds(
    problem: str,
    seeds,
    noise_sigma: float = 0.0,
    output_grid: Grid | None = None,
    profile: str = "fast",
    workers: int = 1,
    master_seed: int | None = None,
) -> Dataset:
    prob = get_problem(problem)
    grid = output_grid or prob.output_grid
    jobs = [(problem, int(s), grid, noise_sigma, profile) for s in seeds]
    results = []
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            futures = [pool.submit(_one_sample, job) for job in jobs]
            for i, fut in enumerate(futures):
                try:
                    results.append(fut.result())
                except Exception as exc:
                    raise SampleError(i, exc) from exc
    else:
        for i, job in enumerate(jobs):
            try:
                results.append(_one_sample(job))
            except Exception as exc:
                raise SampleError(i, exc) from exc
    meta = {} if master_seed is None else {"master_seed": int(master_seed)}
    return Dataset(
        problem=problem,
        inputs=np.stack([u for u, _ in results]),
        outputs=np.stack([v for _, v in results]),
        input_grid=prob.input_grid,
        output_grid=grid,
        seeds=np.array([int(s) for s in seeds], dtype=np.uint64),
        noise_sigma=float(noise_sigma),
        profile=profile,
        meta=meta,
    )


def with_output_grid(data: Dataset, grid: Grid) -> Dataset:
    """Same samples and inputs, parameters rediscretised on ``grid`` (no re-solve)."""
    prob = get_problem(data.problem)
    outputs = []
    for s in data.seeds:
        rng = Rng(int(s))
        params = prob.sample(rng.split("params"))
        outputs.append(_discretize_with_noise(prob, params, rng, grid, data.noise_sigma))
    return replace(data, outputs=np.stack(outputs), output_grid=grid, meta=dict(data.meta))
