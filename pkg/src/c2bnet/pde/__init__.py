"""Forward solvers, parameter samplers and dataset generation for the three inverse problems."""

from .dataset import Dataset, SampleError, from_seeds, generate_dataset, sample_seed, with_output_grid
from .elliptic import EllipticParams, sample_elliptic_kappa, solve_elliptic
from .heat import HeatIC, sample_heat_ic, solve_heat
from .problems import PROBLEMS, Problem, get_problem
from .rte import RteSigma, sample_rte_sigma, solve_rte

__all__ = [
    "Dataset",
    "EllipticParams",
    "HeatIC",
    "PROBLEMS",
    "Problem",
    "RteSigma",
    "SampleError",
    "from_seeds",
    "generate_dataset",
    "get_problem",
    "sample_elliptic_kappa",
    "sample_heat_ic",
    "sample_rte_sigma",
    "sample_seed",
    "solve_elliptic",
    "solve_heat",
    "solve_rte",
    "with_output_grid",
]
