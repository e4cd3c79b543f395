"""Sample-size sweeps, power-law fits, fine-tune comparisons and the projection diagnostic."""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..grids import make_quadrature
from ..model import c2bnet_new, finetune_exact, finetune_gradient, quadrature_loss, trainable_params
from ..numkit import Rng, weighted_principal_spectrum
from ..pde.dataset import Dataset, generate_dataset, with_output_grid
from ..train import TrainConfig, evaluate, train
from .config import ExperimentConfig

SWEEP_COLUMNS = ("problem", "n", "trial", "metric", "value", "wall_time_s")
COMPARE_COLUMNS = (
    "problem",
    "n",
    "method",
    "metric",
    "value",
    "train_loss",
    "trainable_params",
    "wall_time_s",
)


class StageError(RuntimeError):
    def __init__(self, n: int, trial: int, cause: Exception):
        super().__init__(f"sweep point n={n}, trial={trial} failed: {cause}")
        self.n, self.trial = n, trial


@dataclass(frozen=True)
class PowerLawFit:
    slope: float
    intercept: float
    r2: float


@dataclass
class SweepRecord:
    n: int
    trial: int
    rel_error: float
    train_loss: float
    wall_time: float
    epochs: int = 0


@dataclass
class SweepResult:
    problem: str
    metric: str
    records: list[SweepRecord]
    fit: PowerLawFit

    def mean_errors(self) -> dict[int, float]:
        by_n: dict[int, list[float]] = {}
        for r in self.records:
            by_n.setdefault(r.n, []).append(r.rel_error)
        return {n: math.fsum(v) / len(v) for n, v in sorted(by_n.items())}

    def error_ranges(self) -> dict[int, tuple[float, float]]:
        by_n: dict[int, list[float]] = {}
        for r in self.records:
            by_n.setdefault(r.n, []).append(r.rel_error)
        return {n: (min(v), max(v)) for n, v in sorted(by_n.items())}


def fit_power_law(points) -> PowerLawFit:
    """Least-squares line through ``(log n, log error)``."""
    pts = [(float(n), float(e)) for n, e in points]
    if len(pts) < 3:
        raise ValueError("a power-law fit needs at least 3 points")
    if any(n <= 0 or e <= 0 for n, e in pts):
        raise ValueError("power-law fits need positive sizes and errors")
    x = np.log([n for n, _ in pts])
    y = np.log([e for _, e in pts])
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    if sxx == 0.0:
        raise ValueError("power-law fit needs at least two distinct sizes")
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    ss_tot = float(np.sum((y - ym) ** 2))
    ss_res = float(np.sum((y - (intercept + slope * x)) ** 2))
    r2 = 1.0 if ss_tot <= 1e-300 else max(0.0, 1.0 - ss_res / ss_tot)
    if ss_tot <= 1e-300:
        slope = 0.0
    return PowerLawFit(slope, intercept, min(r2, 1.0))


# ---------------------------------------------------------------------------
# data
# ---------------------------------------------------------------------------


def data_seeds(cfg: ExperimentConfig) -> tuple[int, int]:
    """Master seeds of the training pool and of the reserved test set."""
    root = Rng(cfg.seed)
    return root.split("train-pool").seed, root.split("test-set").seed


def make_data(cfg: ExperimentConfig, grid=None) -> tuple[Dataset, Dataset]:
    """Training pool of ``max(n_values)`` samples and the shared test set."""
    grid = grid or cfg.base_grid
    pool_seed, test_seed = data_seeds(cfg)
    pool = generate_dataset(cfg.problem, cfg.n_values[-1], pool_seed, cfg.noise_sigma, grid, cfg.profile, cfg.workers)
    # the test set is always noise free
    test = generate_dataset(cfg.problem, cfg.n_test, test_seed, 0.0, grid, cfg.profile, cfg.workers)
    return pool, test


def _init_seed(cfg: ExperimentConfig, n: int, trial: int, tag: str = "init") -> int:
    return Rng(cfg.train.seed).split(f"{tag}:{cfg.problem}:{n}:{trial}").seed


def fresh_net(cfg: ExperimentConfig, data: Dataset, seed: int):
    return c2bnet_new(
        data.inputs.shape[1],
        cfg.d_low,
        data.outputs.shape[1],
        Rng(seed),
        hidden=tuple(cfg.hidden),
        input_grid=data.input_grid,
        output_grid=data.output_grid,
        init_gain=cfg.init_gain,
        latent_activation=cfg.latent_activation,
    )


def train_point(cfg: ExperimentConfig, pool: Dataset, n: int, trial: int, tag: str = "init"):
    """Train a fresh network on the first ``n`` pool samples."""
    seed = _init_seed(cfg, n, trial, tag)
    data = pool.take(np.arange(n))
    net = fresh_net(cfg, data, seed)
    return train(net, data, replace(cfg.train, seed=seed))


def _sweep_task(args) -> SweepRecord:
    cfg, pool, test, n, trial = args
    try:
        start = time.perf_counter()
        net, report = train_point(cfg, pool, n, trial)
        err, _ = evaluate(net, test, cfg.metric)
        return SweepRecord(n, trial, err, report.best_loss, time.perf_counter() - start, report.epochs)
    except Exception as exc:
        raise StageError(n, trial, exc) from exc


def run_sweep(cfg: ExperimentConfig, data: tuple[Dataset, Dataset] | None = None) -> SweepResult:
    """Train one fresh network per ``(n, trial)`` and fit a power law to the mean errors."""
    pool, test = data or make_data(cfg)
    tasks = [(cfg, pool, test, n, t) for n in cfg.n_values for t in range(cfg.trials)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as ex:
            records = list(ex.map(_sweep_task, tasks))
    else:
        records = [_sweep_task(t) for t in tasks]
    records.sort(key=lambda r: (r.n, r.trial))
    result = SweepResult(cfg.problem, cfg.metric, records, PowerLawFit(0.0, 0.0, 0.0))
    means = result.mean_errors()
    if len(means) >= 3:
        result.fit = fit_power_law(means.items())
    return result


def _time_field(cfg: ExperimentConfig, seconds: float) -> str:
    return repr(float(seconds)) if cfg.timings else ""


def sweep_csv(result: SweepResult, cfg: ExperimentConfig) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for r in result.records:
        w.writerow([result.problem, r.n, r.trial, result.metric, repr(float(r.rel_error)), _time_field(cfg, r.wall_time)])
    return buf.getvalue()


def read_sweep_csv(text: str) -> list[dict]:
    rows = list(csv.DictReader(io.StringIO(text)))
    if rows and tuple(rows[0].keys()) != SWEEP_COLUMNS:
        raise ValueError(f"unexpected sweep CSV columns {tuple(rows[0].keys())}")
    return rows


def gnuplot_data(result: SweepResult) -> tuple[str, str]:
    """Two-column ``n error`` data and the fitted line at the same sizes."""
    means = result.mean_errors()
    pts = "".join(f"{n} {e!r}\n" for n, e in means.items())
    f = result.fit
    line = "".join(f"{n} {math.exp(f.intercept) * n ** f.slope!r}\n" for n in means)
    return pts, line


def write_sweep(result: SweepResult, cfg: ExperimentConfig, out: Path) -> dict[str, Path]:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"sweep_{cfg.problem}"
    paths = {
        "csv": out / f"{stem}.csv",
        "errors": out / f"{stem}_errors.dat",
        "fit": out / f"{stem}_fit.dat",
    }
    paths["csv"].write_text(sweep_csv(result, cfg))
    pts, line = gnuplot_data(result)
    paths["errors"].write_text(pts)
    paths["fit"].write_text(line)
    return paths


# ---------------------------------------------------------------------------
# transfer to a finer output grid
# ---------------------------------------------------------------------------


@dataclass
class ComparisonRow:
    n: int
    method: str
    rel_error: float
    train_loss: float
    trainable_params: int
    wall_time: float


@dataclass
class Comparison:
    problem: str
    metric: str
    rows: list[ComparisonRow] = field(default_factory=list)

    def get(self, n: int, method: str) -> ComparisonRow:
        for r in self.rows:
            if r.n == n and r.method == method:
                return r
        raise KeyError((n, method))


def train_base(cfg: ExperimentConfig, pool: Dataset):
    """The pre-trained network on the base grid, fit to the full training pool."""
    return train_point(cfg, pool, len(pool), 0, tag="base")


def compare_finetune(
    cfg: ExperimentConfig,
    base,
    data: tuple[Dataset, Dataset] | None = None,
) -> Comparison:
    """Last-layer fine-tuning (gradient and closed form) against a full retrain on the fine grid.

    ``base`` is a trained network (or a checkpoint path) for the base grid.
    """
    if base is None:
        raise FileNotFoundError("compare needs a pre-trained base checkpoint")
    if isinstance(base, (str, Path)):
        from .io import load_model

        path = Path(base)
        if not path.exists():
            raise FileNotFoundError(f"base checkpoint {path} does not exist")
        base = load_model(path)
    fine = cfg.fine_grid
    if data is None:
        pool, test = make_data(cfg)
    else:
        pool, test = data
    pool_f = with_output_grid(pool, fine) if pool.output_grid != fine else pool
    test_f = with_output_grid(test, fine) if test.output_grid != fine else test
    q = make_quadrature(fine)
    out = Comparison(cfg.problem, cfg.metric)
    for n in cfg.compare_sizes:
        subset = pool_f.take(np.arange(n))
        ft_cfg = replace(cfg.finetune_train, seed=_init_seed(cfg, n, 0, "finetune"))

        start = time.perf_counter()
        grad_net = finetune_gradient(base, subset, ft_cfg)
        t_grad = time.perf_counter() - start
        start = time.perf_counter()
        exact_net = finetune_exact(base, subset)
        t_exact = time.perf_counter() - start
        start = time.perf_counter()
        full_net, rep = train_point(replace(cfg, output_grid=fine.to_dict()), pool_f, n, 0, tag="retrain")
        t_full = time.perf_counter() - start

        last = trainable_params(grad_net, last_layer_only=True)
        for method, net, secs, params in (
            ("finetune_gradient", grad_net, t_grad, last),
            ("finetune_exact", exact_net, t_exact, last),
            ("retrain", full_net, t_full, trainable_params(full_net, last_layer_only=False)),
        ):
            err, _ = evaluate(net, test_f, cfg.metric)
            loss = quadrature_loss(net(subset.inputs), subset.outputs, q)
            out.rows.append(ComparisonRow(n, method, err, loss, params, secs))
    return out


def compare_csv(comp: Comparison, cfg: ExperimentConfig) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COMPARE_COLUMNS)
    for r in comp.rows:
        w.writerow(
            [
                comp.problem,
                r.n,
                r.method,
                comp.metric,
                repr(float(r.rel_error)),
                repr(float(r.train_loss)),
                r.trainable_params,
                _time_field(cfg, r.wall_time),
            ]
        )
    return buf.getvalue()


# ---------------------------------------------------------------------------
# low-dimensional output structure
# ---------------------------------------------------------------------------


def estimate_projection_residual(data: Dataset, d2: int) -> float:
    """RMS quadrature-norm residual of the outputs after projection onto the top-``d2``
    weighted principal directions."""
    if len(data) < 2:
        raise ValueError("need at least two samples")
    d_out = data.outputs.shape[1]
    if d2 > d_out:
        raise ValueError(f"d2={d2} exceeds the output dimension {d_out}")
    w = make_quadrature(data.output_grid).weights
    _, vecs = weighted_principal_spectrum(data.outputs, w, d2)
    v = data.outputs
    coeffs = (v * w) @ vecs
    resid = v - coeffs @ vecs.T
    return float(np.sqrt(np.mean(np.sum(w * resid * resid, axis=1))))
