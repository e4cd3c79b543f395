"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 numeric failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from ..numkit import NumericError
from ..pde.dataset import SampleError, generate_dataset, with_output_grid
from ..train import evaluate
from . import experiments as ex
from .config import ConfigError, ExperimentConfig, default_config, load_config
from .io import FormatError, load_dataset, load_model, save_dataset, save_model

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON or TOML experiment config")
    common.add_argument("--problem", choices=("elliptic", "heat", "rte"), help="use built-in defaults")
    common.add_argument("--seed", type=int, help="override the config's master seed")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    prof = common.add_mutually_exclusive_group()
    prof.add_argument("--fast", dest="profile", action="store_const", const="fast")
    prof.add_argument("--paper", dest="profile", action="store_const", const="paper")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="c2bnet", description="Coefficient-to-basis operator learning experiments")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="write the training pool and test set")
    g.add_argument("--n", type=int, help="pool size (default: largest sweep size)")
    g.add_argument("--fine", action="store_true", help="discretise outputs on the transfer grid")

    t = sub.add_parser("train", parents=[common], help="train one network")
    t.add_argument("--n", type=int, help="training samples (default: largest sweep size)")
    t.add_argument("--data", type=Path, help="dataset file (default: generate from the config)")

    f = sub.add_parser("finetune", parents=[common], help="re-learn the basis layer on the transfer grid")
    m = f.add_mutually_exclusive_group(required=True)
    m.add_argument("--exact", dest="method", action="store_const", const="exact")
    m.add_argument("--gradient", dest="method", action="store_const", const="gradient")
    f.add_argument("--model", type=Path, required=True, help="base checkpoint")
    f.add_argument("--n", type=int)
    f.add_argument("--data", type=Path, help="fine-grid dataset file")

    r = sub.add_parser("retrain", parents=[common], help="train from scratch on the transfer grid")
    r.add_argument("--n", type=int)
    r.add_argument("--data", type=Path, help="fine-grid dataset file")

    sub.add_parser("sweep", parents=[common], help="error against training-set size")

    c = sub.add_parser("compare", parents=[common], help="fine-tuning against full retraining")
    c.add_argument("--model", type=Path, required=True, help="base checkpoint")

    v = sub.add_parser("verify", parents=[common], help="gradient, solver and quadrature self-checks")
    v.add_argument("--nets", type=int, default=100)

    rp = sub.add_parser("report", parents=[common], help="aggregate sweep CSVs and fit power laws")
    rp.add_argument("csv", nargs="+", type=Path)

    s = sub.add_parser("spectrum", parents=[common], help="projection residual against subspace size")
    s.add_argument("--n", type=int, default=500)
    s.add_argument("--d2", type=int, nargs="+", default=None)
    return p


def _config(args) -> ExperimentConfig:
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.profile is not None:
        overrides["profile"] = args.profile
    if args.config is not None:
        return load_config(args.config, **overrides)
    if args.problem is None:
        raise ConfigError("give --config <file> or --problem <name>")
    return default_config(args.problem, **overrides)


def _emit(out: Path, name: str, payload: dict) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def _pool(cfg: ExperimentConfig, data_path: Path | None, n: int | None, fine: bool):
    """Training subset and test set, either from a file or freshly generated."""
    if data_path is None:
        pool, test = ex.make_data(cfg)
    else:
        pool = load_dataset(data_path)
        if pool.problem != cfg.problem:
            raise ConfigError(f"dataset is for {pool.problem!r}, config is for {cfg.problem!r}")
        _, test_seed = ex.data_seeds(cfg)
        test = generate_dataset(cfg.problem, cfg.n_test, test_seed, 0.0, cfg.base_grid, cfg.profile, cfg.workers)
    if fine:
        if pool.output_grid != cfg.fine_grid:
            pool = with_output_grid(pool, cfg.fine_grid)
        test = with_output_grid(test, cfg.fine_grid)
    n = n or len(pool)
    if not 0 < n <= len(pool):
        raise ConfigError(f"n={n} outside 1..{len(pool)}")
    return pool.take(np.arange(n)), test


def cmd_generate(args, cfg):
    grid = cfg.fine_grid if args.fine else cfg.base_grid
    pool_seed, test_seed = ex.data_seeds(cfg)
    n = args.n or cfg.n_values[-1]
    pool = generate_dataset(cfg.problem, n, pool_seed, cfg.noise_sigma, grid, cfg.profile, cfg.workers)
    test = generate_dataset(cfg.problem, cfg.n_test, test_seed, 0.0, grid, cfg.profile, cfg.workers)
    tag = "fine" if args.fine else "base"
    save_dataset(pool, args.out / f"{cfg.problem}_{tag}_train.c2bd")
    save_dataset(test, args.out / f"{cfg.problem}_{tag}_test.c2bd")
    print(f"wrote {n} training and {cfg.n_test} test samples to {args.out}")


def cmd_train(args, cfg):
    data, test = _pool(cfg, args.data, args.n, fine=False)
    net, report = ex.train_point(cfg, data, len(data), 0)
    err, _ = evaluate(net, test, cfg.metric)
    save_model(net, args.out / f"{cfg.problem}_n{len(data)}.c2bm")
    _emit(args.out, f"{cfg.problem}_n{len(data)}_train.json", {**report.summary(), "test_error": err})
    print(f"n={len(data)} test {cfg.metric} error {err:.4e} ({report.stop_reason} after {report.epochs} epochs)")


def cmd_finetune(args, cfg):
    base = load_model(args.model)
    data, test = _pool(cfg, args.data, args.n, fine=True)
    if args.method == "exact":
        net = ex.finetune_exact(base, data)
    else:
        net = ex.finetune_gradient(base, data, replace(cfg.finetune_train, seed=ex._init_seed(cfg, len(data), 0, "finetune")))
    err, _ = evaluate(net, test, cfg.metric)
    save_model(net, args.out / f"{cfg.problem}_n{len(data)}_finetune_{args.method}.c2bm")
    print(f"fine-tune ({args.method}) n={len(data)} test {cfg.metric} error {err:.4e}")


def cmd_retrain(args, cfg):
    data, test = _pool(cfg, args.data, args.n, fine=True)
    fine_cfg = replace(cfg, output_grid=cfg.fine_grid.to_dict())
    net, report = ex.train_point(fine_cfg, data, len(data), 0, tag="retrain")
    err, _ = evaluate(net, test, cfg.metric)
    save_model(net, args.out / f"{cfg.problem}_n{len(data)}_retrain.c2bm")
    print(f"retrain n={len(data)} test {cfg.metric} error {err:.4e}")


def _summary(result: ex.SweepResult, cfg: ExperimentConfig) -> dict:
    means, ranges = result.mean_errors(), result.error_ranges()
    out = {
        "problem": result.problem,
        "metric": result.metric,
        "config": cfg.to_dict(),
        "mean_error": {str(n): e for n, e in means.items()},
        "error_range": {str(n): list(r) for n, r in ranges.items()},
        "fit": {"slope": result.fit.slope, "intercept": result.fit.intercept, "r2": result.fit.r2},
    }
    if cfg.timings:
        out["wall_time_s"] = {f"{r.n}:{r.trial}": r.wall_time for r in result.records}
    return out


def cmd_sweep(args, cfg):
    result = ex.run_sweep(cfg)
    paths = ex.write_sweep(result, cfg, args.out)
    _emit(args.out, f"sweep_{cfg.problem}_summary.json", _summary(result, cfg))
    for n, e in result.mean_errors().items():
        lo, hi = result.error_ranges()[n]
        print(f"n={n:4d} mean {cfg.metric} error {e:.4e} [{lo:.4e}, {hi:.4e}]")
    f = result.fit
    print(f"power law: slope {f.slope:.3f}, r2 {f.r2:.3f}; CSV at {paths['csv']}")


def cmd_compare(args, cfg):
    if not args.model.exists():
        raise FileNotFoundError(f"base checkpoint {args.model} does not exist")
    comp = ex.compare_finetune(cfg, args.model)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / f"compare_{cfg.problem}.csv").write_text(ex.compare_csv(comp, cfg))
    for r in comp.rows:
        print(f"n={r.n:4d} {r.method:18s} error {r.rel_error:.4e} params {r.trainable_params}")


def cmd_verify(args, cfg):
    from .verify import run_all

    checks = run_all(args.nets)
    for c in checks:
        print(c.line())
    if not all(c.passed for c in checks):
        raise NumericError("self-checks failed")


def cmd_report(args, cfg):
    rows = []
    for path in args.csv:
        rows += ex.read_sweep_csv(path.read_text())
    by_problem: dict[str, dict[int, list[float]]] = {}
    for row in rows:
        by_problem.setdefault(row["problem"], {}).setdefault(int(row["n"]), []).append(float(row["value"]))
    report = {}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("problem", "n", "mean", "min", "max", "trials"))
    for prob, by_n in sorted(by_problem.items()):
        means = {n: math.fsum(v) / len(v) for n, v in sorted(by_n.items())}
        for n, v in sorted(by_n.items()):
            w.writerow((prob, n, repr(means[n]), repr(min(v)), repr(max(v)), len(v)))
        entry = {"mean_error": {str(n): e for n, e in means.items()}}
        if len(means) >= 3:
            fit = ex.fit_power_law(means.items())
            entry["fit"] = {"slope": fit.slope, "intercept": fit.intercept, "r2": fit.r2}
            print(f"{prob}: slope {fit.slope:.3f}, r2 {fit.r2:.3f}")
        report[prob] = entry
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "report.csv").write_text(buf.getvalue())
    _emit(args.out, "report.json", report)


def cmd_spectrum(args, cfg):
    pool_seed, _ = ex.data_seeds(cfg)
    data = generate_dataset(cfg.problem, args.n, pool_seed, 0.0, cfg.base_grid, cfg.profile, cfg.workers)
    d2s = args.d2 or list(range(1, cfg.d_low + 1))
    out = {}
    for d2 in d2s:
        z = ex.estimate_projection_residual(data, d2)
        out[str(d2)] = z
        print(f"d2={d2:3d} zeta {z:.3e}")
    _emit(args.out, f"spectrum_{cfg.problem}.json", {"problem": cfg.problem, "n": args.n, "zeta": out})


COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "finetune": cmd_finetune,
    "retrain": cmd_retrain,
    "sweep": cmd_sweep,
    "compare": cmd_compare,
    "verify": cmd_verify,
    "report": cmd_report,
    "spectrum": cmd_spectrum,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        if args.command in ("verify", "report"):
            cfg = None
        else:
            cfg = _config(args)
        COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, SampleError, ex.StageError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, FormatError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
