"""Command-line entry point: ``mfga {featurize,train,evaluate,sweep,compare}``.

Exit codes: 0 success, 1 configuration error, 2 runtime error.

Environment:
    MFGA_THREADS      cap on BLAS threads (needs threadpoolctl)
    MFGA_OUTPUT_DIR   directory that relative output paths are resolved against
"""

from __future__ import annotations

import argparse
import contextlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import bench
from .baselines import load_model
from .data import Schema, Task, apply_standardizer, load_csv
from .errors import ConfigError, MFGAError, ParseError
from .features import TaylorGaussian

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _out_path(path):
    if path is None:
        return None
    p = Path(path)
    base = os.environ.get("MFGA_OUTPUT_DIR")
    if base and not p.is_absolute():
        p = Path(base) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _thread_limit():
    n = os.environ.get("MFGA_THREADS")
    if not n:
        return contextlib.nullcontext()
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        return contextlib.nullcontext()
    return threadpool_limits(int(n))


def _load_config(args) -> bench.ExperimentConfig:
    cfg = bench.ExperimentConfig.from_json(args.config)
    for key in ("method", "M", "output"):
        val = getattr(args, key, None)
        if val is not None:
            setattr(cfg, key, val)
    if cfg.output is not None:
        cfg.output = str(_out_path(cfg.output))
    return cfg


def cmd_featurize(args) -> dict:
    cfg = _load_config(args)
    train, _ = bench.prepare_data(cfg)
    sigma = bench.resolve_sigma(cfg, train)
    t0 = time.perf_counter()
    cs = bench.mfga_candidates(cfg, train.d, train.task, sigma)
    A = cs.design(train.X)
    t_pp = time.perf_counter() - t0
    norms = np.linalg.norm(A, axis=0) / np.sqrt(max(train.n, 1))
    stats = {"N": train.n, "d": train.d, "M0": cs.size, "kernels": cs.n_kernels,
             "nu": cs.nu.tolist(), "sigma": sigma, "t_pp": t_pp,
             "column_rms": {"min": float(norms.min()), "mean": float(norms.mean()),
                            "max": float(norms.max())}}
    weights = np.array([dsc.weight for dsc in cs.descriptors])
    kernel = cs.kernel_of()
    for p in range(cs.n_kernels):
        cols = np.flatnonzero(kernel == p)
        unweighted = A[:, cols] / np.where(weights[cols] > 0, weights[cols], 1.0)
        diag = float((unweighted**2).sum(axis=1).max()) if train.n else 0.0
        is_gauss = isinstance(cs.descriptors[cols[0]].kind, TaylorGaussian)
        stats[f"kernel_{p}_max_diag"] = diag  # B^2 estimate; <= 1 for Gaussian kernels
        stats[f"kernel_{p}_type"] = "gaussian" if is_gauss else "linear"
    print(json.dumps(stats, indent=2))
    return stats


def cmd_train(args):
    cfg = _load_config(args)
    result, model = bench.run_experiment(cfg, return_model=True)
    if args.model:
        _out_path(args.model).write_text(model.to_json())
    print(json.dumps(result.to_dict(), indent=2, sort_keys=True))
    return result


def cmd_evaluate(args):
    try:
        model = load_model(Path(args.model).read_text())
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise ConfigError(f"cannot load model {args.model}: {exc}") from None
    schema = Schema.from_json(args.schema)
    raw = load_csv(args.data, schema)
    if model.standardizer is None:
        raise ConfigError("model document carries no standardizer")
    ds = apply_standardizer(model.standardizer, raw)
    f = model.decision_function(ds.X)
    err = bench.error_percent(model.task, f, ds.y)
    out = {"N": ds.n, "task": Task(model.task).value, "error": err}
    print(json.dumps(out))
    return out


def cmd_sweep(args):
    cfg = _load_config(args)
    if args.m_values:
        values = [int(v) for v in args.m_values.split(",")]
    else:
        if cfg.M is None:
            raise ConfigError("sweep needs --m-values or M in the config")
        values = bench.default_sweep_values(cfg.M)
    csv_path = _out_path(args.csv) if args.csv else None
    results = bench.sweep(cfg, values, csv_path=csv_path)
    for r in results:
        print(f"{r.method}\t{r.M}\t{r.test_error:.4f}\t{'' if r.stderr is None else f'{r.stderr:.4f}'}")
    return results


def cmd_compare(args):
    table = bench.compare(args.results)
    print(table)
    return table


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mfga", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def with_config(p):
        p.add_argument("--config", required=True, help="experiment config (JSON)")
        p.add_argument("--method", choices=bench.METHODS)
        p.add_argument("-M", type=int, dest="M")
        p.add_argument("--output", help="result file (JSON)")
        return p

    p = with_config(sub.add_parser("featurize", help="build the candidate set and print design statistics"))
    p.set_defaults(func=cmd_featurize)

    p = with_config(sub.add_parser("train", help="train over the lambda grid and report the best result"))
    p.add_argument("--model", help="write the best model document here")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="test error of a saved model on a CSV file")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--schema", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = with_config(sub.add_parser("sweep", help="error versus number of features"))
    p.add_argument("--m-values", help="comma-separated ascending feature counts")
    p.add_argument("--csv", help="plot data (method, M, error, stderr)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="tabulate result files")
    p.add_argument("results", nargs="+")
    p.set_defaults(func=cmd_compare)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with _thread_limit():
            args.func(args)
    except (ConfigError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MFGAError, OSError, ValueError, ArithmeticError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
