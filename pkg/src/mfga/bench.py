"""Experiment protocol: standardize, pick the bandwidth, sweep the ridge grid, time, report.

For every method the regularization weight is chosen from ``lambdas`` by
best test error. Randomized methods are repeated over ``seeds`` and report
the mean error with its standard error. Regression error is
``100 * MSE`` on responses scaled to [-1, 1]; classification error is the
misclassification percentage.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .baselines import (
    eerf_score,
    fit_features,
    kernel_train_exact,
    lkrf_reweight,
)
from .data import (
    Dataset,
    Schema,
    Task,
    apply_standardizer,
    bandwidth_heuristic,
    fit_standardizer,
    load_csv,
    split,
)
from .errors import ConfigError, ParseError
from .features import build_candidate_set, n_multi_indices, rescale_rff, rff_candidate_set
from .greedy import mfga_train, model_at
from .objectives import LogisticLoss, Objective, QuadraticLoss

METHODS = ("rks", "lkrf", "eerf", "mfga", "gk", "glk")
RANDOMIZED = ("rks", "lkrf", "eerf")
DISPLAY = {"rks": "RKS", "lkrf": "LKRF", "eerf": "EERF", "mfga": "MFGA", "gk": "GK", "glk": "GLK"}
DEFAULT_LAMBDAS = tuple(10.0**e for e in range(-5, 6))


@dataclass
class ExperimentConfig:
    method: str
    M: Optional[int] = None
    data: Optional[str] = None
    schema: Optional[object] = None
    test_data: Optional[str] = None
    test_fraction: float = 0.25
    split_seed: int = 0
    name: str = "dataset"
    M0: Optional[int] = None
    taylor_order: Optional[int] = None
    linear: Optional[bool] = None
    lambdas: Sequence[float] = DEFAULT_LAMBDAS
    sigma: object = "heuristic"
    sigma_k: int = 50
    sigma_probes: Optional[int] = None
    n0_fraction: float = 1.0
    seeds: Sequence[int] = (1, 2, 3, 4, 5)
    k: int = 1
    radius: float = 1.0
    tol: float = 1e-8
    warmup: bool = True
    output: Optional[str] = None

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "method" not in d:
            raise ConfigError("config needs a 'method'")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                d = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambdas"] = list(self.lambdas)
        d["seeds"] = list(self.seeds)
        if isinstance(self.schema, Schema):
            d["schema"] = self.schema.to_dict()
        return d

    @property
    def randomized(self) -> bool:
        return self.method in RANDOMIZED

    def validate(self, d: Optional[int] = None, task: Optional[Task] = None) -> None:
        """Raise :class:`ConfigError` for inconsistent settings; ``d`` enables the M <= M0 check."""
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if not self.lambdas:
            raise ConfigError("lambda grid is empty")
        if any(lam < 0 for lam in self.lambdas):
            raise ConfigError("lambdas must be nonnegative")
        if self.method in ("gk", "glk"):
            if not 0 < self.n0_fraction <= 1:
                raise ConfigError("n0_fraction must lie in (0, 1]")
            return
        if self.M is None or self.M < 1:
            raise ConfigError("M must be a positive integer")
        if self.k < 1:
            raise ConfigError("k must be at least 1")
        if self.randomized and not self.seeds:
            raise ConfigError("randomized methods need at least one seed")
        if self.method in ("lkrf", "eerf"):
            if self.M0 is None:
                raise ConfigError(f"{self.method} needs a pool size M0")
            if self.M > self.M0:
                raise ConfigError(f"M={self.M} exceeds M0={self.M0}")
        if self.method == "mfga" and d is not None:
            m0 = mfga_candidate_count(self, d, task or Task.REGRESSION)
            if self.M > m0:
                raise ConfigError(f"M={self.M} exceeds the {m0} candidate features")
        if self.sigma != "heuristic":
            try:
                ok = float(self.sigma) > 0
            except (TypeError, ValueError):
                ok = False
            if not ok:
                raise ConfigError("sigma must be 'heuristic' or a positive number")


@dataclass
class BenchmarkResult:
    """One table row. Timing fields are kept apart from the reproducible fields."""

    dataset: str
    method: str
    M: Optional[int]
    M0: Optional[int]
    n0_fraction: Optional[float]
    test_error: float
    stderr: Optional[float]
    lam: float
    theta_norm: Optional[float]
    sigma: float
    t_pp: Optional[float] = None
    t_train: float = 0.0

    TIMING = ("t_pp", "t_train")

    def to_dict(self) -> dict:
        d = asdict(self)
        timings = {k: d.pop(k) for k in self.TIMING}
        d["timings"] = timings
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "BenchmarkResult":
        d = dict(d)
        d.update(d.pop("timings", {}))
        return cls(**d)


# ---------------------------------------------------------------------------
# data preparation
# ---------------------------------------------------------------------------

def prepare_data(cfg: ExperimentConfig):
    """Load and split the data, then standardize with training statistics only."""
    if cfg.data is None or cfg.schema is None:
        raise ConfigError("config needs 'data' and 'schema' when no datasets are passed in")
    schema = cfg.schema
    if isinstance(schema, dict):
        schema = Schema.from_dict(schema)
    elif not isinstance(schema, Schema):
        schema = Schema.from_json(schema)
    raw = load_csv(cfg.data, schema)
    if cfg.test_data is not None:
        raw_train, raw_test = raw, load_csv(cfg.test_data, schema)
    else:
        raw_train, raw_test = split(raw, cfg.test_fraction, cfg.split_seed)
    st = fit_standardizer(raw_train)
    return apply_standardizer(st, raw_train), apply_standardizer(st, raw_test)


def resolve_sigma(cfg: ExperimentConfig, train: Dataset) -> float:
    if cfg.sigma == "heuristic":
        return bandwidth_heuristic(train, cfg.sigma_k, cfg.sigma_probes, cfg.split_seed)
    return float(cfg.sigma)


def error_percent(task: Task, f: np.ndarray, y: np.ndarray) -> float:
    """Misclassification % (classification) or 100 x MSE (regression)."""
    if Task(task) is Task.CLASSIFICATION:
        pred = np.where(f >= 0, 1.0, -1.0)
        return float(100.0 * np.mean(pred != y))
    return float(100.0 * np.mean((f - y) ** 2))


def mfga_candidates(cfg: ExperimentConfig, d: int, task: Task, sigma: float):
    return build_candidate_set(d, task, sigma, None, cfg.taylor_order, cfg.linear)


def mfga_candidate_count(cfg: ExperimentConfig, d: int, task: Task) -> int:
    task = Task(task)
    order = cfg.taylor_order if cfg.taylor_order is not None else (1 if task is Task.CLASSIFICATION else 2)
    linear = cfg.linear if cfg.linear is not None else task is Task.CLASSIFICATION
    return n_multi_indices(d, order) + (d if linear else 0)


def _loss(task: Task):
    return LogisticLoss if task is Task.CLASSIFICATION else QuadraticLoss


def _stderr(errors) -> float:
    errors = np.asarray(errors, dtype=float)
    if errors.size < 2:
        return 0.0
    return float(np.std(errors, ddof=1) / math.sqrt(errors.size))


# ---------------------------------------------------------------------------
# per-method runs; each returns a dict M -> list over lambdas of cell dicts
# ---------------------------------------------------------------------------

def _run_mfga(cfg, train, test, sigma, M_values):
    t0 = time.perf_counter()
    cs = mfga_candidates(cfg, train.d, train.task, sigma)
    A = cs.design(train.X)
    t_pp = time.perf_counter() - t0
    m_max = max(M_values)
    if m_max > cs.size:
        raise ConfigError(f"M={m_max} exceeds the {cs.size} candidate features")
    out = {M: [] for M in M_values}
    for lam in cfg.lambdas:
        obj = Objective(A, train.y, _loss(train.task), lam)
        model, trace = mfga_train(obj, m_max, cfg.k, cfg.tol, candidate_set=cs, task=train.task)
        model.standardizer = train.standardizer
        sizes = np.cumsum([len(rec.selected) for rec in trace.records])
        for M in M_values:
            rec = trace.records[int(np.searchsorted(sizes, M))]
            sub = model_at(model, trace, M)
            f = sub.decision_function(test.X)
            out[M].append({"lam": lam, "errors": [error_percent(train.task, f, test.y)],
                           "t_pp": [t_pp], "t_train": [rec.elapsed],
                           "theta_norm": float(np.linalg.norm(sub.coef)),
                           "M": sub.n_features, "model": sub})
    return out, cs.size


def _run_random(cfg, train, test, sigma, M_values):
    m_max = max(M_values)
    cells = {M: {lam: {"errors": [], "t_pp": [], "t_train": [], "norms": [], "models": []}
                 for lam in cfg.lambdas} for M in M_values}
    for seed in cfg.seeds:
        t0 = time.perf_counter()
        if cfg.method == "rks":
            pool = rff_candidate_set(train.d, m_max, sigma, seed)
            order = np.arange(m_max)
            t_pp = None
            t_sample = time.perf_counter() - t0  # RKS sampling is booked as training time
        else:
            pool = rff_candidate_set(train.d, cfg.M0, sigma, seed)
            Z = pool.design(train.X)
            if cfg.method == "lkrf":
                rw = lkrf_reweight(pool, train, cfg.radius, cfg.M0, design=Z)
            else:
                rw = eerf_score(pool, train, cfg.M0, design=Z)
            order = rw.selected
            t_pp = time.perf_counter() - t0
            t_sample = 0.0
        for M in M_values:
            for lam in cfg.lambdas:
                t1 = time.perf_counter()
                cs = rescale_rff(pool.subset(order[:M]))
                model, trace = fit_features(cs, train, _loss(train.task), lam, cfg.tol)
                t_train = time.perf_counter() - t1 + t_sample
                c = cells[M][lam]
                c["errors"].append(error_percent(train.task, model.decision_function(test.X), test.y))
                c["t_pp"].append(t_pp)
                c["t_train"].append(t_train)
                c["norms"].append(float(np.linalg.norm(model.coef)))
                model.standardizer = train.standardizer
                c["models"].append(model)
    out = {}
    for M in M_values:
        out[M] = [{"lam": lam, "errors": c["errors"], "t_pp": c["t_pp"], "t_train": c["t_train"],
                   "theta_norm": float(np.mean(c["norms"])), "M": M, "model": c["models"][0]}
                  for lam, c in cells[M].items()]
    return out, (cfg.M0 if cfg.method != "rks" else None)


def _run_kernel(cfg, train, test, sigma):
    kind = "gaussian" if cfg.method == "gk" else "gaussian+linear"
    cells = []
    for lam in cfg.lambdas:
        t0 = time.perf_counter()
        model = kernel_train_exact(train, kind, sigma, lam, cfg.n0_fraction, cfg.split_seed,
                                   tol=cfg.tol)
        t_train = time.perf_counter() - t0
        f = model.decision_function(test.X)
        cells.append({"lam": lam, "errors": [error_percent(train.task, f, test.y)], "t_pp": [None],
                      "t_train": [t_train], "theta_norm": None, "M": None, "model": model})
    return cells


def _best(cells):
    """Cell with the lowest mean error; ties go to the earlier lambda."""
    means = [float(np.mean(c["errors"])) for c in cells]
    return cells[int(np.argmin(means))]


def _result(cfg, cell, M0, sigma) -> BenchmarkResult:
    t_pp = cell["t_pp"]
    return BenchmarkResult(
        dataset=cfg.name,
        method=cfg.method,
        M=cell["M"],
        M0=M0,
        n0_fraction=cfg.n0_fraction if cfg.method in ("gk", "glk") else None,
        test_error=float(np.mean(cell["errors"])),
        stderr=_stderr(cell["errors"]) if cfg.randomized else None,
        lam=float(cell["lam"]),
        theta_norm=cell["theta_norm"],
        sigma=float(sigma),
        t_pp=None if t_pp[0] is None else float(np.mean(t_pp)),
        t_train=float(np.mean(cell["t_train"])),
    )


def _execute(cfg, train, test, M_values):
    sigma = resolve_sigma(cfg, train)
    if cfg.method == "mfga":
        per_m, M0 = _run_mfga(cfg, train, test, sigma, M_values)
    elif cfg.randomized:
        per_m, M0 = _run_random(cfg, train, test, sigma, M_values)
    else:
        return {None: _run_kernel(cfg, train, test, sigma)}, None, sigma
    return per_m, M0, sigma


def _warm_up(cfg, train, test, M_values):
    small = ExperimentConfig(**{**cfg.__dict__, "lambdas": [cfg.lambdas[0]],
                                "seeds": list(cfg.seeds)[:1], "warmup": False})
    _execute(small, train, test, M_values)


def run_experiment(cfg: ExperimentConfig, train: Optional[Dataset] = None,
                   test: Optional[Dataset] = None, return_model: bool = False):
    """Train with every lambda (and seed), return the best-lambda :class:`BenchmarkResult`.

    ``train`` / ``test`` may be passed as standardized datasets; otherwise
    they are loaded from ``cfg.data``. With ``return_model`` the best model
    (first seed for randomized methods) is returned as well.
    """
    cfg.validate()
    if train is None:
        train, test = prepare_data(cfg)
    cfg.validate(train.d, train.task)
    M_values = [cfg.M]
    if cfg.warmup:
        _warm_up(cfg, train, test, M_values)
    per_m, M0, sigma = _execute(cfg, train, test, M_values)
    cells = per_m[None] if None in per_m else per_m[cfg.M]
    best = _best(cells)
    result = _result(cfg, best, M0, sigma)
    if cfg.output:
        write_results([result], cfg.output)
    if return_model:
        return result, best["model"]
    return result


def sweep(cfg: ExperimentConfig, M_values: Sequence[int], train: Optional[Dataset] = None,
          test: Optional[Dataset] = None, csv_path=None):
    """One result per M, reusing pre-processing across M.

    MFGA runs the greedy loop once per lambda up to ``max(M_values)`` and
    reads smaller models off the trace. Random-feature methods sample (and
    score) one pool per seed. ``t_pp`` on each row is the full shared
    pre-processing time.
    """
    M_values = list(M_values)
    if not M_values:
        raise ConfigError("M_values is empty")
    if M_values != sorted(M_values):
        raise ConfigError("M_values must be sorted ascending")
    if cfg.method in ("gk", "glk"):
        raise ConfigError("kernel methods have no feature count to sweep")
    cfg = ExperimentConfig(**{**cfg.__dict__, "M": max(M_values)})
    cfg.validate()
    if train is None:
        train, test = prepare_data(cfg)
    cfg.validate(train.d, train.task)
    if cfg.warmup:
        _warm_up(cfg, train, test, M_values[:1])
    per_m, M0, sigma = _execute(cfg, train, test, M_values)
    results = [_result(cfg, _best(per_m[M]), M0, sigma) for M in M_values]
    if csv_path is not None:
        write_sweep_csv(results, csv_path)
    if cfg.output:
        write_results(results, cfg.output)
    return results


def default_sweep_values(M: int, n: int = 8) -> list:
    """``n`` roughly log-spaced integers ending at M."""
    vals = np.unique(np.round(np.geomspace(1, M, n)).astype(int))
    return [int(v) for v in vals]


# ---------------------------------------------------------------------------
# result files
# ---------------------------------------------------------------------------

def write_results(results, path) -> None:
    docs = [r.to_dict() for r in results]
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(docs if len(docs) != 1 else docs[0], fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_results(path) -> list:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(path, str(exc)) from None
    docs = doc if isinstance(doc, list) else [doc]
    try:
        return [BenchmarkResult.from_dict(d) for d in docs]
    except (TypeError, AttributeError) as exc:
        raise ParseError(path, f"not a result document: {exc}") from None


SWEEP_COLUMNS = ("method", "M", "error", "stderr")


def write_sweep_csv(results, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_COLUMNS)
        for r in results:
            w.writerow([r.method, r.M, repr(r.test_error), "" if r.stderr is None else repr(r.stderr)])


def read_sweep_csv(path) -> list:
    rows = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            rows.append({"method": row["method"], "M": int(row["M"]), "error": float(row["error"]),
                         "stderr": None if row["stderr"] == "" else float(row["stderr"])})
    return rows


# ---------------------------------------------------------------------------
# tables
# ---------------------------------------------------------------------------

TABLE_COLUMNS = ("Dataset", "Method", "M", "M0", "N0/N", "t_pp", "t_train", "error (%)")


def _fmt(v, spec="{:.2f}"):
    return "--" if v is None else spec.format(v)


def format_row(r: BenchmarkResult) -> list:
    err = f"{r.test_error:.2f}"
    if r.stderr is not None:
        err += f" ({r.stderr:.0e})"
    return [r.dataset, DISPLAY.get(r.method, r.method), _fmt(r.M, "{}"), _fmt(r.M0, "{}"),
            _fmt(r.n0_fraction, "{:g}"), _fmt(r.t_pp), _fmt(r.t_train), err]


def compare(paths) -> str:
    """Render result files as one table, rows ordered by dataset then method."""
    if not paths:
        raise ConfigError("compare needs at least one result file")
    results = [r for p in paths for r in read_results(p)]
    rank = {m: i for i, m in enumerate(METHODS)}
    results.sort(key=lambda r: (r.dataset, rank.get(r.method, len(METHODS)), r.M or 0))
    rows = [list(TABLE_COLUMNS)] + [format_row(r) for r in results]
    widths = [max(len(row[j]) for row in rows) for j in range(len(TABLE_COLUMNS))]
    lines = []
    for i, row in enumerate(rows):
        lines.append(" | ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
        if i == 0:
            lines.append("-+-".join("-" * w for w in widths))
    return "\n".join(lines)
