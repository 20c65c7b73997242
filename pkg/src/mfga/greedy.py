"""Greedy selection of explicit features (MFGA) with fully corrective refits.

Each iteration takes the gradient of the regularized risk at the current
sparse solution, adds the ``k`` unselected coordinates with the largest
absolute gradient entries to the support, and re-minimizes the risk over the
enlarged support. With the quadratic loss and ``k = 1`` this is orthogonal
matching pursuit: the gradient coordinate ``j`` is ``-(2/N) psi_j^T r`` for
the residual ``r``.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .data import Task
from .errors import DimensionMismatch, Exhausted, NoConvergence, SingularSystem
from .features import CandidateSet
from .objectives import LogisticLoss, Objective, QuadraticLoss


def select_indices(grad, excluded, k: int = 1) -> np.ndarray:
    """The ``k`` non-excluded indices with the largest ``|grad_j|``.

    Ties go to the lowest index.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    scores = np.abs(np.asarray(grad, dtype=float).ravel())
    mask = np.ones(scores.shape[0], dtype=bool)
    excluded = np.asarray(list(excluded), dtype=np.int64)
    mask[excluded] = False
    available = np.flatnonzero(mask)
    if available.shape[0] < k:
        raise Exhausted(f"asked for {k} indices, only {available.shape[0]} candidates left")
    order = np.argsort(-scores[available], kind="stable")
    return available[order[:k]]


def refit(obj: Objective, support, warm_start=None, tol: float = 1e-8,
          max_iter: int = 100):
    """Minimize the risk over the coordinates in ``support``.

    Returns ``(coef, n_iter)`` where ``coef`` is aligned with ``support``.
    The quadratic loss is solved exactly from the normal equations; the
    logistic loss uses damped Newton until the support gradient has
    infinity norm ``<= tol``.
    """
    support = np.asarray(support, dtype=np.int64)
    if support.size == 0:
        raise ValueError("support must be nonempty")
    sub = obj.restrict(support)
    if obj.loss is QuadraticLoss:
        return _solve_ridge(sub), 1
    if obj.lam <= 0:
        raise ValueError("logistic refit needs lam > 0")
    x0 = np.zeros(support.size) if warm_start is None else np.asarray(warm_start, dtype=float)
    if x0.shape != (support.size,):
        raise DimensionMismatch("warm start does not match support")
    return newton(sub, x0, tol, max_iter)


def _solve_ridge(sub: Objective) -> np.ndarray:
    A, y, n = sub.design, sub.y, sub.n
    if sub.lam > 0:
        G = A.T @ A
        G[np.diag_indices_from(G)] += n * sub.lam
        try:
            c = scipy.linalg.cho_factor(G, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise SingularSystem(str(exc)) from None
        return scipy.linalg.cho_solve(c, A.T @ y, check_finite=False)
    coef, _, rank, _ = np.linalg.lstsq(A, y, rcond=None)
    if rank < A.shape[1]:
        raise SingularSystem(f"design columns have rank {rank} < {A.shape[1]} with lam = 0")
    return coef


def newton(obj: Objective, x0, tol: float = 1e-8, max_iter: int = 100):
    """Damped Newton's method with step halving on a smooth, strongly convex objective."""
    x = np.array(x0, dtype=float)
    f = obj.risk(x)
    for it in range(max_iter + 1):
        g = obj.gradient(x)
        gnorm = float(np.max(np.abs(g))) if g.size else 0.0
        if gnorm <= tol:
            return x, it
        if it == max_iter:
            break
        H = obj.hessian(x)
        try:
            step = scipy.linalg.solve(H, g, assume_a="pos", check_finite=False)
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
            step = np.linalg.lstsq(H, g, rcond=None)[0]
        slope = -float(g @ step)
        t = 1.0
        # accept with slack of a few ulps of f; the exact decrease near the optimum is below roundoff
        slack = 1e-14 * max(1.0, abs(f))
        for _ in range(60):
            x_new = x - t * step
            f_new = obj.risk(x_new)
            if f_new <= f + 1e-4 * t * slope + slack:
                break
            t *= 0.5
        else:
            break
        x, f = x_new, f_new
    raise NoConvergence(max_iter, gnorm)


@dataclass
class IterationRecord:
    iteration: int
    selected: list
    risk: float
    refit_iters: int
    elapsed: float
    theta_norm: float
    coef: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "selected": [int(i) for i in self.selected],
            "risk": self.risk,
            "refit_iters": self.refit_iters,
            "elapsed": self.elapsed,
            "theta_norm": self.theta_norm,
        }


@dataclass
class TrainTrace:
    """Per-iteration history of a greedy run.

    ``records[t].coef`` holds the coefficients on the first
    ``sum(len(r.selected) for r in records[:t+1])`` support entries, so the
    model after any iteration can be rebuilt from the trace alone.
    """

    initial_risk: float = float("nan")
    records: list = field(default_factory=list)
    t_pp: float = 0.0
    t_train: float = 0.0

    @property
    def risks(self) -> np.ndarray:
        return np.array([self.initial_risk] + [r.risk for r in self.records])

    @property
    def support(self) -> list:
        return [i for r in self.records for i in r.selected]

    def to_dict(self) -> dict:
        return {
            "initial_risk": self.initial_risk,
            "t_pp": self.t_pp,
            "t_train": self.t_train,
            "records": [r.to_dict() for r in self.records],
        }


@dataclass
class SparseModel:
    """Linear model over a subset of a candidate set's features.

    ``candidate_set`` may be ``None`` for models trained directly on a design
    matrix; such models can only be evaluated on design rows.
    """

    support: np.ndarray
    coef: np.ndarray
    candidate_set: Optional[CandidateSet] = None
    task: Task = Task.REGRESSION
    standardizer: Optional[object] = field(default=None, repr=False)
    n_candidates: Optional[int] = None

    def __post_init__(self):
        if self.n_candidates is None and self.candidate_set is not None:
            self.n_candidates = self.candidate_set.size
        self.support = np.asarray(self.support, dtype=np.int64).ravel()
        self.coef = np.asarray(self.coef, dtype=float).ravel()
        self.task = Task(self.task)
        if self.support.shape != self.coef.shape:
            raise DimensionMismatch("support and coef differ in length")

    @property
    def n_features(self) -> int:
        return self.support.size

    def dense_theta(self, size: Optional[int] = None) -> np.ndarray:
        size = self.n_candidates if size is None else size
        theta = np.zeros(size)
        theta[self.support] = self.coef
        return theta

    @property
    def selected_features(self) -> CandidateSet:
        return self.candidate_set.subset(self.support)

    def decision_function(self, X) -> np.ndarray:
        """Real-valued output, evaluating only the selected features."""
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = X.reshape(1, -1) if single else X
        if self.support.size == 0:
            out = np.zeros(X.shape[0])
        else:
            out = self.selected_features.design(X) @ self.coef
        return out[0] if single else out

    def predict(self, X):
        """Regression output, or labels in {-1, +1} (0 maps to +1)."""
        f = self.decision_function(X)
        if self.task is Task.CLASSIFICATION:
            return np.where(np.asarray(f) >= 0, 1.0, -1.0)
        return f

    def to_dict(self) -> dict:
        d = {
            "kind": "sparse",
            "task": self.task.value,
            "support": self.support.tolist(),
            "coef": self.coef.tolist(),
            "candidate_set": None if self.candidate_set is None else self.candidate_set.to_dict(),
        }
        if self.standardizer is not None:
            d["standardizer"] = self.standardizer.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SparseModel":
        from .data import Standardizer

        cs = None if d.get("candidate_set") is None else CandidateSet.from_dict(d["candidate_set"])
        st = Standardizer.from_dict(d["standardizer"]) if d.get("standardizer") else None
        return cls(d["support"], d["coef"], cs, Task(d["task"]), st)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "SparseModel":
        return cls.from_dict(json.loads(text))


def predict(model: SparseModel, x):
    return model.predict(x)


def mfga_train(obj: Objective, M: int, k: int = 1, tol: float = 1e-8,
               stop_risk: Optional[float] = None, max_iter: int = 100,
               candidate_set: Optional[CandidateSet] = None,
               task: Optional[Task] = None):
    """Run the greedy loop until ``M`` features are selected or the risk drops to ``stop_risk``.

    Returns ``(SparseModel, TrainTrace)``. ``trace.t_train`` covers the loop only.
    """
    if M < 0 or M > obj.dim:
        raise ValueError(f"M={M} outside [0, {obj.dim}]")
    if k < 1:
        raise ValueError("k must be at least 1")
    if task is None:
        task = Task.CLASSIFICATION if obj.loss is LogisticLoss else Task.REGRESSION

    start = time.perf_counter()
    theta = np.zeros(obj.dim)
    support: list = []
    coef = np.zeros(0)
    risk = obj.risk(theta)
    trace = TrainTrace(initial_risk=risk)
    t = 0
    while len(support) < M:
        if stop_risk is not None and risk <= stop_risk:
            break
        t += 1
        grad = obj.gradient(theta)
        picks = select_indices(grad, support, min(k, M - len(support)))
        support.extend(int(i) for i in picks)
        warm = np.concatenate([coef, np.zeros(picks.size)])
        coef, n_it = refit(obj, support, warm, tol, max_iter)
        theta = np.zeros(obj.dim)
        theta[support] = coef
        risk = obj.risk(theta)
        trace.records.append(IterationRecord(
            t, [int(i) for i in picks], risk, n_it, time.perf_counter() - start,
            float(np.linalg.norm(coef)), coef.copy()))
    trace.t_train = time.perf_counter() - start
    model = SparseModel(np.array(support, dtype=np.int64), coef, candidate_set, task,
                        n_candidates=obj.dim)
    return model, trace


def model_at(model: SparseModel, trace: TrainTrace, n_features: int) -> SparseModel:
    """The model of the earliest iteration whose support has ``n_features`` entries."""
    size = 0
    for rec in trace.records:
        size += len(rec.selected)
        if size >= n_features:
            return SparseModel(model.support[:size], rec.coef, model.candidate_set,
                               model.task, model.standardizer, model.n_candidates)
    raise ValueError(f"trace never reaches {n_features} features")


def geometric_iterations(sparsity: int, mu: float, beta: float, eps: float) -> int:
    """Iteration count ``ceil(s * (beta / mu) * log(1 / eps))`` of the convergence guarantee."""
    return math.ceil(sparsity * (beta / mu) * math.log(1.0 / eps))
