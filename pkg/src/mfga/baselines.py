"""Random-feature and exact-kernel baselines.

* RKS: M random Fourier features, full (non-sparse) regularized fit.
* LKRF: a pool of M0 random features reweighted by a chi-square constrained
  kernel-alignment problem; the top M by weight are retrained.
* EERF: a pool of M0 random features ranked by ``|mean(y * z_m(x))|``; the
  top M are retrained.
* GK / GLK: exact kernel ridge or kernel logistic regression with the
  Gaussian kernel, or the uniform mix of Gaussian and linear kernels.
"""

from __future__ import annotations

import json
import time
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .data import Dataset, Task, subsample
from .errors import DegenerateScores, DimensionMismatch, NoConvergence, SingularSystem
from .features import CandidateSet, gaussian_kernel, rescale_rff, rff_candidate_set
from .greedy import IterationRecord, SparseModel, TrainTrace, refit
from .objectives import LogisticLoss, Objective, QuadraticLoss, get_loss


def default_loss(task: Task):
    return LogisticLoss if Task(task) is Task.CLASSIFICATION else QuadraticLoss


def fit_features(cs: CandidateSet, ds: Dataset, loss=None, lam: float = 1e-3,
                 tol: float = 1e-8, design: Optional[np.ndarray] = None):
    """Regularized fit over every feature of ``cs``; returns ``(SparseModel, TrainTrace)``."""
    loss = default_loss(ds.task) if loss is None else get_loss(loss)
    start = time.perf_counter()
    A = cs.design(ds.X) if design is None else design
    obj = Objective(A, ds.y, loss, lam)
    support = np.arange(cs.size)
    coef, n_it = refit(obj, support, None, tol)
    elapsed = time.perf_counter() - start
    trace = TrainTrace(initial_risk=obj.risk(np.zeros(cs.size)))
    trace.records.append(IterationRecord(1, support.tolist(), obj.risk(coef), n_it, elapsed,
                                         float(np.linalg.norm(coef)), coef.copy()))
    trace.t_train = elapsed
    return SparseModel(support, coef, cs, ds.task, ds.standardizer), trace


def rks_train(ds: Dataset, M: int, sigma: float, seed: int, loss=None, lam: float = 1e-3):
    """Random kitchen sinks. Pre-processing time is 0 by convention."""
    if M < 1:
        raise ValueError("M must be at least 1")
    start = time.perf_counter()
    cs = rff_candidate_set(ds.d, M, sigma, seed)
    model, trace = fit_features(cs, ds, loss, lam)
    trace.t_pp = 0.0
    trace.t_train = time.perf_counter() - start
    return model, trace


# ---------------------------------------------------------------------------
# data-dependent reweighting
# ---------------------------------------------------------------------------

@dataclass
class ReweightedFeatureSet:
    pool: CandidateSet
    scores: np.ndarray
    weights: np.ndarray
    selected: np.ndarray

    def features(self, M: Optional[int] = None) -> CandidateSet:
        """Top-M pool features with RFF scale reset to ``sqrt(2/M)``."""
        idx = self.selected if M is None else self.selected[:M]
        return rescale_rff(self.pool.subset(idx))


def _top(values: np.ndarray, M: int) -> np.ndarray:
    return np.argsort(-values, kind="stable")[:M]


def alignment_scores(Z: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Off-diagonal alignment ``(1/(N(N-1))) sum_{n != n'} y_n y_n' z(x_n) z(x_n')`` per column."""
    n = Z.shape[0]
    yz = Z * y[:, None]
    return (yz.sum(axis=0) ** 2 - (yz**2).sum(axis=0)) / (n * (n - 1))


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex."""
    v = v - v.max()  # shift-invariant; keeps the active entries near 0
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, v.size + 1)
    hits = np.nonzero(u - css / ind > 0)[0]
    rho = hits[-1] if hits.size else 0
    tau = css[rho] / (rho + 1.0)
    return np.maximum(v - tau, 0.0)


def chi2_weights(a: np.ndarray, radius: float, tol: float = 1e-12, max_iter: int = 200) -> np.ndarray:
    """Maximize ``q^T a`` over the simplex subject to ``D_chi2(q || uniform) <= radius``.

    ``D_chi2(q || u) = M0 * ||q - u||^2`` on the simplex. The maximizer is the
    simplex projection of ``u + a / gamma`` for the multiplier ``gamma`` that
    makes the constraint tight, found by bisection on ``log gamma``.
    """
    m = a.size
    u = np.full(m, 1.0 / m)
    if radius <= 0 or np.ptp(a) == 0:
        return u
    r2 = radius / m

    def q_of(gamma):
        return project_simplex(u + a / gamma)

    def excess(gamma):
        q = q_of(gamma)
        return float(np.sum((q - u) ** 2)) - r2

    scale = np.ptp(a)
    lo, hi = np.log(scale) - 60.0, np.log(scale) + 60.0
    if excess(np.exp(lo)) <= 0:  # the vertex itself is feasible
        return q_of(np.exp(lo))
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if excess(np.exp(mid)) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    return q_of(np.exp(hi))


def lkrf_reweight(pool: CandidateSet, ds: Dataset, radius: float = 1.0, M: Optional[int] = None,
                  design: Optional[np.ndarray] = None) -> ReweightedFeatureSet:
    """Kernel-alignment reweighting of a random-feature pool; keeps the top M by weight."""
    M = pool.size if M is None else M
    if M > pool.size:
        raise ValueError(f"M={M} exceeds pool size {pool.size}")
    Z = pool.design(ds.X) if design is None else design
    scores = alignment_scores(Z, ds.y)
    if np.ptp(scores) == 0:
        warnings.warn("all alignment scores are equal; selecting the first M pool features",
                      DegenerateScores, stacklevel=2)
        weights = np.full(pool.size, 1.0 / pool.size)
    else:
        weights = chi2_weights(scores, radius)
    return ReweightedFeatureSet(pool, scores, weights, _top(weights, M))


def eerf_score(pool: CandidateSet, ds: Dataset, M: Optional[int] = None,
               design: Optional[np.ndarray] = None) -> ReweightedFeatureSet:
    """Rank pool features by ``|(1/N) sum_n y_n z_m(x_n)|`` and keep the top M."""
    M = pool.size if M is None else M
    if M > pool.size:
        raise ValueError(f"M={M} exceeds pool size {pool.size}")
    Z = pool.design(ds.X) if design is None else design
    scores = np.abs(Z.T @ ds.y) / ds.n
    return ReweightedFeatureSet(pool, scores, scores, _top(scores, M))


def _reweighted_train(rank, ds, M, M0, sigma, seed, loss, lam, **kw):
    start = time.perf_counter()
    pool = rff_candidate_set(ds.d, M0, sigma, seed)
    rw = rank(pool, ds, M=M, **kw)
    t_pp = time.perf_counter() - start
    model, trace = fit_features(rw.features(M), ds, loss, lam)
    trace.t_pp = t_pp
    return model, trace, rw


def lkrf_train(ds: Dataset, M: int, M0: int, sigma: float, seed: int, loss=None,
               lam: float = 1e-3, radius: float = 1.0):
    return _reweighted_train(lkrf_reweight, ds, M, M0, sigma, seed, loss, lam, radius=radius)


def eerf_train(ds: Dataset, M: int, M0: int, sigma: float, seed: int, loss=None,
               lam: float = 1e-3):
    return _reweighted_train(eerf_score, ds, M, M0, sigma, seed, loss, lam)


# ---------------------------------------------------------------------------
# exact kernels
# ---------------------------------------------------------------------------

KERNEL_KINDS = ("gaussian", "gaussian+linear")


def kernel_matrix(X1, X2, kind: str, sigma: float) -> np.ndarray:
    K = gaussian_kernel(X1, X2, sigma)
    if kind == "gaussian":
        return K
    if kind == "gaussian+linear":
        return 0.5 * (K + np.atleast_2d(X1) @ np.atleast_2d(X2).T)
    raise ValueError(f"unknown kernel kind {kind!r}")


@dataclass
class KernelModel:
    kind: str
    sigma: float
    X: np.ndarray
    alpha: np.ndarray
    lam: float
    task: Task = Task.REGRESSION
    standardizer: Optional[object] = field(default=None, repr=False)
    n_iter: int = 1

    def decision_function(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = X.reshape(1, -1) if single else X
        if X.shape[1] != self.X.shape[1]:
            raise DimensionMismatch(f"model expects d={self.X.shape[1]}, got {X.shape[1]}")
        out = kernel_matrix(X, self.X, self.kind, self.sigma) @ self.alpha
        return out[0] if single else out

    def predict(self, X):
        f = self.decision_function(X)
        if self.task is Task.CLASSIFICATION:
            return np.where(np.asarray(f) >= 0, 1.0, -1.0)
        return f

    def to_dict(self) -> dict:
        d = {"kind": "kernel", "kernel": self.kind, "sigma": self.sigma, "lam": self.lam,
             "task": self.task.value, "X": self.X.tolist(), "alpha": self.alpha.tolist()}
        if self.standardizer is not None:
            d["standardizer"] = self.standardizer.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "KernelModel":
        from .data import Standardizer

        st = Standardizer.from_dict(d["standardizer"]) if d.get("standardizer") else None
        return cls(d["kernel"], float(d["sigma"]), np.asarray(d["X"], dtype=float),
                   np.asarray(d["alpha"], dtype=float), float(d["lam"]), Task(d["task"]), st)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def kernel_predict(model: KernelModel, x):
    return model.decision_function(x)


def kernel_ridge_solve(K: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    """``alpha`` solving ``(K + lam N I) alpha = y``."""
    n = K.shape[0]
    A = K + lam * n * np.eye(n)
    if lam > 0:
        return scipy.linalg.solve(A, y, assume_a="pos", check_finite=False)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
            return scipy.linalg.solve(A, y, assume_a="sym", check_finite=False)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError, scipy.linalg.LinAlgWarning) as exc:
        raise SingularSystem(f"kernel matrix is singular with lam = 0: {exc}") from None


def kernel_logistic_solve(K: np.ndarray, y: np.ndarray, lam: float, tol: float = 1e-8,
                          max_iter: int = 100):
    """Newton's method for ``(1/N) sum log(1 + exp(-y_n (K alpha)_n)) + lam alpha^T K alpha``.

    The gradient is ``K g`` with ``g = (1/N) y * L'(u) + 2 lam alpha``; solving the
    reduced system ``(W K / N + 2 lam I) s = g`` gives a Newton direction in the
    range of K. Convergence is tested on ``||g||_inf``.
    """
    if lam <= 0:
        raise ValueError("kernel logistic regression needs lam > 0")
    n = K.shape[0]
    alpha = np.zeros(n)

    def objective(a):
        f = K @ a
        return float(np.mean(LogisticLoss.value(f, y)) + lam * a @ f)

    obj = objective(alpha)
    for it in range(max_iter + 1):
        f = K @ alpha
        g = LogisticLoss.deriv(f, y) / n + 2.0 * lam * alpha
        gnorm = float(np.max(np.abs(g)))
        if gnorm <= tol:
            return alpha, it
        if it == max_iter:
            break
        w = LogisticLoss.deriv2(f, y)
        H = (w[:, None] * K) / n
        H[np.diag_indices_from(H)] += 2.0 * lam
        step = np.linalg.solve(H, g)
        slope = -float((K @ g) @ step)
        t = 1.0
        slack = 1e-14 * max(1.0, abs(obj))
        for _ in range(60):
            cand = alpha - t * step
            new = objective(cand)
            if new <= obj + 1e-4 * t * slope + slack:
                break
            t *= 0.5
        else:
            break
        alpha, obj = cand, new
    raise NoConvergence(max_iter, gnorm)


def kernel_train_exact(ds: Dataset, kind: str = "gaussian", sigma: float = 1.0,
                       lam: float = 1e-3, n0_fraction: float = 1.0, seed: int = 0,
                       task: Optional[Task] = None, tol: float = 1e-8) -> KernelModel:
    """Exact kernel ridge (regression) or kernel logistic regression (classification)."""
    if kind not in KERNEL_KINDS:
        raise ValueError(f"kind must be one of {KERNEL_KINDS}")
    task = ds.task if task is None else Task(task)
    sub = subsample(ds, n0_fraction, seed)
    K = kernel_matrix(sub.X, sub.X, kind, sigma)
    if task is Task.REGRESSION:
        alpha, n_it = kernel_ridge_solve(K, sub.y, lam), 1
    else:
        alpha, n_it = kernel_logistic_solve(K, sub.y, lam, tol)
    return KernelModel(kind, float(sigma), sub.X.copy(), alpha, lam, task, ds.standardizer, n_it)


def load_model(doc):
    """Rebuild a :class:`SparseModel` or :class:`KernelModel` from its JSON document."""
    if isinstance(doc, str):
        doc = json.loads(doc)
    if doc.get("kind") == "kernel":
        return KernelModel.from_dict(doc)
    return SparseModel.from_dict(doc)
