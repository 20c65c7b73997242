"""Explicit feature maps and multi-kernel candidate sets.

Three feature families are supported:

* Taylor features of the Gaussian kernel
  ``K(x, x') = exp(-||x - x'||^2 / (2 sigma^2))``. For a multi-index ``a``,

      phi_a(x) = exp(-||x||^2 / (2 sigma^2)) * x^a / (sigma^|a| * sqrt(a!))

  and the sum of ``phi_a(x) phi_a(x')`` over all ``a`` equals ``K(x, x')``.
  Truncating at ``|a| <= r`` keeps the Taylor polynomial of ``exp(<x, x'>/sigma^2)``
  of degree ``r``.
* Coordinates ``x_j`` of the linear kernel.
* Random Fourier features ``sqrt(2/M) cos(w^T x + b)`` with ``w ~ N(0, I/sigma^2)``.

A :class:`CandidateSet` is an ordered list of descriptors, each tagged with
the base kernel it belongs to and multiplied by ``sqrt(nu_p)`` for the
kernel's simplex weight.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence, Union

import numpy as np
from scipy.special import gammaln

from .data import Task
from .errors import DimensionMismatch, IndexOutOfRange, InvalidSimplex


# ---------------------------------------------------------------------------
# multi-indices
# ---------------------------------------------------------------------------

def n_multi_indices(d: int, max_order: int) -> int:
    return math.comb(d + max_order, max_order)


def enumerate_multi_indices(d: int, max_order: int) -> np.ndarray:
    """All exponent vectors with total order ``<= max_order``.

    Returns an integer array of shape ``(C(d + r, r), d)``. Rows are graded by
    order; within one order the first coordinate varies slowest with larger
    exponents first, e.g. ``d=2, r=2`` gives
    ``(0,0), (1,0), (0,1), (2,0), (1,1), (0,2)``.
    """
    if d < 1 or max_order < 0:
        raise ValueError("need d >= 1 and max_order >= 0")
    out = np.zeros((n_multi_indices(d, max_order), d), dtype=np.int64)
    row = 0
    for order in range(max_order + 1):
        for combo in itertools.combinations_with_replacement(range(d), order):
            for j in combo:
                out[row, j] += 1
            row += 1
    return out


# ---------------------------------------------------------------------------
# scalar / vectorized feature evaluation
# ---------------------------------------------------------------------------

def _taylor_columns(X: np.ndarray, sigma: float, exponents: np.ndarray) -> np.ndarray:
    """Taylor features for every row of X and every exponent row, in log domain."""
    X = np.asarray(X, dtype=float)
    exponents = np.atleast_2d(exponents)
    n = X.shape[0]
    out = np.empty((n, exponents.shape[0]))
    if n == 0 or exponents.shape[0] == 0:
        return out
    orders = exponents.sum(axis=1)
    log_coef = -orders * math.log(sigma) - 0.5 * gammaln(exponents + 1.0).sum(axis=1)
    log_env = -np.einsum("ij,ij->i", X, X) / (2.0 * sigma * sigma)
    with np.errstate(divide="ignore"):
        log_abs = np.log(np.abs(X))
    negative = X < 0
    for m, alpha in enumerate(exponents):
        nz = np.flatnonzero(alpha)
        log_val = log_env + log_coef[m]
        sign = np.ones(n)
        for j in nz:
            p = alpha[j]
            log_val = log_val + p * log_abs[:, j]
            if p % 2:
                sign = np.where(negative[:, j], -sign, sign)
        out[:, m] = sign * np.exp(log_val)
    return out


def taylor_feature(x, sigma: float, alpha) -> float:
    """Single Taylor feature ``phi_alpha(x)`` of the Gaussian kernel."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    x = np.asarray(x, dtype=float).reshape(1, -1)
    alpha = np.asarray(alpha, dtype=np.int64).reshape(1, -1)
    if alpha.shape[1] != x.shape[1]:
        raise DimensionMismatch("multi-index and x differ in dimension")
    return float(_taylor_columns(x, sigma, alpha)[0, 0])


def taylor_design(X, sigma: float, max_order: int) -> np.ndarray:
    """All Taylor features up to ``max_order`` (graded order) for the rows of X."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return _taylor_columns(X, sigma, enumerate_multi_indices(X.shape[1], max_order))


def truncation_bound(norm_x: float, norm_x2: float, sigma: float, r: int) -> float:
    """Upper bound on ``|<phi_{<=r}(x), phi_{<=r}(x')> - K(x, x')|``.

    Lagrange remainder of the exponential series with
    ``rho = ||x|| ||x'|| / sigma^2`` bounding ``|<x, x'>| / sigma^2``.
    """
    if r < 0:
        raise ValueError("r must be nonnegative")
    rho = norm_x * norm_x2 / sigma**2
    if rho == 0.0:
        return 0.0
    log_b = (-(norm_x**2 + norm_x2**2) / (2.0 * sigma**2)
             + (r + 1) * math.log(rho) + rho - math.lgamma(r + 2))
    return math.exp(log_b)


def gaussian_kernel(X1, X2, sigma: float) -> np.ndarray:
    X1 = np.atleast_2d(np.asarray(X1, dtype=float))
    X2 = np.atleast_2d(np.asarray(X2, dtype=float))
    d2 = (np.einsum("ij,ij->i", X1, X1)[:, None] + np.einsum("ij,ij->i", X2, X2)[None, :]
          - 2.0 * X1 @ X2.T)
    return np.exp(-np.maximum(d2, 0.0) / (2.0 * sigma * sigma))


def linear_feature(x, j: int) -> float:
    """Coordinate ``j`` (0-based) of x, the explicit map of the linear kernel."""
    x = np.asarray(x, dtype=float).ravel()
    if not 0 <= j < x.shape[0]:
        raise IndexOutOfRange(f"coordinate {j} out of range for d={x.shape[0]}")
    return float(x[j])


# ---------------------------------------------------------------------------
# descriptors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TaylorGaussian:
    sigma: float
    exponents: tuple

    @property
    def order(self) -> int:
        return sum(self.exponents)


@dataclass(frozen=True)
class LinearCoordinate:
    coord: int


@dataclass(frozen=True)
class RandomFourier:
    omega: tuple
    offset: float
    scale: float


@dataclass(frozen=True)
class FeatureDescriptor:
    """One candidate column: base kernel id, feature kind, and ``sqrt(nu_p)``."""

    kernel: int
    kind: Union[TaylorGaussian, LinearCoordinate, RandomFourier]
    weight: float = 1.0

    def evaluate(self, X) -> np.ndarray:
        """Weighted feature value for each row of X."""
        return CandidateSet([self], np.eye(self.kernel + 1)[self.kernel]).design(X)[:, 0]

    def to_dict(self) -> dict:
        k = self.kind
        if isinstance(k, TaylorGaussian):
            body = {"kind": "taylor", "sigma": k.sigma, "exponents": list(k.exponents)}
        elif isinstance(k, LinearCoordinate):
            body = {"kind": "linear", "coord": k.coord}
        else:
            body = {"kind": "rff", "omega": list(k.omega), "offset": k.offset, "scale": k.scale}
        return {"kernel": self.kernel, "weight": self.weight, **body}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureDescriptor":
        tag = d["kind"]
        if tag == "taylor":
            kind = TaylorGaussian(float(d["sigma"]), tuple(int(a) for a in d["exponents"]))
        elif tag == "linear":
            kind = LinearCoordinate(int(d["coord"]))
        elif tag == "rff":
            kind = RandomFourier(tuple(float(w) for w in d["omega"]), float(d["offset"]),
                                 float(d["scale"]))
        else:
            raise ValueError(f"unknown feature kind {tag!r}")
        return cls(int(d["kernel"]), kind, float(d["weight"]))


def _check_simplex(nu, atol: float = 1e-9) -> np.ndarray:
    nu = np.asarray(nu, dtype=float).ravel()
    if nu.size == 0 or np.any(nu < -atol) or abs(nu.sum() - 1.0) > atol or not np.all(np.isfinite(nu)):
        raise InvalidSimplex(f"weights {nu.tolist()} are not on the probability simplex")
    return np.clip(nu, 0.0, None)


@dataclass(frozen=True)
class CandidateSet:
    """Ordered explicit features over P base kernels with simplex weights ``nu``.

    Column ``j`` of :meth:`design` is descriptor ``j``; these are the indices
    the greedy selection ranges over.
    """

    descriptors: list
    nu: np.ndarray
    sigmas: tuple = ()
    seed: Optional[int] = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "nu", _check_simplex(self.nu))
        object.__setattr__(self, "descriptors", list(self.descriptors))
        for desc in self.descriptors:
            if not 0 <= desc.kernel < self.nu.size:
                raise ValueError(f"descriptor refers to kernel {desc.kernel}, only {self.nu.size} kernels")

    def __len__(self) -> int:
        return len(self.descriptors)

    @property
    def size(self) -> int:
        return len(self.descriptors)

    @property
    def n_kernels(self) -> int:
        return self.nu.size

    @cached_property
    def input_dim(self) -> Optional[int]:
        for desc in self.descriptors:
            k = desc.kind
            if isinstance(k, TaylorGaussian):
                return len(k.exponents)
            if isinstance(k, RandomFourier):
                return len(k.omega)
        return self.meta.get("d")

    @cached_property
    def _groups(self):
        """Descriptors packed into arrays by family, for vectorized evaluation."""
        taylor, linear, rff = {}, [], []
        for j, desc in enumerate(self.descriptors):
            k = desc.kind
            if isinstance(k, TaylorGaussian):
                taylor.setdefault(k.sigma, []).append(j)
            elif isinstance(k, LinearCoordinate):
                linear.append(j)
            else:
                rff.append(j)
        weights = np.array([desc.weight for desc in self.descriptors])
        packed = {"weights": weights, "taylor": [], "linear": None, "rff": None}
        for sigma, cols in taylor.items():
            exps = np.array([self.descriptors[j].kind.exponents for j in cols], dtype=np.int64)
            packed["taylor"].append((sigma, np.array(cols), exps))
        if linear:
            coords = np.array([self.descriptors[j].kind.coord for j in linear])
            packed["linear"] = (np.array(linear), coords)
        if rff:
            omega = np.array([self.descriptors[j].kind.omega for j in rff], dtype=float)
            offset = np.array([self.descriptors[j].kind.offset for j in rff])
            scale = np.array([self.descriptors[j].kind.scale for j in rff])
            packed["rff"] = (np.array(rff), omega, offset, scale)
        return packed

    def design(self, X) -> np.ndarray:
        """N x M0 matrix with entry ``(n, j) = weight_j * phi_j(x_n)``."""
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(1, -1) if X.size else X.reshape(0, self.input_dim or 0)
        n = X.shape[0]
        d = self.input_dim
        if d is not None and X.shape[1] != d:
            raise DimensionMismatch(f"candidate set expects d={d}, got {X.shape[1]}")
        g = self._groups
        out = np.zeros((n, self.size))
        if n == 0 or self.size == 0:
            return out
        for sigma, cols, exps in g["taylor"]:
            out[:, cols] = _taylor_columns(X, sigma, exps)
        if g["linear"] is not None:
            cols, coords = g["linear"]
            if coords.max() >= X.shape[1]:
                raise IndexOutOfRange(f"linear coordinate {coords.max()} out of range for d={X.shape[1]}")
            out[:, cols] = X[:, coords]
        if g["rff"] is not None:
            cols, omega, offset, scale = g["rff"]
            out[:, cols] = scale * np.cos(X @ omega.T + offset)
        out *= g["weights"]
        return out

    def subset(self, indices) -> "CandidateSet":
        """Candidate set holding only the given descriptors, in the given order."""
        return CandidateSet([self.descriptors[int(i)] for i in indices], self.nu,
                            self.sigmas, self.seed, dict(self.meta, d=self.input_dim))

    def kernel_of(self) -> np.ndarray:
        return np.array([desc.kernel for desc in self.descriptors], dtype=np.int64)

    def to_dict(self) -> dict:
        return {
            "nu": self.nu.tolist(),
            "sigmas": list(self.sigmas),
            "seed": self.seed,
            "d": self.input_dim,
            "descriptors": [desc.to_dict() for desc in self.descriptors],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CandidateSet":
        descs = [FeatureDescriptor.from_dict(x) for x in d["descriptors"]]
        meta = {"d": d.get("d")}
        return cls(descs, np.asarray(d["nu"], dtype=float), tuple(d.get("sigmas", ())),
                   d.get("seed"), meta)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "CandidateSet":
        return cls.from_dict(json.loads(text))


def build_candidate_set(
    d: int,
    task: Union[Task, str],
    sigmas: Union[float, Sequence[float]] = 1.0,
    nu: Optional[Sequence[float]] = None,
    taylor_order: Optional[int] = None,
    linear: Optional[bool] = None,
) -> CandidateSet:
    """Candidate features over Gaussian (Taylor) kernels and, optionally, the linear kernel.

    Defaults follow the task: classification uses first-order Taylor features
    plus the d linear coordinates (``M0 = 2d + 1``, two kernels); regression
    uses second-order Taylor features only (``M0 = C(d, 2) + 2d + 1``).

    One Gaussian kernel is created per entry of ``sigmas``; the linear kernel,
    if present, comes last. ``nu`` defaults to uniform weights.
    """
    task = Task(task)
    if d < 1:
        raise ValueError("d must be positive")
    if taylor_order is None:
        taylor_order = 1 if task is Task.CLASSIFICATION else 2
    if linear is None:
        linear = task is Task.CLASSIFICATION
    if taylor_order < 0:
        raise ValueError("taylor_order must be nonnegative")
    sigmas = tuple(float(s) for s in np.atleast_1d(sigmas))
    if any(s <= 0 for s in sigmas):
        raise ValueError("bandwidths must be positive")
    n_kernels = len(sigmas) + int(linear)
    nu = np.full(n_kernels, 1.0 / n_kernels) if nu is None else np.asarray(nu, dtype=float)
    if nu.shape != (n_kernels,):
        raise InvalidSimplex(f"expected {n_kernels} kernel weights, got {nu.size}")
    nu = _check_simplex(nu)

    exps = [tuple(int(a) for a in row) for row in enumerate_multi_indices(d, taylor_order)]
    descs = []
    for p, s in enumerate(sigmas):
        w = math.sqrt(nu[p])
        descs.extend(FeatureDescriptor(p, TaylorGaussian(s, e), w) for e in exps)
    if linear:
        p = len(sigmas)
        w = math.sqrt(nu[p])
        descs.extend(FeatureDescriptor(p, LinearCoordinate(j), w) for j in range(d))
    return CandidateSet(descs, nu, sigmas, None, {"d": d})


def sample_rff(d: int, M: int, sigma: float, seed: int, kernel: int = 0,
               weight: float = 1.0) -> list:
    """Draw M random Fourier descriptors for the Gaussian kernel of width sigma.

    ``omega ~ N(0, I / sigma^2)``, ``b ~ U[0, 2 pi)``, scale ``sqrt(2 / M)`` so that
    the inner product of two feature vectors estimates the kernel directly.
    """
    if M < 1 or sigma <= 0:
        raise ValueError("need M >= 1 and sigma > 0")
    rng = np.random.default_rng(seed)
    omega = rng.standard_normal((M, d)) / sigma
    offset = rng.uniform(0.0, 2.0 * np.pi, size=M)
    scale = math.sqrt(2.0 / M)
    return [FeatureDescriptor(kernel, RandomFourier(tuple(w.tolist()), float(b), scale), weight)
            for w, b in zip(omega, offset)]


def rff_candidate_set(d: int, M: int, sigma: float, seed: int) -> CandidateSet:
    return CandidateSet(sample_rff(d, M, sigma, seed), np.ones(1), (float(sigma),), seed, {"d": d})


def rescale_rff(cs: CandidateSet, M: Optional[int] = None) -> CandidateSet:
    """Reset every random Fourier scale to ``sqrt(2 / M)`` (default: set size)."""
    M = cs.size if M is None else M
    scale = math.sqrt(2.0 / M)
    descs = []
    for desc in cs.descriptors:
        k = desc.kind
        if isinstance(k, RandomFourier):
            desc = FeatureDescriptor(desc.kernel, RandomFourier(k.omega, k.offset, scale), desc.weight)
        descs.append(desc)
    return CandidateSet(descs, cs.nu, cs.sigmas, cs.seed, dict(cs.meta, d=cs.input_dim))
