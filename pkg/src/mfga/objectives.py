"""Losses and the Tikhonov-regularized empirical risk over a design matrix.

The risk is

    R(theta) = (1/N) sum_n L(<row_n, theta>, y_n) + lam * ||theta||^2

so that ``lam > 0`` makes it ``2 lam``-strongly convex.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import DimensionMismatch


def logistic(u):
    """``log(1 + exp(-u))`` without overflow."""
    u = np.asarray(u, dtype=float)
    return np.maximum(0.0, -u) + np.log1p(np.exp(-np.abs(u)))


class QuadraticLoss:
    """``L(f, y) = (f - y)^2``."""

    name = "quadratic"
    curvature = 2.0

    @staticmethod
    def value(f, y):
        return (f - y) ** 2

    @staticmethod
    def deriv(f, y):
        return 2.0 * (f - y)

    @staticmethod
    def deriv2(f, y):
        return np.full_like(np.asarray(f, dtype=float), 2.0)


class LogisticLoss:
    """Margin loss ``L(f, y) = log(1 + exp(-y f))`` for ``y`` in {-1, +1}."""

    name = "logistic"
    curvature = 0.25

    @staticmethod
    def value(f, y):
        return logistic(y * f)

    @staticmethod
    def deriv(f, y):
        return -y * expit(-y * f)

    @staticmethod
    def deriv2(f, y):
        s = expit(y * f)
        return s * (1.0 - s)


LOSSES = {"quadratic": QuadraticLoss, "logistic": LogisticLoss}


def get_loss(loss):
    if isinstance(loss, str):
        try:
            return LOSSES[loss]
        except KeyError:
            raise ValueError(f"unknown loss {loss!r}") from None
    return loss


@dataclass(frozen=True)
class Objective:
    """Regularized empirical risk of a linear model over fixed design columns.

    Parameters
    ----------
    design : ndarray of shape (N, M0)
    y : ndarray of shape (N,)
    loss : {"quadratic", "logistic"} or loss class
    lam : float
        Weight of ``||theta||^2``.
    """

    design: np.ndarray
    y: np.ndarray
    loss: object = "quadratic"
    lam: float = 0.0

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.design, dtype=float))
        y = np.asarray(self.y, dtype=float).ravel()
        if A.shape[0] != y.shape[0]:
            raise DimensionMismatch(f"design has {A.shape[0]} rows, y has {y.shape[0]}")
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")
        object.__setattr__(self, "design", A)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "loss", get_loss(self.loss))

    @property
    def n(self) -> int:
        return self.design.shape[0]

    @property
    def dim(self) -> int:
        return self.design.shape[1]

    def _check(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float).ravel()
        if theta.shape[0] != self.dim:
            raise DimensionMismatch(f"theta has {theta.shape[0]} entries, design has {self.dim} columns")
        return theta

    def restrict(self, support) -> "Objective":
        """The same risk as a function of the coordinates in ``support`` only."""
        return Objective(self.design[:, np.asarray(support, dtype=np.int64)], self.y, self.loss, self.lam)

    def predictions(self, theta) -> np.ndarray:
        return self.design @ self._check(theta)

    def risk(self, theta) -> float:
        theta = self._check(theta)
        f = self.design @ theta
        return float(np.mean(self.loss.value(f, self.y)) + self.lam * theta @ theta)

    def data_risk(self, theta) -> float:
        """Risk without the regularizer."""
        f = self.design @ self._check(theta)
        return float(np.mean(self.loss.value(f, self.y)))

    def gradient(self, theta) -> np.ndarray:
        theta = self._check(theta)
        f = self.design @ theta
        return self.design.T @ self.loss.deriv(f, self.y) / self.n + 2.0 * self.lam * theta

    def hessian(self, theta) -> np.ndarray:
        theta = self._check(theta)
        f = self.design @ theta
        w = self.loss.deriv2(f, self.y)
        H = (self.design.T * w) @ self.design / self.n
        H[np.diag_indices_from(H)] += 2.0 * self.lam
        return H

    def smoothness_estimate(self, max_iter: int = 1000, rtol: float = 1e-12):
        """Strong convexity and smoothness constants ``(mu, beta)``.

        ``mu = 2 lam``; ``beta = c * ||design||_op^2 / N + 2 lam`` where ``c`` is the
        loss curvature bound (2 quadratic, 1/4 logistic).
        """
        mu = 2.0 * self.lam
        beta = self.loss.curvature * spectral_norm_sq(self.design, max_iter, rtol) / self.n + mu
        return mu, beta


def spectral_norm_sq(A: np.ndarray, max_iter: int = 1000, rtol: float = 1e-12) -> float:
    """Largest eigenvalue of ``A^T A``.

    Exact for Gram matrices up to 1000 x 1000, power iteration beyond.
    """
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return 0.0
    G = A.T @ A if A.shape[1] <= A.shape[0] else A @ A.T
    if G.shape[0] <= 1000:
        return float(np.linalg.eigvalsh(G)[-1])
    v = np.random.default_rng(0).standard_normal(G.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = G @ v
        new = float(v @ w)
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return 0.0
        v = w / nrm
        if abs(new - lam) <= rtol * abs(new):
            lam = new
            break
        lam = new
    return lam
