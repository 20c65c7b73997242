"""Synthetic datasets shared by the test modules."""

import numpy as np

from mfga.data import Dataset, Task, bandwidth_heuristic
from mfga.features import gaussian_kernel


def gaussian_teacher(seed, n=2000, d=5, centers=20, noise=0.05, n_train=1500):
    """Regression targets from a random sum of Gaussian bumps.

    The bump width is the k-NN bandwidth heuristic on the inputs; targets
    are scaled to peak at 1, perturbed, and clipped to [-1, 1].
    Returns ``(train, test, sigma)``.
    """
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    sigma = bandwidth_heuristic(X, seed=seed)
    Z = rng.standard_normal((centers, d))
    c = rng.standard_normal(centers)
    f = gaussian_kernel(X, Z, sigma) @ c
    f = f / np.max(np.abs(f))
    y = np.clip(f + noise * rng.standard_normal(n), -1, 1)
    train = Dataset(X[:n_train], y[:n_train], Task.REGRESSION)
    test = Dataset(X[n_train:], y[n_train:], Task.REGRESSION)
    return train, test, sigma


def linear_rows(seed, n=200, d=4, noise=0.1, task=Task.REGRESSION):
    """Standardized-looking rows with a linear signal."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    w = rng.standard_normal(d)
    f = X @ w
    if task is Task.CLASSIFICATION:
        y = np.where(f + noise * rng.standard_normal(n) >= 0, 1.0, -1.0)
    else:
        y = f / np.max(np.abs(f)) + noise * rng.standard_normal(n)
        y = np.clip(y, -1, 1)
    return X, y
