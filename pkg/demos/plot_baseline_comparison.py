"""
Greedy features against random Fourier features
===============================================

A smooth target drawn from Gaussian bumps. At the same feature budget the
greedy model is compared with random kitchen sinks, the two reweighted
random-feature methods, and the exact Gaussian kernel.
"""

import numpy as np

from mfga import Dataset, Task, bandwidth_heuristic, gaussian_kernel
from mfga.bench import ExperimentConfig, run_experiment

rng = np.random.default_rng(0)
X = rng.standard_normal((2000, 5))
sigma = bandwidth_heuristic(X)
f = gaussian_kernel(X, rng.standard_normal((20, 5)), sigma) @ rng.standard_normal(20)
y = np.clip(f / np.abs(f).max() + 0.05 * rng.standard_normal(2000), -1, 1)
train = Dataset(X[:1500], y[:1500], Task.REGRESSION)
test = Dataset(X[1500:], y[1500:], Task.REGRESSION)

runs = [
    ExperimentConfig("mfga", M=50, taylor_order=3),
    ExperimentConfig("rks", M=50),
    ExperimentConfig("lkrf", M=50, M0=500),
    ExperimentConfig("eerf", M=50, M0=500),
    ExperimentConfig("gk", n0_fraction=0.5),
]
for cfg in runs:
    cfg.sigma, cfg.warmup = sigma, False
    r = run_experiment(cfg, train, test)
    se = "" if r.stderr is None else f" +/- {r.stderr:.3f}"
    print(f"{r.method:5s} error {r.test_error:.3f}{se}  (lambda {r.lam:g})")
