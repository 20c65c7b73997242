import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import ortho_group

from mfga import greedy
from mfga.data import Task
from mfga.errors import Exhausted, NoConvergence, SingularSystem
from mfga.features import CandidateSet, FeatureDescriptor, TaylorGaussian, build_candidate_set
from mfga.greedy import SparseModel, geometric_iterations, model_at, refit, select_indices
from mfga.objectives import Objective
from oracles import omp_reference, ridge_dense, sparse_logistic_instance


def orthonormal_design(seed, n, m):
    q = ortho_group.rvs(n, random_state=seed)
    return q[:, :m] * math.sqrt(n)  # columns with psi^T psi = N


# ------------------------------------------------------------------ selection

def test_select_examples():
    assert select_indices([0.1, -0.9, 0.5], []).tolist() == [1]
    assert select_indices([0.5, -0.5], []).tolist() == [0]
    assert select_indices([3.0, 2.0, 1.0], [0], k=2).tolist() == [1, 2]


def test_select_exhausted():
    with pytest.raises(Exhausted):
        select_indices([1.0, 2.0], [0, 1])
    with pytest.raises(Exhausted):
        select_indices([1.0, 2.0, 3.0], [2], k=3)


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=20), st.data())
def test_select_never_returns_excluded(grad, data):
    n = len(grad)
    excluded = data.draw(st.sets(st.integers(0, n - 1), max_size=n - 1))
    k = data.draw(st.integers(1, n - len(excluded)))
    picks = select_indices(grad, excluded, k)
    assert len(set(picks.tolist())) == k and not set(picks.tolist()) & excluded
    g = np.abs(grad)
    rest = [j for j in range(n) if j not in excluded and j not in picks]
    if rest:
        assert g[picks].min() >= max(g[rest])


# ---------------------------------------------------------------------- refit

def test_refit_orthonormal_projection(rng):
    A = orthonormal_design(1, 20, 5)
    y = rng.normal(size=20)
    obj = Objective(A, y)
    coef, _ = refit(obj, [0, 3])
    np.testing.assert_allclose(coef, A[:, [0, 3]].T @ y / 20, rtol=1e-10)
    r = y - A[:, [0, 3]] @ coef
    np.testing.assert_allclose(A[:, [0, 3]].T @ r, 0, atol=1e-10)


def test_refit_full_support_matches_dense_ridge(rng):
    A, y = rng.normal(size=(40, 12)), rng.normal(size=40)
    obj = Objective(A, y, "quadratic", 0.05)
    coef, _ = refit(obj, np.arange(12))
    np.testing.assert_allclose(coef, ridge_dense(A, y, 0.05), rtol=1e-10)


def test_refit_singular_without_regularizer(rng):
    A = rng.normal(size=(10, 2))
    A = np.hstack([A, A[:, :1]])
    with pytest.raises(SingularSystem):
        refit(Objective(A, rng.normal(size=10)), [0, 1, 2])


def test_refit_separable_logistic():
    obj = Objective([[1.0], [-1.0]], [1.0, -1.0], "logistic", 0.1)
    coef, _ = refit(obj, [0], tol=1e-8)
    assert np.isfinite(coef).all()
    assert np.max(np.abs(obj.gradient(coef))) <= 1e-8


def test_refit_logistic_needs_regularizer():
    with pytest.raises(ValueError):
        refit(Objective([[1.0]], [1.0], "logistic", 0.0), [0])


def test_newton_iteration_cap(rng):
    obj = Objective(rng.normal(size=(30, 3)) * 50, rng.choice([-1.0, 1.0], 30), "logistic", 1e-6)
    with pytest.raises(NoConvergence):
        refit(obj, [0, 1, 2], tol=1e-300, max_iter=1)


# ------------------------------------------------------------------- training

def test_perfect_feature_selected_first(rng):
    y = rng.normal(size=30)
    A = np.column_stack([rng.normal(size=(30, 3)), y, rng.normal(size=30)])
    obj = Objective(A, y, "quadratic", 0.01)
    model, trace = greedy.mfga_train(obj, 1)
    assert trace.records[0].selected == [3]
    theta = model.dense_theta()
    assert obj.data_risk(theta) <= obj.lam * theta @ theta + 1e-12


@pytest.mark.parametrize("seed", range(5))
def test_orthogonal_recovery(seed):
    r = np.random.default_rng(seed)
    A = orthonormal_design(seed, 40, 25)
    theta = np.zeros(25)
    idx = r.choice(25, 3, replace=False)
    theta[idx] = r.uniform(1, 2, 3) * r.choice([-1, 1], 3)
    model, trace = greedy.mfga_train(Objective(A, A @ theta), 3)
    assert sorted(trace.support) == sorted(idx.tolist())
    assert len(trace.records) == 3
    assert trace.risks[-1] <= 1e-20
    np.testing.assert_allclose(model.dense_theta(), theta, atol=1e-12)


def test_zero_features(rng):
    obj = Objective(rng.normal(size=(5, 3)), rng.normal(size=5), "quadratic", 0.1)
    model, trace = greedy.mfga_train(obj, 0)
    assert model.n_features == 0 and trace.records == []
    np.testing.assert_array_equal(model.dense_theta(), 0)
    assert trace.risks[-1] == obj.risk(np.zeros(3))


def test_m_out_of_range(rng):
    obj = Objective(rng.normal(size=(5, 3)), rng.normal(size=5))
    with pytest.raises(ValueError):
        greedy.mfga_train(obj, 4)


def test_stop_risk(rng):
    y = rng.normal(size=30)
    A = np.column_stack([y, rng.normal(size=(30, 5))])
    model, trace = greedy.mfga_train(Objective(A, y), 4, stop_risk=1e-12)
    assert model.n_features == 1


@given(st.integers(0, 2**31 - 1), st.sampled_from(["quadratic", "logistic"]), st.integers(1, 4))
@settings(max_examples=30)
def test_trace_invariants(seed, loss, k):
    r = np.random.default_rng(seed)
    n, m = int(r.integers(10, 40)), int(r.integers(3, 15))
    A = r.normal(size=(n, m))
    y = r.normal(size=n) if loss == "quadratic" else r.choice([-1.0, 1.0], n)
    obj = Objective(A, y, loss, 0.05)
    M = int(r.integers(1, m + 1))
    model, trace = greedy.mfga_train(obj, M, k=k, tol=1e-8)
    supp = trace.support
    assert len(set(supp)) == len(supp) == M
    for t, rec in enumerate(trace.records, 1):
        assert sum(len(x.selected) for x in trace.records[:t]) == min(t * k, M)
    # active-set optimality
    g = obj.gradient(model.dense_theta())
    assert np.max(np.abs(g[model.support])) <= 1e-8
    assert np.all(np.diff(trace.risks) <= 1e-8)


@pytest.mark.parametrize("seed", range(10))
def test_matches_omp_oracle(seed):
    r = np.random.default_rng(seed)
    A, y = r.normal(size=(30, 20)), r.normal(size=30)
    model, trace = greedy.mfga_train(Objective(A, y), 8)
    picks, coefs = omp_reference(A, y, 8)
    assert trace.support == picks
    for rec, c in zip(trace.records, coefs):
        np.testing.assert_allclose(rec.coef, c, rtol=1e-8, atol=1e-10)


def test_determinism(rng):
    A, y = rng.normal(size=(40, 25)), rng.choice([-1.0, 1.0], 40)
    obj = Objective(A, y, "logistic", 0.01)
    a = greedy.mfga_train(obj, 6, k=2)
    b = greedy.mfga_train(obj, 6, k=2)
    assert a[1].support == b[1].support
    np.testing.assert_array_equal(a[0].coef, b[0].coef)
    assert a[1].risks.tolist() == b[1].risks.tolist()


def test_model_at_prefix(rng):
    A, y = rng.normal(size=(30, 12)), rng.normal(size=30)
    obj = Objective(A, y, "quadratic", 0.01)
    full, trace = greedy.mfga_train(obj, 8)
    short, _ = greedy.mfga_train(obj, 3)
    pre = model_at(full, trace, 3)
    np.testing.assert_array_equal(pre.support, short.support)
    np.testing.assert_allclose(pre.coef, short.coef, rtol=1e-12)
    with pytest.raises(ValueError):
        model_at(full, trace, 9)


# ------------------------------------------------------- geometric convergence

@pytest.mark.parametrize("trial", range(3))
def test_geometric_iterations_reach_planted_risk(trial):
    A, y, theta_bar, s, lam = sparse_logistic_instance(500 + trial, n=200, m0=150, lam=0.2)
    obj = Objective(A, y, "logistic", lam)
    mu, beta = obj.smoothness_estimate()
    for eps in (1e-1, 1e-2, 1e-3):
        t = geometric_iterations(s, mu, beta, eps)
        assert t <= obj.dim
        model, _ = greedy.mfga_train(obj, t)
        assert obj.risk(model.dense_theta()) - obj.risk(theta_bar) <= eps


def test_geometric_iterations_formula():
    assert geometric_iterations(3, 1.0, 2.0, math.exp(-1)) == 6
    assert geometric_iterations(2, 0.5, 5.0, 0.1) == math.ceil(20 * math.log(10))


# ------------------------------------------------------------------ prediction

def test_predict_empty_support():
    cs = build_candidate_set(2, Task.CLASSIFICATION)
    m = SparseModel([], [], cs, Task.CLASSIFICATION)
    assert m.decision_function([0.3, 0.1]) == 0.0
    assert m.predict([0.3, 0.1]) == 1.0


def test_predict_constant_taylor_feature():
    cs = CandidateSet([FeatureDescriptor(0, TaylorGaussian(2.0, (0, 0, 0)))], [1.0])
    m = SparseModel([0], [1.7], cs)
    x = np.array([0.5, -1.0, 2.0])
    assert m.predict(x) == pytest.approx(1.7 * math.exp(-(x @ x) / 8), rel=1e-14)


def test_predict_consistent_with_design(rng):
    cs = build_candidate_set(3, Task.REGRESSION, sigmas=1.5)
    X, y = rng.normal(size=(40, 3)), rng.normal(size=40)
    obj = Objective(cs.design(X), y, "quadratic", 0.01)
    model, _ = greedy.mfga_train(obj, 5, candidate_set=cs)
    np.testing.assert_allclose(model.predict(X), obj.predictions(model.dense_theta()), atol=1e-10)


def test_model_json_round_trip(rng):
    cs = build_candidate_set(3, Task.CLASSIFICATION, sigmas=[0.9])
    X, y = rng.normal(size=(50, 3)), rng.choice([-1.0, 1.0], 50)
    model, _ = greedy.mfga_train(Objective(cs.design(X), y, "logistic", 0.01), 4, candidate_set=cs,
                                 task=Task.CLASSIFICATION)
    back = SparseModel.from_json(model.to_json())
    np.testing.assert_array_equal(back.decision_function(X), model.decision_function(X))
    np.testing.assert_array_equal(back.predict(X), model.predict(X))
    assert back.task is Task.CLASSIFICATION
