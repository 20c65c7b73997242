import json

import numpy as np
import pytest

from mfga.bench import (
    BenchmarkResult,
    ExperimentConfig,
    compare,
    default_sweep_values,
    error_percent,
    read_results,
    read_sweep_csv,
    run_experiment,
    sweep,
    write_results,
)
from mfga.data import Dataset, Task
from mfga.errors import ConfigError, ParseError
from synthetic import linear_rows

FAST = dict(lambdas=[1e-3, 1e-1], warmup=False, sigma=2.0)


def reg_split(seed=0, n=200, d=4):
    X, y = linear_rows(seed, n, d)
    cut = int(0.75 * n)
    return Dataset(X[:cut], y[:cut], Task.REGRESSION), Dataset(X[cut:], y[cut:], Task.REGRESSION)


def cls_split(seed=0, n=200, d=4):
    X, y = linear_rows(seed, n, d, task=Task.CLASSIFICATION)
    cut = int(0.75 * n)
    return (Dataset(X[:cut], y[:cut], Task.CLASSIFICATION),
            Dataset(X[cut:], y[cut:], Task.CLASSIFICATION))


def strip_timings(doc):
    if isinstance(doc, list):
        return [strip_timings(d) for d in doc]
    return {k: v for k, v in doc.items() if k != "timings"}


# ---------------------------------------------------------------- error metric

def test_error_metric():
    assert error_percent(Task.CLASSIFICATION, np.array([0.2, -1.0, 0.0, 3.0]),
                         np.array([1.0, 1.0, -1.0, 1.0])) == 50.0
    assert error_percent(Task.REGRESSION, np.array([0.5, 0.0]), np.array([0.0, 0.0])) == pytest.approx(12.5)


# ---------------------------------------------------------------- experiments

def test_mfga_smoke_beats_zero_model():
    train, test = reg_split()
    res = run_experiment(ExperimentConfig("mfga", M=5, **FAST), train, test)
    assert res.test_error < 100 * np.mean(test.y**2)
    assert res.M == 5 and res.M0 == 15  # C(4 + 2, 2)
    assert res.stderr is None
    assert 0 <= res.test_error <= 100 and res.t_pp >= 0 and res.t_train >= 0


@pytest.mark.parametrize("method,extra", [("rks", {}), ("lkrf", {"M0": 30}), ("eerf", {"M0": 30})])
def test_randomized_methods_report_stderr(method, extra):
    train, test = cls_split()
    res = run_experiment(ExperimentConfig(method, M=10, seeds=(1, 2, 3), **extra, **FAST), train, test)
    assert res.stderr is not None and res.stderr >= 0
    assert 0 <= res.test_error <= 100
    if method == "rks":
        assert res.t_pp is None
    else:
        assert res.t_pp > 0


@pytest.mark.parametrize("method", ["gk", "glk"])
def test_kernel_methods(method):
    train, test = cls_split()
    res, model = run_experiment(ExperimentConfig(method, n0_fraction=0.5, **FAST), train, test,
                                return_model=True)
    assert res.M is None and res.stderr is None and res.n0_fraction == 0.5
    assert model.X.shape[0] == 75
    assert res.test_error < 30


def test_classification_mfga_candidates():
    train, test = cls_split()
    res, model = run_experiment(ExperimentConfig("mfga", M=6, **FAST), train, test, return_model=True)
    assert res.M0 == 2 * 4 + 1
    assert model.task is Task.CLASSIFICATION
    assert res.test_error < 20


@pytest.mark.parametrize("cfg", [
    dict(method="mfga", M=16),
    dict(method="lkrf", M=50, M0=40),
    dict(method="eerf", M=5),
    dict(method="rks", M=0),
    dict(method="svm", M=5),
    dict(method="rks", M=5, lambdas=[]),
    dict(method="rks", M=5, sigma=-1.0),
    dict(method="rks", M=5, seeds=()),
    dict(method="gk", n0_fraction=0.0),
])
def test_config_errors_before_work(cfg):
    train, test = reg_split()
    c = ExperimentConfig(**{**FAST, **cfg})
    with pytest.raises(ConfigError):
        run_experiment(c, train, test)


def test_config_file_round_trip(tmp_path):
    cfg = ExperimentConfig("lkrf", M=10, M0=40, seeds=(1, 2), lambdas=[0.1], schema={"response": "y",
                           "task": "regression"})
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg.to_dict()))
    back = ExperimentConfig.from_json(p)
    assert back.to_dict() == cfg.to_dict()
    p.write_text(json.dumps({"method": "rks", "bogus": 1}))
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json(p)
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json(tmp_path / "missing.json")


# ---------------------------------------------------------------------- sweep

def test_sweep_rows_and_csv(tmp_path):
    train, test = reg_split()
    csv_path = tmp_path / "curve.csv"
    rows = sweep(ExperimentConfig("rks", seeds=(1, 2), **FAST), [10, 20, 40], train, test, csv_path)
    assert [r.M for r in rows] == [10, 20, 40]
    back = read_sweep_csv(csv_path)
    assert back == [{"method": r.method, "M": r.M, "error": r.test_error, "stderr": r.stderr} for r in rows]


def test_sweep_validation():
    train, test = reg_split()
    with pytest.raises(ConfigError):
        sweep(ExperimentConfig("mfga", **FAST), [4, 2], train, test)
    with pytest.raises(ConfigError):
        sweep(ExperimentConfig("gk", **FAST), [4], train, test)
    with pytest.raises(ConfigError):
        sweep(ExperimentConfig("mfga", **FAST), [], train, test)


def test_mfga_sweep_prefix_property():
    train, test = reg_split(3)
    cfg = dict(FAST, lambdas=[1e-2])
    rows = sweep(ExperimentConfig("mfga", **cfg), [2, 5, 10], train, test)
    for r in rows:
        single = run_experiment(ExperimentConfig("mfga", M=r.M, **cfg), train, test)
        assert single.test_error == pytest.approx(r.test_error, rel=1e-12, abs=1e-12)
        assert single.theta_norm == pytest.approx(r.theta_norm, rel=1e-12)
    assert len({r.t_pp for r in rows}) == 1


def test_default_sweep_values():
    vals = default_sweep_values(100)
    assert vals[-1] == 100 and vals == sorted(set(vals)) and len(vals) <= 8


# ------------------------------------------------------------ result files

def test_results_deterministic(tmp_path):
    train, test = cls_split(1)
    docs = []
    for i in range(2):
        path = tmp_path / f"r{i}.json"
        run_experiment(ExperimentConfig("eerf", M=5, M0=20, seeds=(1, 2), output=str(path), **FAST),
                       train, test)
        docs.append(json.loads(path.read_text()))
    assert strip_timings(docs[0]) == strip_timings(docs[1])
    assert set(docs[0]["timings"]) == {"t_pp", "t_train"}


def test_results_round_trip(tmp_path):
    r = BenchmarkResult("adult", "mfga", 100, 245, None, 15.1, None, 1e-3, 2.5, 1.2, 0.5, 3.0)
    write_results([r], tmp_path / "r.json")
    assert read_results(tmp_path / "r.json") == [r]
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(ParseError):
        read_results(tmp_path / "bad.json")
    (tmp_path / "odd.json").write_text('{"x": 1}')
    with pytest.raises(ParseError):
        read_results(tmp_path / "odd.json")


# ------------------------------------------------------------------- compare

def _write(tmp_path, name, results):
    p = tmp_path / name
    write_results(results, p)
    return p


def test_compare_single_row(tmp_path):
    r = BenchmarkResult("adult", "mfga", 100, 245, None, 15.1, None, 1e-3, 2.5, 1.2, 0.5, 3.0)
    table = compare([_write(tmp_path, "a.json", [r])]).splitlines()
    assert len(table) == 3
    assert "MFGA" in table[2] and "15.10" in table[2]


def test_compare_order_and_placeholders(tmp_path):
    rows = [
        BenchmarkResult("b", "glk", None, None, 0.1, 14.0, None, 1.0, None, 1.0, None, 9.0),
        BenchmarkResult("b", "mfga", 100, 245, None, 15.1, None, 1e-3, 2.5, 1.0, 0.5, 3.0),
        BenchmarkResult("a", "eerf", 100, 2000, None, 16.0, 0.02, 1e-3, 2.5, 1.0, 0.3, 1.0),
        BenchmarkResult("b", "rks", 100, None, None, 17.0, 0.01, 1e-3, 2.5, 1.0, None, 1.0),
        BenchmarkResult("b", "lkrf", 100, 2000, None, 16.5, 0.03, 1e-3, 2.5, 1.0, 0.3, 1.0),
    ]
    table = compare([_write(tmp_path, "x.json", rows[:2]), _write(tmp_path, "y.json", rows[2:])])
    body = [line.split("|") for line in table.splitlines()[2:]]
    order = [(c[0].strip(), c[1].strip()) for c in body]
    assert order == [("a", "EERF"), ("b", "RKS"), ("b", "LKRF"), ("b", "MFGA"), ("b", "GLK")]
    rks = body[1]
    assert rks[3].strip() == "--" and rks[5].strip() == "--"
    assert "(1e-02)" in rks[7]
    glk = body[4]
    assert glk[2].strip() == "--" and glk[7].strip() == "14.00"


def test_compare_errors(tmp_path):
    with pytest.raises(ParseError):
        compare([tmp_path / "none.json"])
    with pytest.raises(ConfigError):
        compare([])
