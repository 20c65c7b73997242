import numpy as np
import pytest
from hypothesis import settings

import mfga.bench
import mfga.greedy

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

_original_train = mfga.greedy.mfga_train

# every greedy run made anywhere in the suite is checked for a nonincreasing risk trace
GREEDY_RUNS = {"count": 0, "violations": []}


def assert_monotone(trace, tol):
    risks = trace.risks
    slack = tol + 1e-12 * np.maximum(1.0, np.abs(risks[:-1]))
    bad = np.flatnonzero(np.diff(risks) > slack)
    return bad


def _checked_train(obj, M, k=1, tol=1e-8, *args, **kwargs):
    model, trace = _original_train(obj, M, k, tol, *args, **kwargs)
    GREEDY_RUNS["count"] += 1
    bad = assert_monotone(trace, tol)
    if bad.size:
        GREEDY_RUNS["violations"].append((M, k, trace.risks.tolist()))
    assert bad.size == 0, f"risk increased at iterations {bad + 1}: {trace.risks}"
    return model, trace


@pytest.fixture(autouse=True)
def _monotone_greedy(monkeypatch):
    monkeypatch.setattr(mfga.greedy, "mfga_train", _checked_train)
    monkeypatch.setattr(mfga.bench, "mfga_train", _checked_train)
    yield


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_collection_modifyitems(config, items):
    # suite-wide checks read state gathered by every other test, so they run last
    late = [it for it in items if it.get_closest_marker("run_last")]
    items[:] = [it for it in items if not it.get_closest_marker("run_last")] + late


def pytest_configure(config):
    config.addinivalue_line("markers", "run_last: run after every other collected test")
