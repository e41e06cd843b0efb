import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dmrf.data import Dataset

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# filled by tests/test_acceptance.py, printed once at the end of the session
ACCEPTANCE_LINES: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: (int(k.split(".")[0]), k)):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


def make_classification(n=60, d=3, c=2, seed=0, levels=None):
    rng = np.random.default_rng(seed)
    if levels:
        X = rng.integers(0, levels, size=(n, d)).astype(float)
    else:
        X = rng.random((n, d))
    y = rng.integers(1, c + 1, size=n)
    return Dataset(X, y, "classification", tuple(f"c{k}" for k in range(1, c + 1)))


def make_regression(n=60, d=3, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.random((n, d))
    y = np.sin(4 * X[:, 0]) + 0.1 * rng.standard_normal(n)
    return Dataset(X, y, "regression")


@pytest.fixture
def clf_data():
    return make_classification()


@pytest.fixture
def reg_data():
    return make_regression()
