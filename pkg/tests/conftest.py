import numpy as np
import pytest

from wastap.covariance import complex_gaussian
from wastap.scenario import build_model, bundled_scenario, parse_scenario

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def desk():
    scen, cfg = parse_scenario(bundled_scenario("baseline"), desk=True)
    return scen, cfg, build_model(scen)


@pytest.fixture(scope="session")
def full():
    scen, cfg = parse_scenario(bundled_scenario("baseline"))
    return scen, cfg, build_model(scen)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_hermitian(rng, n, psd=False, shift=0.0):
    X = complex_gaussian(rng, (n, n))
    A = X @ X.conj().T if psd else 0.5 * (X + X.conj().T)
    return A + shift * np.eye(n)


def rel_err(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), np.finfo(float).tiny))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
