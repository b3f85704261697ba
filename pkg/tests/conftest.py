import numpy as np
import pytest

from outagebounds import models


@pytest.fixture(scope="session")
def gauss():
    return models.LinearGaussian(0.0, 1.0, 1.0)


@pytest.fixture(scope="session")
def two_sided():
    return models.TwoSidedExponential(1.0, 10.0, (1.0, 2.0), (0.5, 0.5))


@pytest.fixture(scope="session")
def intervals():
    return models.UniformIntervalsGaussian(100.0)


@pytest.fixture(scope="session")
def mixtures():
    return [models.GaussianMixturePosterior.random(seed) for seed in range(3)]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance report lines after the run."""
    lines = []
    for key in ("passed", "failed"):
        for rep in terminalreporter.stats.get(key, []):
            if rep.when == "call" and "test_acceptance.py::test_criterion" in rep.nodeid:
                lines.extend(ln for ln in rep.capstdout.splitlines() if ln.startswith(("PASS ", "FAIL ")))
    if lines:
        terminalreporter.section("acceptance report")
        for line in sorted(lines, key=lambda ln: ln.split()[1]):
            terminalreporter.write_line(line)
