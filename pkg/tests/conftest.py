import numpy as np
import pytest

from saabkit.residuals import synth_ar1


def ar1_sequences(rho, length, count, rng):
    """Stationary unit-variance AR(1) sequences by direct recursion."""
    x = np.empty((count, length))
    x[:, 0] = rng.standard_normal(count)
    innov = np.sqrt(1.0 - rho * rho)
    for t in range(1, length):
        x[:, t] = rho * x[:, t - 1] + innov * rng.standard_normal(count)
    return x


@pytest.fixture(scope="session")
def ar1_4x4():
    return synth_ar1(rho=0.95, sigma=10.0, n=4, count=50_000, seed=11)


@pytest.fixture(scope="session")
def ar1_8x8():
    return synth_ar1(rho=0.95, sigma=10.0, n=8, count=50_000, seed=12)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


_ACCEPTANCE = []


def pytest_runtest_logreport(report):
    if report.when == "call":
        _ACCEPTANCE.extend(v for k, v in report.user_properties if k == "acceptance")


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
