import numpy as np
import pytest

from relaxflow import Boundary, Grid1D

# (index, passed, detail) tuples collected by the acceptance tests and
# replayed after the run so the per-criterion verdicts survive capture
_CRITERIA = []


@pytest.fixture(scope="session")
def criterion_log():
    def record(index: int, passed: bool, detail: str):
        _CRITERIA.append((index, passed, detail))

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for index, passed, detail in sorted(_CRITERIA):
        verdict = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {index:2d}: {verdict} - {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def pgrid():
    def make(n=64, lo=-np.pi, hi=np.pi):
        return Grid1D(n=n, x_min=lo, x_max=hi, boundary=Boundary.PERIODIC)

    return make


@pytest.fixture
def wgrid():
    def make(n=64, lo=0.0, hi=3.0):
        return Grid1D(n=n, x_min=lo, x_max=hi, boundary=Boundary.ZERO_GRADIENT)

    return make
