import numpy as np
import pytest

from iot_eclipse.trace import ClassLabel, Trace


def make_trace(times, sizes=None, label=None):
    times = np.asarray(times, dtype=float)
    if sizes is None:
        sizes = np.full(len(times), 100)
    return Trace(times, sizes, label)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_trace(rng):
    gaps = rng.exponential(0.05, 999)
    t = np.concatenate(([0.0], np.cumsum(gaps)))
    return Trace(t, rng.integers(60, 1500, 1000), ClassLabel("Echo", "Music"))


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
