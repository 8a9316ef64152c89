import functools
import sys

import pytest

from stagflat.field import Point2, SyntheticProfileSpec, make_synthetic
from stagflat.functionals import AnalysisWindow, profile_sweep

X0 = Point2(1.0, 0.0)


@functools.lru_cache(maxsize=None)
def synthetic(name, N=2, x0=1.0):
    return make_synthetic(SyntheticProfileSpec(name, x0=x0, N=N))


@functools.lru_cache(maxsize=None)
def sweep(name, N=2):
    """Default 40-radius sweep about (1, 0) with f = 0; shared across test modules."""
    f = synthetic(name, N)
    return profile_sweep(f, None, AnalysisWindow.build(f, 1.0))


@pytest.fixture(scope="session")
def get_sweep():
    return sweep


@pytest.fixture(scope="session")
def get_field():
    return synthetic


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
