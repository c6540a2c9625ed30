import math

import numpy as np
import pytest

from jbdetect.model import builtin_model

ACCEPTANCE_LINES: list[str] = []

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section(f, lo, hi, tol=1e-11):
    """Plain golden-section minimizer; independent of the closed forms under test."""
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


@pytest.fixture
def sine():
    return builtin_model("sine-vol-ou")


@pytest.fixture
def const():
    return builtin_model("const-ou")


@pytest.fixture
def six_point_path():
    # fixed synthetic path: 7 observations, 6 intervals
    return np.array([0.0, 0.31, -0.12, 0.44, 0.97, 0.52, 0.60]), 0.03


def path_from_increments(dx, x0=0.0):
    return np.concatenate([[x0], x0 + np.cumsum(dx)])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
