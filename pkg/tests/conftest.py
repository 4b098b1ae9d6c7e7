import sys

import numpy as np
import pytest

from udocrp.core import RandomSource


@pytest.fixture
def rng():
    return RandomSource(20240611).generator


def within_se(values, target, k=3.0):
    """|mean - target| <= k standard errors."""
    v = np.asarray(values, dtype=float)
    se = v.std(ddof=1) / np.sqrt(v.size)
    return abs(v.mean() - target) <= k * se


def pytest_terminal_summary(terminalreporter):
    mod = next((m for n, m in list(sys.modules.items()) if n.endswith("test_acceptance")), None)
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
