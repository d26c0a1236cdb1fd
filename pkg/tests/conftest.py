import math

import numpy as np
import pytest


def reference_segment_variances(y, s, m):
    """Straight loop over forward and backward segments with a raw-index polyfit."""
    n = len(y)
    ns = n // s
    out = []
    for nu in range(1, 2 * ns + 1):
        if nu <= ns:
            idx = [(nu - 1) * s + i for i in range(1, s + 1)]
        else:
            idx = [n - (nu - ns) * s + i for i in range(1, s + 1)]
        seg = np.array([y[k - 1] for k in idx])
        x = np.arange(1, s + 1, dtype=float)
        coef = np.polyfit(x, seg, m)
        resid = seg - np.polyval(coef, x)
        out.append(sum(float(e) ** 2 for e in resid) / s)
    return out


def reference_fq(f2, q):
    if q == 0:
        return math.exp(sum(math.log(v) for v in f2) / (2 * len(f2)))
    return (sum(v ** (q / 2) for v in f2) / len(f2)) ** (1 / q)


@pytest.fixture
def rng():
    return np.random.default_rng(20190101)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
