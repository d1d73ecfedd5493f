import numpy as np
import pytest

from skewcheck.jets import PolyMap, SymMultiMap


def curve(n_out, linear, quadratic=None, cubic=None):
    """Curve R -> R^n_out from its first three derivatives at 0."""
    parts = [SymMultiMap.from_dict(1, 1, n_out, {(0,): linear})]
    for k, v in ((2, quadratic), (3, cubic)):
        if v is not None:
            while len(parts) < k - 1:
                parts.append(SymMultiMap.zero(len(parts) + 1, 1, n_out))
            parts.append(SymMultiMap.from_dict(k, 1, n_out, {(0,) * k: v}))
    return PolyMap(1, n_out, np.zeros(n_out), parts)


@pytest.fixture
def twisted_cubic():
    """``x -> (x, x^3/6, x^2/2)``."""
    return curve(3, [1, 0, 0], [0, 0, 1], [0, 1, 0])


@pytest.fixture
def planar_curve():
    """``t -> (t, t^2, 0)``."""
    return curve(3, [1, 0, 0], [0, 2, 0])


@pytest.fixture
def parallel_curve():
    """``t -> (t, t^3, 0)``: equal tangent directions at -1 and 1."""
    return curve(3, [1, 0, 0], None, [0, 6, 0])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion for the summary."""
    def record(number, ok, detail):
        ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'} criterion {number:>2}: {detail}")
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
