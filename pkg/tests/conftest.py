import numpy as np
import pytest

from mrpdesign.moments import estimate_moments

_ACCEPTANCE_LINES = []


def random_var_series(rng, n, T=400, radius=0.7):
    """Stable VAR(1) sample path; returns a (T, n) array."""
    a = rng.standard_normal((n, n))
    a *= radius / max(abs(np.linalg.eigvals(a)))
    x = np.zeros((T, n))
    eps = rng.standard_normal((T, n))
    for t in range(1, T):
        x[t] = a @ x[t - 1] + eps[t]
    return x


def random_moments(rng, n, p=3, T=400):
    return estimate_moments(random_var_series(rng, n, T), p)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def record_acceptance():
    """Collect one PASS/FAIL line per acceptance criterion for the terminal summary."""

    def record(number, passed, detail):
        line = f"ACCEPTANCE {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        print(line)
        _ACCEPTANCE_LINES.append(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
