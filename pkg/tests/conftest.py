import numpy as np
import pytest

from soomp.dictionary import Dictionary, Family


def random_dictionary(rng, n, m):
    raw = rng.standard_normal((m, n))
    return Dictionary(raw / np.linalg.norm(raw, axis=1, keepdims=True), Family.UNION)


def projection(atoms, signals):
    """Least-squares projection of each signal row onto span(atoms rows)."""
    if len(atoms) == 0:
        return np.zeros_like(signals)
    coef, *_ = np.linalg.lstsq(atoms.T, signals.T, rcond=None)
    return (atoms.T @ coef).T


def weighted_error(atoms, signals, weights):
    r = signals - projection(atoms, signals)
    return float(weights @ np.sum(r * r, axis=1))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
