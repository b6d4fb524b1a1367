import numpy as np
import pytest

from adiabatic_audit.core import HamiltonianSpec
from adiabatic_audit.models import SpinModelParams, spin_spec

ORACLE_SETS = [(0.01, 1.0, 5.0), (1.0, 1.0, 0.05), (0.1, 1.0, np.pi / 0.1)]


def random_hermitian(rng, dim, scale=1.0):
    A = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return scale * (A + A.conj().T) / 2


def gapped_four_level(seed=7):
    """Smooth 4-level Hamiltonian with well separated diagonal levels."""
    rng = np.random.default_rng(seed)
    base = np.diag([-3.0, -1.0, 1.0, 3.0]).astype(complex)
    B, C = random_hermitian(rng, 4, 0.2), random_hermitian(rng, 4, 0.2)
    dB = lambda t: -np.sin(t) * B + 2 * np.cos(2 * t) * C
    return HamiltonianSpec(lambda t: base + np.cos(t) * B + np.sin(2 * t) * C, 4, dB, "random-4")


def crossing_three_level(tau):
    """Level |2> is decoupled, so it crosses the {|1>, |3>} branch exactly."""
    def H(t):
        s = t - tau / 2
        c = 0.3 * np.sin(t)
        return np.array([[s, 0, c], [0, -s, 0], [c, 0, 2.0]], dtype=complex)

    def dH(t):
        c = 0.3 * np.cos(t)
        return np.array([[1, 0, c], [0, -1, 0], [c, 0, 0]], dtype=complex)

    return HamiltonianSpec(H, 3, dH, "crossing-3")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def slow_spin():
    p = SpinModelParams.starting_in(0, 0.01, 1.0, 5.0)
    return p, spin_spec(p)


ACCEPTANCE_LINES = []


def record(name, passed, detail):
    """Log one acceptance verdict line and return ``passed``."""
    line = f"{name}: {'PASS' if passed else 'FAIL'} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
