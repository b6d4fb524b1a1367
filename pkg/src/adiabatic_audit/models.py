"""Spin-1/2 in a magnetic field rotating in the x-y plane.

``H(t) = -(omega0/2) (cos(omega t) sigma_x + sin(omega t) sigma_y)``, with
Larmor frequency ``omega0`` and drive frequency ``omega`` (hbar = 1).  Every
quantity here is closed form and serves as the oracle for the generic
integrator and criteria.
"""

from dataclasses import dataclass

import numpy as np

from .core import HamiltonianSpec

SQRT2 = np.sqrt(2.0)
REGIMES = ("slow_51", "fast_52", "neither")


@dataclass(frozen=True)
class SpinModelParams:
    omega: float
    omega0: float
    tau: float = 1.0
    c1: complex = 1 / SQRT2
    c2: complex = 1 / SQRT2

    def __post_init__(self):
        if self.omega < 0:
            raise ValueError(f"omega must be >= 0, got {self.omega}")
        if not self.omega0 > 0:
            raise ValueError(f"omega0 must be > 0, got {self.omega0}")
        if not self.tau > 0:
            raise ValueError(f"tau must be > 0, got {self.tau}")
        norm = abs(self.c1) ** 2 + abs(self.c2) ** 2
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"|c1|^2 + |c2|^2 must be 1, got {norm!r}")

    @classmethod
    def starting_in(cls, level, omega, omega0, tau=1.0):
        """Initial state equal to the snapshot eigenvector ``psi_1(0)`` (level 0) or ``psi_2(0)`` (level 1)."""
        sign = {0: 1.0, 1: -1.0}[level]
        return cls(omega, omega0, tau, 1 / SQRT2, sign / SQRT2)

    @property
    def rabi_frequency(self):
        return rabi_frequency(self.omega, self.omega0)

    @property
    def initial_state(self):
        return np.array([self.c1, self.c2], dtype=complex)


def rabi_frequency(omega, omega0):
    return float(np.hypot(omega, omega0))


def spin_hamiltonian(params, t):
    off = -0.5 * params.omega0 * np.exp(-1j * params.omega * t)
    return np.array([[0.0, off], [np.conj(off), 0.0]], dtype=complex)


def spin_hamiltonian_derivative(params, t):
    off = 0.5j * params.omega * params.omega0 * np.exp(-1j * params.omega * t)
    return np.array([[0.0, off], [np.conj(off), 0.0]], dtype=complex)


def spin_spec(params):
    return HamiltonianSpec(
        lambda t: spin_hamiltonian(params, t),
        2,
        lambda t: spin_hamiltonian_derivative(params, t),
        name="spin-rotating-field",
    )


def snapshot_energies(params):
    return np.array([-0.5 * params.omega0, 0.5 * params.omega0])


def snapshot_eigenvectors(params, t):
    """Columns ``psi_1(t) = (1, e^{i omega t})/sqrt2`` and ``psi_2(t) = (1, -e^{i omega t})/sqrt2``."""
    t = np.asarray(t, dtype=float)
    phase = np.exp(1j * params.omega * t)
    one = np.ones_like(phase)
    return np.stack([np.stack([one, phase], -1), np.stack([one, -phase], -1)], -1) / SQRT2


def snapshot_eigenvector_derivatives(params, t):
    t = np.asarray(t, dtype=float)
    dphase = 1j * params.omega * np.exp(1j * params.omega * t)
    zero = np.zeros_like(dphase)
    return np.stack([np.stack([zero, dphase], -1), np.stack([zero, -dphase], -1)], -1) / SQRT2


def exact_evolution(params, t):
    """Lab-frame amplitudes ``(b1(t), b2(t))`` of the exact solution."""
    t = np.asarray(t, dtype=float)
    w, w0, c1, c2 = params.omega, params.omega0, params.c1, params.c2
    Om = params.rabi_frequency
    cos, sin = np.cos(0.5 * Om * t), np.sin(0.5 * Om * t)
    b1 = (c1 * cos + 1j * (c1 * w + c2 * w0) / Om * sin) * np.exp(-0.5j * w * t)
    b2 = (c2 * cos - 1j * (c2 * w - c1 * w0) / Om * sin) * np.exp(0.5j * w * t)
    return b1, b2


def exact_coefficients(params, t):
    """Snapshot-basis coefficients ``a_n = <psi_n(t)|psi(t)>``.

    Uses the inversion ``(0,1) = e^{-i omega t}(psi_1 - psi_2)/sqrt2``, so
    ``a_{1,2} = (b1 +- e^{-i omega t} b2)/sqrt2`` and ``|a1|^2 + |a2|^2 = 1``.
    """
    b1, b2 = exact_evolution(params, t)
    rot = np.exp(-1j * params.omega * np.asarray(t, dtype=float)) * b2
    return (b1 + rot) / SQRT2, (b1 - rot) / SQRT2


def frozen_basis_coefficients(params, t):
    """Coefficients ``(b1 +- b2)/sqrt2`` of the expansion over the *initial* eigenvectors ``psi_n(0)``."""
    b1, b2 = exact_evolution(params, t)
    return (b1 + b2) / SQRT2, (b1 - b2) / SQRT2


def frozen_basis_transition_probability(params, t, start=0):
    """Closed-form ``|<psi_m(0)|psi(t)>|^2`` for the level opposite to ``start``.

    For ``start=0`` (system prepared in ``psi_1(0)``) this is the population of
    ``psi_2(0)``; for ``start=1`` that of ``psi_1(0)``.  The two cases map into
    each other under ``omega0 -> -omega0``.
    """
    t = np.asarray(t, dtype=float)
    w, w0 = params.omega, params.omega0 if start == 0 else -params.omega0
    Om = params.rabi_frequency
    cos, sin = np.cos(0.5 * Om * t), np.sin(0.5 * Om * t)
    cw, sw = np.cos(w * t), np.sin(w * t)
    plus, minus = (w + w0) / Om, (w - w0) / Om
    first = (1 - cw) * cos - minus * sin * sw
    second = (plus + minus * cw) * sin - cos * sw
    return 0.25 * first ** 2 + 0.25 * second ** 2


def small_angle_approximation(params, t, margin=0.1):
    """``|(omega/Omega) sin(Omega t / 2)|`` and whether ``omega t`` is below ``margin``.

    The value is the exact transition amplitude in the snapshot basis; the
    flag records whether the slow-rotation precondition holds.
    """
    t = np.asarray(t, dtype=float)
    Om = params.rabi_frequency
    value = np.abs(params.omega / Om * np.sin(0.5 * Om * t))
    return value, bool(np.all(params.omega * t < margin))


def regime_classify(params, margin=0.1):
    """``slow_51``: omega << omega0, omega tau << 1, omega0 tau >= 1;
    ``fast_52``: omega >= omega0, omega tau << 1, omega0 tau << 1; else ``neither``."""
    w, w0, tau = params.omega, params.omega0, params.tau
    if not w * tau < margin:
        return "neither"
    if w < margin * w0 and w0 * tau >= 1.0:
        return "slow_51"
    if w >= w0 and w0 * tau < margin:
        return "fast_52"
    return "neither"


def classical_condition_value(params):
    """``|<psi_2|dpsi_1/dt> / E_21| = omega / (2 omega0)``."""
    return params.omega / (2.0 * params.omega0)


def transition_integral_value(params, t):
    """``int_0^t |<psi_1|dpsi_2/dt>| = omega t / 2``."""
    return 0.5 * params.omega * np.asarray(t, dtype=float)
