"""Schrödinger integration and the adiabatic decomposition of its solution.

The evolved state is expanded as ``psi(t) = sum_n a_n(t) exp(i chi_n(t)) psi_n(t)``
over the tracked snapshot basis, with ``chi_n`` the sum of the dynamic and
geometric phases.  All time integrals use the trapezoidal rule on the
integration grid.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from ._validation import check_level, check_state
from .core import HamiltonianSpec, TimeGrid
from .exceptions import GaugeInconsistencyError, IntegrationAccuracyError, NonOrthogonalBasisError
from .spectral import SpectralTrajectory, track_spectrum

__all__ = [
    "TimeGrid",
    "HamiltonianSpec",
    "WaveState",
    "Evolution",
    "PhaseTrajectory",
    "AdiabaticDistanceSeries",
    "AdiabaticRun",
    "integrate_schrodinger",
    "dynamic_phase",
    "geometric_phase",
    "phases_for",
    "project_coefficients",
    "adiabatic_reference",
    "adiabatic_distance",
    "coefficient_rates",
    "deficiency_from_transitions",
    "run_adiabatic",
]

DRIFT_WARN = 1e-8
DRIFT_MAX = 1e-6
METHODS = ("rk4", "midpoint-exp")


@dataclass(frozen=True)
class WaveState:
    t: float
    amplitudes: np.ndarray


@dataclass(frozen=True)
class Evolution:
    grid: TimeGrid
    states: np.ndarray
    norm_drift: float
    method: str

    def __len__(self):
        return self.states.shape[0]

    def __iter__(self):
        for t, psi in zip(self.grid.times, self.states):
            yield WaveState(float(t), psi)


def _rk4(hamiltonian, psi0, times, h):
    out = np.empty((len(times), psi0.shape[0]), dtype=complex)
    out[0] = psi = psi0
    for k, t in enumerate(times[:-1]):
        H0 = hamiltonian(t)
        Hm = hamiltonian(t + 0.5 * h)
        H1 = hamiltonian(t + h)
        k1 = -1j * (H0 @ psi)
        k2 = -1j * (Hm @ (psi + 0.5 * h * k1))
        k3 = -1j * (Hm @ (psi + 0.5 * h * k2))
        k4 = -1j * (H1 @ (psi + h * k3))
        psi = psi + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[k + 1] = psi
    return out


def hermitian_propagator(H, dt):
    """``exp(-i dt H)`` for Hermitian ``H`` via its eigendecomposition."""
    w, V = np.linalg.eigh(0.5 * (H + H.conj().T))
    return (V * np.exp(-1j * dt * w)) @ V.conj().T


def _midpoint_exp(hamiltonian, psi0, times, h):
    out = np.empty((len(times), psi0.shape[0]), dtype=complex)
    out[0] = psi = psi0
    for k, t in enumerate(times[:-1]):
        psi = hermitian_propagator(hamiltonian(t + 0.5 * h), h) @ psi
        out[k + 1] = psi
    return out


def check_drift(states, max_drift=DRIFT_MAX):
    drift = float(np.max(np.abs(np.linalg.norm(states, axis=1) - 1.0)))
    if drift > max_drift:
        raise IntegrationAccuracyError(drift, max_drift)
    if drift > DRIFT_WARN:
        warnings.warn(f"norm drift {drift:.2e} above {DRIFT_WARN:.0e}; consider refining the grid",
                      RuntimeWarning, stacklevel=3)
    return drift


def integrate_schrodinger(hamiltonian, psi0, grid, method="rk4", max_drift=DRIFT_MAX):
    """Fixed-step solution of ``i dpsi/dt = H(t) psi`` on ``grid``.

    ``method`` is ``"rk4"`` (classical fourth-order Runge-Kutta) or
    ``"midpoint-exp"`` (``exp(-i h H(t + h/2))`` per step).  The state is never
    renormalized; the norm drift is returned as a quality measure.
    """
    psi0 = check_state(psi0, hamiltonian.dim)
    if method == "rk4":
        states = _rk4(hamiltonian, psi0, grid.times, grid.h)
    elif method == "midpoint-exp":
        states = _midpoint_exp(hamiltonian, psi0, grid.times, grid.h)
    else:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    return Evolution(grid, states, check_drift(states, max_drift), method)


@dataclass(frozen=True)
class PhaseTrajectory:
    dynamic: np.ndarray
    geometric: np.ndarray
    imaginary_residue: float = 0.0

    @property
    def total(self):
        return self.dynamic + self.geometric


def dynamic_phase(energies, grid):
    """``delta_n(t) = -int_0^t E_n``, shape ``(n_times, dim)``."""
    energies = np.asarray(energies, dtype=float)
    return -cumulative_trapezoid(energies, dx=grid.h, axis=0, initial=0.0)


def geometric_phase(diagonal_overlaps, grid, tol=1e-8):
    """``zeta_n(t) = i int_0^t <psi_n|dpsi_n/dt>``.

    The overlaps must be purely imaginary; a real part above ``tol`` raises
    :class:`GaugeInconsistencyError`.
    """
    diag = np.asarray(diagonal_overlaps, dtype=complex)
    residue = float(np.max(np.abs(diag.real))) if diag.size else 0.0
    if residue > tol:
        raise GaugeInconsistencyError(residue, tol)
    return cumulative_trapezoid(-diag.imag, dx=grid.h, axis=0, initial=0.0), residue


def phases_for(spectral):
    diag = np.einsum("kii->ki", spectral.overlap_derivatives)
    zeta, residue = geometric_phase(diag, spectral.grid)
    return PhaseTrajectory(dynamic_phase(spectral.energies, spectral.grid), zeta, residue)


def project_coefficients(states, vectors, phases, tol=1e-6):
    """``a_n(t) = exp(-i chi_n) <psi_n|psi>`` for an orthonormal basis."""
    vectors = np.asarray(vectors)
    gram = np.einsum("kim,kin->kmn", vectors.conj(), vectors)
    deviation = float(np.max(np.abs(gram - np.eye(vectors.shape[-1]))))
    if deviation > tol:
        raise NonOrthogonalBasisError(deviation, tol)
    overlaps = np.einsum("kin,ki->kn", vectors.conj(), np.asarray(states))
    return np.exp(-1j * phases.total) * overlaps


def adiabatic_reference(j, coefficients, phases, vectors):
    """``a_j exp(i chi_j) psi_j`` on every step (norm ``|a_j|``)."""
    weights = coefficients[:, j] * np.exp(1j * phases.total[:, j])
    return weights[:, None] * np.asarray(vectors)[:, :, j]


@dataclass(frozen=True)
class AdiabaticDistanceSeries:
    distance: np.ndarray
    deficiency: np.ndarray
    identity_residual: float

    @property
    def max_distance(self):
        return float(self.distance.max())


def adiabatic_distance(states, reference, coefficients, j):
    """``||psi - psi_ref||`` and ``1 - |a_j|^2`` with the residual of their identity."""
    distance = np.linalg.norm(np.asarray(states) - reference, axis=1)
    deficiency = 1.0 - np.abs(coefficients[:, j]) ** 2
    residual = float(np.max(np.abs(distance ** 2 - deficiency)))
    return AdiabaticDistanceSeries(distance, deficiency, residual)


def coefficient_rates(coefficients, overlap_derivatives, phases):
    """Right-hand side of the coefficient equation of motion.

    ``da_m/dt = -sum_{n != m} a_n <psi_m|dpsi_n/dt> exp(-i (chi_m - chi_n))``
    """
    chi = phases.total
    D = overlap_derivatives.copy()
    idx = np.arange(D.shape[1])
    D[:, idx, idx] = 0.0
    rel = np.exp(-1j * (chi[:, :, None] - chi[:, None, :]))
    return -np.einsum("kmn,kn->km", D * rel, coefficients)


def deficiency_from_transitions(coefficients, overlap_derivatives, phases, j, grid):
    """``1 - |a_j(t)|^2`` rebuilt from the integrated transition amplitudes."""
    chi = phases.total
    a = coefficients
    others = [n for n in range(a.shape[1]) if n != j]
    integrand = np.zeros(a.shape[0], dtype=complex)
    for n in others:
        integrand += (a[:, j].conj() * a[:, n] * overlap_derivatives[:, j, n]
                      * np.exp(-1j * (chi[:, j] - chi[:, n])))
    return 2.0 * np.real(cumulative_trapezoid(integrand, dx=grid.h, initial=0.0))


@dataclass(frozen=True)
class AdiabaticRun:
    """Everything computed for one trajectory started in level ``level``."""

    level: int
    spectral: SpectralTrajectory
    evolution: Evolution
    phases: PhaseTrajectory
    coefficients: np.ndarray
    distance: AdiabaticDistanceSeries

    @property
    def grid(self):
        return self.spectral.grid

    @property
    def reference(self):
        return adiabatic_reference(self.level, self.coefficients, self.phases, self.spectral.vectors)


def run_adiabatic(hamiltonian, grid, level=0, psi0=None, method="rk4", stencil=5, spectral=None):
    """Integrate from ``psi_level(0)`` (or ``psi0``) and decompose the result."""
    if spectral is None:
        spectral = track_spectrum(hamiltonian, grid, stencil)
    level = check_level(level, spectral.dim)
    if psi0 is None:
        psi0 = spectral.vectors[0][:, level]
    evolution = integrate_schrodinger(hamiltonian, psi0, grid, method)
    phases = phases_for(spectral)
    coeffs = project_coefficients(evolution.states, spectral.vectors, phases)
    reference = adiabatic_reference(level, coeffs, phases, spectral.vectors)
    distance = adiabatic_distance(evolution.states, reference, coeffs, level)
    return AdiabaticRun(level, spectral, evolution, phases, coeffs, distance)
