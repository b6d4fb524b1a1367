"""Gauge-invariant nonlinear Hamiltonians ``H[|psi|, t]``.

The nonlinear eigenproblem ``H[psi_n, t] psi_n = E_n psi_n`` is solved by a
damped self-consistent iteration with overlap-based branch selection.  Its
eigenvectors are not mutually orthogonal, so coefficients are obtained from
the full expansion rather than by projection, and the adiabatic conditions
gain a non-orthogonality term and a term built from ``H(t) - E_n(t)``.
"""

import warnings
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
from scipy.integrate import cumulative_trapezoid

from ._validation import check_hermitian, check_level, check_state
from .core import TimeGrid, fd_derivative
from .criteria import DEFAULT_MARGIN, _report
from .evolution import (
    AdiabaticDistanceSeries,
    Evolution,
    PhaseTrajectory,
    check_drift,
    dynamic_phase,
    hermitian_propagator,
)
from .exceptions import BoundViolationError, ConvergenceError, TrackingLostError
from .models import SpinModelParams, spin_hamiltonian
from .spectral import TRACKING_MIN_OVERLAP, eigendecompose

RESIDUAL_TOL = 1e-9
MAX_ITER = 500
FOCK_TOL = 1e-8


@dataclass(frozen=True)
class NonlinearHamiltonianSpec:
    """``H[|psi|, t] = linear(t) + g * interaction(|psi|, t)``.

    ``interaction`` receives only the moduli of the amplitudes, which makes
    the Hamiltonian invariant under ``psi -> exp(i alpha) psi`` by
    construction.
    """

    dim: int
    linear: Callable[[float], np.ndarray]
    interaction: Callable[[np.ndarray, float], np.ndarray]
    nonlinearity_strength: float = 0.0
    name: str = "custom"

    @property
    def g(self):
        return self.nonlinearity_strength

    def evaluate(self, moduli, t):
        H = np.asarray(self.linear(t), dtype=complex)
        if self.g != 0.0:
            H = H + self.g * np.asarray(self.interaction(np.asarray(moduli, dtype=float), t))
        return H

    def matrix(self, psi, t):
        return self.evaluate(np.abs(psi), t)

    def with_strength(self, g):
        return replace(self, nonlinearity_strength=float(g))


def two_mode_model(g, omega=0.1, omega0=1.0, detuning=0.0):
    """Rotating-field spin plus a mean-field term ``g diag(|psi_1|^2, |psi_2|^2)``.

    ``detuning`` adds ``-(detuning/2) sigma_z`` and breaks the equal-population
    symmetry of the snapshot eigenvectors; at ``detuning=0, g=0`` the matrix
    is exactly the rotating-field spin Hamiltonian.
    """
    params = SpinModelParams(omega, omega0)
    bias = np.diag([-0.5 * detuning, 0.5 * detuning]).astype(complex)

    def linear(t):
        return spin_hamiltonian(params, t) + bias

    def interaction(moduli, t):
        return np.diag(moduli ** 2).astype(complex)

    return NonlinearHamiltonianSpec(2, linear, interaction, float(g), "two-mode-nonlinear")


@dataclass(frozen=True)
class NonlinearEigenstate:
    t: float
    level: int
    energy: float
    vector: np.ndarray
    residual: float
    iterations: int


def _residual(spec, phi, t):
    H = spec.matrix(phi, t)
    Hphi = H @ phi
    E = float(np.real(np.vdot(phi, Hphi)))
    return E, float(np.linalg.norm(Hphi - E * phi)), H


def solve_nonlinear_eigenstate(spec, t, seed, level=0, damping=0.5, tol=RESIDUAL_TOL, max_iter=MAX_ITER):
    """Self-consistent solution continuing from ``seed``.

    Each iteration diagonalizes ``H[|phi|, t]``, picks the eigenvector with the
    largest overlap with the current iterate and mixes it in with weight
    ``damping``.
    """
    if not 0.0 < damping <= 1.0:
        raise ValueError(f"damping must lie in (0, 1], got {damping}")
    phi = np.asarray(seed, dtype=complex)
    phi = phi / np.linalg.norm(phi)
    check_hermitian(spec.matrix(phi, t))
    E, res, H = _residual(spec, phi, t)
    if spec.g == 0.0:
        damping = 1.0  # linear eigenproblem: one diagonalization is exact
    it = 0
    while res > tol:
        if it >= max_iter:
            raise ConvergenceError(res, it)
        _, V = np.linalg.eigh(H)
        overlaps = V.conj().T @ phi
        k = int(np.argmax(np.abs(overlaps)))
        picked = V[:, k] * (overlaps[k] / abs(overlaps[k]))
        phi = (1.0 - damping) * phi + damping * picked
        phi = phi / np.linalg.norm(phi)
        E, res, H = _residual(spec, phi, t)
        it += 1
    return NonlinearEigenstate(float(t), level, E, phi, res, it)


@dataclass(frozen=True)
class NonlinearBranches:
    """Eigen-branches on a grid; ``vectors[k, :, n]`` is branch ``n`` at ``t_k``."""

    grid: TimeGrid
    energies: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    iterations: np.ndarray
    gauge_phases: Optional[np.ndarray] = None

    @property
    def n_branches(self):
        return self.energies.shape[1]

    @property
    def times(self):
        return self.grid.times

    def overlaps(self):
        """``G[k, m, n] = <psi_m(t_k)|psi_n(t_k)>``."""
        return np.einsum("kim,kin->kmn", self.vectors.conj(), self.vectors)

    def derivative_overlaps(self, stencil=5):
        """``<psi_m|dpsi_n/dt>`` by finite differences in the current gauge."""
        dvec = fd_derivative(self.vectors, self.grid.h, stencil)
        return np.einsum("kim,kin->kmn", self.vectors.conj(), dvec)


def solve_branches(spec, grid, seeds=None, levels=None, damping=0.5, g_steps=1, tol=1e-11):
    """Continue nonlinear eigen-branches along ``grid``.

    Branches are labelled by the linear (``g = 0``) eigenvectors at the first
    time; ``g_steps > 1`` ramps ``g`` from zero in that many stages first.
    """
    times = grid.times
    if seeds is None:
        seeds = eigendecompose(spec.linear(times[0]), times[0]).eigenvectors
    seeds = np.asarray(seeds, dtype=complex)
    levels = list(range(seeds.shape[1])) if levels is None else list(levels)
    current = [seeds[:, n] for n in levels]
    for s in np.linspace(0.0, 1.0, g_steps + 1)[1:]:
        staged = spec.with_strength(spec.g * s)
        current = [solve_nonlinear_eigenstate(staged, times[0], v, n, damping, tol).vector
                   for v, n in zip(current, levels)]
    K, nb = len(times), len(levels)
    energies = np.empty((K, nb))
    vectors = np.empty((K, spec.dim, nb), dtype=complex)
    residuals = np.empty((K, nb))
    iterations = np.empty((K, nb), dtype=int)
    previous = [None] * nb
    for k, t in enumerate(times):
        for i, n in enumerate(levels):
            seed = current[i]
            if previous[i] is not None:
                # linear extrapolation in t after removing the relative phase
                back = previous[i] * np.exp(1j * np.angle(np.vdot(previous[i], seed)))
                seed = 2.0 * seed - back
            state = solve_nonlinear_eigenstate(spec, t, seed, n, damping, tol)
            if k:
                ov = abs(np.vdot(current[i], state.vector))
                if ov <= TRACKING_MIN_OVERLAP:
                    raise TrackingLostError(n, ov, t)
            previous[i], current[i] = current[i] if k else None, state.vector
            energies[k, i] = state.energy
            vectors[k, :, i] = state.vector
            residuals[k, i] = state.residual
            iterations[k, i] = state.iterations
    return NonlinearBranches(grid, energies, vectors, residuals, iterations)


def fock_gauge_calibrate(branches, stencil=5, tol=FOCK_TOL, max_sweeps=20):
    """Re-phase every branch so that ``<psi_n|dpsi_n/dt> = 0``.

    Successive overlaps are first made real positive; the residual connection
    left by the finite-difference estimate is then integrated out until its
    modulus is below ``tol``.  The applied phases are stored in
    ``gauge_phases``.
    """
    V = branches.vectors.copy()
    K, _, nb = V.shape
    alpha = np.zeros((K, nb))
    for k in range(1, K):
        ov = np.einsum("in,in->n", V[k - 1].conj(), V[k])
        bad = np.flatnonzero(np.abs(ov) <= TRACKING_MIN_OVERLAP)
        if bad.size:
            raise TrackingLostError(bad[0], abs(ov[bad[0]]), branches.times[k])
        step = -np.angle(ov)
        V[k] *= np.exp(1j * step)[None, :]
        alpha[k] = step
    h = branches.grid.h
    for _ in range(max_sweeps):
        dvec = fd_derivative(V, h, stencil)
        conn = np.einsum("kin,kin->kn", V.conj(), dvec)
        if np.max(np.abs(conn)) <= tol:
            break
        beta = cumulative_trapezoid(-conn.imag, dx=h, axis=0, initial=0.0)
        V *= np.exp(1j * beta)[:, None, :]
        alpha += beta
    return replace(branches, vectors=V, gauge_phases=alpha)


def fock_connection(branches, stencil=5):
    """``|<psi_n|dpsi_n/dt>|`` per step and branch."""
    D = branches.derivative_overlaps(stencil)
    return np.abs(np.einsum("knn->kn", D))


def integrate_nonlinear_schrodinger(spec, psi0, grid, method="rk4", max_drift=1e-6):
    """Solve ``i dpsi/dt = H[|psi|, t] psi`` on ``grid``.

    ``"rk4"`` re-evaluates ``H`` on every stage state; ``"splitting"`` takes a
    half step with the frozen Hamiltonian to predict the midpoint state and
    then applies ``exp(-i h H[psi_mid, t + h/2])``.
    """
    psi = check_state(psi0, spec.dim)
    times, h = grid.times, grid.h
    out = np.empty((len(times), spec.dim), dtype=complex)
    out[0] = psi
    if method == "rk4":
        def f(t, y):
            return -1j * (spec.matrix(y, t) @ y)

        for k, t in enumerate(times[:-1]):
            k1 = f(t, psi)
            k2 = f(t + 0.5 * h, psi + 0.5 * h * k1)
            k3 = f(t + 0.5 * h, psi + 0.5 * h * k2)
            k4 = f(t + h, psi + h * k3)
            psi = psi + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            out[k + 1] = psi
    elif method == "splitting":
        for k, t in enumerate(times[:-1]):
            half = hermitian_propagator(spec.matrix(psi, t), 0.5 * h) @ psi
            psi = hermitian_propagator(spec.matrix(half, t + 0.5 * h), h) @ psi
            out[k + 1] = psi
    else:
        raise ValueError(f"unknown method {method!r}; expected 'rk4' or 'splitting'")
    return Evolution(grid, out, check_drift(out, max_drift), method)


def project_coefficients(states, branches, phases, bound_tol=1e-10):
    """Solve ``psi = sum_n a_n exp(i chi_n) psi_n`` for ``a_n`` in a non-orthogonal basis.

    Coefficients with ``|a_n| > 1 + bound_tol`` are reported with a warning,
    never clipped.
    """
    B = branches.vectors * np.exp(1j * phases.total)[:, None, :]
    a = np.linalg.solve(B, np.asarray(states)[:, :, None])[:, :, 0]
    over = float(np.max(np.abs(a))) - 1.0
    if over > bound_tol:
        warnings.warn(f"|a_n| exceeds 1 by {over:.2e}; solution is outside the expandable class",
                      RuntimeWarning, stacklevel=2)
    return a


def nonlinear_overlap_condition(branches, j, margin=DEFAULT_MARGIN):
    """``sum_{n != j} |<psi_n|psi_j>|`` per step."""
    j = check_level(j, branches.n_branches)
    G = branches.overlaps()
    others = [n for n in range(branches.n_branches) if n != j]
    series = np.abs(G[:, others, j]).sum(axis=1)
    return _report("nonlinear_overlap", branches.times, series, margin, {"gap_required": False})


def nonlinear_derivative_condition(branches, j, margin=DEFAULT_MARGIN, stencil=5):
    """Cumulative ``sum_{n != j} int_0^t |<psi_n|dpsi_j/dt>|`` (Fock-gauge branches)."""
    j = check_level(j, branches.n_branches)
    D = branches.derivative_overlaps(stencil)
    others = [n for n in range(branches.n_branches) if n != j]
    integrand = np.abs(D[:, others, j]).sum(axis=1)
    series = cumulative_trapezoid(integrand, dx=branches.grid.h, initial=0.0)
    return _report("nonlinear_derivative", branches.times, series, margin,
                   {"gap_required": False}, cumulative=True)


def delta_operator(spec, state, energy, t):
    """``H[|state|, t] - energy * I``."""
    return spec.matrix(state, t) - energy * np.eye(spec.dim)


def delta_elements(spec, states, branches, j, hamiltonian_on="state"):
    """``<psi_j|Delta_j|psi_n>`` for all ``n``, shape ``(n_times, n_branches)``.

    ``hamiltonian_on="state"`` builds ``H`` from the evolving state;
    ``"branch"`` uses the eigen-branch ``psi_j`` itself.
    """
    if hamiltonian_on not in ("state", "branch"):
        raise ValueError(f"hamiltonian_on must be 'state' or 'branch', got {hamiltonian_on!r}")
    out = np.empty((len(branches.times), branches.n_branches), dtype=complex)
    for k, t in enumerate(branches.times):
        psi_j = branches.vectors[k, :, j]
        source = states[k] if hamiltonian_on == "state" else psi_j
        Delta = delta_operator(spec, source, branches.energies[k, j], t)
        out[k] = psi_j.conj() @ Delta @ branches.vectors[k]
    return out


def nonlinear_delta_condition(spec, states, branches, j, margin=DEFAULT_MARGIN, hamiltonian_on="state"):
    """Cumulative ``sum_n int_0^t |<psi_j|Delta_j|psi_n>|`` including ``n = j``."""
    j = check_level(j, branches.n_branches)
    integrand = np.abs(delta_elements(spec, states, branches, j, hamiltonian_on)).sum(axis=1)
    series = cumulative_trapezoid(integrand, dx=branches.grid.h, initial=0.0)
    return _report("nonlinear_delta", branches.times, series, margin,
                   {"gap_required": False, "hamiltonian_on": hamiltonian_on}, cumulative=True)


@dataclass(frozen=True)
class Theorem2Audit:
    """Pointwise ``1 - |a_j| <= overlap terms + derivative integral + Delta integral``."""

    lhs: np.ndarray
    rhs: np.ndarray
    min_slack: float
    tightest_t: float
    max_coefficient: float

    def to_dict(self):
        return {"min_slack": self.min_slack, "tightest_t": self.tightest_t,
                "max_coefficient": self.max_coefficient}


def theorem2_bound_audit(branches, coefficients, derivative_report, delta_report, j, tol=1e-8):
    G = branches.overlaps()
    others = [n for n in range(branches.n_branches) if n != j]
    overlap_terms = np.abs(G[:, j, others]).sum(axis=1) + np.abs(G[0, j, others]).sum()
    rhs = overlap_terms + derivative_report.series + delta_report.series
    lhs = 1.0 - np.abs(coefficients[:, j])
    slack = rhs - lhs
    k = int(np.argmin(slack))
    audit = Theorem2Audit(lhs, rhs, float(slack[k]), float(branches.times[k]),
                          float(np.max(np.abs(coefficients))))
    if audit.min_slack < -tol:
        raise BoundViolationError("nonlinear expansion bound", audit.min_slack, audit.tightest_t)
    return audit


@dataclass(frozen=True)
class NonlinearRun:
    level: int
    branches: NonlinearBranches
    evolution: Evolution
    phases: PhaseTrajectory
    coefficients: np.ndarray
    distance: AdiabaticDistanceSeries
    reports: tuple
    audit: Theorem2Audit


def run_nonlinear(spec, grid, level=0, method="rk4", stencil=5, damping=0.5,
                  hamiltonian_on="state", margin=DEFAULT_MARGIN, g_steps=1):
    """Branches, Fock gauge, evolution from ``psi_level(0)``, conditions and bound audit."""
    branches = fock_gauge_calibrate(solve_branches(spec, grid, damping=damping, g_steps=g_steps), stencil)
    level = check_level(level, branches.n_branches)
    evolution = integrate_nonlinear_schrodinger(spec, branches.vectors[0, :, level], grid, method)
    phases = PhaseTrajectory(dynamic_phase(branches.energies, grid), np.zeros_like(branches.energies))
    coeffs = project_coefficients(evolution.states, branches, phases)
    reference = (coeffs[:, level] * np.exp(1j * phases.total[:, level]))[:, None] * branches.vectors[:, :, level]
    d = np.linalg.norm(evolution.states - reference, axis=1)
    deficiency = 1.0 - np.abs(coeffs[:, level]) ** 2
    distance = AdiabaticDistanceSeries(d, deficiency, float(np.max(np.abs(d ** 2 - deficiency))))
    reports = (
        nonlinear_overlap_condition(branches, level, margin),
        nonlinear_derivative_condition(branches, level, margin, stencil),
        nonlinear_delta_condition(spec, evolution.states, branches, level, margin, hamiltonian_on),
    )
    audit = theorem2_bound_audit(branches, coeffs, reports[1], reports[2], level)
    return NonlinearRun(level, branches, evolution, phases, coeffs, distance, reports, audit)
