"""Snapshot eigenbasis of a time-dependent Hermitian matrix.

Eigenvectors are tracked from step to step by maximal overlap (not by energy
order) and their phases are aligned so that successive overlaps are real and
positive.  Degenerate blocks are aligned as a whole by orthogonal Procrustes.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from ._validation import check_hermitian
from .core import TimeGrid, fd_derivative
from .exceptions import TrackingLostError

DEGENERACY_RTOL = 1e-8
TRACKING_MIN_OVERLAP = 0.5


def degeneracy_tolerance(H):
    return DEGENERACY_RTOL * max(1.0, float(np.linalg.norm(H, 2)))


@dataclass(frozen=True)
class SpectralSnapshot:
    t: float
    energies: np.ndarray
    eigenvectors: np.ndarray
    tol: float = DEGENERACY_RTOL

    @property
    def dim(self):
        return self.energies.shape[0]

    @property
    def degenerate_mask(self):
        """``mask[m, n]`` is True when ``|E_m - E_n|`` is below tolerance (diagonal excluded)."""
        gaps = np.abs(self.energies[:, None] - self.energies[None, :])
        mask = gaps < self.tol
        np.fill_diagonal(mask, False)
        return mask

    @property
    def degeneracy_flags(self):
        return np.abs(np.diff(self.energies)) < self.tol


def _canonical_phases(V):
    # first component with at least half the largest modulus is made real positive
    V = V.copy()
    for n in range(V.shape[1]):
        col = V[:, n]
        mags = np.abs(col)
        k = int(np.argmax(mags >= 0.5 * mags.max()))
        V[:, n] = col * (abs(col[k]) / col[k])
    return V


def eigendecompose(H, t=0.0):
    """Eigenpairs of a Hermitian matrix, energies ascending.

    Raises :class:`~adiabatic_audit.exceptions.NonHermitianError` when the
    relative asymmetry exceeds 1e-12.
    """
    H = check_hermitian(H)
    energies, vectors = np.linalg.eigh(H)
    return SpectralSnapshot(float(t), energies, _canonical_phases(vectors), degeneracy_tolerance(H))


def _clusters(energies, tol):
    order = np.argsort(energies, kind="stable")
    groups, current = [], [order[0]]
    for a, b in zip(order[:-1], order[1:]):
        if energies[b] - energies[a] < tol:
            current.append(b)
        else:
            groups.append(current)
            current = [b]
    groups.append(current)
    return groups


def align_phases(prev, curr):
    """Relabel and re-phase ``curr`` to continue the levels of ``prev``.

    Labels follow maximal overlap, so energies of the returned snapshot are in
    ``prev``'s label order.  Within a degenerate block of ``curr`` the columns
    are rotated to best match the corresponding columns of ``prev``.
    """
    if prev.dim != curr.dim:
        raise ValueError(f"dimension mismatch: {prev.dim} vs {curr.dim}")
    P, C = prev.eigenvectors, curr.eigenvectors
    overlap = P.conj().T @ C
    weight = np.abs(overlap) ** 2
    groups = _clusters(curr.energies, curr.tol)
    for g in groups:
        if len(g) > 1:
            block_weight = weight[:, g].sum(axis=1)
            weight[:, g] = block_weight[:, None]
    rows, cols = linear_sum_assignment(-weight)
    label_of_col = np.empty(curr.dim, dtype=int)
    label_of_col[cols] = rows

    V = np.empty_like(C)
    E = np.empty_like(curr.energies)
    for g in groups:
        labels = np.sort(label_of_col[g])
        M = C[:, g].conj().T @ P[:, labels]
        W, s, Zh = np.linalg.svd(M)
        if s.min() <= TRACKING_MIN_OVERLAP:
            worst = labels[int(np.argmin(np.linalg.norm(M, axis=0)))]
            raise TrackingLostError(worst, s.min(), curr.t)
        V[:, labels] = C[:, g] @ (W @ Zh)
        E[labels] = curr.energies[g] if len(g) == 1 else curr.energies[g].mean()
    return SpectralSnapshot(curr.t, E, V, curr.tol)


def overlap_derivatives_fd(vectors, h, stencil=5):
    """Finite-difference estimate of ``D[k, m, n] = <psi_m(t_k)|dpsi_n/dt(t_k)>``.

    ``vectors`` has shape ``(n_times, dim, dim)`` with eigenvectors as columns
    and must already be phase aligned.  The result is projected onto its
    anti-Hermitian part; the returned ``residual`` is the largest Frobenius
    norm of ``(D + D^dagger)/2`` removed by that projection.
    """
    vectors = np.asarray(vectors)
    dvec = fd_derivative(vectors, h, stencil)
    D = np.einsum("kim,kin->kmn", vectors.conj(), dvec)
    sym = 0.5 * (D + np.conj(np.swapaxes(D, 1, 2)))
    residual = float(np.max(np.linalg.norm(sym, axis=(1, 2)))) if len(D) else 0.0
    return D - sym, residual


@dataclass(frozen=True)
class PerturbativeDerivatives:
    """Off-diagonal ``<psi_m|dpsi_n/dt>`` from ``-<psi_m|Hdot|psi_n> / (E_m - E_n)``.

    Degenerate pairs and the (gauge-dependent) diagonal are NaN; ``energy_rates``
    holds ``dE_n/dt = <psi_n|Hdot|psi_n>``.
    """

    D: np.ndarray
    degenerate: np.ndarray
    energy_rates: np.ndarray


def overlap_derivatives_pert(energies, vectors, hdots, tol=None):
    energies = np.asarray(energies, dtype=float)
    vectors = np.asarray(vectors)
    hdots = np.asarray(hdots)
    elements = np.einsum("kim,kij,kjn->kmn", vectors.conj(), hdots, vectors)
    gaps = energies[:, :, None] - energies[:, None, :]
    if tol is None:
        tol = DEGENERACY_RTOL * np.maximum(1.0, np.abs(energies).max(axis=1))[:, None, None]
    degenerate = np.abs(gaps) < tol
    dim = energies.shape[1]
    eye = np.eye(dim, dtype=bool)[None]
    degenerate = degenerate & ~eye
    with np.errstate(divide="ignore", invalid="ignore"):
        D = -elements / gaps
    D[degenerate | np.broadcast_to(eye, D.shape)] = np.nan
    rates = np.real(np.einsum("kii->ki", elements))
    return PerturbativeDerivatives(D, degenerate, rates)


@dataclass(frozen=True)
class SpectralTrajectory:
    """Tracked snapshot eigenbasis on a grid together with ``<psi_m|dpsi_n/dt>``."""

    grid: TimeGrid
    energies: np.ndarray
    vectors: np.ndarray
    overlap_derivatives: np.ndarray
    method_tag: str = "finite-difference"
    antisymmetry_residual: float = 0.0
    tol: np.ndarray = field(default=None, repr=False)

    @property
    def dim(self):
        return self.energies.shape[1]

    @property
    def times(self):
        return self.grid.times

    def snapshot(self, k):
        tol = DEGENERACY_RTOL if self.tol is None else float(self.tol[k])
        return SpectralSnapshot(float(self.times[k]), self.energies[k], self.vectors[k], tol)

    def gaps(self):
        """``|E_m - E_n|`` per step, shape ``(n_times, dim, dim)``."""
        return np.abs(self.energies[:, :, None] - self.energies[:, None, :])

    def degenerate_mask(self):
        tol = DEGENERACY_RTOL if self.tol is None else self.tol[:, None, None]
        mask = self.gaps() < tol
        mask[:, np.arange(self.dim), np.arange(self.dim)] = False
        return mask

    @classmethod
    def from_vectors(cls, grid, energies, vectors, stencil=5, tol=None):
        """Build from a caller-supplied basis (used as given, no re-phasing)."""
        energies = np.asarray(energies, dtype=float)
        vectors = np.asarray(vectors, dtype=complex)
        D, residual = overlap_derivatives_fd(vectors, grid.h, stencil)
        if tol is None:
            tol = DEGENERACY_RTOL * np.maximum(1.0, np.abs(energies).max(axis=1))
        return cls(grid, energies, vectors, D, "finite-difference", residual, np.asarray(tol))


def track_spectrum(hamiltonian, grid, stencil=5, initial_phases=None):
    """Eigendecompose ``hamiltonian`` on every grid point and track the levels.

    ``initial_phases`` (one angle per level) multiplies the first snapshot's
    eigenvectors, i.e. chooses a different global gauge per level.
    """
    times = grid.times
    snap = eigendecompose(hamiltonian(times[0]), times[0])
    if initial_phases is not None:
        snap = SpectralSnapshot(
            snap.t, snap.energies, snap.eigenvectors * np.exp(1j * np.asarray(initial_phases)), snap.tol
        )
    snaps = [snap]
    for t in times[1:]:
        snap = align_phases(snap, eigendecompose(hamiltonian(t), t))
        snaps.append(snap)
    return from_snapshots(grid, snaps, stencil)


def from_snapshots(grid, snapshots, stencil=5):
    energies = np.array([s.energies for s in snapshots])
    vectors = np.array([s.eigenvectors for s in snapshots])
    tol = np.array([s.tol for s in snapshots])
    D, residual = overlap_derivatives_fd(vectors, grid.h, stencil)
    return SpectralTrajectory(grid, energies, vectors, D, "finite-difference", residual, tol)


def retrack(trajectory, stencil=5):
    """Re-align an arbitrary-gauge trajectory (e.g. randomly re-phased vectors)."""
    snaps = [trajectory.snapshot(0)]
    for k in range(1, len(trajectory.grid)):
        snaps.append(align_phases(snaps[-1], trajectory.snapshot(k)))
    return from_snapshots(trajectory.grid, snaps, stencil)


def hamiltonian_derivatives(hamiltonian, grid, stencil=5):
    """``Hdot`` on every grid point (analytic when available)."""
    return np.array([hamiltonian.hdot(t, step=grid.h, stencil=stencil) for t in grid.times])


def perturbative_trajectory(trajectory, hdots):
    return overlap_derivatives_pert(trajectory.energies, trajectory.vectors, hdots,
                                    None if trajectory.tol is None else trajectory.tol[:, None, None])
