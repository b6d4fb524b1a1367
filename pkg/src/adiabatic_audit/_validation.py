"""Input validation helpers shared by the numerical modules."""

import numpy as np

from .exceptions import NonHermitianError

HERMITIAN_TOL = 1e-12


def check_square(H, name="H"):
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1] or H.shape[0] == 0:
        raise ValueError(f"{name} must be a non-empty square matrix, got shape {H.shape}")
    return H


def hermitian_asymmetry(H):
    """Relative Frobenius norm of ``H - H^dagger``."""
    scale = np.linalg.norm(H)
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(H - H.conj().T) / scale)


def check_hermitian(H, tol=HERMITIAN_TOL, name="H"):
    """Return ``H`` symmetrized, raising :class:`NonHermitianError` beyond ``tol``."""
    H = check_square(H, name)
    asym = hermitian_asymmetry(H)
    if asym > tol:
        raise NonHermitianError(asym, tol)
    return 0.5 * (H + H.conj().T)


def check_state(psi, dim=None, tol=1e-10, name="psi0"):
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    if dim is not None and psi.shape[0] != dim:
        raise ValueError(f"{name} has length {psi.shape[0]}, expected {dim}")
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > tol:
        raise ValueError(f"{name} must be normalized, got norm {norm:.12g}")
    return psi


def check_level(j, dim):
    j = int(j)
    if not 0 <= j < dim:
        raise ValueError(f"level {j} out of range for dimension {dim}")
    return j


def check_margin(margin):
    margin = float(margin)
    if not margin > 0:
        raise ValueError(f"margin must be positive, got {margin}")
    return margin
