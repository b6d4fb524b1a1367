"""Time grids, Hamiltonian containers and finite-difference stencils."""

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from ._validation import check_hermitian


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_start, t_start + h, ..., t_end`` with ``n_steps`` intervals."""

    t_end: float
    n_steps: int
    t_start: float = 0.0

    def __post_init__(self):
        if int(self.n_steps) != self.n_steps or self.n_steps < 2:
            raise ValueError(f"n_steps must be an integer >= 2, got {self.n_steps}")
        if not self.t_end > self.t_start:
            raise ValueError(f"t_end ({self.t_end}) must exceed t_start ({self.t_start})")
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @property
    def h(self):
        return (self.t_end - self.t_start) / self.n_steps

    @property
    def times(self):
        return self.t_start + self.h * np.arange(self.n_steps + 1)

    def __len__(self):
        return self.n_steps + 1

    def refined(self, factor=2):
        return TimeGrid(self.t_end, self.n_steps * factor, self.t_start)


@dataclass(frozen=True)
class HamiltonianSpec:
    """A time-dependent Hermitian matrix ``H(t)`` with an optional analytic derivative.

    When ``derivative`` is missing, ``hdot`` falls back to a centred finite
    difference using the same stencil family as the eigenvector derivatives.
    """

    matrix: Callable[[float], np.ndarray]
    dim: int
    derivative: Optional[Callable[[float], np.ndarray]] = None
    name: str = "custom"

    def __call__(self, t):
        return np.asarray(self.matrix(t), dtype=complex)

    def checked(self, t):
        return check_hermitian(self(t))

    def hdot(self, t, step=1e-4, stencil=5):
        if self.derivative is not None:
            return np.asarray(self.derivative(t), dtype=complex)
        offsets = np.arange(stencil) - stencil // 2
        weights = fd_weights(tuple(offsets))
        return sum(w * self(t + s * step) for s, w in zip(offsets, weights) if w != 0.0) / step

    @classmethod
    def constant(cls, H, name="static"):
        H = check_hermitian(H)
        zero = np.zeros_like(H)
        return cls(lambda t: H, H.shape[0], lambda t: zero, name)


@lru_cache(maxsize=None)
def fd_weights(offsets):
    """First-derivative weights for samples at integer ``offsets`` (unit spacing).

    Exact for polynomials of degree ``len(offsets) - 1``.
    """
    s = np.asarray(offsets, dtype=float)
    n = len(s)
    A = np.vander(s, n, increasing=True).T
    rhs = np.zeros(n)
    rhs[1] = 1.0
    w = np.linalg.solve(A, rhs)
    w[np.abs(w) < 1e-14] = 0.0
    return tuple(w)


def fd_derivative(samples, h, stencil=5):
    """Derivative along axis 0 of uniformly sampled data.

    Interior points use the centred ``stencil``-point rule; the first and last
    ``stencil // 2`` points use one-sided rules of the same order.
    """
    if stencil < 3 or stencil % 2 == 0:
        raise ValueError(f"stencil must be an odd integer >= 3, got {stencil}")
    y = np.asarray(samples)
    n = y.shape[0]
    if n < stencil:
        raise ValueError(f"need at least {stencil} samples for a {stencil}-point stencil, got {n}")
    half = stencil // 2
    out = np.empty_like(y, dtype=np.result_type(y.dtype, float))
    centred = fd_weights(tuple(range(-half, half + 1)))
    interior = np.zeros_like(y[half:n - half], dtype=out.dtype)
    for s, w in zip(range(-half, half + 1), centred):
        if w != 0.0:
            interior = interior + w * y[half + s:n - half + s]
    out[half:n - half] = interior
    for k in range(half):
        left = fd_weights(tuple(range(-k, stencil - k)))
        out[k] = sum(w * y[k + s] for s, w in zip(range(-k, stencil - k), left))
        right = fd_weights(tuple(range(-(stencil - 1 - k), k + 1)))
        kk = n - 1 - k
        out[kk] = sum(w * y[kk + s] for s, w in zip(range(-(stencil - 1 - k), k + 1), right))
    return out / h


def interpolated_hamiltonian(times, matrices, name="matrix-file"):
    """Piecewise-linear interpolation of sampled Hermitian matrices.

    Outside the sampled range the end matrices are held constant.
    """
    times = np.asarray(times, dtype=float)
    matrices = np.array([check_hermitian(M) for M in np.asarray(matrices, dtype=complex)])
    if len(times) == 1:
        return HamiltonianSpec.constant(matrices[0], name)
    slopes = np.diff(matrices, axis=0) / np.diff(times)[:, None, None]

    def locate(t):
        return int(np.clip(np.searchsorted(times, t, side="right") - 1, 0, len(times) - 2))

    def matrix(t):
        if t <= times[0]:
            return matrices[0]
        if t >= times[-1]:
            return matrices[-1]
        i = locate(t)
        return matrices[i] + (t - times[i]) * slopes[i]

    def derivative(t):
        if t < times[0] or t > times[-1]:
            return np.zeros_like(matrices[0])
        return slopes[locate(t)]

    return HamiltonianSpec(matrix, matrices.shape[1], derivative, name)
