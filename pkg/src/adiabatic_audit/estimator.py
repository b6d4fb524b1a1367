"""Estimator-style front end.

``fit`` takes a Hamiltonian and a horizon, runs the evolution, spectral
tracking and criteria, and stores the results in trailing-underscore
attributes.  ``transform`` expands arbitrary states over the fitted snapshot
basis.  Hyper-parameters follow the scikit-learn conventions so that
``get_params``/``set_params``/``clone`` work.
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_margin
from .core import TimeGrid
from .criteria import CRITERIA, DEFAULT_MARGIN, evaluate, sufficiency_audit, yukalov_condition
from .evolution import METHODS, deficiency_from_transitions, project_coefficients, run_adiabatic
from .nonlinear import project_coefficients as project_nonlinear
from .nonlinear import run_nonlinear
from .spectral import hamiltonian_derivatives

LINEAR_DEFAULT_CRITERIA = ("classical_overlap", "classical_hdot", "yukalov_t1",
                           "tong_1", "tong_2", "tong_3", "wei_ying_1")


def _check_params(n_steps, margin, stencil):
    if int(n_steps) != n_steps or n_steps < 2:
        raise ValueError(f"n_steps must be an integer >= 2, got {n_steps}")
    check_margin(margin)
    if stencil < 3 or stencil % 2 == 0:
        raise ValueError(f"stencil must be an odd integer >= 3, got {stencil}")


class AdiabaticityAuditor(BaseEstimator):
    """Evolve from a snapshot eigenstate and evaluate adiabaticity criteria.

    Parameters
    ----------
    level : int
        Initial level ``j`` (0-based).
    n_steps : int
        Number of grid intervals on ``[0, tau]``.
    method : {"rk4", "midpoint-exp"}
        Integrator backend.
    stencil : int
        Finite-difference stencil for eigenvector derivatives.
    margin : float
        Threshold standing in for "much less than one".
    criteria : sequence of str or None
        Criterion ids; ``None`` selects every criterion that needs no extra input.
    wei_ying_constant : float or None
        Bound for ``wei_ying_2``; that criterion is only evaluated when given.
    """

    def __init__(self, level=0, n_steps=1000, method="rk4", stencil=5, margin=DEFAULT_MARGIN,
                 criteria=None, wei_ying_constant=None):
        self.level = level
        self.n_steps = n_steps
        self.method = method
        self.stencil = stencil
        self.margin = margin
        self.criteria = criteria
        self.wei_ying_constant = wei_ying_constant

    def _criteria(self):
        if self.criteria is not None:
            return tuple(self.criteria)
        chosen = LINEAR_DEFAULT_CRITERIA
        if self.wei_ying_constant is not None:
            chosen = chosen + ("wei_ying_2",)
        return chosen

    def fit(self, hamiltonian, tau, psi0=None):
        _check_params(self.n_steps, self.margin, self.stencil)
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        criteria = self._criteria()
        bad = [c for c in criteria if c not in CRITERIA]
        if bad:
            raise ValueError(f"unknown criteria {bad}")
        self.grid_ = TimeGrid(float(tau), int(self.n_steps))
        run = run_adiabatic(hamiltonian, self.grid_, self.level, psi0, self.method, self.stencil)
        self.run_ = run
        self.spectral_ = run.spectral
        self.evolution_ = run.evolution
        self.phases_ = run.phases
        self.coefficients_ = run.coefficients
        self.distance_ = run.distance
        self.hdots_ = hamiltonian_derivatives(hamiltonian, self.grid_, self.stencil)
        reports = evaluate(criteria, run.spectral, run.level, self.hdots_, self.margin,
                           self.wei_ying_constant, real_hamiltonian=self._is_real(hamiltonian))
        self.reports_ = {r.criterion_id: r for r in reports}
        integral = self.reports_.get("yukalov_t1") or yukalov_condition(run.spectral, run.level, self.margin)
        self.audit_ = sufficiency_audit(integral, run.distance)
        self.transition_deficiency_ = deficiency_from_transitions(
            run.coefficients, run.spectral.overlap_derivatives, run.phases, run.level, self.grid_)
        return self

    def _is_real(self, hamiltonian):
        samples = [hamiltonian(t) for t in (self.grid_.t_start, 0.5 * self.grid_.t_end, self.grid_.t_end)]
        return bool(all(np.allclose(M.imag, 0.0) for M in samples))

    def transform(self, states):
        """Coefficients ``a_n`` of ``states`` (one per grid point) in the fitted basis."""
        check_is_fitted(self, "spectral_")
        states = np.asarray(states, dtype=complex)
        if states.shape != self.evolution_.states.shape:
            raise ValueError(f"expected states of shape {self.evolution_.states.shape}, got {states.shape}")
        return project_coefficients(states, self.spectral_.vectors, self.phases_)

    def fit_transform(self, hamiltonian, tau, psi0=None):
        return self.fit(hamiltonian, tau, psi0).coefficients_

    def summary(self):
        check_is_fitted(self, "spectral_")
        verdicts = {
            cid: {"verdict": r.verdict, "final": r.final, "peak": r.peak,
                  "first_violation_t": r.first_violation_t, "margin": r.margin}
            for cid, r in self.reports_.items()
        }
        return {
            "level": int(self.run_.level),
            "tau": float(self.grid_.t_end),
            "n_steps": int(self.grid_.n_steps),
            "method": self.method,
            "max_distance": self.distance_.max_distance,
            "max_deficiency": float(np.max(self.distance_.deficiency)),
            "final_deficiency": float(self.distance_.deficiency[-1]),
            "norm_drift": float(self.evolution_.norm_drift),
            "distance_identity_residual": float(self.distance_.identity_residual),
            "transition_reconstruction_residual": float(
                np.max(np.abs(self.transition_deficiency_ - self.distance_.deficiency))),
            "antisymmetry_residual": float(self.spectral_.antisymmetry_residual),
            "criteria": verdicts,
            "bound_audit": self.audit_.to_dict(),
        }


class NonlinearAdiabaticityAuditor(BaseEstimator):
    """Nonlinear counterpart: branches, Fock gauge, three conditions and the bound audit."""

    def __init__(self, level=0, n_steps=10000, method="rk4", stencil=5, damping=0.5,
                 margin=DEFAULT_MARGIN, hamiltonian_on="state", g_steps=1):
        self.level = level
        self.n_steps = n_steps
        self.method = method
        self.stencil = stencil
        self.damping = damping
        self.margin = margin
        self.hamiltonian_on = hamiltonian_on
        self.g_steps = g_steps

    def fit(self, spec, tau):
        _check_params(self.n_steps, self.margin, self.stencil)
        self.grid_ = TimeGrid(float(tau), int(self.n_steps))
        run = run_nonlinear(spec, self.grid_, self.level, self.method, self.stencil, self.damping,
                            self.hamiltonian_on, self.margin, self.g_steps)
        self.run_ = run
        self.branches_ = run.branches
        self.evolution_ = run.evolution
        self.phases_ = run.phases
        self.coefficients_ = run.coefficients
        self.distance_ = run.distance
        self.reports_ = {r.criterion_id: r for r in run.reports}
        self.audit_ = run.audit
        return self

    def transform(self, states):
        check_is_fitted(self, "branches_")
        return project_nonlinear(np.asarray(states, dtype=complex), self.branches_, self.phases_)

    def summary(self):
        check_is_fitted(self, "branches_")
        return {
            "level": int(self.run_.level),
            "tau": float(self.grid_.t_end),
            "n_steps": int(self.grid_.n_steps),
            "method": self.method,
            "max_distance": self.distance_.max_distance,
            "max_deficiency": float(np.max(self.distance_.deficiency)),
            "final_deficiency": float(self.distance_.deficiency[-1]),
            "norm_drift": float(self.evolution_.norm_drift),
            "max_eigen_residual": float(np.max(self.branches_.residuals)),
            "max_abs_coefficient": float(np.max(np.abs(self.coefficients_))),
            "criteria": {
                cid: {"verdict": r.verdict, "final": r.final, "peak": r.peak,
                      "first_violation_t": r.first_violation_t, "margin": r.margin}
                for cid, r in self.reports_.items()
            },
            "bound_audit": self.audit_.to_dict(),
        }
