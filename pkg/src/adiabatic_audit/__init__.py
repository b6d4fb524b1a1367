"""Quantitative audit of the adiabatic approximation.

Evolves states under time-dependent linear and gauge-invariant nonlinear
Hamiltonians, decomposes the trajectory over the snapshot eigenbasis and
evaluates adiabaticity criteria against closed-form oracles.
"""

from .core import HamiltonianSpec, TimeGrid, interpolated_hamiltonian
from .criteria import CRITERIA, DEFAULT_MARGIN, CriterionReport, evaluate, sufficiency_audit
from .estimator import AdiabaticityAuditor, NonlinearAdiabaticityAuditor
from .evolution import integrate_schrodinger, run_adiabatic
from .exceptions import (
    AdiabaticAuditError,
    BoundViolationError,
    ConvergenceError,
    GaugeInconsistencyError,
    IntegrationAccuracyError,
    NoBracketError,
    NonHermitianError,
    NonOrthogonalBasisError,
    TrackingLostError,
)
from .models import SpinModelParams, spin_spec
from .nonlinear import NonlinearHamiltonianSpec, run_nonlinear, two_mode_model
from .spectral import track_spectrum

__version__ = "0.1.0"

__all__ = [
    "AdiabaticAuditError",
    "AdiabaticityAuditor",
    "BoundViolationError",
    "CRITERIA",
    "ConvergenceError",
    "CriterionReport",
    "DEFAULT_MARGIN",
    "GaugeInconsistencyError",
    "HamiltonianSpec",
    "IntegrationAccuracyError",
    "NoBracketError",
    "NonHermitianError",
    "NonOrthogonalBasisError",
    "NonlinearAdiabaticityAuditor",
    "NonlinearHamiltonianSpec",
    "SpinModelParams",
    "TimeGrid",
    "TrackingLostError",
    "evaluate",
    "integrate_schrodinger",
    "interpolated_hamiltonian",
    "run_adiabatic",
    "run_nonlinear",
    "spin_spec",
    "sufficiency_audit",
    "track_spectrum",
    "two_mode_model",
]
