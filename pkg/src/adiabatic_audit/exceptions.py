"""Exception types raised by the package."""


class AdiabaticAuditError(Exception):
    """Base class for all package errors."""


class NonHermitianError(AdiabaticAuditError, ValueError):
    def __init__(self, asymmetry, tol):
        self.asymmetry = float(asymmetry)
        self.tol = float(tol)
        super().__init__(
            f"matrix is not Hermitian: relative asymmetry {self.asymmetry:.3e} exceeds {self.tol:.1e}"
        )


class TrackingLostError(AdiabaticAuditError):
    """Consecutive snapshots overlap too weakly to carry a level label across."""

    def __init__(self, level, overlap, t=None):
        self.level = int(level)
        self.overlap = float(overlap)
        self.t = t
        where = "" if t is None else f" at t={t:.6g}"
        super().__init__(
            f"basis tracking lost for level {self.level}{where}: overlap {self.overlap:.3f} < 0.5; "
            "refine the time grid"
        )


class IntegrationAccuracyError(AdiabaticAuditError):
    def __init__(self, drift, limit):
        self.drift = float(drift)
        self.limit = float(limit)
        super().__init__(
            f"norm drift {self.drift:.3e} exceeds {self.limit:.1e}; increase n_steps"
        )


class GaugeInconsistencyError(AdiabaticAuditError):
    def __init__(self, residue, tol):
        self.residue = float(residue)
        super().__init__(
            f"<psi_n|dpsi_n/dt> has real part {self.residue:.3e} > {tol:.1e}; basis is not normalized smoothly"
        )


class NonOrthogonalBasisError(AdiabaticAuditError, ValueError):
    def __init__(self, deviation, tol):
        self.deviation = float(deviation)
        super().__init__(
            f"basis overlap deviates from identity by {self.deviation:.3e} > {tol:.1e}; "
            "use nonlinear.project_coefficients for non-orthogonal bases"
        )


class BoundViolationError(AdiabaticAuditError):
    """An inequality that must hold by construction was broken (integrator or tracking bug)."""

    def __init__(self, name, slack, t):
        self.name = name
        self.slack = float(slack)
        self.t = float(t)
        super().__init__(f"{name} violated at t={self.t:.6g}: slack {self.slack:.3e}")


class ConvergenceError(AdiabaticAuditError):
    def __init__(self, residual, iterations):
        self.residual = float(residual)
        self.iterations = int(iterations)
        super().__init__(
            f"self-consistent iteration did not converge: residual {self.residual:.3e} "
            f"after {self.iterations} iterations"
        )


class NoBracketError(AdiabaticAuditError):
    def __init__(self, message, scan):
        self.scan = scan
        super().__init__(message)
