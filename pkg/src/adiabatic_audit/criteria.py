"""Adiabaticity criteria evaluated on a tracked spectral trajectory.

Every criterion yields a :class:`CriterionReport`: a per-step series, the
margin standing in for "much less than one", and a verdict.  Criteria that
need a gap report ``"inapplicable"`` (never ``"violated"``) when the spectrum
closes; the integral criterion ``yukalov_t1`` has no spectral restriction.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid

from ._validation import check_level, check_margin
from .core import fd_derivative
from .exceptions import BoundViolationError

CRITERIA = (
    "classical_overlap",
    "classical_hdot",
    "yukalov_t1",
    "tong_1",
    "tong_2",
    "tong_3",
    "wei_ying_1",
    "wei_ying_2",
)
DEFAULT_MARGIN = 0.1
HOLDS, VIOLATED, INAPPLICABLE = "holds", "violated", "inapplicable"


@dataclass(frozen=True)
class CriterionReport:
    criterion_id: str
    times: np.ndarray
    series: np.ndarray
    margin: float
    verdict: str
    first_violation_t: float = None
    applicability_flags: dict = field(default_factory=dict)
    cumulative: bool = False

    @property
    def holds(self):
        return self.verdict == HOLDS

    @property
    def final(self):
        return float(self.series[-1])

    @property
    def peak(self):
        return float(np.nanmax(self.series)) if np.any(np.isfinite(self.series)) else float("nan")

    def to_dict(self):
        series = [[float(t), None if not np.isfinite(v) else float(v)]
                  for t, v in zip(self.times, self.series)]
        return {
            "criterion_id": self.criterion_id,
            "margin": float(self.margin),
            "verdict": self.verdict,
            "first_violation_t": self.first_violation_t,
            "series": series,
            "applicability_flags": dict(self.applicability_flags),
        }


def _report(criterion_id, times, series, margin, flags, cumulative=False, inapplicable_at=None):
    margin = check_margin(margin)
    series = np.asarray(series, dtype=float)
    if inapplicable_at is not None:
        flags = dict(flags, inapplicable_at_t=float(times[inapplicable_at]))
        return CriterionReport(criterion_id, times, series, margin, INAPPLICABLE, None, flags, cumulative)
    hits = np.flatnonzero(series >= margin)
    if hits.size:
        return CriterionReport(criterion_id, times, series, margin, VIOLATED,
                               float(times[hits[0]]), flags, cumulative)
    return CriterionReport(criterion_id, times, series, margin, HOLDS, None, flags, cumulative)


def _row_max(ratio):
    # rows that are all NaN sit on a degeneracy and are reported through the verdict
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return np.nanmax(ratio, axis=1)


def _others(dim, j):
    return [n for n in range(dim) if n != j]


def _gap_check(spectral, j):
    """First step where level ``j`` touches another level, or None."""
    deg = spectral.degenerate_mask()[:, j, :]
    bad = np.flatnonzero(deg.any(axis=1))
    return int(bad[0]) if bad.size else None


def _any_degeneracy(spectral):
    bad = np.flatnonzero(spectral.degenerate_mask().any(axis=(1, 2)))
    return int(bad[0]) if bad.size else None


def _gap_ratio(numerator, gaps):
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.abs(numerator) / gaps
    return np.where(np.isfinite(ratio), ratio, np.nan)


def classical_overlap_condition(spectral, j, margin=DEFAULT_MARGIN):
    """``max_{n != j} |<psi_n|dpsi_j/dt> / (E_n - E_j)|`` per step."""
    j = check_level(j, spectral.dim)
    others = _others(spectral.dim, j)
    gaps = spectral.gaps()[:, others, j]
    ratio = _gap_ratio(spectral.overlap_derivatives[:, others, j], gaps)
    flags = {"gap_required": True, "resonance_excluded": True}
    series = _row_max(ratio) if others else np.zeros(len(spectral.times))
    return _report("classical_overlap", spectral.times, series, margin, flags,
                   inapplicable_at=_gap_check(spectral, j))


def classical_hdot_condition(spectral, hdots, j, margin=DEFAULT_MARGIN):
    """``max_{n != j} |<psi_n|Hdot|psi_j> / (E_n - E_j)^2|`` per step."""
    j = check_level(j, spectral.dim)
    others = _others(spectral.dim, j)
    V = spectral.vectors
    elements = np.einsum("kin,kij,kj->kn", V.conj(), np.asarray(hdots), V[:, :, j])[:, others]
    gaps = spectral.gaps()[:, others, j]
    ratio = _gap_ratio(elements, gaps ** 2)
    flags = {"gap_required": True, "resonance_excluded": True}
    series = _row_max(ratio) if others else np.zeros(len(spectral.times))
    return _report("classical_hdot", spectral.times, series, margin, flags,
                   inapplicable_at=_gap_check(spectral, j))


def transition_integrand(spectral, j):
    """``sum_{n != j} |<psi_j|dpsi_n/dt>|`` per step."""
    others = _others(spectral.dim, j)
    return np.abs(spectral.overlap_derivatives[:, j, others]).sum(axis=1)


def yukalov_condition(spectral, j, margin=DEFAULT_MARGIN):
    """Cumulative ``sum_{n != j} int_0^t |<psi_j|dpsi_n/dt>| dt'``.

    Valid for any spectrum: degenerate, gapless or with crossings.
    """
    j = check_level(j, spectral.dim)
    series = cumulative_trapezoid(transition_integrand(spectral, j), dx=spectral.grid.h, initial=0.0)
    flags = {"gap_required": False, "resonance_excluded": False}
    return _report("yukalov_t1", spectral.times, series, margin, flags, cumulative=True)


@dataclass(frozen=True)
class SufficiencyAudit:
    """Pointwise check of ``1 - |a_j|^2 <= 2 * (transition integral)``."""

    slack: np.ndarray
    min_slack: float
    tightest_t: float
    max_ratio: float

    def to_dict(self):
        return {"min_slack": self.min_slack, "tightest_t": self.tightest_t, "max_ratio": self.max_ratio}


def sufficiency_audit(report, distances, tol=1e-8):
    """Raise :class:`BoundViolationError` if the deficiency exceeds twice the integral."""
    bound = 2.0 * report.series
    slack = bound - distances.deficiency
    k = int(np.argmin(slack))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(bound > 0, distances.deficiency / bound, 0.0)
    audit = SufficiencyAudit(slack, float(slack[k]), float(report.times[k]), float(np.max(ratio)))
    if audit.min_slack < -tol:
        raise BoundViolationError("transition-integral bound", audit.min_slack, audit.tightest_t)
    return audit


def _tong_ratio(spectral, j):
    others = _others(spectral.dim, j)
    gaps = spectral.energies[:, [j]] - spectral.energies[:, others]
    with np.errstate(divide="ignore", invalid="ignore"):
        return spectral.overlap_derivatives[:, j, others] / gaps, others


def tong_conditions(spectral, hdots, j, margin=DEFAULT_MARGIN):
    """Three reports: ratio, integrated |d/dt ratio|, integrated cross terms.

    ``hdots`` is accepted for interface symmetry with the classical criterion
    and used to flag non-smooth driving; the series themselves derive from the
    tracked overlap derivatives.
    """
    j = check_level(j, spectral.dim)
    times, h = spectral.times, spectral.grid.h
    flags = {"gap_required": True, "nondegenerate_required": True,
             "no_crossings_required": True, "resonance_excluded": True, "finite_levels": True}
    bad = _any_degeneracy(spectral)
    ratio, others = _tong_ratio(spectral, j)
    if not others:
        zero = np.zeros(len(times))
        return [_report(c, times, zero, margin, flags, cum) for c, cum in
                (("tong_1", False), ("tong_2", True), ("tong_3", True))]
    if bad is not None:
        nan = np.full(len(times), np.nan)
        return [_report(c, times, nan, margin, flags, cum, bad) for c, cum in
                (("tong_1", False), ("tong_2", True), ("tong_3", True))]
    if hdots is not None:
        flags["hdot_max"] = float(np.max(np.linalg.norm(np.asarray(hdots), axis=(1, 2))))

    first = np.max(np.abs(ratio), axis=1)
    dratio = fd_derivative(ratio, h, 5 if len(times) >= 5 else 3)
    second = np.max(cumulative_trapezoid(np.abs(dratio), dx=h, axis=0, initial=0.0), axis=1)
    D = spectral.overlap_derivatives
    cross = np.zeros((len(times), len(others)))
    for i, n in enumerate(others):
        ms = [m for m in range(spectral.dim) if m != n]
        cross[:, i] = np.abs(ratio[:, i]) * np.abs(D[:, n, ms]).sum(axis=1)
    third = np.max(cumulative_trapezoid(cross, dx=h, axis=0, initial=0.0), axis=1)
    return [
        _report("tong_1", times, first, margin, flags),
        _report("tong_2", times, second, margin, flags, True),
        _report("tong_3", times, third, margin, flags, True),
    ]


def wei_ying_conditions(spectral, j, constant, margin=DEFAULT_MARGIN, real_hamiltonian=None):
    """Ratio report (against ``margin``) and integral report (against ``constant``)."""
    j = check_level(j, spectral.dim)
    times = spectral.times
    flags = {"gap_required": True, "nondegenerate_required": True, "no_crossings_required": True,
             "resonance_excluded": True, "real_hamiltonian_required": True,
             "real_hamiltonian": real_hamiltonian}
    bad = _any_degeneracy(spectral)
    ratio, others = _tong_ratio(spectral, j)
    first = np.max(np.abs(ratio), axis=1) if others else np.zeros(len(times))
    integral = yukalov_condition(spectral, j, constant).series
    if bad is not None:
        first = np.full(len(times), np.nan)
    return [
        _report("wei_ying_1", times, first, margin, flags, inapplicable_at=bad),
        _report("wei_ying_2", times, integral, constant, dict(flags, bound="constant"), True, bad),
    ]


def evaluate(criteria, spectral, j, hdots=None, margin=DEFAULT_MARGIN, wei_ying_constant=None,
             real_hamiltonian=None):
    """Evaluate the requested criterion ids, returning reports in the requested order."""
    unknown = [c for c in criteria if c not in CRITERIA]
    if unknown:
        raise ValueError(f"unknown criteria {unknown}; expected a subset of {CRITERIA}")
    needs_hdot = {"classical_hdot"}
    if needs_hdot & set(criteria) and hdots is None:
        raise ValueError("classical_hdot requires Hamiltonian derivatives")
    if "wei_ying_2" in criteria and wei_ying_constant is None:
        raise ValueError("wei_ying_2 requires an explicit wei_ying_constant")
    out = {}
    for c in criteria:
        if c in out:
            continue
        if c == "classical_overlap":
            out[c] = classical_overlap_condition(spectral, j, margin)
        elif c == "classical_hdot":
            out[c] = classical_hdot_condition(spectral, hdots, j, margin)
        elif c == "yukalov_t1":
            out[c] = yukalov_condition(spectral, j, margin)
        elif c.startswith("tong"):
            out.update({r.criterion_id: r for r in tong_conditions(spectral, hdots, j, margin)})
        else:
            const = wei_ying_constant if wei_ying_constant is not None else np.inf
            out.update({r.criterion_id: r for r in
                        wei_ying_conditions(spectral, j, const, margin, real_hamiltonian)})
    return [out[c] for c in criteria]
