"""``adiabatic-audit`` command line.

Commands
--------
run       evolve one configuration and write ``trajectory.csv``, ``reports.json``
          and ``summary.json``
sweep     vary one parameter and write one summary row per value to ``sweep.csv``
min-tau   bisect on the horizon so the running adiabatic distance stays below a target
validate  run the invariant audits on a configuration and write ``validate.json``

Exit status is 0 on success, 2 when an audit or invariant fails and 1 on
usage or configuration errors.  The default output directory is taken from
``ADIABATIC_AUDIT_OUT`` when ``--out`` is not given.
"""

import argparse
import logging
import math
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import NONLINEAR_CRITERIA, ConfigError, apply_overrides, load_config
from .core import TimeGrid, interpolated_hamiltonian
from .estimator import LINEAR_DEFAULT_CRITERIA, AdiabaticityAuditor, NonlinearAdiabaticityAuditor
from .evolution import integrate_schrodinger, run_adiabatic
from .exceptions import AdiabaticAuditError, NoBracketError
from .io import load_matrix_file, write_csv, write_json, write_reports_json, write_trajectory_csv
from .models import (
    SpinModelParams,
    classical_condition_value,
    exact_coefficients,
    frozen_basis_transition_probability,
    regime_classify,
    spin_spec,
    transition_integral_value,
)
from .nonlinear import fock_connection, run_nonlinear, two_mode_model

OUT_ENV = "ADIABATIC_AUDIT_OUT"
DEFAULT_OUT = "adiabatic_audit_out"
EXIT_OK, EXIT_USAGE, EXIT_AUDIT = 0, 1, 2
MIN_TAU_RTOL = 1e-3
SCAN_POINTS = 101

log = logging.getLogger("adiabatic_audit")


# --------------------------------------------------------------------------- models

def spin_params(cfg):
    p = cfg.params
    if cfg.initial_state is None:
        if cfg.level > 2:
            raise ConfigError(f"field 'level': the spin model has 2 levels, got {cfg.level}")
        return SpinModelParams.starting_in(cfg.level - 1, p["omega"], p["omega0"], cfg.tau)
    amps = [complex(re, im) for re, im in cfg.initial_state]
    if len(amps) != 2:
        raise ConfigError(f"field 'initial_state': the spin model needs 2 amplitudes, got {len(amps)}")
    try:
        return SpinModelParams(p["omega"], p["omega0"], cfg.tau, amps[0], amps[1])
    except ValueError as exc:
        raise ConfigError(f"field 'initial_state': {exc}") from exc


def linear_hamiltonian(cfg):
    if cfg.model == "spin-rotating-field":
        return spin_spec(spin_params(cfg))
    try:
        times, matrices = load_matrix_file(cfg.matrix_file)
    except (KeyError, ValueError, OSError) as exc:
        raise ConfigError(f"field 'matrix_file': {exc}") from exc
    return interpolated_hamiltonian(times, matrices)


def nonlinear_spec(cfg):
    p = cfg.params
    return two_mode_model(p.get("g", 0.0), p.get("omega", 0.1), p.get("omega0", 1.0), p.get("detuning", 0.0))


def initial_state(cfg):
    if cfg.initial_state is None:
        return None
    return np.array([complex(re, im) for re, im in cfg.initial_state])


def criterion_ids(cfg):
    if cfg.criteria is not None:
        return tuple(cfg.criteria)
    if cfg.nonlinear:
        return NONLINEAR_CRITERIA
    extra = ("wei_ying_2",) if cfg.wei_ying_constant is not None else ()
    return LINEAR_DEFAULT_CRITERIA + extra


# --------------------------------------------------------------------------- execution

class Outcome:
    """Result of one configuration: summary, reports and trajectory columns."""

    def __init__(self, summary, reports, trajectory):
        self.summary = summary
        self.reports = reports
        self.trajectory = trajectory


def _spin_block(cfg, auditor):
    params = spin_params(cfg)
    times = auditor.grid_.times
    a1, a2 = exact_coefficients(params, times)
    exact = np.abs(np.stack([a1, a2], axis=1))
    gap = float(np.max(np.abs(np.abs(auditor.coefficients_) - exact)))
    j = cfg.level - 1
    classical = classical_condition_value(params)
    holds = classical < cfg.margin
    block = {
        "regime": regime_classify(params, cfg.margin),
        "classical_condition_value": classical,
        "classical_condition_holds": bool(holds),
        "transition_integral_final": float(transition_integral_value(params, cfg.tau)),
        "oracle_gap": gap,
        "exact_max_transition_probability": float(np.max(1.0 - exact[:, j] ** 2)),
        "discrepancy": bool(holds and auditor.distance_.max_distance >= cfg.margin),
    }
    if cfg.initial_state is None:
        frozen = float(np.max(frozen_basis_transition_probability(params, times, start=j)))
        block["frozen_basis_max_transition_probability"] = frozen
        block["frozen_basis_discrepancy"] = bool(holds and frozen >= 0.5)
    return block


def _linear(cfg):
    hamiltonian = linear_hamiltonian(cfg)
    ids = criterion_ids(cfg)
    auditor = AdiabaticityAuditor(cfg.level - 1, cfg.steps, cfg.method, cfg.stencil, cfg.margin,
                                  ids, cfg.wei_ying_constant)
    auditor.fit(hamiltonian, cfg.tau, initial_state(cfg))
    summary = auditor.summary()
    if cfg.model == "spin-rotating-field":
        summary["spin_model"] = _spin_block(cfg, auditor)
    return auditor, summary


def _nonlinear(cfg):
    p = cfg.params
    auditor = NonlinearAdiabaticityAuditor(cfg.level - 1, cfg.steps, cfg.method, cfg.stencil,
                                           p.get("damping", 0.5), cfg.margin,
                                           p.get("hamiltonian_on", "state"))
    auditor.fit(nonlinear_spec(cfg), cfg.tau)
    summary = auditor.summary()
    summary["max_fock_connection"] = float(np.max(fock_connection(auditor.branches_, cfg.stencil)))
    return auditor, summary


def execute(cfg):
    """Run one configuration.  Warnings are captured into the summary."""
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        auditor, body = (_nonlinear if cfg.nonlinear else _linear)(cfg)
    ids = criterion_ids(cfg)
    reports = [auditor.reports_[c] for c in ids]
    body["criteria"] = {c: body["criteria"][c] for c in ids}
    body["level"] = cfg.level
    messages = sorted({str(w.message) for w in caught})
    summary = {"status": "ok", "model": cfg.model, "config": cfg.to_dict(), **body, "warnings": messages}
    trajectory = {
        "times": auditor.grid_.times,
        "states": auditor.evolution_.states,
        "coefficients": auditor.coefficients_,
        "distance": auditor.distance_.distance,
        "deficiency": auditor.distance_.deficiency,
        "extra": {r.criterion_id: r.series for r in reports},
    }
    return Outcome(summary, reports, trajectory)


def write_outcome(out, outcome):
    out = Path(out)
    tr = outcome.trajectory
    paths = [
        write_trajectory_csv(out / "trajectory.csv", tr["times"], tr["states"], tr["coefficients"],
                             tr["distance"], tr["deficiency"], tr["extra"]),
        write_reports_json(out / "reports.json", outcome.reports),
        write_json(out / "summary.json", outcome.summary),
    ]
    return paths


def _error_summary(cfg, exc):
    return {"status": "error", "model": cfg.model, "config": cfg.to_dict(),
            "error_type": type(exc).__name__, "message": str(exc)}


# --------------------------------------------------------------------------- sweep

SWEEP_COLUMNS = ("status", "error", "max_distance", "max_deficiency", "final_deficiency",
                 "norm_drift", "bound_min_slack", "yukalov_final", "oracle_gap")


def sweep_row(task):
    """One sweep row; failures become an ``error`` row instead of propagating."""
    cfg, name, value = task
    ids = criterion_ids(cfg)
    row = {"value": value, **{c: math.nan for c in SWEEP_COLUMNS}}
    row.update({f"verdict_{c}": "" for c in ids})
    try:
        outcome = execute(cfg.with_value(name, value))
    except (AdiabaticAuditError, ValueError, ArithmeticError) as exc:
        row.update(status="error", error=f"{type(exc).__name__}: {exc}")
        return row
    s = outcome.summary
    row.update(status="ok", error="", max_distance=s["max_distance"], max_deficiency=s["max_deficiency"],
               final_deficiency=s["final_deficiency"], norm_drift=s["norm_drift"],
               bound_min_slack=s["bound_audit"]["min_slack"])
    if "yukalov_t1" in s["criteria"]:
        row["yukalov_final"] = s["criteria"]["yukalov_t1"]["final"]
    if "spin_model" in s:
        row["oracle_gap"] = s["spin_model"]["oracle_gap"]
    row.update({f"verdict_{c}": s["criteria"][c]["verdict"] for c in ids})
    return row


def sweep(cfg, name, values, jobs=1):
    tasks = [(cfg, name, v) for v in values]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(sweep_row, tasks))
    else:
        rows = [sweep_row(t) for t in tasks]
    header = ["parameter", "value", *SWEEP_COLUMNS, *[f"verdict_{c}" for c in criterion_ids(cfg)]]
    table = [[name, *[r[h] for h in header[1:]]] for r in rows]
    return header, table


def parse_values(text, name):
    items = [v.strip() for v in (text or "").split(",") if v.strip()]
    try:
        values = [float(v) for v in items]
    except ValueError as exc:
        raise ConfigError(f"--values: {exc}") from exc
    if name == "n_steps":
        if any(v != int(v) for v in values):
            raise ConfigError("--values: n_steps values must be integers")
        values = [int(v) for v in values]
    return values


# --------------------------------------------------------------------------- min-tau

def distance_profile(cfg, tau):
    """Times and adiabatic distance for a run on ``[0, tau]`` with ``cfg.steps`` intervals."""
    grid = TimeGrid(float(tau), cfg.steps)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        if cfg.nonlinear:
            p = cfg.params
            run = run_nonlinear(nonlinear_spec(cfg), grid, cfg.level - 1, cfg.method, cfg.stencil,
                                p.get("damping", 0.5), p.get("hamiltonian_on", "state"), cfg.margin)
        else:
            run = run_adiabatic(linear_hamiltonian(cfg), grid, cfg.level - 1, initial_state(cfg),
                                cfg.method, cfg.stencil)
    return grid.times, run.distance.distance


def min_tau(cfg, target, tau_max=None, rtol=MIN_TAU_RTOL):
    """Largest ``tau`` with ``max_{t <= tau} distance(t) <= target``.

    A scan over ``[0, tau_max]`` brackets the crossing of the running maximum;
    bisection with fresh runs on ``[0, tau]`` then narrows it to ``rtol``.
    """
    tau_max = float(cfg.tau if tau_max is None else tau_max)
    if not tau_max > 0:
        raise ConfigError(f"--tau-max must be > 0, got {tau_max}")
    if not target >= 0:
        raise ConfigError(f"--target must be >= 0, got {target}")
    times, d = distance_profile(cfg, tau_max)
    running = np.maximum.accumulate(d)
    stride = max(1, (len(times) - 1) // (SCAN_POINTS - 1))
    scan = {"times": times[::stride].tolist(), "running_max_distance": running[::stride].tolist()}
    base = {"target": target, "tau_max": tau_max, "n_steps": cfg.steps, "scan": scan}
    if running[-1] <= target:
        return dict(base, tau_star=tau_max, bracket=[tau_max, tau_max], max_distance=float(running[-1]),
                    iterations=0, qualifies_everywhere=True, monotone=True, warnings=[])
    k = int(np.argmax(running > target))
    if k <= 1:
        raise NoBracketError(
            f"target {target} is exceeded within the first scan step (t={times[k]:.6g}); "
            "no qualifying horizon found", scan)
    lo, hi = float(times[k - 1]), float(times[k])
    notes = []
    iterations = 0
    best = float(running[k - 1])
    while hi - lo > rtol * lo:
        mid = 0.5 * (lo + hi)
        value = float(np.max(distance_profile(cfg, mid)[1]))
        iterations += 1
        if value <= target:
            lo, best = mid, value
        else:
            hi = mid
    check = float(np.max(distance_profile(cfg, lo)[1]))
    if check > target:
        notes.append("distance not monotone in tau at this resolution; returning the scan lower edge")
        lo, best = float(times[k - 1]), float(running[k - 1])
    for note in notes:
        log.warning(note)
    return dict(base, tau_star=lo, bracket=[lo, hi], max_distance=best, iterations=iterations,
                qualifies_everywhere=False, monotone=not notes, warnings=notes)


# --------------------------------------------------------------------------- validate

def _check(name, value, limit, kind="max"):
    passed = value <= limit if kind == "max" else value >= limit
    return {"name": name, "value": float(value), "limit": float(limit), "kind": kind,
            "passed": bool(passed)}


def validate_config(cfg):
    """Invariant checks for one configuration; returns the list of check records."""
    outcome = execute(cfg)
    s = outcome.summary
    checks = [
        _check("norm_drift", s["norm_drift"], 1e-8),
        _check("bound_audit_min_slack", s["bound_audit"]["min_slack"], -1e-8, "min"),
    ]
    if cfg.nonlinear:
        checks += [
            _check("max_eigen_residual", s["max_eigen_residual"], 1e-9),
            _check("max_fock_connection", s["max_fock_connection"], 1e-8),
            _check("max_abs_coefficient", s["max_abs_coefficient"], 1.0 + 1e-10),
        ]
        return checks, s
    checks += [
        _check("distance_identity_residual", s["distance_identity_residual"], 1e-8),
        _check("transition_reconstruction_residual", s["transition_reconstruction_residual"], 1e-5),
    ]
    other = "midpoint-exp" if cfg.method == "rk4" else "rk4"
    hamiltonian = linear_hamiltonian(cfg)
    psi0 = initial_state(cfg)
    if psi0 is None:
        psi0 = np.asarray(outcome.trajectory["states"][0])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        alt = integrate_schrodinger(hamiltonian, psi0, TimeGrid(cfg.tau, cfg.steps), other)
    gap = float(np.max(np.abs(alt.states - outcome.trajectory["states"])))
    checks.append(_check("backend_agreement", gap, 1e-6))
    if "spin_model" in s:
        checks.append(_check("oracle_gap", s["spin_model"]["oracle_gap"], 1e-6))
        if "yukalov_t1" in s["criteria"]:
            report = next(r for r in outcome.reports if r.criterion_id == "yukalov_t1")
            params = spin_params(cfg)
            err = float(np.max(np.abs(report.series - transition_integral_value(params, report.times))))
            checks.append(_check("transition_integral_closed_form", err, 1e-8))
    return checks, s


# --------------------------------------------------------------------------- argparse

def _output_dir(args):
    return Path(args.out or os.environ.get(OUT_ENV) or DEFAULT_OUT)


def _common(parser):
    parser.add_argument("--config", required=True, metavar="PATH", help="JSON run configuration")
    parser.add_argument("--out", metavar="DIR", help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
    parser.add_argument("--margin", type=float, help="threshold standing in for '<< 1'")
    parser.add_argument("--steps", type=int, help="number of grid intervals")
    parser.add_argument("--criteria", metavar="LIST", help="comma-separated criterion ids")


def build_parser():
    parser = argparse.ArgumentParser(prog="adiabatic-audit", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("run", help="evolve one configuration"))
    p = sub.add_parser("sweep", help="vary one parameter")
    _common(p)
    p.add_argument("--param", required=True, choices=("omega", "omega0", "tau", "g", "n_steps"))
    p.add_argument("--values", default="", help="comma-separated values (may be empty)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p = sub.add_parser("min-tau", help="largest horizon keeping the distance below a target")
    _common(p)
    p.add_argument("--target", type=float, required=True, help="target adiabatic distance")
    p.add_argument("--tau-max", type=float, help="upper end of the search bracket (default: config tau)")
    _common(sub.add_parser("validate", help="run invariant audits"))
    return parser


def _run(cfg, out):
    try:
        outcome = execute(cfg)
    except AdiabaticAuditError as exc:
        write_json(out / "summary.json", _error_summary(cfg, exc))
        raise
    for path in write_outcome(out, outcome):
        print(path)
    return EXIT_OK


def _sweep(cfg, out, args):
    values = parse_values(args.values, args.param)
    if args.jobs < 1:
        raise ConfigError(f"--jobs must be >= 1, got {args.jobs}")
    header, rows = sweep(cfg, args.param, values, args.jobs)
    print(write_csv(out / "sweep.csv", header, rows))
    return EXIT_OK


def _min_tau(cfg, out, args):
    try:
        result = min_tau(cfg, args.target, args.tau_max)
    except NoBracketError as exc:
        write_json(out / "min_tau.json", {"status": "error", "target": args.target,
                                          "message": str(exc), "scan": exc.scan})
        raise
    print(write_json(out / "min_tau.json", {"status": "ok", **result}))
    return EXIT_OK


def _validate(cfg, out):
    checks, summary = validate_config(cfg)
    passed = all(c["passed"] for c in checks)
    print(write_json(out / "validate.json", {"passed": passed, "model": cfg.model, "checks": checks,
                                             "warnings": summary["warnings"]}))
    for c in checks:
        print(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']}: {c['value']:.3e} ({c['kind']} {c['limit']:.1e})")
    return EXIT_OK if passed else EXIT_AUDIT


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    out = _output_dir(args)
    try:
        cfg = apply_overrides(load_config(args.config), args.margin, args.steps, args.criteria)
        if args.command == "run":
            return _run(cfg, out)
        if args.command == "sweep":
            return _sweep(cfg, out, args)
        if args.command == "min-tau":
            return _min_tau(cfg, out, args)
        return _validate(cfg, out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AdiabaticAuditError as exc:
        print(f"audit failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_AUDIT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
