import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from adiabatic_audit.core import HamiltonianSpec, TimeGrid
from adiabatic_audit.evolution import (
    PhaseTrajectory,
    check_drift,
    coefficient_rates,
    deficiency_from_transitions,
    dynamic_phase,
    geometric_phase,
    hermitian_propagator,
    integrate_schrodinger,
    project_coefficients,
    run_adiabatic,
)
from adiabatic_audit.exceptions import GaugeInconsistencyError, IntegrationAccuracyError, NonOrthogonalBasisError
from adiabatic_audit.models import SpinModelParams, exact_coefficients, exact_evolution, spin_spec
from adiabatic_audit.core import fd_derivative

from conftest import crossing_three_level, gapped_four_level, random_hermitian


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 31), st.floats(0.01, 2.0))
def test_hermitian_propagator_matches_expm(seed, dt):
    H = random_hermitian(np.random.default_rng(seed), 3)
    np.testing.assert_allclose(hermitian_propagator(H, dt), expm(-1j * dt * H), atol=1e-12)


@pytest.mark.parametrize("method", ["rk4", "midpoint-exp"])
def test_static_hamiltonian_evolution(method, rng):
    H = random_hermitian(rng, 3)
    psi0 = np.array([1, 1j, 0]) / np.sqrt(2)
    ev = integrate_schrodinger(HamiltonianSpec.constant(H), psi0, TimeGrid(2.0, 400), method)
    np.testing.assert_allclose(ev.states[-1], expm(-2j * H) @ psi0, atol=1e-8)
    assert ev.norm_drift < 1e-10


@pytest.mark.parametrize("method,order", [("rk4", 4), ("midpoint-exp", 2)])
def test_convergence_order_on_spin_model(method, order):
    p = SpinModelParams(0.8, 1.0, c1=1.0, c2=0.0)
    errors = []
    for n in (100, 200):
        grid = TimeGrid(6.0, n)
        ev = integrate_schrodinger(spin_spec(p), p.initial_state, grid, method)
        errors.append(np.max(np.abs(ev.states - np.stack(exact_evolution(p, grid.times), axis=1))))
    assert errors[0] / errors[1] > 2 ** order * 0.8


def test_backends_agree_on_slow_spin(slow_spin):
    p, spec = slow_spin
    grid = TimeGrid(p.tau, 10_000)
    a = integrate_schrodinger(spec, p.initial_state, grid, "rk4")
    b = integrate_schrodinger(spec, p.initial_state, grid, "midpoint-exp")
    assert np.max(np.abs(a.states - b.states)) <= 1e-6


def test_drift_guard():
    states = np.array([[1.0, 0.0], [1.001, 0.0]])
    with pytest.raises(IntegrationAccuracyError):
        check_drift(states)
    with pytest.warns(RuntimeWarning):
        check_drift(np.array([[1.0, 0.0], [1.0 + 1e-7, 0.0]]))


def test_unknown_method_and_bad_state():
    spec = HamiltonianSpec.constant(np.eye(2, dtype=complex))
    with pytest.raises(ValueError):
        integrate_schrodinger(spec, np.array([1, 0]), TimeGrid(1.0, 10), "euler")
    with pytest.raises(ValueError):
        integrate_schrodinger(spec, np.array([1, 1]), TimeGrid(1.0, 10))


def test_evolution_iterates_wave_states(slow_spin):
    p, spec = slow_spin
    ev = integrate_schrodinger(spec, p.initial_state, TimeGrid(1.0, 4), "midpoint-exp")
    items = list(ev)
    assert len(items) == len(ev) == 5
    assert items[-1].t == pytest.approx(1.0)


def test_phases():
    grid = TimeGrid(2.0, 200)
    E = np.tile([-1.0, 2.0], (201, 1))
    np.testing.assert_allclose(dynamic_phase(E, grid)[-1], [2.0, -4.0])
    zeta, residue = geometric_phase(np.full((201, 2), 0.5j), grid)
    np.testing.assert_allclose(zeta[-1], [-1.0, -1.0])
    assert residue == 0.0
    with pytest.raises(GaugeInconsistencyError):
        geometric_phase(np.full((201, 2), 1e-3 + 0.5j), grid)


def test_projection_requires_orthonormal_basis():
    grid_len = 3
    V = np.tile(np.array([[1.0, 1.0], [0.0, 1.0]], dtype=complex), (grid_len, 1, 1))
    phases = PhaseTrajectory(np.zeros((grid_len, 2)), np.zeros((grid_len, 2)))
    with pytest.raises(NonOrthogonalBasisError):
        project_coefficients(np.ones((grid_len, 2)) / np.sqrt(2), V, phases)


@pytest.mark.parametrize("level", [0, 1])
def test_spin_coefficients_match_oracle(level):
    p = SpinModelParams.starting_in(level, 0.3, 1.0, 8.0)
    run = run_adiabatic(spin_spec(p), TimeGrid(p.tau, 4000), level)
    exact = np.abs(np.stack(exact_coefficients(p, run.grid.times), axis=1))
    np.testing.assert_allclose(np.abs(run.coefficients), exact, atol=1e-9)
    np.testing.assert_allclose(run.distance.distance ** 2, run.distance.deficiency, atol=1e-12)
    assert run.distance.identity_residual < 1e-12


def test_coefficient_equation_of_motion():
    spec = gapped_four_level()
    grid = TimeGrid(2.0, 2000)
    run = run_adiabatic(spec, grid, level=1)
    lhs = fd_derivative(run.coefficients, grid.h)
    rhs = coefficient_rates(run.coefficients, run.spectral.overlap_derivatives, run.phases)
    np.testing.assert_allclose(lhs, rhs, atol=1e-7)


@pytest.mark.parametrize("make", [gapped_four_level, lambda: crossing_three_level(4.0)])
def test_transition_integral_reconstructs_deficiency(make):
    grid = TimeGrid(4.0, 4000)
    run = run_adiabatic(make(), grid, level=0)
    rebuilt = deficiency_from_transitions(run.coefficients, run.spectral.overlap_derivatives, run.phases, 0, grid)
    np.testing.assert_allclose(rebuilt, run.distance.deficiency, atol=1e-6)


def test_reference_state_norm_is_coefficient_modulus(slow_spin):
    p, spec = slow_spin
    run = run_adiabatic(spec, TimeGrid(p.tau, 500))
    np.testing.assert_allclose(np.linalg.norm(run.reference, axis=1), np.abs(run.coefficients[:, 0]), atol=1e-13)


def test_gauge_invariance_of_moduli(slow_spin):
    p, spec = slow_spin
    grid = TimeGrid(p.tau, 500)
    from adiabatic_audit.spectral import track_spectrum
    base = run_adiabatic(spec, grid)
    rephased = track_spectrum(spec, grid, initial_phases=[0.7, -2.1])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        other = run_adiabatic(spec, grid, psi0=p.initial_state, spectral=rephased)
    np.testing.assert_allclose(np.abs(other.coefficients), np.abs(base.coefficients), atol=1e-13)
    np.testing.assert_allclose(other.distance.distance, base.distance.distance, atol=1e-13)
