#!/usr/bin/env python3
"""
Tests for the implicit midpoint baseline, the scipy oracle and the
partitioned Runge-Kutta tableaus.

Run with ``uv run pytest test_reference.py`` or directly with
``uv run test_reference.py``.
"""

import math

import numpy as np
import numpy.testing as npt
import pytest
from pydantic import ValidationError

from core import EvalCounter, FirstOrderSystem, HamiltonianFlow, PhaseState, clone_up, counted
from harness import envelope_slope, fit_power_law
from logging_config import get_logger
from maps import LinearPhaseMap
from problems import SchwarzschildParams, harmonic_oscillator, schwarzschild_initial_conditions, schwarzschild_system
from reference import (
    ConvergenceError,
    InvalidTableauError,
    NonExplicitTableauError,
    OracleConfig,
    OracleError,
    OracleMethod,
    PRKTableau,
    extended_leapfrog_tableau,
    hamiltonian_field,
    implicit_midpoint_step,
    integrate_implicit_midpoint,
    leapfrog_tableau,
    oracle_hamiltonian,
    oracle_solve,
    prk_step,
)
from splitting import leapfrog_step, scheme, stormer_verlet_step

logger = get_logger("xps-leapfrog.test")


class LinearDecay(FirstOrderSystem):
    """x' = lam * x."""

    dim = 1

    def __init__(self, lam: float):
        self.lam = lam

    def field(self, x, t):
        return self.lam * x


def test_implicit_midpoint_linear_step():
    """For x' = lam x the midpoint rule is the (1,1) Padé approximant."""
    lam, h = -1.0, 0.1
    x1 = implicit_midpoint_step(LinearDecay(lam).field, np.array([1.0]), 0.0, h)
    expected = (1.0 + 0.5 * h * lam) / (1.0 - 0.5 * h * lam)
    npt.assert_allclose(x1, [expected], rtol=1e-14)


def test_implicit_midpoint_run():
    counter = EvalCounter()
    system = counted(LinearDecay(-1.0), counter)
    traj = integrate_implicit_midpoint(system, np.array([1.0]), 0.1, 20, sample_every=5, counter=counter)
    assert traj.steps == [0, 5, 10, 15, 20]
    assert traj.times[-1] == pytest.approx(2.0)
    assert traj.labels == ["x0"]
    ratio = (1.0 - 0.05) / (1.0 + 0.05)
    npt.assert_allclose(traj.final_state, [ratio ** 20], rtol=1e-12)
    assert counter.count > 20, "each step needs at least two field calls"
    assert traj.total_evaluations == counter.count


def test_implicit_midpoint_reports_non_convergence():
    with pytest.raises(ConvergenceError):
        implicit_midpoint_step(LinearDecay(-1.0).field, np.array([1.0]), 0.0, 10.0)
    with pytest.raises(ConvergenceError):
        implicit_midpoint_step(LinearDecay(-1.0).field, np.array([1.0]), 0.0, 0.1, max_iter=1)


def test_implicit_midpoint_is_symplectic():
    params = SchwarzschildParams()
    system = schwarzschild_system(params)
    z0 = schwarzschild_initial_conditions(params).as_vector()
    field = hamiltonian_field(system)
    h = 0.02 * params.period

    def step(z):
        return implicit_midpoint_step(field, z, 0.0, h)

    n = z0.size
    jac = np.empty((n, n))
    for j in range(n):
        delta = 1e-5 * max(1.0, abs(z0[j]))
        up, down = z0.copy(), z0.copy()
        up[j] += delta
        down[j] -= delta
        jac[:, j] = (step(up) - step(down)) / (2.0 * delta)
    half = n // 2
    form = np.zeros((n, n))
    form[:half, half:] = np.eye(half)
    form[half:, :half] = -np.eye(half)
    defect = np.max(np.abs(jac.T @ form @ jac - form))
    assert defect < 1e-6, f"implicit midpoint symplectic defect {defect:.2e}"


def test_oracle_on_harmonic_oscillator():
    osc = harmonic_oscillator(1.0)
    counter = EvalCounter()
    times = np.linspace(0.0, 2.0 * math.pi, 9)
    traj = oracle_hamiltonian(counted(osc, counter), np.array([1.0, 0.0]), 2.0 * math.pi, sample_times=times,
                              counter=counter)
    assert len(traj) == 9
    assert traj.steps == list(range(9))
    for tau, state in zip(traj.taus, traj.states):
        exact = osc.exact([1.0], [0.0], tau)
        npt.assert_allclose(state, exact.as_vector(), atol=1e-11, err_msg=f"oracle off at t={tau}")
    assert max(abs(v - 0.5) for v in traj.invariants) < 1e-12
    assert counter.count > 0


def test_oracle_default_samples_and_lsoda():
    field = LinearDecay(-1.0).field
    traj = oracle_solve(field, np.array([1.0]), 0.0, 1.0)
    assert traj.taus == [0.0, 1.0]
    npt.assert_allclose(traj.final_state, [math.exp(-1.0)], rtol=1e-12)

    cfg = OracleConfig(rel_tol=1e-10, abs_tol=1e-12, method=OracleMethod.LSODA)
    lsoda = oracle_solve(field, np.array([1.0]), 0.0, 1.0, cfg)
    npt.assert_allclose(lsoda.final_state, [math.exp(-1.0)], rtol=1e-7)


def test_oracle_errors():
    field = LinearDecay(-1.0).field
    with pytest.raises(ValueError):
        oracle_solve(field, np.array([1.0]), 1.0, 1.0)
    with pytest.raises(ValueError):
        oracle_solve(field, np.array([1.0]), 0.0, 1.0, sample_times=[0.5, 0.2])
    with pytest.raises(ValueError):
        oracle_solve(field, np.array([1.0]), 0.0, 1.0, sample_times=[0.0, 2.0])
    with pytest.raises(OracleError):
        oracle_solve(field, np.array([1.0]), 0.0, 100.0, OracleConfig(max_steps=2))

    with pytest.raises(ValidationError):
        OracleConfig(rel_tol=1e-16)
    with pytest.raises(ValidationError):
        OracleConfig(abs_tol=0.0)


def test_oracle_keeps_oscillator_energy():
    osc = harmonic_oscillator(1.0)
    t1 = 200.0 * math.pi
    traj = oracle_hamiltonian(osc, np.array([1.0, 0.0]), t1, sample_times=np.linspace(0.0, t1, 1001))
    drift = max(abs(v - 0.5) for v in traj.invariants)
    logger.info(f"oracle energy drift over 100 periods: {drift:.2e}")
    assert drift <= 1e-9


def test_oracle_error_falls_with_tolerance():
    osc = harmonic_oscillator(1.0)
    t1 = 20.0 * math.pi
    exact = osc.exact([1.0], [0.0], t1).as_vector()
    errors = []
    for rtol, atol in ((1e-8, 1e-10), (1e-12, 1e-14)):
        traj = oracle_hamiltonian(osc, np.array([1.0, 0.0]), t1, OracleConfig(rel_tol=rtol, abs_tol=atol))
        errors.append(float(np.max(np.abs(traj.final_state - exact))))
    logger.info(f"oracle endpoint errors: {errors[0]:.2e} loose, {errors[1]:.2e} tight")
    assert errors[1] < errors[0]


def test_oracle_solves_constant_field_exactly():
    velocity = np.array([1.5, -0.25, 3.0])
    times = np.linspace(0.0, 10.0, 11)
    traj = oracle_solve(lambda x, t: velocity, np.array([1.0, 2.0, -1.0]), 0.0, 10.0, sample_times=times)
    for tau, state in zip(traj.taus, traj.states):
        npt.assert_allclose(state, [1.0, 2.0, -1.0] + tau * velocity, rtol=1e-13, atol=1e-12)


def test_loose_oracle_drifts():
    """A non-symplectic solver at loose tolerance lets H wander off secularly."""
    params = SchwarzschildParams()
    system = schwarzschild_system(params)
    z0 = schwarzschild_initial_conditions(params).as_vector()
    t1 = 50.0 * params.period
    traj = oracle_hamiltonian(system, z0, t1, OracleConfig(rel_tol=1e-9, abs_tol=1e-9),
                              sample_times=np.linspace(0.0, t1, 5000))
    errors = np.asarray(traj.invariants) - 0.5
    drift = envelope_slope(traj.steps, errors)
    early = float(np.max(np.abs(errors[: errors.size // 10])))
    logger.info(f"loose oracle: slope {drift.slope:.2e}, final {drift.final_max:.2e}, early {early:.2e}")
    assert drift.slope > 0.0
    assert drift.final_max > 2.0 * early


def test_implicit_midpoint_is_second_order():
    params = SchwarzschildParams()
    system = schwarzschild_system(params)
    z0 = schwarzschild_initial_conditions(params).as_vector()
    t_end = 0.1 * params.period
    exact = oracle_hamiltonian(system, z0, t_end).final_state
    flow = HamiltonianFlow(system)
    hs, errors = [], []
    for n_steps in (10, 20, 40):
        traj = integrate_implicit_midpoint(flow, z0, t_end / n_steps, n_steps, sample_every=n_steps)
        hs.append(t_end / n_steps)
        errors.append(float(np.max(np.abs(traj.final_state - exact))))
    order, _, excluded = fit_power_law(hs, errors, 1e-11)
    logger.info(f"implicit midpoint errors {errors}, order {order:.3f}")
    assert not excluded
    assert 1.7 <= order <= 2.3


def test_leapfrog_tableau_matches_stormer_verlet():
    omega = 1.3
    osc = harmonic_oscillator(omega)
    q0, p0, h = np.array([0.7]), np.array([-0.2]), 0.25
    x1, y1 = prk_step(leapfrog_tableau(), lambda y: y, lambda x: -omega ** 2 * x, q0, p0, h)
    sv = stormer_verlet_step(osc.kinetic, osc.potential, PhaseState(q=q0, p=p0), h)
    npt.assert_allclose(x1, sv.q, rtol=1e-14)
    npt.assert_allclose(y1, sv.p, rtol=1e-14)


def test_extended_tableau_matches_first_extended_step():
    """The tableau reproduces QP̃Q̃P from a clone for any shared mixing weights."""
    params = SchwarzschildParams()
    system = schwarzschild_system(params)
    start = schwarzschild_initial_conditions(params)
    slope = hamiltonian_field(system)
    z0 = start.as_vector()

    for h in (0.02 * params.period, 0.0):
        for a1, a2 in ((1.0, 1.0), (0.5, 0.0), (0.0, 1.0), (0.25, 0.75)):
            mix1 = LinearPhaseMap(alpha_q=a1, alpha_p=a1)
            mix2 = LinearPhaseMap(alpha_q=a2, alpha_p=a2)
            x1, y1 = prk_step(extended_leapfrog_tableau(a1, a2), slope, slope, z0, z0, h)
            out = leapfrog_step(system, scheme("QPtQtP"), clone_up(start), h, mix1, mix2)
            label = f"h={h:g} weights ({a1}, {a2})"
            npt.assert_allclose(x1, np.concatenate([out.q, out.pt]), rtol=1e-12, atol=1e-12, err_msg=label)
            npt.assert_allclose(y1, np.concatenate([out.qt, out.p]), rtol=1e-12, atol=1e-12, err_msg=label)
            if h == 0.0:
                npt.assert_array_equal(x1, z0)


def test_extended_tableau_is_consistent():
    for a1, a2 in ((1.0, 1.0), (0.5, 0.5), (0.0, 1.0), (0.25, 0.75)):
        tableau = extended_leapfrog_tableau(a1, a2)
        assert abs(sum(tableau.b1) - 1.0) < 1e-15
        assert abs(sum(tableau.b2) - 1.0) < 1e-15
        assert tableau.stages == 4
        assert sum(tableau.a2[3]) == pytest.approx(1.0)


def test_non_explicit_tableau():
    tableau = PRKTableau(a1=((0.0, 0.0), (1.0, 0.0)), b1=(0.5, 0.5), a2=((0.0, 1.0), (0.0, 0.0)), b2=(0.5, 0.5))
    with pytest.raises(NonExplicitTableauError):
        prk_step(tableau, lambda y: y, lambda x: -x, np.array([1.0]), np.array([0.0]), 0.1)


def test_invalid_tableaus():
    # InvalidTableauError is a ValueError, so pydantic reports it as a ValidationError
    assert issubclass(InvalidTableauError, ValueError)
    with pytest.raises(ValidationError):
        PRKTableau(a1=((0.0,),), b1=(0.5,), a2=((0.0,),), b2=(1.0,))
    with pytest.raises(ValidationError):
        PRKTableau(a1=((0.0, 0.0),), b1=(0.5, 0.5), a2=((0.0, 0.0), (0.0, 0.0)), b2=(0.5, 0.5))
    with pytest.raises(ValidationError):
        PRKTableau(a1=(), b1=(), a2=(), b2=())


def test_hamiltonian_field_matches_flow():
    osc = harmonic_oscillator(2.0)
    z = np.array([0.5, -1.0])
    npt.assert_array_equal(hamiltonian_field(osc)(z, 0.0), HamiltonianFlow(osc).field(z))
    npt.assert_array_equal(hamiltonian_field(osc)(z, 0.0), [-1.0, -2.0])


def main():
    """Run all reference tests."""
    print("=" * 60)
    print("REFERENCE TESTS")
    print("=" * 60)
    tests = [
        test_implicit_midpoint_linear_step,
        test_implicit_midpoint_run,
        test_implicit_midpoint_reports_non_convergence,
        test_implicit_midpoint_is_symplectic,
        test_oracle_on_harmonic_oscillator,
        test_oracle_default_samples_and_lsoda,
        test_oracle_errors,
        test_oracle_keeps_oscillator_energy,
        test_oracle_error_falls_with_tolerance,
        test_oracle_solves_constant_field_exactly,
        test_loose_oracle_drifts,
        test_implicit_midpoint_is_second_order,
        test_leapfrog_tableau_matches_stormer_verlet,
        test_extended_tableau_matches_first_extended_step,
        test_extended_tableau_is_consistent,
        test_non_explicit_tableau,
        test_invalid_tableaus,
        test_hamiltonian_field_matches_flow,
    ]
    for test in tests:
        test()
        print(f"✅ {test.__name__}")
    print("\n🎉 All reference tests passed!")


if __name__ == "__main__":
    main()
