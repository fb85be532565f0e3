#!/usr/bin/env python3
"""
Tests for the Schwarzschild geodesic, van der Pol and harmonic oscillator
problem definitions.

Run with ``uv run pytest test_problems.py`` or directly with
``uv run test_problems.py``.
"""

import math

import numpy as np
import numpy.testing as npt
import pytest
from pydantic import ValidationError

from core import check_gradients
from logging_config import get_logger
from problems import (
    SchwarzschildParams,
    SingularMetricError,
    VdpParams,
    harmonic_oscillator,
    pericenter_precession_estimate,
    schwarzschild_energy_error,
    schwarzschild_initial_conditions,
    schwarzschild_sample_states,
    schwarzschild_system,
    vdp_system,
)
from reference import oracle_hamiltonian, oracle_solve

logger = get_logger("xps-leapfrog.test")


def test_geodesic_initial_conditions():
    params = SchwarzschildParams()
    start = schwarzschild_initial_conditions(params)
    npt.assert_array_equal(start.q, [0.0, 42.0, 0.0])
    npt.assert_allclose(start.p, [0.981692, 0.0, -4.5826], atol=5e-5)
    assert start.p[2] == pytest.approx(-math.sqrt(21.0), rel=1e-14)


def test_geodesic_starts_on_mass_shell():
    params = SchwarzschildParams()
    system = schwarzschild_system(params)
    start = schwarzschild_initial_conditions(params)
    value = system.value(start.q, start.p)
    assert value == pytest.approx(0.5, abs=1e-14)
    assert abs(schwarzschild_energy_error(params, value)) < 1e-14

    heavier = SchwarzschildParams(m=2.0)
    s = schwarzschild_initial_conditions(heavier)
    assert schwarzschild_system(heavier).value(s.q, s.p) == pytest.approx(2.0, abs=1e-13)


def test_geodesic_gradients():
    params = SchwarzschildParams()
    system = schwarzschild_system(params)
    start = schwarzschild_initial_conditions(params)
    assert check_gradients(system, start)

    grad_q = system.grad_q(start.q, start.p)
    assert grad_q[0] == 0.0 and grad_q[2] == 0.0, "t and phi are cyclic"
    # at apocentre the radial velocity vanishes
    assert system.grad_p(start.q, start.p)[1] == 0.0
    assert system.labels == ["t", "r", "phi", "p_t", "p_r", "p_phi"]


def test_horizon_is_rejected():
    system = schwarzschild_system(SchwarzschildParams())
    q = np.array([0.0, 1.5, 0.0])
    p = np.array([1.0, 0.0, -4.0])
    for evaluate in (system.value, system.grad_q, system.grad_p):
        with pytest.raises(SingularMetricError):
            evaluate(q, p)
    with pytest.raises(SingularMetricError):
        system.value(np.array([0.0, 2.0, 0.0]), p)


def test_invalid_orbit_parameters():
    with pytest.raises(ValidationError):
        SchwarzschildParams(a=3.0, e=0.5)
    with pytest.raises(ValidationError):
        SchwarzschildParams(e=1.0)
    with pytest.raises(ValidationError):
        SchwarzschildParams(M=0.0)
    with pytest.raises(ValidationError):
        SchwarzschildParams(e=-0.1)


def test_period_and_precession_estimate():
    params = SchwarzschildParams()
    assert params.period == pytest.approx(2.0 * math.pi * 28.0 ** 1.5, rel=1e-15)
    assert params.period == pytest.approx(930.93, abs=0.01)
    assert params.apocentre == 42.0
    estimate = pericenter_precession_estimate(params)
    assert estimate == pytest.approx(6.0 * math.pi / 21.0, rel=1e-15)
    assert estimate == pytest.approx(0.8976, abs=1e-4)


def test_vdp_field():
    system = vdp_system(VdpParams())
    npt.assert_allclose(system.field(np.array([2.0, 2.0]), 0.0), [2.0, -27.0], rtol=1e-15)
    npt.assert_array_equal(system.initial_state(), [2.0, 2.0])
    assert system.partition == 1
    assert system.variable_names == ["x", "y"]
    assert vdp_system(VdpParams(), partition=None).partition is None

    # forcing term at a quarter forcing period vanishes
    quarter = VdpParams().P_force / 4.0
    npt.assert_allclose(system.field(np.array([0.0, 0.0]), quarter), [0.0, 0.0], atol=1e-14)

    with pytest.raises(ValidationError):
        VdpParams(P_force=0.0)


def test_harmonic_oscillator():
    osc = harmonic_oscillator(2.0)
    q, p = np.array([1.0]), np.array([1.0])
    assert osc.value(q, p) == pytest.approx(2.5)
    npt.assert_array_equal(osc.grad_q(q, p), [4.0])
    npt.assert_array_equal(osc.grad_p(q, p), [1.0])
    assert osc.kinetic.value(p) + osc.potential.value(q) == osc.value(q, p)

    unit = harmonic_oscillator(1.0)
    quarter = unit.exact([1.0], [0.0], math.pi / 2.0)
    npt.assert_allclose(quarter.q, [0.0], atol=1e-15)
    npt.assert_allclose(quarter.p, [-1.0], rtol=1e-15)
    assert quarter.tau == pytest.approx(math.pi / 2.0)

    with pytest.raises(ValueError):
        harmonic_oscillator(0.0)
    with pytest.raises(ValueError):
        harmonic_oscillator(-1.0)


def test_sample_states_are_seeded_and_outside_the_photon_sphere():
    params = SchwarzschildParams()
    system = schwarzschild_system(params)
    states = schwarzschild_sample_states(params, 32, np.random.default_rng(7))
    again = schwarzschild_sample_states(params, 32, np.random.default_rng(7))
    assert len(states) == 32
    for state, repeat in zip(states, again):
        npt.assert_array_equal(state.as_vector(), repeat.as_vector())
        assert 3.0 * params.M < state.q[1] < 100.0 * params.M
        assert check_gradients(system, state), f"gradient mismatch at q={state.q}, p={state.p}"
    other = schwarzschild_sample_states(params, 32, np.random.default_rng(8))
    assert not np.array_equal(states[0].as_vector(), other[0].as_vector())


def test_geodesic_energy_along_oracle():
    params = SchwarzschildParams()
    system = schwarzschild_system(params)
    z0 = schwarzschild_initial_conditions(params).as_vector()
    t1 = 10.0 * params.period
    traj = oracle_hamiltonian(system, z0, t1, sample_times=np.linspace(0.0, t1, 2001))
    drift = max(abs(schwarzschild_energy_error(params, v)) for v in traj.invariants)
    logger.info(f"oracle |H - m²/2| over 10 orbits: {drift:.2e}")
    assert drift <= 1e-9


def test_circular_geodesic_keeps_its_radius():
    """e = 0 starts at r0 = a with p_r = 0, but only the GR angular momentum balances the orbit."""
    params = SchwarzschildParams(e=0.0)
    system = schwarzschild_system(params)
    kepler = schwarzschild_initial_conditions(params)
    r0, M, m = params.a, params.M, params.m
    assert kepler.q[1] == r0 and kepler.p[1] == 0.0
    assert abs(system.grad_q(kepler.q, kepler.p)[1]) > 1e-5

    p_phi = -math.sqrt(M * m * m * r0 * r0 / (r0 - 3.0 * M))
    p_t = math.sqrt((1.0 - 2.0 * M / r0) * (m * m + p_phi * p_phi / (r0 * r0)))
    q, p = np.array([0.0, r0, 0.0]), np.array([p_t, 0.0, p_phi])
    assert system.value(q, p) == pytest.approx(0.5 * m * m, abs=1e-14)
    assert abs(system.grad_q(q, p)[1]) <= 1e-12

    t1 = 0.25 * params.period
    traj = oracle_hamiltonian(system, np.concatenate([q, p]), t1, sample_times=np.linspace(0.0, t1, 51))
    radii = np.array([state[1] for state in traj.states])
    assert np.max(np.abs(radii - r0)) / r0 <= 1e-9
    assert traj.states[-1][2] > 1.0, "the particle should have swept a good part of the orbit"


def test_unforced_vdp_limit_cycle():
    system = vdp_system(VdpParams(A=0.0))
    times = np.linspace(50.0, 100.0, 5001)
    traj = oracle_solve(system.field, system.initial_state(), 0.0, 100.0, sample_times=times)
    amplitude = max(abs(state[0]) for state in traj.states)
    logger.info(f"unforced van der Pol amplitude: {amplitude:.4f}")
    assert 1.9 < amplitude < 2.2


def main():
    """Run all problem tests."""
    print("=" * 60)
    print("PROBLEM TESTS")
    print("=" * 60)
    tests = [
        test_geodesic_initial_conditions,
        test_geodesic_starts_on_mass_shell,
        test_geodesic_gradients,
        test_horizon_is_rejected,
        test_invalid_orbit_parameters,
        test_period_and_precession_estimate,
        test_vdp_field,
        test_harmonic_oscillator,
        test_sample_states_are_seeded_and_outside_the_photon_sphere,
        test_geodesic_energy_along_oracle,
        test_circular_geodesic_keeps_its_radius,
        test_unforced_vdp_limit_cycle,
    ]
    for test in tests:
        test()
        print(f"✅ {test.__name__}")
    print("\n🎉 All problem tests passed!")


if __name__ == "__main__":
    main()
