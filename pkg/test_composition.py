#!/usr/bin/env python3
"""
Tests for palindromic compositions of a second-order base step.

Run with ``uv run pytest test_composition.py`` or directly with
``uv run test_composition.py``.
"""

import math

import numpy as np
import numpy.testing as npt
import pytest
from pydantic import ValidationError

from composition import (
    CompositionScheme,
    UnknownCompositionError,
    compose,
    composition_preset,
    identity,
    kahan6,
    yoshida4,
)
from core import PhaseState, clone_up
from logging_config import get_logger
from maps import preset
from problems import SchwarzschildParams, harmonic_oscillator, schwarzschild_initial_conditions, schwarzschild_system
from splitting import leapfrog_step, scheme, stormer_verlet_step

logger = get_logger("xps-leapfrog.test")


def _error_at(scheme: CompositionScheme, h: float, t_end: float) -> float:
    osc = harmonic_oscillator(1.0)
    start = PhaseState(q=[1.0], p=[0.0])
    step = compose(lambda s, dt: stormer_verlet_step(osc.kinetic, osc.potential, s, dt), scheme)
    s = start
    for _ in range(round(t_end / h)):
        s = step(s, h)
    exact = osc.exact(start.q, start.p, t_end)
    return float(np.max(np.abs(s.as_vector() - exact.as_vector())))


def _observed_order(scheme: CompositionScheme, h: float, t_end: float) -> float:
    coarse = _error_at(scheme, h, t_end)
    fine = _error_at(scheme, h / 2, t_end)
    logger.info(f"{scheme.name}: error {coarse:.3e} at h={h}, {fine:.3e} at h={h / 2}")
    return math.log2(coarse / fine)


def test_catalog_coefficients():
    for scheme in (kahan6(), yoshida4()):
        assert abs(math.fsum(scheme.gammas) - 1.0) <= 1e-15, f"{scheme.name} does not sum to one"
        assert scheme.gammas == tuple(reversed(scheme.gammas)), f"{scheme.name} is not palindromic"
    assert kahan6().stages == 9
    assert yoshida4().stages == 3
    assert identity().gammas == (1.0,)


def test_presets():
    assert composition_preset("none").name == "none"
    assert composition_preset("kahan6").stages == 9
    with pytest.raises(UnknownCompositionError):
        composition_preset("suzuki8")


def test_invalid_coefficients_rejected():
    with pytest.raises(ValidationError):
        CompositionScheme(gammas=(0.5, 0.4))
    with pytest.raises(ValidationError):
        CompositionScheme(gammas=(0.2, 0.8))
    with pytest.raises(ValidationError):
        CompositionScheme(gammas=())


def test_compose_runs_substeps_in_order():
    base = lambda state, h: state + [h]  # noqa: E731
    assert compose(base, identity()) is base

    scheme = CompositionScheme(gammas=(0.25, 0.5, 0.25))
    assert compose(base, scheme)([], 2.0) == [0.5, 1.0, 0.5]


def test_yoshida4_is_fourth_order():
    order = _observed_order(yoshida4(), 0.2, 2.0)
    assert 3.7 < order < 4.3, f"yoshida4 observed order {order:.2f}"


def test_kahan6_is_sixth_order():
    order = _observed_order(kahan6(), 0.4, 4.0)
    assert 5.5 < order < 6.5, f"kahan6 observed order {order:.2f}"


def test_composited_extended_step_is_reversible():
    params = SchwarzschildParams()
    system = schwarzschild_system(params)
    start = clone_up(schwarzschild_initial_conditions(params))
    h = 0.02 * params.period
    mix1 = preset("swap_both")
    base = scheme("QPtQtP")
    for composition in (yoshida4(), kahan6()):
        step = compose(lambda s, dt: leapfrog_step(system, base, s, dt, mix1=mix1), composition)
        back = step(step(start, h), -h)
        npt.assert_allclose(back.as_vector(), start.as_vector(), rtol=1e-12, atol=1e-12,
                            err_msg=f"{composition.name} forward then backward")


def main():
    """Run all composition tests."""
    print("=" * 60)
    print("COMPOSITION TESTS")
    print("=" * 60)
    tests = [
        test_catalog_coefficients,
        test_presets,
        test_invalid_coefficients_rejected,
        test_compose_runs_substeps_in_order,
        test_yoshida4_is_fourth_order,
        test_kahan6_is_sixth_order,
        test_composited_extended_step_is_reversible,
    ]
    for test in tests:
        test()
        print(f"✅ {test.__name__}")
    print("\n🎉 All composition tests passed!")


if __name__ == "__main__":
    main()
