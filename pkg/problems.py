"""
Test systems: equatorial Schwarzschild geodesics, the forced van der Pol
oscillator and a separable harmonic oscillator with a known exact solution.

Geometric units G = c = 1. The geodesic Hamiltonian is H = ½ g^{ab} p_a p_b
over q = (t, r, φ), so a particle of mass m sits on H = m²/2.
"""

import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from core import FirstOrderSystem, HamiltonianSystem, IntegrationError, PhaseState, SeparablePart


class SingularMetricError(IntegrationError):
    """Raised when the metric is evaluated at or inside the horizon r <= 2M."""


class SchwarzschildParams(BaseModel):
    """Central mass, test mass and the classical orbit it starts on."""

    model_config = ConfigDict(frozen=True)

    M: float = Field(default=1.0, gt=0.0, description="Central mass")
    m: float = Field(default=1.0, gt=0.0, description="Test-particle mass")
    a: float = Field(default=28.0, gt=0.0, description="Semi-major axis of the classical orbit")
    e: float = Field(default=0.5, ge=0.0, lt=1.0, description="Eccentricity")

    @model_validator(mode="after")
    def _outside_horizon(self) -> "SchwarzschildParams":
        if self.a * (1.0 - self.e) <= 2.0 * self.M:
            raise ValueError(f"pericentre a(1-e)={self.a * (1.0 - self.e)!r} must lie outside r=2M={2.0 * self.M!r}")
        return self

    @property
    def period(self) -> float:
        """Classical orbital period 2π sqrt(a³/M), the time unit for h."""
        return 2.0 * math.pi * math.sqrt(self.a ** 3 / self.M)

    @property
    def apocentre(self) -> float:
        return self.a * (1.0 + self.e)


class VdpParams(BaseModel):
    """Forced van der Pol oscillator parameters."""

    model_config = ConfigDict(frozen=True)

    mu: float = Field(default=5.0, description="Nonlinear damping strength")
    A: float = Field(default=5.0, description="Forcing amplitude")
    P_force: float = Field(default=2.0 * math.pi / 2.463, gt=0.0, description="Forcing period")
    x0: float = Field(default=2.0, description="Initial position")
    y0: float = Field(default=2.0, description="Initial velocity")


class SchwarzschildSystem(HamiltonianSystem):
    """Equatorial geodesics, q = (t, r, φ), p = (p_t, p_r, p_φ)."""

    dim = 3

    def __init__(self, params: SchwarzschildParams):
        self.params = params
        self._two_m = 2.0 * params.M

    def _lapse(self, r: float) -> float:
        if not r > self._two_m:
            raise SingularMetricError(f"metric is singular at r={r!r} <= 2M={self._two_m!r}")
        return 1.0 - self._two_m / r

    def value(self, q, p):
        r = q[1]
        f = self._lapse(r)
        return 0.5 * (p[0] * p[0] / f - f * p[1] * p[1] - p[2] * p[2] / (r * r))

    def grad_q(self, q, p):
        r = q[1]
        f = self._lapse(r)
        df = self._two_m / (r * r)
        dr = 0.5 * (-df * p[0] * p[0] / (f * f) - df * p[1] * p[1] + 2.0 * p[2] * p[2] / (r * r * r))
        # t and φ are cyclic
        return np.array([0.0, dr, 0.0])

    def grad_p(self, q, p):
        r = q[1]
        f = self._lapse(r)
        return np.array([p[0] / f, -f * p[1], -p[2] / (r * r)])

    @property
    def coordinate_names(self):
        return ["t", "r", "phi"]

    @property
    def momentum_names(self):
        return ["p_t", "p_r", "p_phi"]


def schwarzschild_system(params: SchwarzschildParams) -> SchwarzschildSystem:
    return SchwarzschildSystem(params)


def schwarzschild_initial_conditions(params: SchwarzschildParams) -> PhaseState:
    """
    Start at the apocentre of the classical orbit with Keplerian speed.

    r0 = a(1+e), v0 = sqrt((1-e)/r0), φ'0 = v0/r0, p_φ = -r0² φ'0, p_r = 0 and
    p_t the positive root of H = m²/2.

    Raises:
        SingularMetricError: If no real p_t exists

    Examples:
        >>> s = schwarzschild_initial_conditions(SchwarzschildParams(a=28, e=0.5))
        >>> s.q
        array([ 0., 42.,  0.])
    """
    r0 = params.apocentre
    v0 = math.sqrt((1.0 - params.e) / r0)
    p_phi = -r0 * r0 * (v0 / r0)
    f = 1.0 - 2.0 * params.M / r0
    radicand = f * (params.m ** 2 + p_phi * p_phi / (r0 * r0))
    if not radicand > 0.0:
        raise SingularMetricError(f"no real p_t for {params}")
    return PhaseState(q=[0.0, r0, 0.0], p=[math.sqrt(radicand), 0.0, p_phi])


def schwarzschild_sample_states(params: SchwarzschildParams, n: int, rng: np.random.Generator) -> list[PhaseState]:
    """
    Random phase-space points away from the horizon: r uniform in (3M, 100M),
    t and φ anywhere, p_t in (m, 2m), |p_r| < 1 and |p_φ| < 10 M m.
    """
    M, m = params.M, params.m
    states = []
    for _ in range(n):
        q = [rng.uniform(0.0, 100.0 * M), rng.uniform(3.0 * M, 100.0 * M), rng.uniform(0.0, 2.0 * math.pi)]
        p = [rng.uniform(m, 2.0 * m), rng.uniform(-1.0, 1.0), rng.uniform(-10.0, 10.0) * M * m]
        states.append(PhaseState(q=q, p=p))
    return states


def schwarzschild_energy_error(params: SchwarzschildParams, value: float) -> float:
    """H - m²/2."""
    return value - 0.5 * params.m ** 2


def pericenter_precession_estimate(params: SchwarzschildParams) -> float:
    """First-order precession per orbit, 6πM / ((1 - e²) a)."""
    return 6.0 * math.pi * params.M / ((1.0 - params.e ** 2) * params.a)


class VanDerPolSystem(FirstOrderSystem):
    """x' = y, y' = mu (1 - x²) y - x + A cos(2π t / P_force)."""

    dim = 2

    def __init__(self, params: VdpParams, partition: int | None = 1):
        self.params = params
        self.partition = partition
        self._omega = 2.0 * math.pi / params.P_force

    def field(self, x, t):
        position, velocity = x[0], x[1]
        p = self.params
        return np.array([
            velocity,
            p.mu * (1.0 - position * position) * velocity - position + p.A * math.cos(self._omega * t),
        ])

    @property
    def variable_names(self):
        return ["x", "y"]

    def initial_state(self) -> np.ndarray:
        return np.array([self.params.x0, self.params.y0])


def vdp_system(params: VdpParams, partition: int | None = 1) -> VanDerPolSystem:
    return VanDerPolSystem(params, partition=partition)


class KineticPart(SeparablePart):
    """T(p) = ½ |p|²."""

    def __init__(self, dim: int = 1):
        self.dim = dim

    def value(self, x):
        return 0.5 * float(np.dot(x, x))

    def grad(self, x):
        return np.array(x, dtype=np.float64)


class QuadraticPotential(SeparablePart):
    """V(q) = ½ ω² |q|²."""

    def __init__(self, omega: float, dim: int = 1):
        self.omega = omega
        self.dim = dim

    def value(self, x):
        return 0.5 * self.omega ** 2 * float(np.dot(x, x))

    def grad(self, x):
        return self.omega ** 2 * np.asarray(x, dtype=np.float64)


class HarmonicOscillator(HamiltonianSystem):
    """H = ½ |p|² + ½ ω² |q|², also available as separate T and V parts."""

    def __init__(self, omega: float = 1.0, dim: int = 1):
        if omega <= 0:
            raise ValueError("omega must be positive")
        self.omega = omega
        self.dim = dim
        self.kinetic = KineticPart(dim)
        self.potential = QuadraticPotential(omega, dim)

    def value(self, q, p):
        return self.kinetic.value(p) + self.potential.value(q)

    def grad_q(self, q, p):
        return self.potential.grad(q)

    def grad_p(self, q, p):
        return self.kinetic.grad(p)

    def exact(self, q0, p0, t: float) -> PhaseState:
        """Exact flow from (q0, p0) after time t."""
        w = self.omega
        c, s = math.cos(w * t), math.sin(w * t)
        q0 = np.asarray(q0, dtype=np.float64)
        p0 = np.asarray(p0, dtype=np.float64)
        return PhaseState(q=q0 * c + p0 * s / w, p=-q0 * w * s + p0 * c, tau=t)


def harmonic_oscillator(omega: float = 1.0, dim: int = 1) -> HarmonicOscillator:
    return HarmonicOscillator(omega, dim)
