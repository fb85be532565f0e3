"""
Baseline and reference integrators.

- ``implicit_midpoint_step``: the symplectic implicit baseline, solved by
  fixed-point iteration.
- ``oracle_solve``: high-accuracy adaptive solution with scipy's DOP853
  (or LSODA), stepped manually so the step budget and sampling are ours.
- ``prk_step``: explicit partitioned Runge-Kutta stepper for separable
  systems x' = f(y), y' = g(x), used to check the tableau form of the
  leapfrogs.
"""

from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.integrate import DOP853, LSODA

from core import EvalCounter, FirstOrderSystem, HamiltonianFlow, HamiltonianSystem, IntegrationError, Trajectory
from logging_config import PerformanceLogger, get_logger

logger = get_logger("xps-leapfrog.reference")

VectorField = Callable[[np.ndarray, float], np.ndarray]


class ConvergenceError(IntegrationError):
    """Raised when the implicit midpoint iteration does not converge; reduce h."""


class OracleError(IntegrationError):
    """Raised when the reference solver fails or exhausts its step budget."""


class InvalidTableauError(ValueError):
    """Raised for a tableau with inconsistent shapes or weights."""


class NonExplicitTableauError(ValueError):
    """Raised when the stages of a tableau cannot be evaluated explicitly."""


def implicit_midpoint_step(
    field: VectorField,
    x: np.ndarray,
    t: float,
    h: float,
    tol: float = 1e-15,
    max_iter: int = 100,
) -> np.ndarray:
    """
    Solve x' = x + h f((x' + x)/2, t + h/2) by fixed-point iteration.

    The iteration starts from x + h f(x, t + h/2) and stops once
    ||x'_{k+1} - x'_k|| <= tol ||x'_{k+1}||.

    Args:
        field: Right-hand side f(x, t); wrap the system with ``counted`` to count calls
        x: Current state
        t: Current time
        h: Step size
        tol: Relative stopping tolerance
        max_iter: Iteration budget after the initial guess

    Returns:
        The new state

    Raises:
        ConvergenceError: If the iteration has not converged after ``max_iter`` updates
    """
    t_mid = t + 0.5 * h
    current = x + h * field(x, t_mid)
    for _ in range(max_iter):
        updated = x + h * field(0.5 * (current + x), t_mid)
        change = np.linalg.norm(updated - current)
        current = updated
        if change <= tol * np.linalg.norm(updated):
            return current
    if not np.all(np.isfinite(current)):
        raise ConvergenceError(f"implicit midpoint iterate became non-finite at t={t!r}, h={h!r}")
    raise ConvergenceError(f"implicit midpoint did not converge in {max_iter} iterations at t={t!r}; step size {h!r} too large")


def integrate_implicit_midpoint(
    system: FirstOrderSystem,
    x0: np.ndarray,
    h: float,
    n_steps: int,
    t0: float = 0.0,
    sample_every: int = 1,
    tol: float = 1e-15,
    max_iter: int = 100,
    counter: Optional[EvalCounter] = None,
    invariant: Optional[Callable[[np.ndarray], float]] = None,
) -> Trajectory:
    """
    Fixed-step implicit midpoint run; ``system`` should already be counted.

    ``counter`` is only read to fill the evaluation column.
    """
    counter = counter if counter is not None else EvalCounter()
    trajectory = Trajectory(labels=system.variable_names)
    x = np.asarray(x0, dtype=np.float64).copy()
    invariant = invariant or (lambda _: float("nan"))
    trajectory.append(0, t0, t0, x, invariant(x), counter.count)
    for k in range(1, n_steps + 1):
        x = implicit_midpoint_step(system.field, x, t0 + (k - 1) * h, h, tol=tol, max_iter=max_iter)
        if k % sample_every == 0 or k == n_steps:
            t = t0 + k * h
            trajectory.append(k, t, t, x, invariant(x), counter.count)
    return trajectory


class OracleMethod(str, Enum):
    DOP853 = "DOP853"
    LSODA = "LSODA"


class OracleConfig(BaseModel):
    """Tolerances and budget of the reference solver."""

    model_config = ConfigDict(frozen=True)

    rel_tol: float = Field(default=1e-13, gt=0.0, description="Relative tolerance")
    abs_tol: float = Field(default=1e-15, gt=0.0, description="Absolute tolerance")
    initial_step: Optional[float] = Field(default=None, gt=0.0, description="First step; solver chooses when None")
    max_steps: int = Field(default=10_000_000, gt=0, description="Step budget")
    method: OracleMethod = Field(default=OracleMethod.DOP853, description="scipy.integrate solver class")

    @field_validator("rel_tol")
    @classmethod
    def _above_round_off(cls, value: float) -> float:
        floor = 10.0 * np.finfo(np.float64).eps
        if value < floor:
            raise ValueError(f"rel_tol {value!r} is below 10 machine epsilons ({floor!r})")
        return value


_SOLVERS = {OracleMethod.DOP853: DOP853, OracleMethod.LSODA: LSODA}


def oracle_solve(
    field: VectorField,
    x0: np.ndarray,
    t0: float,
    t1: float,
    cfg: OracleConfig = OracleConfig(),
    sample_times: Optional[Sequence[float]] = None,
    labels: Optional[Sequence[str]] = None,
    counter: Optional[EvalCounter] = None,
    invariant: Optional[Callable[[np.ndarray], float]] = None,
) -> Trajectory:
    """
    Reference solution of x' = field(x, t) on [t0, t1].

    Samples are produced with the solver's dense output, which for DOP853 is
    seventh order, so sampling does not limit the comparison.

    Args:
        field: Right-hand side; wrap with ``counted`` to account evaluations
        x0: Initial state
        t0: Start time
        t1: End time, greater than t0
        cfg: Solver configuration
        sample_times: Increasing times in [t0, t1]; defaults to (t0, t1)
        labels: Column labels, x0..x{n-1} by default
        counter: Counter read for the evaluation column
        invariant: Optional function of the state recorded per sample

    Returns:
        Trajectory sampled at ``sample_times``, step index = sample index

    Raises:
        ValueError: If t1 <= t0 or sample times leave [t0, t1]
        OracleError: If the solver fails or exceeds ``cfg.max_steps``
    """
    if not t1 > t0:
        raise ValueError(f"oracle needs t1 > t0, got t0={t0!r}, t1={t1!r}")
    x0 = np.asarray(x0, dtype=np.float64)
    times = np.asarray(sample_times if sample_times is not None else (t0, t1), dtype=np.float64)
    if times.size and (times[0] < t0 or times[-1] > t1 or np.any(np.diff(times) < 0)):
        raise ValueError("sample times must be increasing and inside [t0, t1]")

    counter = counter if counter is not None else EvalCounter()
    invariant = invariant or (lambda _: float("nan"))
    trajectory = Trajectory(labels=list(labels) if labels else [f"x{i}" for i in range(x0.size)])

    kwargs = dict(rtol=cfg.rel_tol, atol=cfg.abs_tol)
    if cfg.initial_step is not None:
        kwargs["first_step"] = cfg.initial_step
    solver = _SOLVERS[cfg.method](lambda t, x: field(x, t), t0, x0, t1, **kwargs)

    with PerformanceLogger() as perf:
        perf.start(f"oracle_solve[{cfg.method.value}]")
        index = 0
        while index < times.size and times[index] == t0:
            trajectory.append(index, t0, t0, x0, invariant(x0), counter.count)
            index += 1
        steps = 0
        while solver.status == "running":
            if steps >= cfg.max_steps:
                raise OracleError(f"oracle exceeded max_steps={cfg.max_steps} at t={solver.t!r}")
            message = solver.step()
            steps += 1
            if solver.status == "failed":
                raise OracleError(f"oracle failed at t={solver.t!r}: {message}")
            if index < times.size and times[index] <= solver.t:
                dense = solver.dense_output()
                while index < times.size and times[index] <= solver.t:
                    x = dense(times[index])
                    trajectory.append(index, times[index], times[index], x, invariant(x), counter.count)
                    index += 1
    logger.debug(f"oracle_solve: {steps} steps, {solver.nfev} field calls, rtol={cfg.rel_tol:g}")
    return trajectory


def oracle_hamiltonian(
    system: HamiltonianSystem,
    z0: np.ndarray,
    t1: float,
    cfg: OracleConfig = OracleConfig(),
    sample_times: Optional[Sequence[float]] = None,
    counter: Optional[EvalCounter] = None,
) -> Trajectory:
    """Oracle solve of Hamilton's equations with H recorded per sample."""
    flow = HamiltonianFlow(system)
    n = system.dim
    return oracle_solve(flow.field, z0, 0.0, t1, cfg, sample_times=sample_times, labels=system.labels,
                        counter=counter, invariant=lambda z: system.value(z[:n], z[n:]))


def hamiltonian_field(system: HamiltonianSystem) -> VectorField:
    """Right-hand side (grad_p H, -grad_q H) on z = (q, p)."""
    return HamiltonianFlow(system).field


class PRKTableau(BaseModel):
    """Coefficients of a two-part partitioned Runge-Kutta method."""

    model_config = ConfigDict(frozen=True)

    a1: tuple[tuple[float, ...], ...] = Field(description="Stage matrix of the x part")
    b1: tuple[float, ...] = Field(description="Weights of the x part")
    a2: tuple[tuple[float, ...], ...] = Field(description="Stage matrix of the y part")
    b2: tuple[float, ...] = Field(description="Weights of the y part")
    name: str = "custom"

    @model_validator(mode="after")
    def _consistent(self) -> "PRKTableau":
        s = len(self.b1)
        if s == 0 or len(self.b2) != s:
            raise InvalidTableauError("weights must be non-empty and of equal length")
        for matrix in (self.a1, self.a2):
            if len(matrix) != s or any(len(row) != s for row in matrix):
                raise InvalidTableauError(f"stage matrices must be {s}x{s}")
        for weights in (self.b1, self.b2):
            if abs(sum(weights) - 1.0) > 1e-15:
                raise InvalidTableauError(f"weights {weights} do not sum to 1")
        return self

    @property
    def stages(self) -> int:
        return len(self.b1)


def leapfrog_tableau() -> PRKTableau:
    """Störmer-Verlet (kick-drift-kick) written as a two-stage PRK."""
    return PRKTableau(
        a1=((0.0, 0.0), (0.5, 0.5)), b1=(0.5, 0.5),
        a2=((0.5, 0.0), (0.5, 0.0)), b2=(0.5, 0.5),
        name="leapfrog",
    )


def extended_leapfrog_tableau(alpha1: float = 1.0, alpha2: float = 1.0) -> PRKTableau:
    """
    First step of the QP̃Q̃P extended leapfrog from a cloned state, with
    shared-weight mixing maps M1 = (alpha1, alpha1) and M2 = (alpha2, alpha2),
    for x = (q, p̃), y = (q̃, p) and f = g = (grad_p H, -grad_q H).

    From a clone x0 = y0 the two slope families coincide, so both parts share
    one explicit stage matrix: the stages alternate between the x and y points
    and M1 blends the first two slopes into the third and fourth stage. Only
    the weights differ, mirroring M2 between the two outputs.
    """
    a, b = alpha1, alpha2
    same = 0.5 * (b * a + (1.0 - b) * (1.0 - a))
    cross = 0.5 * (b * (1.0 - a) + (1.0 - b) * a)
    stages = ((0.0, 0.0, 0.0, 0.0),
              (0.5, 0.0, 0.0, 0.0),
              (0.5 * a, 0.5 * (1.0 - a), 0.0, 0.0),
              (0.5 * (1.0 - a), 0.5 * a, 0.5, 0.0))
    return PRKTableau(
        a1=stages,
        b1=(same, cross, 0.5 * (1.0 - b), 0.5 * b),
        a2=stages,
        b2=(cross, same, 0.5 * b, 0.5 * (1.0 - b)),
        name=f"extended_leapfrog({alpha1:g},{alpha2:g})",
    )


def prk_step(
    tableau: PRKTableau,
    f: Callable[[np.ndarray], np.ndarray],
    g: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    y0: np.ndarray,
    h: float,
) -> tuple[np.ndarray, np.ndarray]:
    """
    One step of a partitioned Runge-Kutta method for x' = f(y), y' = g(x).

    Stage slopes k_i = f(Y_i) and l_i = g(X_i) with
    X_i = x0 + h sum_j a1_ij k_j and Y_i = y0 + h sum_j a2_ij l_j. Slopes are
    resolved in a fixed sweep order: each pass over i = 1..s computes k_i,
    then l_i, as soon as the slopes they depend on are known.

    Raises:
        NonExplicitTableauError: If a sweep makes no progress
    """
    s = tableau.stages
    a1 = np.array(tableau.a1)
    a2 = np.array(tableau.a2)
    x0 = np.asarray(x0, dtype=np.float64)
    y0 = np.asarray(y0, dtype=np.float64)
    k: list[Optional[np.ndarray]] = [None] * s
    l: list[Optional[np.ndarray]] = [None] * s

    def ready(row: np.ndarray, slopes) -> bool:
        return all(slopes[j] is not None for j in range(s) if row[j] != 0.0)

    def stage(base: np.ndarray, row: np.ndarray, slopes) -> np.ndarray:
        value = base.copy()
        for j in range(s):
            if row[j] != 0.0:
                value = value + h * row[j] * slopes[j]
        return value

    remaining = 2 * s
    while remaining:
        progress = 0
        for i in range(s):
            if k[i] is None and ready(a2[i], l):
                k[i] = f(stage(y0, a2[i], l))
                progress += 1
            if l[i] is None and ready(a1[i], k):
                l[i] = g(stage(x0, a1[i], k))
                progress += 1
        if not progress:
            raise NonExplicitTableauError(f"tableau '{tableau.name}' has implicit stages for this splitting")
        remaining -= progress

    x1 = x0 + h * sum(tableau.b1[i] * k[i] for i in range(s))
    y1 = y0 + h * sum(tableau.b2[i] * l[i] for i in range(s))
    return x1, y1
