"""
Extended phase space leapfrogs for first-order systems x' = f(x, t).

Time becomes a coordinate with its own auxiliary copy, and the doubled system

    x' = f(x̃, t̃),  t' = 1,  x̃' = f(x, t),  t̃' = 1

splits into two exactly solvable halves.

Method 1 advances the whole primary vector from the auxiliary copy and vice
versa, one field evaluation per advance. Method 2 partitions x = (x, y) at
``sys.partition`` and pairs (x, ỹ, t) against (x̃, y, t̃); each block operator
evaluates the field on its own.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np

from composition import CompositionScheme, compose
from core import (
    DIVERGENCE_LIMIT,
    DivergenceError,
    EvalCounter,
    FirstOrderSystem,
    NonFiniteStateError,
    Trajectory,
    counted,
)
from logging_config import get_logger
from maps import LinearPhaseMap, mix_blocks, preset, project_blocks
from splitting import DriverMode

logger = get_logger("xps-leapfrog.nonham")


class PartitionError(ValueError):
    """Raised when Method 2 is used on a system without a partition point."""


class OdeMethod(str, Enum):
    METHOD1 = "method1"
    METHOD2 = "method2"


@dataclass(frozen=True, eq=False)
class ExtendedODEState:
    """Primary and auxiliary copies of x together with their times."""

    x: np.ndarray
    xt: np.ndarray
    t: float = 0.0
    tt: float = 0.0

    def __post_init__(self):
        if np.shape(self.x) != np.shape(self.xt):
            raise ValueError("x and x̃ must have equal length")

    @classmethod
    def clone(cls, x: np.ndarray, t: float = 0.0) -> "ExtendedODEState":
        x = np.array(x, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(x)):
            raise NonFiniteStateError("cannot clone a non-finite state")
        return cls(x=x, xt=x.copy(), t=float(t), tt=float(t))

    def diverged(self) -> bool:
        return not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.xt))) or max(
            np.max(np.abs(self.x)), np.max(np.abs(self.xt))) > DIVERGENCE_LIMIT


def _field(sys: FirstOrderSystem, x: np.ndarray, t: float) -> np.ndarray:
    value = sys.field(x, t)
    if not np.all(np.isfinite(value)):
        raise NonFiniteStateError(f"non-finite field value at t={t!r}")
    return value


def _partition(sys: FirstOrderSystem) -> int:
    if sys.partition is None:
        raise PartitionError(f"{type(sys).__name__} declares no partition point")
    return sys.partition


# Method 1 operators

def op_advance_primary(sys: FirstOrderSystem, s: ExtendedODEState, dt: float) -> ExtendedODEState:
    """x += dt f(x̃, t̃)."""
    return ExtendedODEState(x=s.x + dt * _field(sys, s.xt, s.tt), xt=s.xt, t=s.t, tt=s.tt)


def op_advance_auxiliary(sys: FirstOrderSystem, s: ExtendedODEState, dt: float) -> ExtendedODEState:
    """x̃ += dt f(x, t)."""
    return ExtendedODEState(x=s.x, xt=s.xt + dt * _field(sys, s.x, s.t), t=s.t, tt=s.tt)


def op_time(s: ExtendedODEState, dt: float) -> ExtendedODEState:
    return ExtendedODEState(x=s.x, xt=s.xt, t=s.t + dt, tt=s.tt)


def op_time_aux(s: ExtendedODEState, dt: float) -> ExtendedODEState:
    return ExtendedODEState(x=s.x, xt=s.xt, t=s.t, tt=s.tt + dt)


# Method 2 block operators; (x, ỹ, t) read (x̃, y, t̃) and (x̃, y, t̃) read (x, ỹ, t)

def _primary_point(s: ExtendedODEState, k: int) -> np.ndarray:
    return np.concatenate([s.xt[:k], s.x[k:]])


def _auxiliary_point(s: ExtendedODEState, k: int) -> np.ndarray:
    return np.concatenate([s.x[:k], s.xt[k:]])


def op_block_x(sys: FirstOrderSystem, s: ExtendedODEState, dt: float) -> ExtendedODEState:
    """x-part += dt f(x̃, y, t̃)."""
    k = _partition(sys)
    slope = _field(sys, _primary_point(s, k), s.tt)
    return ExtendedODEState(x=np.concatenate([s.x[:k] + dt * slope[:k], s.x[k:]]), xt=s.xt, t=s.t, tt=s.tt)


def op_block_yt(sys: FirstOrderSystem, s: ExtendedODEState, dt: float) -> ExtendedODEState:
    """ỹ += dt g(x̃, y, t̃)."""
    k = _partition(sys)
    slope = _field(sys, _primary_point(s, k), s.tt)
    return ExtendedODEState(x=s.x, xt=np.concatenate([s.xt[:k], s.xt[k:] + dt * slope[k:]]), t=s.t, tt=s.tt)


def op_block_xt(sys: FirstOrderSystem, s: ExtendedODEState, dt: float) -> ExtendedODEState:
    """x̃-part += dt f(x, ỹ, t)."""
    k = _partition(sys)
    slope = _field(sys, _auxiliary_point(s, k), s.t)
    return ExtendedODEState(x=s.x, xt=np.concatenate([s.xt[:k] + dt * slope[:k], s.xt[k:]]), t=s.t, tt=s.tt)


def op_block_y(sys: FirstOrderSystem, s: ExtendedODEState, dt: float) -> ExtendedODEState:
    """y += dt g(x, ỹ, t)."""
    k = _partition(sys)
    slope = _field(sys, _auxiliary_point(s, k), s.t)
    return ExtendedODEState(x=np.concatenate([s.x[:k], s.x[k:] + dt * slope[k:]]), xt=s.xt, t=s.t, tt=s.tt)


def _method1_outer(sys, s, dt):
    return op_time(op_advance_primary(sys, s, dt), dt)


def _method1_inner(sys, s, dt):
    return op_time_aux(op_advance_auxiliary(sys, s, dt), dt)


def _method2_outer(sys, s, dt):
    k = _partition(sys)
    if k < s.x.size:
        s = op_block_yt(sys, s, dt)
    return op_time(op_block_x(sys, s, dt), dt)


def _method2_inner(sys, s, dt):
    k = _partition(sys)
    if k < s.x.size:
        s = op_block_y(sys, s, dt)
    return op_time_aux(op_block_xt(sys, s, dt), dt)


def _symmetric_step(outer, inner, sys, s, h, mix1, partition):
    s = outer(sys, s, 0.5 * h)
    if mix1 is None or mix1.is_identity:
        s = inner(sys, s, h)
    else:
        s = inner(sys, s, 0.5 * h)
        x, xt = mix_blocks(mix1, s.x, s.xt, partition)
        s = ExtendedODEState(x=x, xt=xt, t=s.t, tt=s.tt)
        s = inner(sys, s, 0.5 * h)
    return outer(sys, s, 0.5 * h)


def method1_step(
    sys: FirstOrderSystem,
    s: ExtendedODEState,
    h: float,
    mix1: Optional[LinearPhaseMap] = None,
) -> ExtendedODEState:
    """
    Half step of (x, t) from (x̃, t̃), full step of (x̃, t̃) from the midpoint,
    half step of (x, t) to close. Three field evaluations.

    A non-identity ``mix1`` splits the full step around the map (four
    evaluations).
    """
    return _symmetric_step(_method1_outer, _method1_inner, sys, s, h, mix1, sys.partition)


def method2_step(
    sys: FirstOrderSystem,
    s: ExtendedODEState,
    h: float,
    mix1: Optional[LinearPhaseMap] = None,
) -> ExtendedODEState:
    """
    Half step of (x, ỹ, t) from (x̃, y, t̃), full step of (x̃, y, t̃) from the
    midpoint, half step of (x, ỹ, t) to close. Six field evaluations, two per
    stage; an empty y-part drops its operators.

    Raises:
        PartitionError: If ``sys`` has no partition point
    """
    _partition(sys)
    return _symmetric_step(_method2_outer, _method2_inner, sys, s, h, mix1, sys.partition)


_STEPS: dict[OdeMethod, Callable] = {OdeMethod.METHOD1: method1_step, OdeMethod.METHOD2: method2_step}


def integrate_ode(
    sys: FirstOrderSystem,
    method: OdeMethod,
    x0: np.ndarray,
    h: float,
    n_steps: int,
    mix1: Optional[LinearPhaseMap] = None,
    mix2: Optional[LinearPhaseMap] = None,
    projection: Optional[LinearPhaseMap] = None,
    mode: DriverMode = DriverMode.PROJECT_EACH_STEP,
    composition: Optional[CompositionScheme] = None,
    t0: float = 0.0,
    sample_every: int = 1,
    counter: Optional[EvalCounter] = None,
) -> Trajectory:
    """
    Integrate a first-order system from a cloned initial state.

    Each base step is the method step (with ``mix1`` in the middle) followed
    by ``mix2``. In PROJECT_EACH_STEP mode every composited step is projected
    and re-cloned; in EXTENDED mode the projection is only used for output.
    Both times are reset to t0 + k h after step k.

    Args:
        sys: First-order system (uncounted; counting is done here)
        method: Method 1 or Method 2
        x0: Initial state
        h: Step size
        n_steps: Number of full steps, at least 0
        mix1: Mid-step mixing map, identity when None
        mix2: End-of-step mixing map, identity when None
        projection: Output projection, averaging when None
        mode: Driver mode
        composition: Optional composition of the mixed base step
        t0: Initial time
        sample_every: Sample stride; the last step is always sampled
        counter: Counter to accumulate into (a fresh one when None)

    Returns:
        Trajectory of projected states; the invariant column is NaN

    Raises:
        DivergenceError: If a component exceeds 1e12 or becomes non-finite
        PartitionError: If Method 2 is requested without a partition
    """
    if n_steps < 0:
        raise ValueError("n_steps must be non-negative")
    if sample_every < 1:
        raise ValueError("sample_every must be at least 1")
    method = OdeMethod(method)
    if method is OdeMethod.METHOD2:
        _partition(sys)
    projection = projection or preset("proj_average")
    counter = counter if counter is not None else EvalCounter()
    csys = counted(sys, counter)
    partition = sys.partition
    method_step = _STEPS[method]

    def base(state: ExtendedODEState, dt: float) -> ExtendedODEState:
        state = method_step(csys, state, dt, mix1)
        if mix2 is not None and not mix2.is_identity:
            x, xt = mix_blocks(mix2, state.x, state.xt, partition)
            state = ExtendedODEState(x=x, xt=xt, t=state.t, tt=state.tt)
        return state

    step = compose(base, composition) if composition is not None else base

    logger.debug(f"integrate_ode: {method.value} h={h!r} n_steps={n_steps} mode={mode.value} "
                 f"mix1={mix1} mix2={mix2} projection={projection} "
                 f"composition={composition.name if composition else 'none'}")

    trajectory = Trajectory(labels=sys.variable_names)
    s = ExtendedODEState.clone(x0, t0)
    trajectory.append(0, t0, t0, project_blocks(projection, s.x, s.xt, partition), float("nan"), counter.count)
    for k in range(1, n_steps + 1):
        advanced = step(s, h)
        if advanced.diverged():
            trajectory.diverged = True
            trajectory.message = f"diverged at step {k}; last valid step {k - 1}"
            logger.error(f"Integration with {method.value} {trajectory.message}")
            raise DivergenceError(trajectory.message, step=k - 1, trajectory=trajectory)
        t = t0 + k * h
        if mode is DriverMode.PROJECT_EACH_STEP:
            s = ExtendedODEState.clone(project_blocks(projection, advanced.x, advanced.xt, partition), t)
        else:
            s = ExtendedODEState(x=advanced.x, xt=advanced.xt, t=t, tt=t)
        if k % sample_every == 0 or k == n_steps:
            trajectory.append(k, t, t, project_blocks(projection, s.x, s.xt, partition), float("nan"), counter.count)

    logger.debug(f"integrate_ode: {n_steps} steps, {counter.count} evaluations")
    return trajectory
