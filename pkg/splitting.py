"""
Extended phase space leapfrogs for inseparable Hamiltonians.

The doubled Hamiltonian H(q, p̃) + H(q̃, p) splits into two exactly solvable
parts. Their component flows are the four operators

    Q   q  += dt * grad_p H(q̃, p)
    Q̃   q̃  += dt * grad_p H(q, p̃)
    P   p  -= dt * grad_q H(q, p̃)
    P̃   p̃  -= dt * grad_q H(q̃, p)

with [Q, P̃] = [Q̃, P] = 0. H1 = Q̃P and H2 = QP̃ are the combined commuting
pairs. A base step is a palindrome of half-step operators with the mixing map
M1 in the middle and M2 at the end.
"""

from enum import Enum
from typing import Callable, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from composition import CompositionScheme, compose
from core import (
    DIVERGENCE_LIMIT,
    DivergenceError,
    EvalCounter,
    ExtendedState,
    HamiltonianSystem,
    NonFiniteStateError,
    PhaseState,
    SeparablePart,
    Trajectory,
    clone_up,
    counted,
)
from logging_config import get_logger
from maps import LinearPhaseMap, apply_mixing, apply_projection, preset

logger = get_logger("xps-leapfrog.splitting")


class UnknownSchemeError(ValueError):
    """Raised for a scheme name that is not in the catalog."""


class OperatorTag(str, Enum):
    Q = "Q"
    QT = "Qt"
    P = "P"
    PT = "Pt"
    H1 = "H1"
    H2 = "H2"


class DriverMode(str, Enum):
    EXTENDED = "extended"
    PROJECT_EACH_STEP = "project-each-step"


# variable blocks advanced by each operator
_ADVANCES = {
    OperatorTag.Q: ("q",),
    OperatorTag.QT: ("qt",),
    OperatorTag.P: ("p",),
    OperatorTag.PT: ("pt",),
    OperatorTag.H1: ("qt", "p"),
    OperatorTag.H2: ("q", "pt"),
}

_EVALUATIONS = {tag: len(blocks) for tag, blocks in _ADVANCES.items()}


def _checked(values: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(values)):
        raise NonFiniteStateError(f"non-finite {what}")
    return values


def op_drift_q(sys: HamiltonianSystem, s: ExtendedState, dt: float) -> ExtendedState:
    """q += dt * grad_p H(q̃, p)."""
    g = _checked(sys.grad_p(s.qt, s.p), "grad_p H(q̃, p)")
    return ExtendedState(q=s.q + dt * g, qt=s.qt, p=s.p, pt=s.pt, tau=s.tau, t=s.t, tt=s.tt)


def op_drift_qt(sys: HamiltonianSystem, s: ExtendedState, dt: float) -> ExtendedState:
    """q̃ += dt * grad_p H(q, p̃)."""
    g = _checked(sys.grad_p(s.q, s.pt), "grad_p H(q, p̃)")
    return ExtendedState(q=s.q, qt=s.qt + dt * g, p=s.p, pt=s.pt, tau=s.tau, t=s.t, tt=s.tt)


def op_kick_p(sys: HamiltonianSystem, s: ExtendedState, dt: float) -> ExtendedState:
    """p -= dt * grad_q H(q, p̃)."""
    g = _checked(sys.grad_q(s.q, s.pt), "grad_q H(q, p̃)")
    return ExtendedState(q=s.q, qt=s.qt, p=s.p - dt * g, pt=s.pt, tau=s.tau, t=s.t, tt=s.tt)


def op_kick_pt(sys: HamiltonianSystem, s: ExtendedState, dt: float) -> ExtendedState:
    """p̃ -= dt * grad_q H(q̃, p)."""
    g = _checked(sys.grad_q(s.qt, s.p), "grad_q H(q̃, p)")
    return ExtendedState(q=s.q, qt=s.qt, p=s.p, pt=s.pt - dt * g, tau=s.tau, t=s.t, tt=s.tt)


def op_h1(sys: HamiltonianSystem, s: ExtendedState, dt: float) -> ExtendedState:
    """Exact flow of H(q, p̃): Q̃ and P evaluated at the same point."""
    dq = _checked(sys.grad_p(s.q, s.pt), "grad_p H(q, p̃)")
    dp = _checked(sys.grad_q(s.q, s.pt), "grad_q H(q, p̃)")
    return ExtendedState(q=s.q, qt=s.qt + dt * dq, p=s.p - dt * dp, pt=s.pt, tau=s.tau, t=s.t, tt=s.tt)


def op_h2(sys: HamiltonianSystem, s: ExtendedState, dt: float) -> ExtendedState:
    """Exact flow of H(q̃, p): Q and P̃ evaluated at the same point."""
    dq = _checked(sys.grad_p(s.qt, s.p), "grad_p H(q̃, p)")
    dp = _checked(sys.grad_q(s.qt, s.p), "grad_q H(q̃, p)")
    return ExtendedState(q=s.q + dt * dq, qt=s.qt, p=s.p, pt=s.pt - dt * dp, tau=s.tau, t=s.t, tt=s.tt)


OPERATORS: dict[OperatorTag, Callable[[HamiltonianSystem, ExtendedState, float], ExtendedState]] = {
    OperatorTag.Q: op_drift_q,
    OperatorTag.QT: op_drift_qt,
    OperatorTag.P: op_kick_p,
    OperatorTag.PT: op_kick_pt,
    OperatorTag.H1: op_h1,
    OperatorTag.H2: op_h2,
}


class SchemeSpec(BaseModel):
    """One symmetric base step as a palindrome of (operator, fraction of h).

    The first half of ``sequence`` runs before the mid-step mixing map, the
    second half after it.
    """

    model_config = ConfigDict(frozen=True)

    name: str = Field(description="Catalog identifier", examples=["QPtQtP"])
    sequence: tuple[tuple[OperatorTag, float], ...] = Field(description="Operators with their fraction of h")

    @model_validator(mode="after")
    def _symmetric_and_consistent(self) -> "SchemeSpec":
        if not self.sequence or len(self.sequence) % 2:
            raise ValueError(f"scheme '{self.name}' must have an even, non-empty operator sequence")
        if tuple(reversed(self.sequence)) != self.sequence:
            raise ValueError(f"scheme '{self.name}' is not palindromic")
        totals = {"q": 0.0, "qt": 0.0, "p": 0.0, "pt": 0.0}
        for tag, fraction in self.sequence:
            for block in _ADVANCES[tag]:
                totals[block] += fraction
        if any(abs(total - 1.0) > 1e-15 for total in totals.values()):
            raise ValueError(f"scheme '{self.name}' does not advance every block by h: {totals}")
        return self

    @property
    def first_half(self) -> tuple[tuple[OperatorTag, float], ...]:
        return self.sequence[: len(self.sequence) // 2]

    @property
    def second_half(self) -> tuple[tuple[OperatorTag, float], ...]:
        return self.sequence[len(self.sequence) // 2:]

    @property
    def evaluations_per_step(self) -> int:
        return sum(_EVALUATIONS[tag] for tag, _ in self.sequence)


def _palindrome(name: str, *tags: OperatorTag) -> SchemeSpec:
    half = tuple((tag, 0.5) for tag in tags)
    return SchemeSpec(name=name, sequence=half + tuple(reversed(half)))


Q, QT, P, PT, H1, H2 = OperatorTag.Q, OperatorTag.QT, OperatorTag.P, OperatorTag.PT, OperatorTag.H1, OperatorTag.H2

SCHEMES: dict[str, SchemeSpec] = {
    scheme.name: scheme
    for scheme in (
        # H1(h/2) H2(h) H1(h/2), symplectic on the extended space
        _palindrome("QtPQPt", QT, P, Q, PT),
        _palindrome("H2H1H2", H2, H1),
        _palindrome("QQtPPt", Q, QT, P, PT),
        _palindrome("QQtPtP", Q, QT, PT, P),
        _palindrome("PPtQQt", P, PT, Q, QT),
        _palindrome("PPtQtQ", P, PT, QT, Q),
        _palindrome("QPtQtP", Q, PT, QT, P),
    )
}


def scheme(name: str) -> SchemeSpec:
    """
    Look up a catalog scheme.

    Raises:
        UnknownSchemeError: If ``name`` is not in ``SCHEMES``
    """
    try:
        return SCHEMES[name]
    except KeyError:
        raise UnknownSchemeError(f"Unknown scheme '{name}'. Known: {', '.join(SCHEMES)}") from None


def _run(sys: HamiltonianSystem, ops, s: ExtendedState, h: float) -> ExtendedState:
    for tag, fraction in ops:
        s = OPERATORS[tag](sys, s, fraction * h)
    return s


def leapfrog_step(
    sys: HamiltonianSystem,
    spec: SchemeSpec,
    s: ExtendedState,
    h: float,
    mix1: Optional[LinearPhaseMap] = None,
    mix2: Optional[LinearPhaseMap] = None,
) -> ExtendedState:
    """
    One symmetric second-order step of size h (negative h steps backwards).

    Applies the first half of the palindrome, M1, the second half and M2.
    Missing maps are the identity.

    Args:
        sys: Hamiltonian; wrap it with ``counted`` to account evaluations
        spec: Catalog scheme
        s: Extended state
        h: Step size
        mix1: Mid-step mixing map
        mix2: End-of-step mixing map

    Returns:
        The advanced state with tau += h
    """
    s = _run(sys, spec.first_half, s, h)
    if mix1 is not None:
        s = apply_mixing(mix1, s)
    s = _run(sys, spec.second_half, s, h)
    if mix2 is not None:
        s = apply_mixing(mix2, s)
    return ExtendedState(q=s.q, qt=s.qt, p=s.p, pt=s.pt, tau=s.tau + h, t=s.t, tt=s.tt)


def stormer_verlet_step(sysT: SeparablePart, sysV: SeparablePart, s: PhaseState, h: float) -> PhaseState:
    """
    Kick-drift-kick step for H = T(p) + V(q).

    Examples:
        >>> from problems import harmonic_oscillator
        >>> osc = harmonic_oscillator(1.0)
        >>> stormer_verlet_step(osc.kinetic, osc.potential, PhaseState(q=[1.0], p=[0.0]), 0.1).q
        array([0.995])
    """
    p_half = s.p - 0.5 * h * sysV.grad(s.q)
    q = s.q + h * sysT.grad(p_half)
    p = p_half - 0.5 * h * sysV.grad(q)
    return PhaseState(q=q, p=p, tau=s.tau + h)


def _diverged(s: ExtendedState) -> bool:
    return not s.is_finite() or s.max_abs() > DIVERGENCE_LIMIT


def integrate(
    sys: HamiltonianSystem,
    spec: SchemeSpec,
    initial: PhaseState,
    h: float,
    n_steps: int,
    mix1: Optional[LinearPhaseMap] = None,
    mix2: Optional[LinearPhaseMap] = None,
    projection: Optional[LinearPhaseMap] = None,
    mode: DriverMode = DriverMode.EXTENDED,
    composition: Optional[CompositionScheme] = None,
    sample_every: int = 1,
    counter: Optional[EvalCounter] = None,
) -> Trajectory:
    """
    Integrate from a cloned initial state and sample projected output.

    In EXTENDED mode the extended state evolves untouched and the projection
    only produces samples. In PROJECT_EACH_STEP mode every (composited) step
    is followed by projection and re-cloning.

    Args:
        sys: Hamiltonian system (uncounted; counting is done here)
        spec: Catalog scheme for the base step
        initial: Starting point
        h: Step size
        n_steps: Number of full steps, at least 0
        mix1: Mid-step mixing map, identity when None
        mix2: End-of-step mixing map, identity when None
        projection: Output projection, (1, 1) when None
        mode: Driver mode
        composition: Optional composition applied to the mixed base step
        sample_every: Sample stride; the last step is always sampled
        counter: Counter to accumulate into (a fresh one when None)

    Returns:
        Trajectory with projected states and H along them

    Raises:
        DivergenceError: If a component exceeds 1e12 or becomes non-finite
    """
    if n_steps < 0:
        raise ValueError("n_steps must be non-negative")
    if sample_every < 1:
        raise ValueError("sample_every must be at least 1")
    projection = projection or preset("proj_primary")
    counter = counter if counter is not None else EvalCounter()
    csys = counted(sys, counter)

    def base(state: ExtendedState, dt: float) -> ExtendedState:
        return leapfrog_step(csys, spec, state, dt, mix1, mix2)

    step = compose(base, composition) if composition is not None else base

    logger.debug(f"integrate: scheme={spec.name} h={h!r} n_steps={n_steps} mode={mode.value} "
                 f"mix1={mix1} mix2={mix2} projection={projection} "
                 f"composition={composition.name if composition else 'none'}")

    trajectory = Trajectory(labels=sys.labels)
    tau0 = initial.tau

    def sample(k: int, state: ExtendedState):
        out = apply_projection(projection, state)
        trajectory.append(k, out.tau, out.tau, out.as_vector(), sys.value(out.q, out.p), counter.count)

    s = clone_up(initial)
    sample(0, s)
    for k in range(1, n_steps + 1):
        advanced = step(s, h)
        if _diverged(advanced):
            trajectory.diverged = True
            trajectory.message = f"diverged at step {k}; last valid step {k - 1}"
            logger.error(f"Integration with scheme {spec.name} {trajectory.message}")
            raise DivergenceError(trajectory.message, step=k - 1, trajectory=trajectory)
        tau = tau0 + k * h
        s = ExtendedState(q=advanced.q, qt=advanced.qt, p=advanced.p, pt=advanced.pt,
                          tau=tau, t=advanced.t, tt=advanced.tt)
        if mode is DriverMode.PROJECT_EACH_STEP:
            s = clone_up(apply_projection(projection, s), t=s.t)
        if k % sample_every == 0 or k == n_steps:
            sample(k, s)

    logger.debug(f"integrate: {n_steps} steps, {counter.count} evaluations")
    return trajectory
