"""
Phase-space containers, problem interfaces and evaluation accounting.

States are immutable values. Problems expose analytic gradients (Hamiltonian
systems) or a right-hand side (first-order systems); ``counted`` wraps either
so that every gradient or field call ticks an ``EvalCounter``.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from logging_config import get_logger

logger = get_logger("xps-leapfrog.core")

DIVERGENCE_LIMIT = 1e12


class IntegrationError(Exception):
    """Base class for failures raised while stepping a system."""


class NonFiniteStateError(IntegrationError):
    """Raised when a state or a gradient contains NaN or Inf."""


class DivergenceError(IntegrationError):
    """Raised when a state component leaves the divergence limit.

    Attributes:
        step: index of the last step whose state was still valid
        trajectory: samples collected up to that step, if any
    """

    def __init__(self, message: str, step: int, trajectory=None):
        super().__init__(message)
        self.step = step
        self.trajectory = trajectory


def _as_vector(values) -> np.ndarray:
    return np.array(values, dtype=np.float64).reshape(-1)


@dataclass(frozen=True, eq=False)
class PhaseState:
    """A point (q, p) of the original phase space at parameter ``tau``."""

    q: np.ndarray
    p: np.ndarray
    tau: float = 0.0

    def __post_init__(self):
        q = _as_vector(self.q)
        p = _as_vector(self.p)
        if q.size == 0 or q.shape != p.shape:
            raise ValueError(f"q and p must have equal non-zero length, got {q.size} and {p.size}")
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p)) and np.isfinite(self.tau)):
            raise NonFiniteStateError("PhaseState components must be finite")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "tau", float(self.tau))

    @property
    def dim(self) -> int:
        return self.q.size

    def as_vector(self) -> np.ndarray:
        """Concatenated (q, p)."""
        return np.concatenate([self.q, self.p])

    @classmethod
    def from_vector(cls, z: np.ndarray, tau: float = 0.0) -> "PhaseState":
        n = z.size // 2
        return cls(q=z[:n], p=z[n:], tau=tau)


@dataclass(frozen=True, eq=False)
class ExtendedState:
    """A point (q, q̃, p, p̃) of the doubled phase space.

    ``t`` and ``tt`` hold the original and auxiliary time; autonomous
    Hamiltonians leave them untouched.
    """

    q: np.ndarray
    qt: np.ndarray
    p: np.ndarray
    pt: np.ndarray
    tau: float = 0.0
    t: float = 0.0
    tt: float = 0.0

    def __post_init__(self):
        n = np.shape(self.q)[0]
        for name in ("qt", "p", "pt"):
            if np.shape(getattr(self, name))[0] != n:
                raise ValueError(f"ExtendedState block '{name}' does not match length {n}")

    @property
    def dim(self) -> int:
        return self.q.size

    def as_vector(self) -> np.ndarray:
        """Concatenated (q, q̃, p, p̃)."""
        return np.concatenate([self.q, self.qt, self.p, self.pt])

    @classmethod
    def from_vector(cls, w: np.ndarray, tau: float = 0.0, t: float = 0.0, tt: float = 0.0) -> "ExtendedState":
        n = w.size // 4
        return cls(q=w[:n].copy(), qt=w[n:2 * n].copy(), p=w[2 * n:3 * n].copy(), pt=w[3 * n:].copy(),
                   tau=tau, t=t, tt=tt)

    def max_abs(self) -> float:
        return max(np.max(np.abs(self.q)), np.max(np.abs(self.qt)),
                   np.max(np.abs(self.p)), np.max(np.abs(self.pt)))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.qt))
                    and np.all(np.isfinite(self.p)) and np.all(np.isfinite(self.pt)))


def clone_up(s: PhaseState, t: float = 0.0) -> ExtendedState:
    """
    Embed (q, p) into the extended space as (q, q, p, p).

    Args:
        s: Original phase-space state (finite by construction)
        t: Original time for non-autonomous problems, copied to both time slots

    Returns:
        Extended state with equal primary and auxiliary copies

    Examples:
        >>> clone_up(PhaseState(q=[1, 2], p=[3, 4])).qt
        array([1., 2.])
    """
    if not (np.all(np.isfinite(s.q)) and np.all(np.isfinite(s.p))):
        raise NonFiniteStateError("cannot clone a non-finite state")
    return ExtendedState(q=s.q.copy(), qt=s.q.copy(), p=s.p.copy(), pt=s.p.copy(),
                         tau=s.tau, t=t, tt=t)


@dataclass
class EvalCounter:
    """Counts gradient and vector-field evaluations."""

    count: int = 0

    def increment(self, n: int = 1):
        if n < 0:
            raise ValueError("EvalCounter cannot decrease")
        self.count += n

    def reset(self):
        self.count = 0


class HamiltonianSystem(ABC):
    """H(q, p) with analytic gradients.

    Subclasses set ``dim`` and may override the coordinate/momentum labels.
    """

    dim: int

    @abstractmethod
    def value(self, q: np.ndarray, p: np.ndarray) -> float:
        ...

    @abstractmethod
    def grad_q(self, q: np.ndarray, p: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def grad_p(self, q: np.ndarray, p: np.ndarray) -> np.ndarray:
        ...

    @property
    def coordinate_names(self) -> list[str]:
        return [f"q{i}" for i in range(self.dim)]

    @property
    def momentum_names(self) -> list[str]:
        return [f"p{i}" for i in range(self.dim)]

    @property
    def labels(self) -> list[str]:
        return self.coordinate_names + self.momentum_names


class FirstOrderSystem(ABC):
    """x' = f(x, t), optionally partitioned into (x-part, y-part) at ``partition``."""

    dim: int
    partition: Optional[int] = None

    @abstractmethod
    def field(self, x: np.ndarray, t: float) -> np.ndarray:
        ...

    @property
    def variable_names(self) -> list[str]:
        return [f"x{i}" for i in range(self.dim)]


class SeparablePart(ABC):
    """One half of a separable Hamiltonian, T(p) or V(q)."""

    dim: int

    @abstractmethod
    def value(self, x: np.ndarray) -> float:
        ...

    @abstractmethod
    def grad(self, x: np.ndarray) -> np.ndarray:
        ...


class CountingHamiltonian(HamiltonianSystem):
    """Delegating wrapper ticking ``counter`` once per gradient call."""

    def __init__(self, system: HamiltonianSystem, counter: EvalCounter):
        self.system = system
        self.counter = counter
        self.dim = system.dim

    def value(self, q, p):
        return self.system.value(q, p)

    def grad_q(self, q, p):
        self.counter.count += 1
        return self.system.grad_q(q, p)

    def grad_p(self, q, p):
        self.counter.count += 1
        return self.system.grad_p(q, p)

    @property
    def coordinate_names(self):
        return self.system.coordinate_names

    @property
    def momentum_names(self):
        return self.system.momentum_names


class CountingFirstOrder(FirstOrderSystem):
    """Delegating wrapper ticking ``counter`` once per field call."""

    def __init__(self, system: FirstOrderSystem, counter: EvalCounter):
        self.system = system
        self.counter = counter
        self.dim = system.dim
        self.partition = system.partition

    def field(self, x, t):
        self.counter.count += 1
        return self.system.field(x, t)

    @property
    def variable_names(self):
        return self.system.variable_names


class CountingPart(SeparablePart):
    """Delegating wrapper ticking ``counter`` once per gradient call."""

    def __init__(self, part: SeparablePart, counter: EvalCounter):
        self.part = part
        self.counter = counter
        self.dim = part.dim

    def value(self, x):
        return self.part.value(x)

    def grad(self, x):
        self.counter.count += 1
        return self.part.grad(x)


def counted(system, counter: EvalCounter):
    """
    Wrap a system so its evaluations are accounted in ``counter``.

    Args:
        system: HamiltonianSystem, FirstOrderSystem or SeparablePart
        counter: Counter shared by everything evaluated during one run

    Returns:
        A wrapper of the same interface

    Raises:
        TypeError: If ``system`` implements none of the interfaces
    """
    if isinstance(system, HamiltonianSystem):
        return CountingHamiltonian(system, counter)
    if isinstance(system, FirstOrderSystem):
        return CountingFirstOrder(system, counter)
    if isinstance(system, SeparablePart):
        return CountingPart(system, counter)
    raise TypeError(f"cannot count evaluations of {type(system).__name__}")


class HamiltonianFlow(FirstOrderSystem):
    """Hamilton's equations as a first-order system on z = (q, p).

    Each field call evaluates both gradients, so a counted Hamiltonian
    accounts two evaluations per call.
    """

    def __init__(self, system: HamiltonianSystem):
        self.system = system
        self.dim = 2 * system.dim
        self.partition = system.dim

    def field(self, z, t=0.0):
        n = self.system.dim
        q, p = z[:n], z[n:]
        return np.concatenate([self.system.grad_p(q, p), -self.system.grad_q(q, p)])

    @property
    def variable_names(self):
        return self.system.labels


def check_gradients(sys: HamiltonianSystem, sample: PhaseState, rel_tol: float = 1e-6) -> bool:
    """
    Compare analytic gradients against central differences of ``value``.

    The difference step for component i is cbrt(eps) * max(1, |z_i|). A
    component passes when |analytic - numeric| <= rel_tol * max(1, |grad|_inf).

    Args:
        sys: System under test
        sample: Point at which to compare
        rel_tol: Relative tolerance, must be positive

    Returns:
        True when every gradient component agrees

    Raises:
        ValueError: If ``rel_tol`` is not positive
    """
    if rel_tol <= 0:
        raise ValueError("rel_tol must be positive")

    q, p = sample.q, sample.p
    eps = np.finfo(np.float64).eps ** (1.0 / 3.0)

    def central(base: np.ndarray, evaluate) -> np.ndarray:
        out = np.empty_like(base)
        for i in range(base.size):
            step = eps * max(1.0, abs(base[i]))
            up, down = base.copy(), base.copy()
            up[i] += step
            down[i] -= step
            out[i] = (evaluate(up) - evaluate(down)) / (up[i] - down[i])
        return out

    numeric_q = central(q, lambda x: sys.value(x, p))
    numeric_p = central(p, lambda x: sys.value(q, x))
    analytic_q = np.asarray(sys.grad_q(q, p), dtype=np.float64)
    analytic_p = np.asarray(sys.grad_p(q, p), dtype=np.float64)

    analytic = np.concatenate([analytic_q, analytic_p])
    numeric = np.concatenate([numeric_q, numeric_p])
    scale = max(1.0, float(np.max(np.abs(analytic))))
    mismatch = np.abs(analytic - numeric)
    ok = bool(np.all(mismatch <= rel_tol * scale))
    if not ok:
        worst = int(np.argmax(mismatch))
        logger.debug(f"Gradient check failed at component {worst}: "
                     f"analytic={analytic[worst]!r} numeric={numeric[worst]!r}")
    return ok


@dataclass
class Trajectory:
    """Sampled output of one run.

    Each row holds the step index, the integration parameter ``tau``, the
    original time ``t``, the projected state (one column per label), the
    invariant value (NaN when the problem has none) and the cumulative
    evaluation count.
    """

    labels: list[str]
    steps: list[int] = field(default_factory=list)
    taus: list[float] = field(default_factory=list)
    times: list[float] = field(default_factory=list)
    rows: list[np.ndarray] = field(default_factory=list)
    invariants: list[float] = field(default_factory=list)
    evaluations: list[int] = field(default_factory=list)
    diverged: bool = False
    message: str = ""

    def append(self, step: int, tau: float, t: float, state: np.ndarray,
               invariant: float = float("nan"), evaluations: int = 0):
        if self.steps and step <= self.steps[-1]:
            raise ValueError(f"step indices must increase: {step} after {self.steps[-1]}")
        if self.evaluations and evaluations < self.evaluations[-1]:
            raise ValueError("evaluation count must not decrease")
        state = np.asarray(state, dtype=np.float64)
        if state.size != len(self.labels):
            raise ValueError(f"state has {state.size} components, expected {len(self.labels)}")
        self.steps.append(int(step))
        self.taus.append(float(tau))
        self.times.append(float(t))
        self.rows.append(state.copy())
        self.invariants.append(float(invariant))
        self.evaluations.append(int(evaluations))

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def states(self) -> np.ndarray:
        if not self.rows:
            return np.empty((0, len(self.labels)))
        return np.vstack(self.rows)

    def column(self, label: str) -> np.ndarray:
        try:
            index = self.labels.index(label)
        except ValueError:
            raise KeyError(f"trajectory has no column '{label}'") from None
        return self.states[:, index]

    @property
    def final_state(self) -> np.ndarray:
        if not self.rows:
            raise IndexError("empty trajectory")
        return self.rows[-1]

    @property
    def total_evaluations(self) -> int:
        return self.evaluations[-1] if self.evaluations else 0

    @classmethod
    def from_rows(cls, labels: Sequence[str], rows: Sequence[Sequence[float]]) -> "Trajectory":
        """Rebuild from rows laid out as (step, tau, t, *state, invariant, evaluations)."""
        trajectory = cls(labels=list(labels))
        width = len(labels)
        for row in rows:
            trajectory.append(int(row[0]), row[1], row[2], np.asarray(row[3:3 + width], dtype=np.float64),
                              row[3 + width], int(row[4 + width]))
        return trajectory
