"""
Composition of a time-symmetric base step into higher-order steps.

A composited step applies the base step with substep sizes gamma_1 h, ...,
gamma_s h, left to right.
"""

import math
from typing import Callable, TypeVar

from pydantic import BaseModel, ConfigDict, Field, field_validator

from logging_config import get_logger

logger = get_logger("xps-leapfrog.composition")

S = TypeVar("S")
Step = Callable[[S, float], S]


class UnknownCompositionError(ValueError):
    """Raised for a composition preset name that is not in the catalog."""


class CompositionScheme(BaseModel):
    """Palindromic substep coefficients summing to one."""

    model_config = ConfigDict(frozen=True)

    gammas: tuple[float, ...] = Field(description="Substep fractions gamma_1 ... gamma_s")
    name: str = Field(default="custom", description="Identifier used in summaries")

    @field_validator("gammas")
    @classmethod
    def _consistent(cls, gammas: tuple[float, ...]) -> tuple[float, ...]:
        if not gammas:
            raise ValueError("composition needs at least one coefficient")
        total = math.fsum(gammas)
        if abs(total - 1.0) > 1e-15:
            raise ValueError(f"composition coefficients sum to {total!r}, expected 1")
        if tuple(reversed(gammas)) != tuple(gammas):
            raise ValueError("composition coefficients must be palindromic")
        return gammas

    @property
    def stages(self) -> int:
        return len(self.gammas)


def compose(base_step: Step, scheme: CompositionScheme) -> Step:
    """
    Build the composited step of ``base_step``.

    Args:
        base_step: Callable ``(state, h) -> state``, time-symmetric and second order
        scheme: Coefficients applied left to right

    Returns:
        Callable ``(state, h) -> state`` performing ``scheme.stages`` base steps

    Examples:
        >>> step = compose(lambda x, h: x + h, identity())
        >>> step(1.0, 0.5)
        1.5
    """
    gammas = scheme.gammas
    if len(gammas) == 1 and gammas[0] == 1.0:
        return base_step

    def composited(state, h: float):
        for gamma in gammas:
            state = base_step(state, gamma * h)
        return state

    return composited


def identity() -> CompositionScheme:
    """The trivial composition, one substep of size h."""
    return CompositionScheme(gammas=(1.0,), name="none")


def kahan6() -> CompositionScheme:
    """Nine-stage sixth-order set of Kahan and Li (s9odr6a)."""
    g1 = 0.39216144400731413928
    g2 = 0.33259913678935943860
    g3 = -0.70624617255763935981
    g4 = 0.082213596293550800230
    g5 = 0.79854399093482996340
    return CompositionScheme(gammas=(g1, g2, g3, g4, g5, g4, g3, g2, g1), name="kahan6")


def yoshida4() -> CompositionScheme:
    """Three-stage fourth-order triple jump."""
    cbrt2 = 2.0 ** (1.0 / 3.0)
    w1 = 1.0 / (2.0 - cbrt2)
    w0 = 1.0 - 2.0 * w1
    return CompositionScheme(gammas=(w1, w0, w1), name="yoshida4")


_CATALOG = {"none": identity, "kahan6": kahan6, "yoshida4": yoshida4}


def composition_preset(name: str) -> CompositionScheme:
    """
    Look up a composition by CLI name.

    Raises:
        UnknownCompositionError: If ``name`` is not one of none, kahan6, yoshida4
    """
    try:
        return _CATALOG[name]()
    except KeyError:
        raise UnknownCompositionError(f"Unknown composition '{name}'. Known: {', '.join(_CATALOG)}") from None
