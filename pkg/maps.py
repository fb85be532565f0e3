"""
Linear mixing and projection maps on the extended phase space.

A map is fixed by two weights, ``alpha_q`` on the primary coordinate copy and
``alpha_p`` on the primary momentum copy; the auxiliary copies always get the
complementary weights 1 - alpha.
"""

from enum import Enum
from typing import Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from core import ExtendedState, PhaseState
from logging_config import get_logger

logger = get_logger("xps-leapfrog.maps")


class MapKindError(ValueError):
    """Raised when a map of the wrong kind is applied."""


class UnknownPresetError(ValueError):
    """Raised for a preset name that is not in the catalog."""


class MapKind(str, Enum):
    MIXING = "mixing"
    PROJECTION = "projection"


class LinearPhaseMap(BaseModel):
    """Symmetric linear map given by its primary-copy weights."""

    model_config = ConfigDict(frozen=True)

    alpha_q: float = Field(description="Weight of the primary coordinate copy", examples=[1.0, 0.5])
    alpha_p: float = Field(description="Weight of the primary momentum copy", examples=[0.0, 0.5])
    kind: MapKind = Field(default=MapKind.MIXING, description="Mixing or projection")
    name: Optional[str] = Field(default=None, description="Preset name, if built from one")

    @property
    def alpha_q_aux(self) -> float:
        return 1.0 - self.alpha_q

    @property
    def alpha_p_aux(self) -> float:
        return 1.0 - self.alpha_p

    @property
    def is_identity(self) -> bool:
        return self.kind is MapKind.MIXING and self.alpha_q == 1.0 and self.alpha_p == 1.0

    def __str__(self) -> str:
        label = self.name or f"{self.alpha_q:g},{self.alpha_p:g}"
        return f"{self.kind.value}({label})"


def _blend(a: np.ndarray, b: np.ndarray, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """(alpha a + (1-alpha) b, (1-alpha) a + alpha b), exact for alpha in {0, 1}."""
    if alpha == 1.0:
        return a.copy(), b.copy()
    if alpha == 0.0:
        return b.copy(), a.copy()
    return alpha * a + (1.0 - alpha) * b, (1.0 - alpha) * a + alpha * b


def _combine(a: np.ndarray, b: np.ndarray, alpha: float) -> np.ndarray:
    if alpha == 1.0:
        return a.copy()
    if alpha == 0.0:
        return b.copy()
    return alpha * a + (1.0 - alpha) * b


def apply_mixing(m: LinearPhaseMap, s: ExtendedState) -> ExtendedState:
    """
    Mix primary and auxiliary copies of an extended state.

    Args:
        m: Mixing map
        s: Extended state

    Returns:
        New state with q' = a q + (1-a) q̃, q̃' = (1-a) q + a q̃ and the same
        pattern for (p, p̃) with alpha_p; tau, t and tt are copied

    Raises:
        MapKindError: If ``m`` is a projection map
    """
    if m.kind is not MapKind.MIXING:
        raise MapKindError(f"apply_mixing needs a mixing map, got {m}")
    q, qt = _blend(s.q, s.qt, m.alpha_q)
    p, pt = _blend(s.p, s.pt, m.alpha_p)
    return ExtendedState(q=q, qt=qt, p=p, pt=pt, tau=s.tau, t=s.t, tt=s.tt)


def apply_projection(m: LinearPhaseMap, s: ExtendedState) -> PhaseState:
    """
    Collapse an extended state to a single (q, p) pair.

    Args:
        m: Projection map
        s: Extended state

    Returns:
        PhaseState with q = a q + (1-a) q̃ and p = b p + (1-b) p̃; tau copied

    Raises:
        MapKindError: If ``m`` is a mixing map
    """
    if m.kind is not MapKind.PROJECTION:
        raise MapKindError(f"apply_projection needs a projection map, got {m}")
    return PhaseState(q=_combine(s.q, s.qt, m.alpha_q), p=_combine(s.p, s.pt, m.alpha_p), tau=s.tau)


def mix_blocks(m: LinearPhaseMap, x: np.ndarray, xt: np.ndarray, partition: Optional[int]) -> tuple[np.ndarray, np.ndarray]:
    """Mixing on first-order states: alpha_q on indices < k, alpha_p on the rest."""
    if m.kind is not MapKind.MIXING:
        raise MapKindError(f"mix_blocks needs a mixing map, got {m}")
    k = x.size if partition is None else partition
    head, head_t = _blend(x[:k], xt[:k], m.alpha_q)
    tail, tail_t = _blend(x[k:], xt[k:], m.alpha_p)
    return np.concatenate([head, tail]), np.concatenate([head_t, tail_t])


def project_blocks(m: LinearPhaseMap, x: np.ndarray, xt: np.ndarray, partition: Optional[int]) -> np.ndarray:
    """Projection on first-order states with the same block convention as ``mix_blocks``."""
    if m.kind is not MapKind.PROJECTION:
        raise MapKindError(f"project_blocks needs a projection map, got {m}")
    k = x.size if partition is None else partition
    return np.concatenate([_combine(x[:k], xt[:k], m.alpha_q), _combine(x[k:], xt[k:], m.alpha_p)])


_PRESETS: dict[str, tuple[float, float, MapKind]] = {
    "identity": (1.0, 1.0, MapKind.MIXING),
    "swap_momenta": (1.0, 0.0, MapKind.MIXING),
    "swap_coordinates": (0.0, 1.0, MapKind.MIXING),
    "swap_both": (0.0, 0.0, MapKind.MIXING),
    "average": (0.5, 0.5, MapKind.MIXING),
    "p_one_third_two_thirds": (1.0 / 3.0, 2.0 / 3.0, MapKind.PROJECTION),
    "proj_primary_q_aux_p": (1.0, 0.0, MapKind.PROJECTION),
    "proj_aux_q_primary_p": (0.0, 1.0, MapKind.PROJECTION),
    "proj_average": (0.5, 0.5, MapKind.PROJECTION),
    "proj_primary": (1.0, 1.0, MapKind.PROJECTION),
    "proj_primary_q_half_p": (1.0, 0.5, MapKind.PROJECTION),
}

# short names used in experiment tables
_ALIASES = {"P1": "proj_primary_q_aux_p", "P2": "proj_aux_q_primary_p"}


def preset_names() -> list[str]:
    return list(_PRESETS)


def preset(name: str) -> LinearPhaseMap:
    """
    Look up a named map.

    Args:
        name: Preset name (see ``preset_names``) or one of the aliases P1, P2

    Returns:
        The corresponding map

    Raises:
        UnknownPresetError: If the name is not in the catalog

    Examples:
        >>> preset("swap_momenta").alpha_p
        0.0
    """
    key = _ALIASES.get(name, name)
    if key not in _PRESETS:
        raise UnknownPresetError(f"Unknown map preset '{name}'. Known: {', '.join(_PRESETS)}")
    alpha_q, alpha_p, kind = _PRESETS[key]
    return LinearPhaseMap(alpha_q=alpha_q, alpha_p=alpha_p, kind=kind, name=key)


def parse_map(spec: Union[str, LinearPhaseMap, None], kind: MapKind) -> Optional[LinearPhaseMap]:
    """
    Resolve a CLI/config map argument.

    Args:
        spec: Preset name, an ``"aq,ap"`` pair, an existing map or None
        kind: Kind the caller needs; pairs are built with it and presets must match it

    Returns:
        The map, or None when ``spec`` is None

    Raises:
        UnknownPresetError: If a name is not a preset
        MapKindError: If a preset of the other kind is named
    """
    if spec is None:
        return None
    if isinstance(spec, LinearPhaseMap):
        m = spec
    elif "," in spec:
        try:
            alpha_q, alpha_p = (float(part) for part in spec.split(","))
        except ValueError:
            raise UnknownPresetError(f"Map '{spec}' is neither a preset nor an 'aq,ap' pair") from None
        m = LinearPhaseMap(alpha_q=alpha_q, alpha_p=alpha_p, kind=kind)
    else:
        m = preset(spec.strip())
    if m.kind is not kind:
        raise MapKindError(f"{m} cannot be used as a {kind.value} map")
    logger.debug(f"Resolved map argument {spec!r} to {m}")
    return m
