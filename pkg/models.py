from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from composition import composition_preset
from maps import MapKind, parse_map
from nonham import OdeMethod
from problems import SchwarzschildParams, VdpParams
from reference import OracleConfig
from splitting import DriverMode, scheme


class ProblemId(str, Enum):
    """
    Problems the harness knows how to run.
    """
    SCHWARZSCHILD = "schwarzschild"
    VDP = "vdp"
    HARMONIC = "harmonic"


class MethodId(str, Enum):
    """
    Integrators selectable from the CLI. ``extended`` is the Hamiltonian
    splitting; ``method1``/``method2`` are the first-order variants.
    """
    EXTENDED = "extended"
    METHOD1 = OdeMethod.METHOD1.value
    METHOD2 = OdeMethod.METHOD2.value
    IMPLICIT_MIDPOINT = "implicit-midpoint"
    ORACLE = "oracle"


VDP_DEFAULTS = {
    "method": "method1",
    "mix1": "identity",
    "mix2": "swap_both",
    "proj": "proj_average",
    "mode": "project-each-step",
    "composition": "kahan6",
    "compare": True,
}


class ExperimentConfig(BaseModel):
    """
    One experiment run. Every CLI flag has a field here; JSON config files
    use the same field names.
    """

    model_config = ConfigDict(extra="forbid")

    problem: ProblemId = Field(
        default=ProblemId.SCHWARZSCHILD,
        description="Problem to integrate"
    )

    method: MethodId = Field(
        default=MethodId.EXTENDED,
        description="Integrator"
    )

    scheme: str = Field(
        default="QPtQtP",
        description="Catalog scheme of the extended leapfrog",
        examples=["QPtQtP", "QtPQPt"]
    )

    mix1: Optional[str] = Field(
        default="swap_momenta",
        description="Mid-step mixing map: preset name or 'aq,ap'",
        examples=["identity", "1,0"]
    )

    mix2: Optional[str] = Field(
        default="swap_momenta",
        description="End-of-step mixing map: preset name or 'aq,ap'"
    )

    proj: str = Field(
        default="proj_primary_q_aux_p",
        description="Output projection: preset name or 'aq,ap'",
        examples=["P1", "proj_average", "0.3333333333333333,0.6666666666666666"]
    )

    mode: DriverMode = Field(
        default=DriverMode.EXTENDED,
        description="Keep the extended state (extended) or project and re-clone every step"
    )

    composition: str = Field(
        default="none",
        description="Composition preset: none, kahan6 or yoshida4"
    )

    h: float = Field(
        default=0.02,
        gt=0.0,
        description="Step size; a fraction of the orbital period for schwarzschild (as are the map study step sizes), absolute otherwise"
    )

    orbits: Optional[float] = Field(
        default=None,
        ge=0.0,
        description="Duration in orbital periods (schwarzschild)"
    )

    t_end: Optional[float] = Field(
        default=None,
        ge=0.0,
        description="Duration in time units (vdp, harmonic)"
    )

    sample_every: int = Field(
        default=1,
        ge=1,
        description="Sample stride in steps"
    )

    out: Optional[Path] = Field(
        default=None,
        description="CSV output path; the JSON summary is written beside it"
    )

    compare: bool = Field(
        default=False,
        description="Also run the oracle and record errors against it"
    )

    oracle: OracleConfig = Field(default_factory=OracleConfig)

    schwarzschild: SchwarzschildParams = Field(default_factory=SchwarzschildParams)

    vdp: VdpParams = Field(default_factory=VdpParams)

    omega: float = Field(
        default=1.0,
        gt=0.0,
        description="Harmonic oscillator frequency"
    )

    seed: Optional[int] = Field(
        default=None,
        description="Seed of the gradient check at random states run before Hamiltonian problems; None skips it"
    )

    @model_validator(mode="before")
    @classmethod
    def _problem_defaults(cls, data):
        # the van der Pol experiment runs a composited Method 1 with averaging
        if isinstance(data, dict) and data.get("problem") == ProblemId.VDP.value:
            data = dict(data)
            for key, value in VDP_DEFAULTS.items():
                data.setdefault(key, value)
        return data

    @model_validator(mode="after")
    def _resolvable(self) -> "ExperimentConfig":
        # unknown names surface here rather than mid-run
        scheme(self.scheme)
        composition_preset(self.composition)
        parse_map(self.mix1, MapKind.MIXING)
        parse_map(self.mix2, MapKind.MIXING)
        parse_map(self.proj, MapKind.PROJECTION)
        if self.problem is ProblemId.VDP and self.method is MethodId.EXTENDED:
            raise ValueError("vdp is not Hamiltonian; use method1, method2, implicit-midpoint or oracle")
        if self.problem is not ProblemId.VDP and self.method in (MethodId.METHOD1, MethodId.METHOD2):
            raise ValueError(f"{self.problem.value} is Hamiltonian; use extended, implicit-midpoint or oracle")
        return self

    @property
    def duration(self) -> float:
        """Run length in the problem's own time units."""
        if self.problem is ProblemId.SCHWARZSCHILD:
            orbits = 10.0 if self.orbits is None else self.orbits
            return orbits * self.schwarzschild.period
        if self.t_end is not None:
            return self.t_end
        return 500.0 if self.problem is ProblemId.VDP else 10.0

    @property
    def step_size(self) -> float:
        """h in the problem's own time units."""
        if self.problem is ProblemId.SCHWARZSCHILD:
            return self.h * self.schwarzschild.period
        return self.h


class RunSummary(BaseModel):
    """
    JSON summary written beside each trajectory CSV.
    """

    command: str = Field(description="CLI subcommand that produced the run")
    problem: ProblemId
    method: MethodId
    scheme: Optional[str] = None
    mix1: Optional[str] = None
    mix2: Optional[str] = None
    proj: Optional[str] = None
    mode: Optional[DriverMode] = None
    composition: Optional[str] = None
    h: float = Field(description="Step size in problem time units")
    n_steps: int = Field(ge=0)
    samples: int = Field(ge=0)
    evaluations: int = Field(ge=0, description="Gradient and vector-field evaluations")
    max_abs_invariant_error: Optional[float] = Field(
        default=None,
        description="max |H - H0| over the samples, Hamiltonian problems only"
    )
    max_abs_error: Optional[list[float]] = Field(
        default=None,
        description="Per-component max |x - x_oracle|, when compared"
    )
    final_abs_error: Optional[list[float]] = Field(
        default=None,
        description="Per-component |x - x_oracle| at the last sample, when compared"
    )
    precession_measured: Optional[float] = None
    precession_measured_std: Optional[float] = None
    precession_estimate: Optional[float] = None
    final_state: list[float] = Field(default_factory=list)
    labels: list[str] = Field(default_factory=list)
    diverged: bool = False
    last_valid_step: int = Field(default=0, ge=0)
    message: str = ""
    runtime_seconds: float = 0.0
    created_at: datetime = Field(default_factory=datetime.now)

    def __str__(self) -> str:
        return (f"RunSummary(\n"
                f"  {self.command}: {self.problem.value} / {self.method.value}\n"
                f"  steps: {self.n_steps}, evaluations: {self.evaluations}\n"
                f"  max |dH|: {self.max_abs_invariant_error}\n"
                f"  diverged: {self.diverged} {self.message}\n"
                f")")


class ConvergenceResult(BaseModel):
    """
    Fitted global order from endpoint errors at several step sizes.
    """
    slope: float
    intercept: float
    hs: list[float]
    errors: list[float]
    excluded: list[float] = Field(default_factory=list, description="Step sizes dropped at the round-off floor")


class DriftSummary(BaseModel):
    """
    Secular slope of the running-max error envelope over the second half.
    """
    slope: float
    intercept: float
    final_max: float
    samples: int


class PrecessionSummary(BaseModel):
    """
    Pericentre advance per orbit from detected pericentre passages.
    """
    mean: float
    std: float
    passages: int
    angles: list[float] = Field(default_factory=list)


class MapStudyResult(BaseModel):
    """
    Leading-order slope of |ΔH| after two extended steps, per step size.
    """
    slope: float = Field(description="Least-squares slope of log |ΔH| against log h")
    hs: list[float] = Field(description="Step sizes as fractions of the orbital period P, not problem time units")
    delta_h: list[float] = Field(description="|H - H0| of the projected state after the steps, per h")
