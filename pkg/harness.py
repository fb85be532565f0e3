"""
Experiment runners and analysis studies.

Runners take an ``ExperimentConfig``, integrate the configured problem with
the configured method and return the sampled ``Trajectory`` together with a
``RunSummary``; when ``cfg.out`` is set they also write the CSV and the JSON
summary beside it. Divergence does not raise out of a runner: the partial
trajectory is kept and the summary is flagged.

Studies work on step-size families (convergence order, leading order of the
energy error after two extended steps) or on finished trajectories (error
envelope drift, pericentre precession).
"""

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np
from pydantic import ValidationError

from composition import CompositionScheme, composition_preset
from core import (
    DivergenceError,
    EvalCounter,
    HamiltonianFlow,
    IntegrationError,
    PhaseState,
    Trajectory,
    check_gradients,
    clone_up,
    counted,
)
from logging_config import PerformanceLogger, env_flag, get_logger
from maps import LinearPhaseMap, MapKind, apply_projection, parse_map
from models import (
    ConvergenceResult,
    DriftSummary,
    ExperimentConfig,
    MapStudyResult,
    MethodId,
    PrecessionSummary,
    ProblemId,
    RunSummary,
)
from nonham import OdeMethod, integrate_ode
from problems import (
    SchwarzschildParams,
    harmonic_oscillator,
    pericenter_precession_estimate,
    schwarzschild_energy_error,
    schwarzschild_initial_conditions,
    schwarzschild_sample_states,
    schwarzschild_system,
    vdp_system,
)
from reference import integrate_implicit_midpoint, oracle_hamiltonian, oracle_solve
from splitting import SchemeSpec, integrate, leapfrog_step, scheme
from utils import read_config_file, summary_path, write_json, write_trajectory_csv

logger = get_logger("xps-leapfrog.harness")

DEFAULT_OUTPUT_DIR = "out"
ROUND_OFF_FLOOR = 1e-13
MIN_DRIFT_SAMPLES = 100
MAP_STUDY_HS = (1e-2, 5e-3, 2.5e-3, 1.25e-3)
HARMONIC_INITIAL = PhaseState(q=[1.0], p=[0.0])

# sample stride large enough that only the endpoints are kept
_ENDPOINTS_ONLY = 10 ** 12


class ConfigError(ValueError):
    """Raised when an experiment configuration cannot be assembled."""


class InsufficientDataError(ValueError):
    """Raised when a study has too few points to fit."""


def output_dir() -> Path:
    """Directory for default artifact paths, ``XPS_OUTPUT_DIR`` or ./out."""
    return Path(os.getenv("XPS_OUTPUT_DIR", DEFAULT_OUTPUT_DIR))


def long_runs_enabled() -> bool:
    """True when ``XPS_LONG_RUNS`` asks for the multi-thousand-orbit runs."""
    return env_flag("XPS_LONG_RUNS", False)


# Configuration

_ORACLE_ENV = {"XPS_ORACLE_RTOL": "rel_tol", "XPS_ORACLE_ATOL": "abs_tol"}
_ORACLE_FLAGS = {"oracle_rtol": "rel_tol", "oracle_atol": "abs_tol", "oracle_method": "method"}


def build_config(
    overrides: Optional[dict] = None,
    config_file: Optional[Union[str, Path]] = None,
) -> ExperimentConfig:
    """
    Assemble an experiment configuration.

    Later sources win: model defaults, then the XPS_ORACLE_* environment,
    then the JSON config file, then ``overrides`` (CLI flags; None values are
    ignored). ``oracle_rtol``/``oracle_atol``/``oracle_method`` keys are folded
    into the nested oracle settings.

    Raises:
        ConfigError: If the file cannot be read or the result does not validate
    """
    oracle: dict = {}
    for variable, key in _ORACLE_ENV.items():
        value = os.getenv(variable)
        if value:
            try:
                oracle[key] = float(value)
            except ValueError:
                raise ConfigError(f"{variable}={value!r} is not a number") from None

    layers = []
    if config_file is not None:
        try:
            layers.append(read_config_file(config_file))
        except (OSError, ValueError) as e:
            raise ConfigError(str(e)) from e
    layers.append({key: value for key, value in (overrides or {}).items() if value is not None})

    data: dict = {}
    for layer in layers:
        layer = dict(layer)
        oracle.update(layer.pop("oracle", None) or {})
        for flag, key in _ORACLE_FLAGS.items():
            if flag in layer:
                oracle[key] = layer.pop(flag)
        data.update(layer)
    if oracle:
        data["oracle"] = oracle

    try:
        cfg = ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"Invalid experiment configuration:\n{e}") from e
    logger.debug(f"Resolved configuration: {cfg.model_dump_json()}")
    return cfg


@dataclass(frozen=True)
class ResolvedMethod:
    """Scheme, maps and composition named by a configuration."""

    scheme: SchemeSpec
    mix1: Optional[LinearPhaseMap]
    mix2: Optional[LinearPhaseMap]
    projection: LinearPhaseMap
    composition: CompositionScheme


def resolve_method(cfg: ExperimentConfig) -> ResolvedMethod:
    return ResolvedMethod(
        scheme=scheme(cfg.scheme),
        mix1=parse_map(cfg.mix1, MapKind.MIXING),
        mix2=parse_map(cfg.mix2, MapKind.MIXING),
        projection=parse_map(cfg.proj, MapKind.PROJECTION),
        composition=composition_preset(cfg.composition),
    )


def step_count(cfg: ExperimentConfig) -> int:
    """Number of full steps covering the configured duration."""
    return int(round(cfg.duration / cfg.step_size))


def sample_steps(n_steps: int, sample_every: int) -> list[int]:
    """Step indices a run samples; the last step is always included."""
    steps = list(range(0, n_steps + 1, sample_every))
    if steps[-1] != n_steps:
        steps.append(n_steps)
    return steps


# Runners

def _reindexed(trajectory: Trajectory, steps: Sequence[int]) -> Trajectory:
    rows = [(k, trajectory.taus[i], trajectory.times[i], *trajectory.rows[i],
             trajectory.invariants[i], trajectory.evaluations[i]) for i, k in enumerate(steps)]
    return Trajectory.from_rows(trajectory.labels, rows)


def _oracle_run(field, x0, t0, h, n_steps, cfg, labels, counter, invariant=None) -> Trajectory:
    x0 = np.asarray(x0, dtype=np.float64)
    if n_steps == 0:
        trajectory = Trajectory(labels=list(labels))
        trajectory.append(0, t0, t0, x0, invariant(x0) if invariant else float("nan"), counter.count)
        return trajectory
    steps = sample_steps(n_steps, cfg.sample_every)
    times = [t0 + k * h for k in steps]
    raw = oracle_solve(field, x0, t0, times[-1], cfg.oracle, sample_times=times, labels=labels,
                       counter=counter, invariant=invariant)
    return _reindexed(raw, steps)


def _execute(cfg: ExperimentConfig, command: str, run: Callable[[EvalCounter], Trajectory]):
    counter = EvalCounter()
    failure: Optional[DivergenceError] = None
    logger.info(f"Starting {command}: {cfg.problem.value} with {cfg.method.value}, h={cfg.step_size:.6g}")
    with PerformanceLogger() as perf:
        perf.start(f"{command}[{cfg.problem.value}/{cfg.method.value}]")
        try:
            trajectory = run(counter)
        except DivergenceError as e:
            if e.trajectory is None:
                raise
            trajectory, failure = e.trajectory, e
    if failure is not None:
        logger.warning(f"{command} diverged; keeping {len(trajectory)} samples up to step {failure.step}")
    return trajectory, counter, perf.elapsed, failure


def _summary(cfg, command, trajectory, counter, n_steps, runtime, failure, **extra) -> RunSummary:
    extended = cfg.method in (MethodId.EXTENDED, MethodId.METHOD1, MethodId.METHOD2)
    return RunSummary(
        command=command,
        problem=cfg.problem,
        method=cfg.method,
        scheme=cfg.scheme if cfg.method is MethodId.EXTENDED else None,
        mix1=cfg.mix1 if extended else None,
        mix2=cfg.mix2 if extended else None,
        proj=cfg.proj if extended else None,
        mode=cfg.mode if extended else None,
        composition=cfg.composition if extended else None,
        h=cfg.step_size,
        n_steps=n_steps,
        samples=len(trajectory),
        evaluations=counter.count,
        final_state=trajectory.final_state.tolist(),
        labels=list(trajectory.labels),
        diverged=failure is not None,
        last_valid_step=failure.step if failure is not None else trajectory.steps[-1],
        message=str(failure) if failure is not None else "",
        runtime_seconds=runtime,
        **extra,
    )


def _write(cfg: ExperimentConfig, trajectory: Trajectory, summary: RunSummary, columns: dict):
    if cfg.out is None:
        return
    write_trajectory_csv(cfg.out, trajectory, columns)
    write_json(summary_path(cfg.out), summary)


def comparison_columns(trajectory: Trajectory, reference: np.ndarray) -> tuple[dict, list[float], list[float]]:
    """
    Absolute errors per component and their running maxima.

    Returns:
        (columns ``err_<label>`` and ``maxerr_<label>``, overall max per
        component, error at the last sample per component)
    """
    errors = np.abs(trajectory.states - np.asarray(reference))
    envelope = np.maximum.accumulate(errors, axis=0)
    columns = {}
    for i, label in enumerate(trajectory.labels):
        columns[f"err_{label}"] = errors[:, i]
        columns[f"maxerr_{label}"] = envelope[:, i]
    return columns, envelope[-1].tolist(), errors[-1].tolist()


def reference_solution(cfg: ExperimentConfig, times: Sequence[float]) -> np.ndarray:
    """
    Ground truth at increasing ``times`` starting from the problem's initial
    state: the exact flow for the harmonic oscillator, the oracle otherwise.
    Oracle evaluations are not charged to any run.
    """
    times = np.asarray(times, dtype=np.float64)
    if cfg.problem is ProblemId.HARMONIC:
        system = harmonic_oscillator(cfg.omega)
        return np.vstack([system.exact(HARMONIC_INITIAL.q, HARMONIC_INITIAL.p, t).as_vector() for t in times])

    if cfg.problem is ProblemId.SCHWARZSCHILD:
        system = schwarzschild_system(cfg.schwarzschild)
        x0 = schwarzschild_initial_conditions(cfg.schwarzschild).as_vector()
    else:
        system = vdp_system(cfg.vdp)
        x0 = system.initial_state()
    if times[-1] <= 0.0:
        return np.tile(x0, (times.size, 1))

    if cfg.problem is ProblemId.SCHWARZSCHILD:
        trajectory = oracle_hamiltonian(system, x0, times[-1], cfg.oracle, sample_times=times)
    else:
        trajectory = oracle_solve(system.field, x0, 0.0, times[-1], cfg.oracle, sample_times=times,
                                  labels=system.variable_names)
    return trajectory.states


def _run_hamiltonian(cfg: ExperimentConfig, system, initial: PhaseState, counter: EvalCounter) -> Trajectory:
    h = cfg.step_size
    n_steps = step_count(cfg)
    if cfg.method is MethodId.EXTENDED:
        m = resolve_method(cfg)
        return integrate(system, m.scheme, initial, h, n_steps, m.mix1, m.mix2, m.projection, cfg.mode,
                         m.composition, cfg.sample_every, counter)

    n = system.dim
    flow = HamiltonianFlow(counted(system, counter))

    def energy(z):
        return system.value(z[:n], z[n:])

    if cfg.method is MethodId.IMPLICIT_MIDPOINT:
        return integrate_implicit_midpoint(flow, initial.as_vector(), h, n_steps, t0=initial.tau,
                                           sample_every=cfg.sample_every, counter=counter, invariant=energy)
    return _oracle_run(flow.field, initial.as_vector(), initial.tau, h, n_steps, cfg, system.labels, counter, energy)


def geodesic_columns(trajectory: Trajectory, params: SchwarzschildParams) -> dict[str, np.ndarray]:
    """Normalized time, radius and angle, the xy orbit and the energy error."""
    r = trajectory.column("r")
    phi = trajectory.column("phi")
    return {
        "tau_over_P": np.asarray(trajectory.taus) / params.period,
        "r_over_apocentre": r / params.apocentre,
        "phi_over_2pi": phi / (2.0 * math.pi),
        "x": r * np.cos(phi),
        "y": r * np.sin(phi),
        "dH": schwarzschild_energy_error(params, np.asarray(trajectory.invariants)),
    }


def _compare(cfg: ExperimentConfig, trajectory: Trajectory, times: Sequence[float]):
    if not cfg.compare or cfg.method is MethodId.ORACLE or len(trajectory) < 2:
        return {}, {}
    columns, max_error, final_error = comparison_columns(trajectory, reference_solution(cfg, times))
    return columns, {"max_abs_error": max_error, "final_abs_error": final_error}


def gradient_check(cfg: ExperimentConfig, n_points: int = 16, rel_tol: float = 1e-6) -> int:
    """
    Central-difference check of the configured Hamiltonian's gradients at
    ``n_points`` random states drawn from ``np.random.default_rng(cfg.seed)``.

    Returns:
        Number of points checked

    Raises:
        ConfigError: If the problem is not Hamiltonian
        IntegrationError: At the first point where the gradients disagree
    """
    rng = np.random.default_rng(cfg.seed)
    if cfg.problem is ProblemId.SCHWARZSCHILD:
        system = schwarzschild_system(cfg.schwarzschild)
        points = schwarzschild_sample_states(cfg.schwarzschild, n_points, rng)
    elif cfg.problem is ProblemId.HARMONIC:
        system = harmonic_oscillator(cfg.omega)
        points = [PhaseState(q=rng.normal(size=1), p=rng.normal(size=1)) for _ in range(n_points)]
    else:
        raise ConfigError(f"{cfg.problem.value} has no Hamiltonian to check")
    for point in points:
        if not check_gradients(system, point, rel_tol):
            raise IntegrationError(f"analytic gradients of {cfg.problem.value} disagree with central "
                                   f"differences at q={point.q.tolist()}, p={point.p.tolist()}")
    logger.debug(f"Gradients of {cfg.problem.value} agree at {len(points)} points (seed {cfg.seed})")
    return len(points)


def run_geodesic(cfg: ExperimentConfig, command: str = "geodesic") -> tuple[Trajectory, RunSummary]:
    """
    Integrate an equatorial Schwarzschild geodesic from the apocentre.

    The CSV carries the projected state, H, the energy error H - m²/2, the xy
    orbit and normalized columns; with ``cfg.compare`` also errors against the
    oracle and their running maxima.

    Raises:
        ConfigError: If ``cfg.problem`` is not schwarzschild
        IntegrationError: If the seeded gradient check fails
    """
    if cfg.problem is not ProblemId.SCHWARZSCHILD:
        raise ConfigError(f"run_geodesic needs problem=schwarzschild, got {cfg.problem.value}")
    if cfg.seed is not None:
        gradient_check(cfg)
    params = cfg.schwarzschild
    system = schwarzschild_system(params)
    initial = schwarzschild_initial_conditions(params)
    trajectory, counter, runtime, failure = _execute(
        cfg, command, lambda counter: _run_hamiltonian(cfg, system, initial, counter))

    columns = geodesic_columns(trajectory, params)
    extra_columns, errors = _compare(cfg, trajectory, trajectory.taus)
    columns.update(extra_columns)

    precession = {"precession_estimate": pericenter_precession_estimate(params)}
    try:
        measured = precession_study(trajectory)
        precession.update(precession_measured=measured.mean, precession_measured_std=measured.std)
    except InsufficientDataError as e:
        logger.debug(f"No precession measurement: {e}")

    summary = _summary(cfg, command, trajectory, counter, step_count(cfg), runtime, failure,
                       max_abs_invariant_error=float(np.nanmax(np.abs(columns["dH"]))),
                       **errors, **precession)
    _write(cfg, trajectory, summary, columns)
    logger.info(f"{command} finished: {summary.evaluations} evaluations, max |dH| {summary.max_abs_invariant_error:.3e}")
    return trajectory, summary


def run_harmonic(cfg: ExperimentConfig, command: str = "harmonic") -> tuple[Trajectory, RunSummary]:
    """Harmonic oscillator from q=1, p=0; comparisons use the exact flow."""
    if cfg.problem is not ProblemId.HARMONIC:
        raise ConfigError(f"run_harmonic needs problem=harmonic, got {cfg.problem.value}")
    if cfg.seed is not None:
        gradient_check(cfg)
    system = harmonic_oscillator(cfg.omega)
    trajectory, counter, runtime, failure = _execute(
        cfg, command, lambda counter: _run_hamiltonian(cfg, system, HARMONIC_INITIAL, counter))

    invariants = np.asarray(trajectory.invariants)
    columns = {"dH": invariants - invariants[0]}
    extra_columns, errors = _compare(cfg, trajectory, trajectory.taus)
    columns.update(extra_columns)

    summary = _summary(cfg, command, trajectory, counter, step_count(cfg), runtime, failure,
                       max_abs_invariant_error=float(np.nanmax(np.abs(columns["dH"]))), **errors)
    _write(cfg, trajectory, summary, columns)
    return trajectory, summary


def run_vdp(cfg: ExperimentConfig, command: str = "vdp") -> tuple[Trajectory, RunSummary]:
    """
    Integrate the forced van der Pol oscillator.

    Method 1 and Method 2 run through ``integrate_ode``; implicit midpoint and
    the oracle are the references. With ``cfg.compare`` the CSV carries
    errors against the oracle and the max-error-so-far series.

    Raises:
        ConfigError: If ``cfg.problem`` is not vdp
    """
    if cfg.problem is not ProblemId.VDP:
        raise ConfigError(f"run_vdp needs problem=vdp, got {cfg.problem.value}")
    system = vdp_system(cfg.vdp)
    x0 = system.initial_state()
    h = cfg.step_size
    n_steps = step_count(cfg)

    def run(counter: EvalCounter) -> Trajectory:
        if cfg.method in (MethodId.METHOD1, MethodId.METHOD2):
            m = resolve_method(cfg)
            return integrate_ode(system, OdeMethod(cfg.method.value), x0, h, n_steps, m.mix1, m.mix2,
                                 m.projection, cfg.mode, m.composition, sample_every=cfg.sample_every,
                                 counter=counter)
        csys = counted(system, counter)
        if cfg.method is MethodId.IMPLICIT_MIDPOINT:
            return integrate_implicit_midpoint(csys, x0, h, n_steps, sample_every=cfg.sample_every, counter=counter)
        return _oracle_run(csys.field, x0, 0.0, h, n_steps, cfg, system.variable_names, counter)

    trajectory, counter, runtime, failure = _execute(cfg, command, run)
    columns, errors = _compare(cfg, trajectory, trajectory.times)
    summary = _summary(cfg, command, trajectory, counter, n_steps, runtime, failure, **errors)
    _write(cfg, trajectory, summary, columns)
    logger.info(f"{command} finished: {summary.evaluations} evaluations")
    return trajectory, summary


_RUNNERS = {
    ProblemId.SCHWARZSCHILD: run_geodesic,
    ProblemId.VDP: run_vdp,
    ProblemId.HARMONIC: run_harmonic,
}


def run_experiment(cfg: ExperimentConfig) -> tuple[Trajectory, RunSummary]:
    """Dispatch to the runner for ``cfg.problem``."""
    return _RUNNERS[cfg.problem](cfg)


# Studies

def fit_power_law(hs: Sequence[float], errors: Sequence[float], floor: float):
    """
    Least-squares line through (log h, log error), skipping errors at or
    below ``floor``.

    Returns:
        (slope, intercept, excluded step sizes)

    Raises:
        InsufficientDataError: If fewer than two points remain
    """
    kept = [(h, e) for h, e in zip(hs, errors) if e > floor]
    excluded = [h for h, e in zip(hs, errors) if not e > floor]
    if excluded:
        logger.warning(f"Excluding step sizes {excluded} at the round-off floor {floor:.1e}")
    if len(kept) < 2:
        raise InsufficientDataError(f"only {len(kept)} step sizes above the round-off floor")
    log_h = np.log([h for h, _ in kept])
    log_e = np.log([e for _, e in kept])
    slope, intercept = np.polyfit(log_h, log_e, 1)
    return float(slope), float(intercept), excluded


def convergence_study(
    cfg: ExperimentConfig,
    hs: Sequence[float],
    horizon: Optional[float] = None,
    floor: float = ROUND_OFF_FLOOR,
) -> ConvergenceResult:
    """
    Fit the global order of the configured method from endpoint errors.

    Each h runs the configured method to ``horizon`` (orbits for
    schwarzschild, time otherwise; the configured duration when None) and is
    compared against ``reference_solution`` at the run's final time. Errors
    are max-norm; those at or below ``floor`` times the size of the reference
    state are excluded from the fit.

    Raises:
        InsufficientDataError: If fewer than 3 step sizes are given or fewer
            than 2 survive the floor
    """
    if len(hs) < 3:
        raise InsufficientDataError(f"convergence study needs at least 3 step sizes, got {len(hs)}")
    horizon_key = "orbits" if cfg.problem is ProblemId.SCHWARZSCHILD else "t_end"
    update = {"out": None, "compare": False, "sample_every": _ENDPOINTS_ONLY}
    if horizon is not None:
        update[horizon_key] = horizon

    errors = []
    scale = 1.0
    with PerformanceLogger() as perf:
        perf.start(f"convergence_study[{cfg.problem.value}/{cfg.method.value}]")
        for h in hs:
            run_cfg = cfg.model_copy(update={**update, "h": h})
            trajectory, summary = run_experiment(run_cfg)
            if summary.diverged:
                raise InsufficientDataError(f"h={h!r} diverged: {summary.message}")
            reference = reference_solution(run_cfg, [trajectory.taus[-1]])[-1]
            scale = max(scale, float(np.max(np.abs(reference))))
            errors.append(float(np.max(np.abs(trajectory.final_state - reference))))
            logger.debug(f"h={h!r}: endpoint error {errors[-1]:.3e}")

    slope, intercept, excluded = fit_power_law(hs, errors, floor * scale)
    logger.info(f"Convergence of {cfg.method.value} on {cfg.problem.value}: slope {slope:.3f}")
    return ConvergenceResult(slope=slope, intercept=intercept, hs=list(hs), errors=errors, excluded=excluded)


def envelope_slope(steps: Sequence[float], errors: Sequence[float]) -> DriftSummary:
    """
    Slope of the running max of |errors| against step index, fitted over the
    second half of the samples.

    Raises:
        InsufficientDataError: If there are fewer than 100 samples
    """
    steps = np.asarray(steps, dtype=np.float64)
    errors = np.abs(np.asarray(errors, dtype=np.float64))
    if steps.size < MIN_DRIFT_SAMPLES:
        raise InsufficientDataError(f"drift study needs at least {MIN_DRIFT_SAMPLES} samples, got {steps.size}")
    envelope = np.maximum.accumulate(errors)
    half = steps.size // 2
    slope, intercept = np.polyfit(steps[half:], envelope[half:], 1)
    return DriftSummary(slope=float(slope), intercept=float(intercept), final_max=float(envelope[-1]),
                        samples=int(steps.size))


def drift_study(trajectory: Trajectory, target: Optional[float] = None) -> DriftSummary:
    """
    Secular slope of the max-|ΔH| envelope, ΔH = H - target (the first
    sample's H when None).
    """
    invariants = np.asarray(trajectory.invariants, dtype=np.float64)
    if invariants.size and np.all(np.isnan(invariants)):
        raise InsufficientDataError("trajectory carries no invariant")
    target = invariants[0] if target is None else target
    return envelope_slope(trajectory.steps, invariants - target)


def precession_study(trajectory: Trajectory, r_label: str = "r", phi_label: str = "phi",
                     min_passages: int = 3) -> PrecessionSummary:
    """
    Pericentre advance per orbit.

    Pericentres are strict local minima of r over consecutive samples,
    refined with the parabola through the bracketing triple; φ is
    interpolated with the same parabola. The advance is the angle between
    successive pericentres minus 2π.

    Raises:
        InsufficientDataError: If fewer than ``min_passages`` pericentres are found
        KeyError: If a label is missing
    """
    r = trajectory.column(r_label)
    phi = trajectory.column(phi_label)
    angles = []
    for i in range(1, r.size - 1):
        if not (r[i - 1] > r[i] <= r[i + 1]):
            continue
        curvature = r[i - 1] - 2.0 * r[i] + r[i + 1]
        offset = 0.5 * (r[i - 1] - r[i + 1]) / curvature if curvature > 0.0 else 0.0
        angle = (phi[i] + 0.5 * offset * (phi[i + 1] - phi[i - 1])
                 + 0.5 * offset * offset * (phi[i + 1] - 2.0 * phi[i] + phi[i - 1]))
        angles.append(float(angle))
    if len(angles) < min_passages:
        raise InsufficientDataError(f"found {len(angles)} pericentre passages, need {min_passages}")

    advances = np.abs(np.diff(angles)) - 2.0 * math.pi
    return PrecessionSummary(mean=float(np.mean(advances)), std=float(np.std(advances)),
                             passages=len(angles), angles=angles)


def map_study(cfg: ExperimentConfig, hs: Sequence[float] = MAP_STUDY_HS, steps: int = 2,
              floor: float = 1e-14) -> MapStudyResult:
    """
    Leading order of |ΔH| after ``steps`` extended steps from the
    Schwarzschild clone, for the configured scheme, mixing maps and
    projection. ``hs`` are fractions of the orbital period.

    Raises:
        InsufficientDataError: If fewer than 3 step sizes are given
    """
    if len(hs) < 3:
        raise InsufficientDataError(f"map study needs at least 3 step sizes, got {len(hs)}")
    params = cfg.schwarzschild
    system = schwarzschild_system(params)
    initial = schwarzschild_initial_conditions(params)
    m = resolve_method(cfg)
    h0 = system.value(initial.q, initial.p)

    delta_h = []
    for h in hs:
        s = clone_up(initial)
        for _ in range(steps):
            s = leapfrog_step(system, m.scheme, s, h * params.period, m.mix1, m.mix2)
        out = apply_projection(m.projection, s)
        delta_h.append(abs(system.value(out.q, out.p) - h0))

    slope, _, _ = fit_power_law(hs, delta_h, floor)
    logger.info(f"Map study {m.mix1}/{m.mix2}/{m.projection}: slope {slope:.3f}")
    return MapStudyResult(slope=slope, hs=list(hs), delta_h=delta_h)


# Sweeps

def _sweep_worker(payload: dict) -> dict:
    cfg = ExperimentConfig.model_validate(payload)
    _, summary = run_experiment(cfg)
    return summary.model_dump(mode="json")


def load_sweep(path: Union[str, Path]) -> list[ExperimentConfig]:
    """
    Read a sweep file: a JSON object with an optional ``base`` configuration
    and a ``runs`` list of overrides. Runs without ``out`` write to
    ``<output dir>/sweep_<index>.csv``.

    Raises:
        ConfigError: If the file is malformed or a run does not validate
    """
    try:
        data = read_config_file(path)
    except (OSError, ValueError) as e:
        raise ConfigError(str(e)) from e
    runs = data.get("runs")
    if not isinstance(runs, list) or not runs:
        raise ConfigError(f"Sweep file '{path}' needs a non-empty 'runs' list")
    base = data.get("base") or {}
    configs = []
    for index, run in enumerate(runs):
        merged = {**base, **run}
        merged.setdefault("out", str(output_dir() / f"sweep_{index:03d}.csv"))
        configs.append(build_config(merged))
    return configs


def sweep(configs: Sequence[ExperimentConfig], workers: Optional[int] = None) -> list[RunSummary]:
    """
    Run independent experiments, in a process pool unless ``workers`` is 1.

    Raises:
        ConfigError: If two runs would write the same output file
    """
    outs = [cfg.out for cfg in configs if cfg.out is not None]
    if len(set(outs)) != len(outs):
        raise ConfigError("sweep runs must write to distinct output files")
    payloads = [cfg.model_dump(mode="json") for cfg in configs]
    logger.info(f"Sweeping {len(payloads)} configurations with {workers or 'default'} workers")
    with PerformanceLogger() as perf:
        perf.start(f"sweep[{len(payloads)}]")
        if workers == 1:
            results = [_sweep_worker(payload) for payload in payloads]
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_sweep_worker, payloads))
    return [RunSummary.model_validate(result) for result in results]
