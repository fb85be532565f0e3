import argparse
import sys
from pathlib import Path
from typing import Optional

import dotenv
from pydantic import ValidationError

from core import DivergenceError, IntegrationError
from harness import (
    MAP_STUDY_HS,
    ConfigError,
    build_config,
    convergence_study,
    drift_study,
    load_sweep,
    map_study,
    output_dir,
    precession_study,
    run_experiment,
    sweep,
)
from logging_config import configure_from_env, get_logger, set_log_level
from maps import preset_names
from models import ExperimentConfig, MethodId, ProblemId
from reference import OracleMethod
from splitting import SCHEMES, DriverMode
from utils import parse_float_list, read_trajectory_csv, write_json

logger = get_logger("xps-leapfrog.cli")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_DIVERGED = 2
EXIT_CONFIG = 3

# flag destinations that are not experiment settings
_NON_CONFIG = {"command", "handler", "config", "log_level", "h_list", "horizon", "input", "workers"}


def add_experiment_flags(parser: argparse.ArgumentParser, problem: bool = True):
    """Flags mirroring ExperimentConfig; all default to None so lower layers win."""
    if problem:
        parser.add_argument("--problem", choices=[p.value for p in ProblemId], help="Problem to integrate")
    parser.add_argument("--method", choices=[m.value for m in MethodId], help="Integrator")
    parser.add_argument("--scheme", choices=list(SCHEMES), help="Extended leapfrog scheme")
    parser.add_argument("--mix1", help=f"Mid-step mixing map, 'aq,ap' or one of {', '.join(preset_names())}")
    parser.add_argument("--mix2", help="End-of-step mixing map, 'aq,ap' or a preset name")
    parser.add_argument("--proj", help="Output projection, 'aq,ap', a preset name, P1 or P2")
    parser.add_argument("--mode", choices=[m.value for m in DriverMode], help="Driver mode")
    parser.add_argument("--composition", choices=["none", "kahan6", "yoshida4"], help="Composition of the base step")
    parser.add_argument("--h", type=float, help="Step size (fraction of the orbital period for schwarzschild)")
    parser.add_argument("--orbits", type=float, help="Duration in orbital periods (schwarzschild)")
    parser.add_argument("--t-end", type=float, help="Duration in time units (vdp, harmonic)")
    parser.add_argument("--sample-every", type=int, help="Sample stride in steps")
    parser.add_argument("--out", type=Path, help="CSV/JSON output path")
    parser.add_argument("--compare", action="store_true", default=None, help="Record errors against the oracle")
    parser.add_argument("--oracle-rtol", type=float, help="Oracle relative tolerance")
    parser.add_argument("--oracle-atol", type=float, help="Oracle absolute tolerance")
    parser.add_argument("--oracle-method", choices=[m.value for m in OracleMethod], help="Oracle solver")
    parser.add_argument("--seed", type=int, help="Check gradients at random states from this seed before integrating")
    parser.add_argument("-c", "--config", type=Path, help="JSON config file; flags override it")


def experiment_config(args: argparse.Namespace, **fixed) -> ExperimentConfig:
    overrides = {key: value for key, value in vars(args).items() if key not in _NON_CONFIG}
    overrides.update(fixed)
    return build_config(overrides, args.config)


def _default_out(cfg: ExperimentConfig, stem: str, suffix: str = ".csv") -> Path:
    return cfg.out if cfg.out is not None else output_dir() / f"{stem}_{cfg.problem.value}_{cfg.method.value}{suffix}"


def cmd_run(args: argparse.Namespace, problem: ProblemId) -> int:
    cfg = experiment_config(args, problem=problem.value)
    cfg = cfg.model_copy(update={"out": _default_out(cfg, args.command)})
    _, summary = run_experiment(cfg)
    logger.info(str(summary))
    if summary.diverged:
        logger.error(f"Run diverged: {summary.message}")
        return EXIT_DIVERGED
    return EXIT_OK


def cmd_converge(args: argparse.Namespace) -> int:
    cfg = experiment_config(args)
    result = convergence_study(cfg, parse_float_list(args.h_list), horizon=args.horizon)
    path = write_json(_default_out(cfg, "converge", ".json").with_suffix(".json"), result)
    logger.info(f"Fitted order {result.slope:.3f} over h={result.hs}; written to {path}")
    return EXIT_OK


def _trajectory_for_study(args: argparse.Namespace, stem: str):
    if args.input is not None:
        return read_trajectory_csv(args.input), output_dir() / f"{stem}_{Path(args.input).stem}.json"
    cfg = experiment_config(args)
    cfg = cfg.model_copy(update={"out": _default_out(cfg, stem)})
    trajectory, summary = run_experiment(cfg)
    if summary.diverged:
        raise DivergenceError(summary.message, step=summary.last_valid_step, trajectory=trajectory)
    return trajectory, cfg.out.with_name(f"{cfg.out.stem}_{stem}.json")


def cmd_drift(args: argparse.Namespace) -> int:
    trajectory, path = _trajectory_for_study(args, "drift")
    result = drift_study(trajectory)
    write_json(path, result)
    logger.info(f"Secular slope of the max |dH| envelope: {result.slope:.3e} per step (final max {result.final_max:.3e})")
    return EXIT_OK


def cmd_precession(args: argparse.Namespace) -> int:
    trajectory, path = _trajectory_for_study(args, "precession")
    result = precession_study(trajectory)
    write_json(path, result)
    logger.info(f"Pericentre advance {result.mean:.6f} ± {result.std:.2e} rad/orbit over {result.passages} passages")
    return EXIT_OK


def cmd_mapstudy(args: argparse.Namespace) -> int:
    cfg = experiment_config(args, problem=ProblemId.SCHWARZSCHILD.value)
    hs = parse_float_list(args.h_list) if args.h_list else list(MAP_STUDY_HS)
    result = map_study(cfg, hs)
    path = write_json(_default_out(cfg, "mapstudy", ".json").with_suffix(".json"), result)
    logger.info(f"|dH| leading-order slope {result.slope:.3f}; written to {path}")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    if args.config is None:
        raise ConfigError("sweep needs --config with a sweep file")
    summaries = sweep(load_sweep(args.config), workers=args.workers)
    for summary in summaries:
        logger.info(str(summary))
    return EXIT_DIVERGED if any(s.diverged for s in summaries) else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Extended phase space leapfrog experiments")
    parser.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
                        help="Override LOG_LEVEL")
    subparsers = parser.add_subparsers(dest="command", required=True)

    geodesic = subparsers.add_parser("geodesic", help="Schwarzschild geodesic run")
    add_experiment_flags(geodesic, problem=False)
    geodesic.set_defaults(handler=lambda args: cmd_run(args, ProblemId.SCHWARZSCHILD))

    vdp = subparsers.add_parser("vdp", help="Forced van der Pol run")
    add_experiment_flags(vdp, problem=False)
    vdp.set_defaults(handler=lambda args: cmd_run(args, ProblemId.VDP))

    converge = subparsers.add_parser("converge", help="Fit the global order over step sizes")
    add_experiment_flags(converge)
    converge.add_argument("--h-list", required=True, help="Comma-separated step sizes, e.g. 0.2,0.1,0.05")
    converge.add_argument("--horizon", type=float, help="Orbits (schwarzschild) or time to integrate per h")
    converge.set_defaults(handler=cmd_converge)

    drift = subparsers.add_parser("drift", help="Secular slope of the max |dH| envelope")
    add_experiment_flags(drift)
    drift.add_argument("--input", type=Path, help="Trajectory CSV to analyse instead of running")
    drift.set_defaults(handler=cmd_drift)

    precession = subparsers.add_parser("precession", help="Measured pericentre advance per orbit")
    add_experiment_flags(precession)
    precession.add_argument("--input", type=Path, help="Trajectory CSV to analyse instead of running")
    precession.set_defaults(handler=cmd_precession)

    mapstudy = subparsers.add_parser("mapstudy", help="Leading order of |dH| after two extended steps")
    add_experiment_flags(mapstudy, problem=False)
    mapstudy.add_argument("--h-list", help="Step sizes as fractions of the orbital period")
    mapstudy.set_defaults(handler=cmd_mapstudy)

    sweep_parser = subparsers.add_parser("sweep", help="Run a sweep file, configurations in parallel")
    sweep_parser.add_argument("-c", "--config", type=Path, help="Sweep file with 'base' and 'runs'")
    sweep_parser.add_argument("--workers", type=int, help="Worker processes (1 runs in-process)")
    sweep_parser.set_defaults(handler=cmd_sweep)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    dotenv.load_dotenv()
    configure_from_env()
    logger.debug("Environment variables loaded")

    args = build_parser().parse_args(argv)
    if args.log_level:
        set_log_level(args.log_level)

    try:
        return args.handler(args)
    except DivergenceError as e:
        logger.error(f"Integration diverged at step {e.step}: {e}")
        return EXIT_DIVERGED
    except (ConfigError, ValidationError, FileNotFoundError) as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except IntegrationError as e:
        logger.error(f"Integration failed: {e}")
        return EXIT_FAILURE
    except ValueError as e:
        logger.error(f"Invalid input: {e}")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
