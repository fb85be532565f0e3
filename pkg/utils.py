import csv
import json
import math
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel

from core import Trajectory
from logging_config import get_logger

# Initialize logger for utils module
logger = get_logger("xps-leapfrog.utils")

FIXED_COLUMNS = ("step", "tau", "t")
TRAILING_COLUMNS = ("invariant", "evaluations")


def format_float(value: float) -> str:
    """
    Format a float with 17 significant digits so it round-trips exactly.

    Examples:
        >>> format_float(0.1)
        '0.10000000000000001'
        >>> format_float(float("nan"))
        'nan'
    """
    if math.isnan(value):
        return "nan"
    return f"{value:.17g}"


def ensure_parent(path: Union[str, Path]) -> Path:
    """Create the parent directory of ``path`` and return it as a Path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def write_trajectory_csv(
    path: Union[str, Path],
    trajectory: Trajectory,
    extra_columns: Optional[Mapping[str, Sequence[float]]] = None,
) -> Path:
    """
    Write a trajectory as CSV.

    Columns are step, tau, t, one column per state label, invariant,
    evaluations, followed by any extra columns in insertion order.

    Args:
        path: Output file; parent directories are created
        trajectory: Samples to write
        extra_columns: Additional per-sample series, each of length len(trajectory)

    Returns:
        The path written

    Raises:
        ValueError: If an extra column has the wrong length
    """
    path = ensure_parent(path)
    extra_columns = dict(extra_columns or {})
    for name, values in extra_columns.items():
        if len(values) != len(trajectory):
            raise ValueError(f"extra column '{name}' has {len(values)} values for {len(trajectory)} samples")

    header = [*FIXED_COLUMNS, *trajectory.labels, *TRAILING_COLUMNS, *extra_columns]
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for i in range(len(trajectory)):
            row = [str(trajectory.steps[i]), format_float(trajectory.taus[i]), format_float(trajectory.times[i])]
            row.extend(format_float(float(v)) for v in trajectory.rows[i])
            row.append(format_float(trajectory.invariants[i]))
            row.append(str(trajectory.evaluations[i]))
            row.extend(format_float(float(values[i])) for values in extra_columns.values())
            writer.writerow(row)

    logger.info(f"Wrote {len(trajectory)} samples to {path}")
    return path


def read_trajectory_csv(path: Union[str, Path]) -> Trajectory:
    """
    Read a CSV written by ``write_trajectory_csv``; extra columns are ignored.

    Raises:
        FileNotFoundError: If the file does not exist
        ValueError: If the header does not have the expected layout
    """
    path = Path(path)
    if not path.exists():
        logger.error(f"Trajectory file does not exist: {path}")
        raise FileNotFoundError(f"Trajectory file '{path}' does not exist")

    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or tuple(header[:3]) != FIXED_COLUMNS or "evaluations" not in header:
            raise ValueError(f"'{path}' is not a trajectory CSV")
        end = header.index("invariant")
        labels = header[3:end]
        rows = [[float(value) for value in row[:end + 2]] for row in reader]

    logger.debug(f"Read {len(rows)} samples with labels {labels} from {path}")
    return Trajectory.from_rows(labels, rows)


def write_json(path: Union[str, Path], payload: Union[BaseModel, Mapping]) -> Path:
    """Write a pydantic model or a mapping as indented JSON."""
    path = ensure_parent(path)
    if isinstance(payload, BaseModel):
        text = payload.model_dump_json(indent=2)
    else:
        text = json.dumps(payload, indent=2, default=_json_default)
    path.write_text(text + "\n", encoding="utf-8")
    logger.debug(f"Wrote JSON to {path}")
    return path


def _json_default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def summary_path(csv_path: Union[str, Path]) -> Path:
    """The JSON summary that sits beside a CSV: ``run.csv`` -> ``run.json``."""
    return Path(csv_path).with_suffix(".json")


def read_config_file(path: Union[str, Path]) -> dict:
    """
    Load a JSON experiment configuration.

    Keys use the CLI flag names with dashes replaced by underscores.

    Raises:
        FileNotFoundError: If the file does not exist
        ValueError: If the file is not a JSON object
    """
    path = Path(path)
    if not path.exists():
        logger.error(f"Config file does not exist: {path}")
        raise FileNotFoundError(f"Config file '{path}' does not exist")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ValueError(f"Config file '{path}' is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ValueError(f"Config file '{path}' must contain a JSON object")
    logger.debug(f"Loaded config keys {sorted(data)} from {path}")
    return {key.replace("-", "_"): value for key, value in data.items()}


def parse_float_list(text: str) -> list[float]:
    """
    Parse a comma-separated list of floats.

    Examples:
        >>> parse_float_list("0.2, 0.1,0.05")
        [0.2, 0.1, 0.05]
    """
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ValueError(f"'{text}' is not a comma-separated list of numbers") from None
