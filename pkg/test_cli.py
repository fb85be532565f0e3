#!/usr/bin/env python3
"""
End-to-end tests of the xps command line: artifacts and exit codes.

Run with ``uv run pytest test_cli.py`` or directly with ``uv run test_cli.py``.
"""

import json
import shutil
import tempfile
from pathlib import Path

from logging_config import get_logger
from utils import read_trajectory_csv
from xps import EXIT_CONFIG, EXIT_DIVERGED, EXIT_OK, main as xps_main

logger = get_logger("xps-leapfrog.test")


def create_test_directory() -> Path:
    test_dir = Path(tempfile.mkdtemp(prefix="xps_cli_"))
    logger.info(f"Created test directory: {test_dir}")
    return test_dir


def test_geodesic_writes_artifacts():
    test_dir = create_test_directory()
    try:
        out = test_dir / "geo.csv"
        assert xps_main(["geodesic", "--orbits", "0", "--out", str(out)]) == EXIT_OK
        assert out.exists()
        summary = json.loads(out.with_suffix(".json").read_text())
        assert summary["problem"] == "schwarzschild"
        assert summary["n_steps"] == 0 and summary["evaluations"] == 0
        assert not summary["diverged"]
        assert len(read_trajectory_csv(out)) == 1
    finally:
        shutil.rmtree(test_dir)


def test_configuration_errors():
    test_dir = create_test_directory()
    try:
        out = str(test_dir / "bad.csv")
        assert xps_main(["geodesic", "--mix1", "nonsense", "--orbits", "0", "--out", out]) == EXIT_CONFIG
        assert xps_main(["vdp", "--method", "extended", "--out", out]) == EXIT_CONFIG
        assert xps_main(["sweep"]) == EXIT_CONFIG
        assert xps_main(["geodesic", "--config", str(test_dir / "missing.json"), "--out", out]) == EXIT_CONFIG
        assert not Path(out).exists()
    finally:
        shutil.rmtree(test_dir)


def test_drift_on_harmonic_run():
    test_dir = create_test_directory()
    try:
        out = test_dir / "ho.csv"
        args = ["drift", "--problem", "harmonic", "--mix1", "identity", "--mix2", "identity", "--h", "0.1",
                "--out", str(out)]
        assert xps_main(args + ["--t-end", "60"]) == EXIT_OK
        result = json.loads((test_dir / "ho_drift.json").read_text())
        assert abs(result["slope"]) < 1e-6
        assert result["final_max"] < 1e-2

        # ten steps are too few samples for an envelope fit
        assert xps_main(args + ["--t-end", "1"]) == EXIT_CONFIG
    finally:
        shutil.rmtree(test_dir)


def test_converge_writes_fit():
    test_dir = create_test_directory()
    try:
        out = test_dir / "conv.json"
        args = ["converge", "--problem", "harmonic", "--mix1", "identity", "--mix2", "identity",
                "--proj", "proj_primary", "--t-end", "10", "--h-list", "0.2,0.1,0.05", "--out", str(out)]
        assert xps_main(args) == EXIT_OK
        result = json.loads(out.read_text())
        assert 1.8 < result["slope"] < 2.3
    finally:
        shutil.rmtree(test_dir)


def test_sweep_reports_divergence():
    """Störmer-Verlet copies are unstable past h = 2 on the unit oscillator."""
    test_dir = create_test_directory()
    try:
        sweep_file = test_dir / "sweep.json"
        sweep_file.write_text(json.dumps({
            "base": {"problem": "harmonic", "mix1": "identity", "mix2": "identity", "t_end": 300},
            "runs": [
                {"h": 0.1, "out": str(test_dir / "stable.csv")},
                {"h": 3.0, "out": str(test_dir / "unstable.csv")},
            ],
        }))
        assert xps_main(["sweep", "--config", str(sweep_file), "--workers", "1"]) == EXIT_DIVERGED
        stable = json.loads((test_dir / "stable.json").read_text())
        unstable = json.loads((test_dir / "unstable.json").read_text())
        assert not stable["diverged"]
        assert unstable["diverged"]
        assert unstable["last_valid_step"] < 100
    finally:
        shutil.rmtree(test_dir)


def main():
    """Run all CLI tests."""
    print("=" * 60)
    print("CLI TESTS")
    print("=" * 60)
    tests = [
        test_geodesic_writes_artifacts,
        test_configuration_errors,
        test_drift_on_harmonic_run,
        test_converge_writes_fit,
        test_sweep_reports_divergence,
    ]
    for test in tests:
        test()
        print(f"✅ {test.__name__}")
    print("\n🎉 All CLI tests passed!")


if __name__ == "__main__":
    main()
