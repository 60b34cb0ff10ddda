"""This module includes integration tests for the whole toolkit."""

import json
import math

import pandas as pd
import pytest

from typer.testing import CliRunner

from unit.utils import write_parameter_file

from src.app import app

FAST = ["--steps", "256"]


@pytest.fixture(name="workspace")
def fixture_workspace(tmp_path):
    """Directory with the reference parameter file.

    Returns
    -------
    pathlib.Path
        Temporary directory holding ``rb87.txt``.
    """
    write_parameter_file(tmp_path / "rb87.txt")
    return tmp_path


def test_parameter_file_to_point(runner: CliRunner, workspace):
    """Tests the flow parameter file -> bound -> physical scan with overlay -> single point.

    Parameters
    ----------
    runner : typer.testing.CliRunner
        Test runner of the command line interface.
    workspace : pathlib.Path
        Directory with the reference parameter file.
    """
    config = str(workspace / "rb87.txt")

    params = runner.invoke(app, ["params", "--config", config])
    assert params.exit_code == 0, params.output

    boundary = runner.invoke(
        app, ["boundary", "--config", config, "--out", str(workspace / "boundary.csv")]
    )
    bound_metadata = json.loads((workspace / "boundary.json").read_text())
    assert boundary.exit_code == 0, boundary.output
    assert f"{bound_metadata['threshold_omega_rad_s']:.6g}" in params.stdout, (
        "params and boundary should report the same threshold"
    )

    scan_args = ["scan", "--config", config, "--x-min", "1e4", "--x-max", "3e4"]
    scan_args += ["--x-n", "3", "--y-n", "3", "--overlay", "--pgm", *FAST]
    scan = runner.invoke(app, [*scan_args, "--out", str(workspace / "scan.csv")])
    frame = pd.read_csv(workspace / "scan.csv", dtype={"stable": str}, keep_default_na=False)
    scan_metadata = json.loads((workspace / "scan.json").read_text())
    assert scan.exit_code == 0, scan.output
    assert scan_metadata["overlay"]["label"] == "estimated upper bound", "Overlay is missing"
    assert (workspace / "scan.pgm").exists(), "PGM should be written"

    cell = frame.iloc[4]
    point_args = ["point", "--alpha1", str(cell["alpha1"]), "--alpha2", str(cell["alpha2"])]
    point_args += ["--alpha3", str(cell["alpha3"]), *FAST, "--out", str(workspace / "p.json")]
    point = runner.invoke(app, point_args)
    report = json.loads((workspace / "p.json").read_text())

    assert point.exit_code == (0 if report["stable"] else 10), point.output
    assert cell["stable"] == ("1" if report["stable"] else "0"), "Verdicts should agree"
    assert math.isclose(report["max_modulus"], float(cell["max_modulus"]), rel_tol=1e-9), (
        "Scan cell and single point should give the same multipliers"
    )


def test_simulate_from_parameter_file(runner: CliRunner, workspace):
    """Tests a steady-orbit simulation of the reference guide.

    Parameters
    ----------
    runner : typer.testing.CliRunner
        Test runner of the command line interface.
    workspace : pathlib.Path
        Directory with the reference parameter file.
    """
    out = workspace / "trajectory.csv"
    args = ["simulate", "--config", str(workspace / "rb87.txt"), "--steady", "1", "0"]
    args += ["--periods", "2", "--sample-every", "1024", "--out", str(out)]
    result = runner.invoke(app, args)
    metadata = json.loads((workspace / "trajectory.json").read_text())

    assert result.exit_code == 0, result.output
    assert math.isclose(metadata["alphas"]["alpha2"], 30.4418, rel_tol=1e-4), "alpha2 differs"
    assert len(pd.read_csv(out)) == 3, "One sample per period plus the initial state"
