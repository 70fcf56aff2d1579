"""Shared fixtures: inputs generated through the epichain command line.

The plotting package consumes only the documented CSV files, so every
fixture shells out to the installed `epichain` executable rather than
importing the simulation library.
"""

import subprocess

import pytest


def run_epichain(args):
    proc = subprocess.run(["epichain"] + args, capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return proc


@pytest.fixture(scope="session")
def summary_dirs(tmp_path_factory):
    """Summary CSVs for dispersion levels 0, 1 and 4 on a shared time axis."""
    out = {}
    for nu in (0, 1, 4):
        d = tmp_path_factory.mktemp(f"nu{nu}")
        run_epichain([
            "simulate", "--preset", "sir-small", "--steps", "60",
            "--trajectories", "400", "--nu", str(nu), "--seed", "11",
            "--out-dir", str(d),
        ])
        out[float(nu)] = d / "summary.csv"
    return out


@pytest.fixture(scope="session")
def measurements_csv(tmp_path_factory):
    d = tmp_path_factory.mktemp("meas")
    run_epichain([
        "generate-measurements", "--preset", "sir-small", "--steps", "60",
        "--out-dir", str(d),
    ])
    return d / "measurements.csv"


@pytest.fixture(scope="session")
def chain_csv(tmp_path_factory):
    d = tmp_path_factory.mktemp("chain")
    meas = tmp_path_factory.mktemp("chain-meas")
    run_epichain([
        "generate-measurements", "--preset", "sir-table1", "--steps", "60",
        "--out-dir", str(meas),
    ])
    run_epichain([
        "infer", "--preset", "sir-table1",
        "--measurements", str(meas / "measurements.csv"),
        "--iterations", "150", "--particles", "30", "--burn-in", "30",
        "--score", "logml", "--seed", "5", "--out-dir", str(d),
    ])
    return d / "chain.csv"
