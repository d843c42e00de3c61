import json
import logging
from pathlib import Path

import pytest

from commands import run
from config import load_config, parse_config
from export.csv_report import read_records
from logger import logger

STRAIGHT = """
[geometry]
amplitude = 0
straight_from = 0

[flow]
flux = {flux}

[carrier]
epsilon = 0.1
dist = 1

[mesh]
half_length = 3
h = 0.25
{extra}
"""


def straight_config(flux, extra=""):
    return parse_config(STRAIGHT.format(flux=flux, extra=extra))


def read_manifest(directory):
    return json.loads((directory / "manifest.json").read_text())


def test_verify_carrier_command(tmp_path):
    assert run("verify-carrier", straight_config(1.0), tmp_path) == 0
    out = tmp_path / "verify-carrier"
    manifest = read_manifest(out)
    assert manifest["exit_status"] == 0
    assert manifest["checks"]["failed"] == []
    assert manifest["config"]["cutoffs"]["epsilon"] == 0.1
    checks = read_records(out / "checks.csv")
    assert checks and all(row["passed"] == "true" for row in checks)
    names = {row["name"] for row in read_records(out / "carrier.csv")}
    assert "hardy_ratio" in names


def test_solve_command_at_zero_flux(tmp_path):
    assert run("solve", straight_config(0.0), tmp_path) == 0
    out = tmp_path / "solve"
    for name in ("iterations.csv", "solution.csv", "solution.vtk", "boundary.vtk", "checks.csv", "manifest.json"):
        assert (out / name).exists()
    assert len(read_records(out / "iterations.csv")) == 1


def test_uniqueness_without_convergence_fails_checks(tmp_path):
    config = straight_config(0.5, "\n[solver]\nmax_iters = 1\n")
    assert run("uniqueness", config, tmp_path) == 3
    checks = {row["name"]: row["passed"] for row in read_records(tmp_path / "uniqueness" / "checks.csv")}
    assert checks["all_starts_converged"] == "false"


def test_nonconvergent_solve_reports_numerical_failure(tmp_path):
    config = straight_config(0.5, "\n[solver]\nmax_iters = 1\n")
    assert run("solve", config, tmp_path) == 2
    manifest = read_manifest(tmp_path / "solve")
    assert manifest["exit_status"] == 2
    assert manifest["error"].startswith("NonConvergenceError")
    assert len(read_records(tmp_path / "solve" / "iterations.csv")) == 1


def test_unknown_command(tmp_path):
    with pytest.raises(ValueError, match="unknown command"):
        run("plot", straight_config(0.0), tmp_path)


@pytest.mark.slow
def test_solve_command_on_default_config(tmp_path):
    config = load_config(Path(__file__).resolve().parents[1] / "configs" / "default.ini")
    assert config.flux == 0.5
    assert run("solve", config, tmp_path) == 0
    checks = {row["name"]: row for row in read_records(tmp_path / "solve" / "checks.csv")}
    assert checks["station_flux_error"]["passed"] == "true"
    assert float(checks["station_flux_error"]["value"]) <= 1e-8
    assert read_manifest(tmp_path / "solve")["checks"]["failed"] == []


def test_each_command_keeps_its_own_log(tmp_path):
    assert run("verify-carrier", straight_config(1.0), tmp_path) == 0
    out = tmp_path / "verify-carrier"
    logs = list(out.glob("verify-carrier_*.log"))
    assert len(logs) == 1
    text = logs[0].read_text(encoding="utf-8")
    assert "verify-carrier: starting" in text
    assert "verify-carrier: exit status 0" in text
    assert str(logs[0]) in read_manifest(out)["outputs"]
    assert not any(isinstance(h, logging.FileHandler) for h in logger.handlers)
