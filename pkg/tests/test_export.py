import json

import pytest
import scipy.sparse as sp

from constants import CHECK_COLUMNS, CONSTANT_COLUMNS
from export.csv_report import read_records, write_records
from export.manifest import CheckSummary, RunManifest
from export.records import CheckRow, ConstantRow
from export.vtk_writer import write_boundary_vtk, write_matrix, write_solution_vtk
from solver import picard_solve
from utils import format_float


def test_format_float():
    assert format_float(0.1) == "0.10000000000000001"
    assert format_float(True) == "true"
    assert format_float(3) == "3"
    assert float(format_float(1.0 / 3.0)) == 1.0 / 3.0


def test_check_rows():
    assert CheckRow.at_most("residual", 1e-9, 1e-8).passed
    assert not CheckRow.at_least("korn", 0.5, 1.0).passed


def test_csv_report(tmp_path):
    path = write_records(tmp_path / "checks.csv", [CheckRow.at_most("residual", 0.1, 0.2)], CHECK_COLUMNS)
    rows = read_records(path)
    assert rows == [
        {"name": "residual", "value": "0.10000000000000001", "tolerance": "0.20000000000000001", "passed": "true"}
    ]


def test_csv_header_only(tmp_path):
    path = write_records(tmp_path / "empty.csv", [], CHECK_COLUMNS)
    assert path.read_text() == "name,value,tolerance,passed\n"
    assert read_records(path) == []


def test_csv_schema_mismatch(tmp_path):
    with pytest.raises(ValueError):
        write_records(tmp_path / "bad.csv", [ConstantRow("korn_c", 1.0, "eigenvalue")], CHECK_COLUMNS)
    path = write_records(tmp_path / "ok.csv", [ConstantRow("korn_c", 1.0, "eigenvalue")], CONSTANT_COLUMNS)
    assert read_records(path)[0]["value"] == "1"


def test_boundary_vtk(straight_mesh, tmp_path):
    lines = write_boundary_vtk(straight_mesh, tmp_path / "boundary.vtk").read_text().splitlines()
    assert lines[0] == "# vtk DataFile Version 3.0"
    assert "POINTS 225 double" in lines
    types = lines.index("CELL_TYPES 64")
    assert lines[types + 1 : types + 65] == ["3"] * 64
    assert "CELL_DATA 64" in lines
    assert "SCALARS boundary_tag int 1" in lines


def test_solution_vtk(straight_problem, tmp_path):
    bundle = picard_solve(straight_problem)
    lines = write_solution_vtk(bundle, tmp_path / "solution.vtk").read_text().splitlines()
    types = lines.index("CELL_TYPES 384")
    assert set(lines[types + 1 : types + 385]) == {"5"}
    assert "POINT_DATA 225" in lines
    for name in ("velocity", "carrier", "perturbation"):
        assert f"VECTORS {name} double" in lines
    assert "SCALARS pressure double 1" in lines


def test_write_matrix(tmp_path):
    matrix = sp.csr_matrix([[1.0, 0.0, 0.0], [0.0, 2.5, 0.0]])
    lines = write_matrix(matrix, tmp_path / "m.coo").read_text().splitlines()
    assert lines == ["2 3 2", "0 0 1", "1 1 2.5"]


def test_manifest(tmp_path):
    checks = [CheckRow.at_most("a", 1.0, 2.0), CheckRow.at_most("b", 3.0, 2.0)]
    manifest = RunManifest(
        command="solve",
        config={"flow": {"flux": 0.5}},
        seed=4,
        fingerprint="abc",
        checks=CheckSummary.from_checks(checks),
    )
    data = json.loads(manifest.write(tmp_path).read_text())
    assert data["checks"] == {"total": 2, "passed": 1, "failed": ["b"]}
    assert data["seed"] == 4
    assert data["error"] is None
    assert {"python", "numpy", "scipy", "pydantic"} <= set(data["versions"])
