"""Legacy ASCII VTK output for solution fields and boundary tags, plus sparse matrix dumps."""

from pathlib import Path
from typing import Dict, Optional, TextIO

import numpy as np
import scipy.sparse as sp

from constants import LOG_PREFIX_EXPORT, VTK_LINE, VTK_TRIANGLE
from logger import logger
from mesh import TruncatedMesh
from solver import SolutionBundle
from utils import format_float


def _write_header(fh: TextIO, title: str, mesh: TruncatedMesh) -> None:
    fh.write("# vtk DataFile Version 3.0\n")
    fh.write(f"{title}\n")
    fh.write("ASCII\n")
    fh.write("DATASET UNSTRUCTURED_GRID\n")
    fh.write(f"POINTS {mesh.n_vertices} double\n")
    for x, y in mesh.nodes:
        fh.write(f"{format_float(x)} {format_float(y)} 0\n")


def _write_cells(fh: TextIO, connectivity: np.ndarray, cell_type: int) -> None:
    n, k = connectivity.shape
    fh.write(f"CELLS {n} {n * (k + 1)}\n")
    for row in connectivity:
        fh.write(f"{k} " + " ".join(str(int(i)) for i in row) + "\n")
    fh.write(f"CELL_TYPES {n}\n")
    fh.write(f"{cell_type}\n" * n)


def _write_vectors(fh: TextIO, name: str, values: np.ndarray) -> None:
    fh.write(f"VECTORS {name} double\n")
    for x, y in values:
        fh.write(f"{format_float(x)} {format_float(y)} 0\n")


def _write_scalars(fh: TextIO, name: str, values: np.ndarray, kind: str = "double") -> None:
    fh.write(f"SCALARS {name} {kind} 1\n")
    fh.write("LOOKUP_TABLE default\n")
    for value in values:
        fh.write(f"{format_float(value) if kind == 'double' else int(value)}\n")


def point_fields(bundle: SolutionBundle) -> Dict[str, np.ndarray]:
    """velocity = carrier + perturbation, pressure, carrier and perturbation at the mesh vertices."""
    mesh = bundle.mesh
    n = mesh.n_vertices
    # vertices come first in the node numbering of the layout
    perturbation = bundle.field.velocity.reshape(-1, 2)[:n]
    if bundle.carrier is not None and bundle.carrier.flux != 0.0:
        carrier = bundle.carrier.evaluate(mesh.nodes, clip=True).g
    else:
        carrier = np.zeros((n, 2))
    return {
        "velocity": carrier + perturbation,
        "pressure": np.asarray(bundle.field.pressure),
        "carrier": carrier,
        "perturbation": perturbation,
    }


def write_solution_vtk(bundle: SolutionBundle, path: Path, title: Optional[str] = None) -> Path:
    """Triangle grid (cell type 5) with the solution as point data."""
    mesh = bundle.mesh
    fields = point_fields(bundle)
    path = Path(path)
    with open(path, "w") as fh:
        _write_header(fh, title or f"slip channel flux={bundle.problem.flux}", mesh)
        _write_cells(fh, mesh.cells, VTK_TRIANGLE)
        fh.write(f"POINT_DATA {mesh.n_vertices}\n")
        for name in ("velocity", "carrier", "perturbation"):
            _write_vectors(fh, name, fields[name])
        _write_scalars(fh, "pressure", fields["pressure"])
    logger.info(f"{LOG_PREFIX_EXPORT}: wrote {path} ({mesh.n_cells} triangles)")
    return path


def write_boundary_vtk(mesh: TruncatedMesh, path: Path) -> Path:
    """Boundary edges as line cells (type 3) with integer boundary_tag cell data."""
    edges = mesh.boundary_edges()
    path = Path(path)
    with open(path, "w") as fh:
        _write_header(fh, "slip channel boundary", mesh)
        _write_cells(fh, mesh.edges[edges], VTK_LINE)
        fh.write(f"CELL_DATA {edges.size}\n")
        _write_scalars(fh, "boundary_tag", mesh.edge_tags[edges], kind="int")
    logger.info(f"{LOG_PREFIX_EXPORT}: wrote {path} ({edges.size} boundary edges)")
    return path


def write_matrix(matrix: sp.spmatrix, path: Path) -> Path:
    """Coordinate text format, one `i j value` line per stored entry, shape on the first line."""
    coo = sp.coo_matrix(matrix)
    path = Path(path)
    with open(path, "w") as fh:
        fh.write(f"{coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
        for i, j, value in zip(coo.row, coo.col, coo.data):
            fh.write(f"{int(i)} {int(j)} {format_float(value)}\n")
    logger.info(f"{LOG_PREFIX_EXPORT}: wrote {path} ({coo.nnz} entries)")
    return path
