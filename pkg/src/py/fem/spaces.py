from dataclasses import dataclass
from enum import IntEnum
from typing import NamedTuple, Optional

import numpy as np
import scipy.sparse as sp

from constants import TAG_END_LEFT, TAG_END_RIGHT, TAG_WALL_LOWER, TAG_WALL_UPPER
from errors import SpaceLayoutError
from fem.elements import p1_values, p2_gradients, p2_values
from fem.quadrature import CellPoints
from mesh import TruncatedMesh


class NodeKind(IntEnum):
    INTERIOR = 0
    WALL = 1
    END = 2


class Basis(NamedTuple):
    """Quadratic basis at a point cloud: values (Q, 6) and physical gradients (Q, 6, 2)."""

    values: np.ndarray
    grads: np.ndarray


@dataclass(frozen=True, eq=False)
class FunctionSpaceLayout:
    """Quadratic vector velocity on vertices + edge midpoints, linear pressure on vertices.

    Full velocity DOF 2k + c is component c at node k (vertices first, then edges). The
    constrained space is the range of the prolongation P: interior nodes keep both
    components, wall nodes keep only the tangential one (v·n = 0 exactly, using the
    mass-weighted chord normal of the wall edges), end nodes keep none. P has
    orthonormal columns.
    """

    mesh: TruncatedMesh
    cell_nodes: np.ndarray  # (F, 6)
    node_coords: np.ndarray  # (N, 2)
    node_kind: np.ndarray  # (N,)
    normals: np.ndarray  # (N, 2), zero off the walls
    tangents: np.ndarray  # (N, 2), zero off the walls
    prolongation: sp.csr_matrix  # (2N, n_free)
    dirichlet_walls: bool = False

    @property
    def n_nodes(self) -> int:
        return int(self.node_coords.shape[0])

    @property
    def n_velocity(self) -> int:
        return 2 * self.n_nodes

    @property
    def n_free(self) -> int:
        return int(self.prolongation.shape[1])

    @property
    def n_pressure(self) -> int:
        return self.mesh.n_vertices

    def cell_dofs(self) -> np.ndarray:
        """(F, 12) full velocity DOFs, local order 2·node + component."""
        dofs = 2 * self.cell_nodes[:, :, None] + np.arange(2)[None, None, :]
        return dofs.reshape(self.cell_nodes.shape[0], 12)

    def expand(self, free: np.ndarray) -> np.ndarray:
        return self.prolongation @ free

    def restrict(self, full: np.ndarray) -> np.ndarray:
        return self.prolongation.T @ full

    def project(self, full: np.ndarray) -> np.ndarray:
        """Closest constrained field (drops normal and end components)."""
        return self.expand(self.restrict(full))

    def interpolate(self, func) -> np.ndarray:
        """Nodal interpolant of a callable (N, 2) -> (N, 2), full DOF vector."""
        return np.asarray(func(self.node_coords), dtype=float).reshape(-1)

    def basis(self, points: CellPoints) -> Basis:
        ref_grads = p2_gradients(points.ref)
        inv = self.mesh.inverse_jacobians[points.cells]
        return Basis(p2_values(points.ref), np.einsum("qir,qrb->qib", ref_grads, inv))

    def local_velocity(self, full: np.ndarray) -> np.ndarray:
        """(F, 6, 2) nodal velocities per cell."""
        return full.reshape(self.n_nodes, 2)[self.cell_nodes]

    def eval_velocity(self, full: np.ndarray, points: CellPoints, basis: Optional[Basis] = None):
        """Velocity (Q, 2) and gradient (Q, 2, 2), grad[:, a, b] = ∂_b v_a."""
        basis = basis or self.basis(points)
        local = self.local_velocity(full)[points.cells]
        values = np.einsum("qi,qic->qc", basis.values, local)
        grads = np.einsum("qib,qic->qcb", basis.grads, local)
        return values, grads

    def eval_pressure(self, pressure: np.ndarray, points: CellPoints) -> np.ndarray:
        local = pressure[self.mesh.cells[points.cells]]
        return np.einsum("qi,qi->q", p1_values(points.ref), local)


def wall_frames(mesh: TruncatedMesh, kind: np.ndarray):
    """Unit normals and tangents at wall nodes from the chord geometry of the wall edges.

    Each wall edge adds ℓ/6·n_e to both end vertices and 2ℓ/3·n_e to its midpoint node,
    the integrals of the quadratic basis along the edge. A tangential field therefore has
    ∮ v·n = 0 edge by edge, and the discrete divergence annihilates constants.
    """
    V = mesh.n_vertices
    accumulated = np.zeros((kind.shape[0], 2))
    for tag, side in ((TAG_WALL_UPPER, 1.0), (TAG_WALL_LOWER, -1.0)):
        edges = mesh.boundary_edges(tag)
        ends = mesh.edges[edges]
        chord = mesh.nodes[ends[:, 1]] - mesh.nodes[ends[:, 0]]
        normal = np.stack([-chord[:, 1], chord[:, 0]], axis=1)
        normal *= np.where(side * normal[:, 1] < 0.0, -1.0, 1.0)[:, None]
        np.add.at(accumulated, ends[:, 0], normal / 6.0)
        np.add.at(accumulated, ends[:, 1], normal / 6.0)
        np.add.at(accumulated, V + edges, 2.0 * normal / 3.0)

    normals = np.zeros_like(accumulated)
    tangents = np.zeros_like(accumulated)
    wall = kind == NodeKind.WALL
    normals[wall] = accumulated[wall] / np.linalg.norm(accumulated[wall], axis=1)[:, None]
    heading = np.sign(normals[wall, 1])[:, None]
    tangents[wall] = heading * np.stack([normals[wall, 1], -normals[wall, 0]], axis=1)
    return normals, tangents


def build_spaces(mesh: TruncatedMesh, dirichlet_walls: bool = False) -> FunctionSpaceLayout:
    """Build the constrained quadratic/linear layout on a mesh.

    Args:
        mesh: Tagged mesh with both end sections.
        dirichlet_walls: Constrain both components on the walls too (no-slip layout,
            used for the divergence equation on a slab).

    Raises:
        SpaceLayoutError: If the mesh carries no end tags.
    """
    if not mesh.has_end_tags():
        raise SpaceLayoutError("the velocity space needs end sections tagged on the mesh")
    V, E = mesh.n_vertices, mesh.n_edges
    cell_nodes = np.concatenate([mesh.cells, V + mesh.cell_edges], axis=1)
    coords = np.concatenate([mesh.nodes, mesh.edge_midpoints()])

    tags = np.concatenate([mesh.node_tags, mesh.edge_tags])
    kind = np.full(V + E, NodeKind.INTERIOR, dtype=np.int64)
    upper = tags == TAG_WALL_UPPER
    lower = tags == TAG_WALL_LOWER
    kind[upper | lower] = NodeKind.WALL
    kind[(tags == TAG_END_LEFT) | (tags == TAG_END_RIGHT)] = NodeKind.END

    normals, tangents = wall_frames(mesh, kind)

    rows, cols, vals = [], [], []
    column = 0
    for k in range(V + E):
        if kind[k] == NodeKind.INTERIOR:
            rows += [2 * k, 2 * k + 1]
            cols += [column, column + 1]
            vals += [1.0, 1.0]
            column += 2
        elif kind[k] == NodeKind.WALL and not dirichlet_walls:
            rows += [2 * k, 2 * k + 1]
            cols += [column, column]
            vals += [tangents[k, 0], tangents[k, 1]]
            column += 1
    prolongation = sp.csr_matrix(
        (np.array(vals), (np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64))),
        shape=(2 * (V + E), column),
    )
    prolongation.eliminate_zeros()
    return FunctionSpaceLayout(
        mesh=mesh,
        cell_nodes=cell_nodes,
        node_coords=coords,
        node_kind=kind,
        normals=normals,
        tangents=tangents,
        prolongation=prolongation,
        dirichlet_walls=dirichlet_walls,
    )
