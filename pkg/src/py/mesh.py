import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from channel import ChannelGeometry
from constants import END_TAGS, TAG_END_LEFT, TAG_END_RIGHT, TAG_NAMES, WALL_TAGS
from errors import InvalidIntervalError
from fem.elements import affine_maps
from fem.quadrature import CellPoints, gauss_legendre, triangle_rule


@dataclass(frozen=True, eq=False)
class TruncatedMesh:
    """Structured, tagged triangulation of the channel between x_min and x_max.

    Vertex (i, j) of the column/row grid has index i * (ny + 1) + j; quad (i, j) holds
    cells 2 * (i * ny + j) and 2 * (i * ny + j) + 1. All arrays are read-only.
    """

    geometry: ChannelGeometry
    x_min: float
    x_max: float
    h: float
    nx: int
    ny: int
    nodes: np.ndarray  # (V, 2)
    cells: np.ndarray  # (F, 3), counter-clockwise
    edges: np.ndarray  # (E, 2), sorted vertex pairs
    cell_edges: np.ndarray  # (F, 3), local edges (0,1), (1,2), (2,0)
    edge_tags: np.ndarray  # (E,)
    node_tags: np.ndarray  # (V,)
    x_lines: np.ndarray  # (nx + 1,)
    _affine: Tuple[np.ndarray, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        for name in ("nodes", "cells", "edges", "cell_edges", "edge_tags", "node_tags", "x_lines"):
            getattr(self, name).setflags(write=False)
        object.__setattr__(self, "_affine", affine_maps(self.nodes[self.cells]))

    @property
    def half_length(self) -> float:
        return 0.5 * (self.x_max - self.x_min)

    @property
    def n_vertices(self) -> int:
        return int(self.nodes.shape[0])

    @property
    def n_cells(self) -> int:
        return int(self.cells.shape[0])

    @property
    def n_edges(self) -> int:
        return int(self.edges.shape[0])

    @property
    def origins(self) -> np.ndarray:
        return self._affine[0]

    @property
    def jacobians(self) -> np.ndarray:
        return self._affine[1]

    @property
    def inverse_jacobians(self) -> np.ndarray:
        return self._affine[2]

    @property
    def dets(self) -> np.ndarray:
        return self._affine[3]

    def cell_vertices(self) -> np.ndarray:
        return self.nodes[self.cells]

    def areas(self) -> np.ndarray:
        return 0.5 * self.dets

    def total_area(self) -> float:
        return float(self.areas().sum())

    def centroids(self) -> np.ndarray:
        return self.cell_vertices().mean(axis=1)

    def quality(self) -> np.ndarray:
        """4√3·area / (sum of squared edge lengths); 1 for an equilateral triangle."""
        v = self.cell_vertices()
        sq = sum(np.sum((v[:, (k + 1) % 3] - v[:, k]) ** 2, axis=1) for k in range(3))
        return 4.0 * math.sqrt(3.0) * self.areas() / sq

    def euler_characteristic(self) -> int:
        return self.n_vertices - self.n_edges + self.n_cells

    def edge_midpoints(self) -> np.ndarray:
        return 0.5 * (self.nodes[self.edges[:, 0]] + self.nodes[self.edges[:, 1]])

    def vertex_columns(self) -> np.ndarray:
        return np.arange(self.n_vertices) // (self.ny + 1)

    def nearest_column(self, x1: float) -> int:
        """Index of the interior vertex column closest to x1."""
        column = int(np.argmin(np.abs(self.x_lines - x1)))
        return min(max(column, 1), self.nx - 1)

    def boundary_edges(self, tag: Optional[int] = None) -> np.ndarray:
        if tag is None:
            return np.flatnonzero(self.edge_tags != 0)
        return np.flatnonzero(self.edge_tags == tag)

    def has_end_tags(self) -> bool:
        return all(np.any(self.edge_tags == t) for t in END_TAGS)

    def tag_summary(self) -> dict:
        return {TAG_NAMES[t]: int(np.sum(self.edge_tags == t)) for t in (*WALL_TAGS, *END_TAGS)}

    def to_physical(self, cells: np.ndarray, ref: np.ndarray) -> np.ndarray:
        return self.origins[cells] + np.einsum("qab,qb->qa", self.jacobians[cells], ref)

    def to_reference(self, cells: np.ndarray, phys: np.ndarray) -> np.ndarray:
        return np.einsum("qab,qb->qa", self.inverse_jacobians[cells], phys - self.origins[cells])

    def standard_points(self, degree: int, cells: Optional[np.ndarray] = None) -> CellPoints:
        """Degree-exact rule on every listed cell (all cells by default)."""
        rule = triangle_rule(degree)
        if cells is None:
            cells = np.arange(self.n_cells)
        nq = rule.weights.shape[0]
        cell_ids = np.repeat(cells, nq)
        ref = np.tile(rule.points, (cells.shape[0], 1))
        weights = np.tile(rule.weights, cells.shape[0]) * np.abs(self.dets[cell_ids])
        return CellPoints(cell_ids, ref, self.to_physical(cell_ids, ref), weights)

    def locate(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Find the containing cell and reference coordinates of each point.

        Points slightly outside (beyond a wall chord, or past an end) are attached to the
        nearest boundary cell and get reference coordinates just outside the unit triangle.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        x, y = points[:, 0], points[:, 1]
        cols = np.clip(np.searchsorted(self.x_lines, x, side="right") - 1, 0, self.nx - 1)
        grid = self.nodes[:, 1].reshape(self.nx + 1, self.ny + 1)
        left, right = self.x_lines[cols], self.x_lines[cols + 1]
        theta = ((x - left) / (right - left))[:, None]
        heights = grid[cols] * (1.0 - theta) + grid[cols + 1] * theta
        rows = np.sum(heights[:, 1:-1] <= y[:, None], axis=1)
        first = 2 * (cols * self.ny + rows)
        best_cells = first.copy()
        best_ref = self.to_reference(first, points)
        second_ref = self.to_reference(first + 1, points)
        lam_first = _min_barycentric(best_ref)
        lam_second = _min_barycentric(second_ref)
        use_second = lam_second > lam_first
        best_cells[use_second] = first[use_second] + 1
        best_ref[use_second] = second_ref[use_second]
        return best_cells, best_ref


def _min_barycentric(ref: np.ndarray) -> np.ndarray:
    return np.minimum(np.minimum(ref[:, 0], ref[:, 1]), 1.0 - ref[:, 0] - ref[:, 1])


def _clip_polygon(polygon: List[np.ndarray], bound: float, keep_above: bool) -> List[np.ndarray]:
    """One Sutherland-Hodgman pass against the vertical line x = bound."""

    def inside(p: np.ndarray) -> bool:
        return p[0] >= bound if keep_above else p[0] <= bound

    out: List[np.ndarray] = []
    n = len(polygon)
    for k in range(n):
        cur, nxt = polygon[k], polygon[(k + 1) % n]
        if inside(cur):
            out.append(cur)
            if not inside(nxt):
                out.append(_cross(cur, nxt, bound))
        elif inside(nxt):
            out.append(_cross(cur, nxt, bound))
    return out


def _cross(p: np.ndarray, q: np.ndarray, bound: float) -> np.ndarray:
    s = (bound - p[0]) / (q[0] - p[0])
    return np.array([bound, p[1] + s * (q[1] - p[1])])


def classify_cells(mesh: TruncatedMesh, a: float, b: float) -> Tuple[np.ndarray, np.ndarray]:
    """Cells lying inside a <= x1 <= b and cells crossing x1 = a or x1 = b."""
    xs = mesh.cell_vertices()[:, :, 0]
    xmin, xmax = xs.min(axis=1), xs.max(axis=1)
    tol = 1e-12 * max(1.0, abs(a), abs(b))
    within = (xmin >= a - tol) & (xmax <= b + tol)
    inside = np.flatnonzero(within)
    straddle = np.flatnonzero(~within & (xmax > a + tol) & (xmin < b - tol))
    return inside, straddle


def cut_points(
    mesh: TruncatedMesh, a: float, b: float, degree: int, straddle_only: bool = False
) -> CellPoints:
    """Quadrature over the exact slab a < x1 < b of the mesh.

    Cells crossing x1 = a or x1 = b are clipped, the clipped polygon is fanned into
    triangles and each piece carries its own degree-exact rule mapped back into the parent.
    With straddle_only, only the clipped cells contribute.
    """
    inside, straddle = classify_cells(mesh, a, b)
    parts = [] if straddle_only else [mesh.standard_points(degree, inside)]

    rule = triangle_rule(degree)
    cell_ids, phys_pts, weights = [], [], []
    for c in straddle:
        polygon = [p for p in mesh.nodes[mesh.cells[c]]]
        polygon = _clip_polygon(polygon, a, keep_above=True)
        if len(polygon) >= 3:
            polygon = _clip_polygon(polygon, b, keep_above=False)
        for k in range(1, len(polygon) - 1):
            p0, p1, p2 = polygon[0], polygon[k], polygon[k + 1]
            jac = np.column_stack([p1 - p0, p2 - p0])
            det = abs(jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0])
            if det <= 0.0:
                continue
            phys_pts.append(p0 + rule.points @ jac.T)
            weights.append(rule.weights * det)
            cell_ids.append(np.full(rule.weights.shape[0], c))
    if cell_ids:
        cells_arr = np.concatenate(cell_ids)
        phys_arr = np.concatenate(phys_pts)
        parts.append(
            CellPoints(cells_arr, mesh.to_reference(cells_arr, phys_arr), phys_arr, np.concatenate(weights))
        )
    return CellPoints.concatenate(parts)


def station_segments(mesh: TruncatedMesh, c: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Cells crossed by the section x1 = c and the x2-extent of each crossing.

    A cell is counted when min x1 <= c < max x1 (at the right end, min < c <= max) so that
    every point of the section belongs to exactly one counted cell.
    """
    v = mesh.cell_vertices()
    xs = v[:, :, 0]
    xmin, xmax = xs.min(axis=1), xs.max(axis=1)
    if c >= mesh.x_max:
        chosen = np.flatnonzero((xmin < c) & (xmax >= c))
    else:
        chosen = np.flatnonzero((xmin <= c) & (xmax > c))
    lo = np.full(chosen.shape[0], np.inf)
    hi = np.full(chosen.shape[0], -np.inf)
    for k in range(3):
        p, q = v[chosen, k], v[chosen, (k + 1) % 3]
        vertical = (p[:, 0] == c) & (q[:, 0] == c)
        crossing = ((p[:, 0] - c) * (q[:, 0] - c) <= 0.0) & (p[:, 0] != q[:, 0])
        s = np.where(crossing, (c - p[:, 0]) / np.where(crossing, q[:, 0] - p[:, 0], 1.0), 0.0)
        y = p[:, 1] + s * (q[:, 1] - p[:, 1])
        lo = np.where(crossing, np.minimum(lo, y), lo)
        hi = np.where(crossing, np.maximum(hi, y), hi)
        lo = np.where(vertical, np.minimum(lo, np.minimum(p[:, 1], q[:, 1])), lo)
        hi = np.where(vertical, np.maximum(hi, np.maximum(p[:, 1], q[:, 1])), hi)
    valid = np.isfinite(lo) & (hi > lo)
    return chosen[valid], lo[valid], hi[valid]


def station_points(mesh: TruncatedMesh, c: float, n: int = 3) -> CellPoints:
    """Gauss points along the section x1 = c; weights are lengths (flux integrals)."""
    cells, lo, hi = station_segments(mesh, c)
    t, w = gauss_legendre(n, 0.0, 1.0)
    y = lo[:, None] + (hi - lo)[:, None] * t[None, :]
    weights = ((hi - lo)[:, None] * w[None, :]).ravel()
    cell_ids = np.repeat(cells, n)
    phys = np.stack([np.full(y.size, c), y.ravel()], axis=-1)
    return CellPoints(cell_ids, mesh.to_reference(cell_ids, phys), phys, weights)


@dataclass(frozen=True, eq=False)
class SlabSelection:
    """The part Ω_{a,b} of a mesh: cells whose centroid lies in (a, b), plus exact-cut quadrature."""

    mesh: TruncatedMesh
    a: float
    b: float
    cells: np.ndarray

    @property
    def width(self) -> float:
        return self.b - self.a

    def points(self, degree: int, exact: bool = True) -> CellPoints:
        if exact:
            return cut_points(self.mesh, self.a, self.b, degree)
        return self.mesh.standard_points(degree, self.cells)

    def area(self, exact: bool = True) -> float:
        return float(self.points(1, exact).weights.sum())


def slab_submesh(mesh: TruncatedMesh, a: float, b: float) -> SlabSelection:
    """Select Ω_{a,b}.

    Raises:
        InvalidIntervalError: If a >= b or the interval leaves [x_min, x_max].
    """
    if not a < b:
        raise InvalidIntervalError(f"invalid slab interval: a = {a} must be < b = {b}")
    tol = 1e-12 * max(1.0, abs(mesh.x_min), abs(mesh.x_max))
    if a < mesh.x_min - tol or b > mesh.x_max + tol:
        raise InvalidIntervalError(
            f"slab ({a}, {b}) leaves the mesh range [{mesh.x_min}, {mesh.x_max}]"
        )
    centroid_x = mesh.centroids()[:, 0]
    cells = np.flatnonzero((centroid_x > a) & (centroid_x < b))
    return SlabSelection(mesh, float(a), float(b), cells)


def split_unit_slabs(mesh: TruncatedMesh, a: float, b: float) -> List[SlabSelection]:
    """Cover (a, b) by ceil(b - a) consecutive slabs of equal width (in [1/2, 1] when b - a >= 1)."""
    if not a < b:
        raise InvalidIntervalError(f"invalid slab interval: a = {a} must be < b = {b}")
    count = max(1, math.ceil(b - a - 1e-12))
    bounds = np.linspace(a, b, count + 1)
    return [slab_submesh(mesh, lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:])]
