import math
from typing import Optional

import numpy as np

from channel import ChannelGeometry, eval_walls
from constants import (
    DEFAULT_QUALITY_FLOOR,
    LOG_PREFIX_MESH,
    TAG_END_LEFT,
    TAG_END_RIGHT,
    TAG_INTERIOR,
    TAG_WALL_LOWER,
    TAG_WALL_UPPER,
)
from errors import DomainTooShortError, InvalidIntervalError, MeshQualityError
from logger import logger
from mesh import TruncatedMesh


class MeshBuilder:
    """Builds structured channel triangulations column by column.

    Nodes are placed by the transfinite map (x1, s) -> (x1, f1 + (s + 1)(f2 - f1)/2), so wall
    nodes sit exactly on the walls. Each quad is split along one diagonal; the two corner quads
    that would otherwise own a triangle with two boundary edges on different sides use the
    other diagonal.
    """

    def __init__(self, geometry: ChannelGeometry, quality_floor: float = DEFAULT_QUALITY_FLOOR):
        self.geometry = geometry
        self.quality_floor = quality_floor
        self._x_min: float = 0.0
        self._x_max: float = 0.0
        self._h: float = 0.0
        self._nx: int = 0
        self._ny: int = 0
        self._nodes: Optional[np.ndarray] = None
        self._cells: Optional[np.ndarray] = None
        self._edges: Optional[np.ndarray] = None
        self._cell_edges: Optional[np.ndarray] = None
        self._edge_tags: Optional[np.ndarray] = None
        self._node_tags: Optional[np.ndarray] = None
        self._x_lines: Optional[np.ndarray] = None

    def build(self, x_min: float, x_max: float, h: float) -> TruncatedMesh:
        """Triangulate the channel between x_min and x_max with target cell size h."""
        if not x_min < x_max:
            raise InvalidIntervalError(f"invalid mesh range: {x_min} must be < {x_max}")
        if not h > 0.0:
            raise InvalidIntervalError(f"mesh size h must be positive, got {h}")
        self._reset()
        self._x_min, self._x_max, self._h = float(x_min), float(x_max), float(h)
        self._build_steps()
        mesh = TruncatedMesh(
            geometry=self.geometry,
            x_min=self._x_min,
            x_max=self._x_max,
            h=self._h,
            nx=self._nx,
            ny=self._ny,
            nodes=self._nodes,
            cells=self._cells,
            edges=self._edges,
            cell_edges=self._cell_edges,
            edge_tags=self._edge_tags,
            node_tags=self._node_tags,
            x_lines=self._x_lines,
        )
        self._check_quality(mesh)
        logger.info(
            f"{LOG_PREFIX_MESH}: [{x_min}, {x_max}] h={h} -> V={mesh.n_vertices} "
            f"E={mesh.n_edges} F={mesh.n_cells}"
        )
        return mesh

    def _reset(self) -> None:
        self._nx = self._ny = 0
        self._nodes = self._cells = self._edges = None
        self._cell_edges = self._edge_tags = self._node_tags = self._x_lines = None

    def _build_steps(self) -> None:
        self._choose_resolution()
        self._place_nodes()
        self._split_quads()
        self._collect_edges()
        self._tag_boundary()

    def _choose_resolution(self) -> None:
        length = self._x_max - self._x_min
        nx = max(2, math.ceil(length / self._h - 1e-9))
        self._nx = nx + (nx % 2)
        self._ny = max(2, math.ceil(self.geometry.widest_width() / self._h - 1e-9))

    def _place_nodes(self) -> None:
        self._x_lines = np.linspace(self._x_min, self._x_max, self._nx + 1)
        s = np.linspace(-1.0, 1.0, self._ny + 1)
        jet = eval_walls(self.geometry, self._x_lines)
        x1 = np.repeat(self._x_lines, self._ny + 1)
        f1 = np.repeat(jet.f1, self._ny + 1)
        f2 = np.repeat(jet.f2, self._ny + 1)
        ss = np.tile(s, self._nx + 1)
        x2 = f1 + 0.5 * (ss + 1.0) * (f2 - f1)
        grid = x2.reshape(self._nx + 1, self._ny + 1)
        grid[:, 0] = jet.f1
        grid[:, -1] = jet.f2
        self._nodes = np.stack([x1, grid.ravel()], axis=-1)

    def _split_quads(self) -> None:
        nx, ny = self._nx, self._ny
        i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
        i, j = i.ravel(), j.ravel()
        ll = i * (ny + 1) + j
        lr = (i + 1) * (ny + 1) + j
        ul = ll + 1
        ur = lr + 1
        flipped = ((i == nx - 1) & (j == 0)) | ((i == 0) & (j == ny - 1))
        first = np.where(flipped[:, None], np.stack([ll, lr, ul], -1), np.stack([ll, lr, ur], -1))
        second = np.where(flipped[:, None], np.stack([lr, ur, ul], -1), np.stack([ll, ur, ul], -1))
        cells = np.empty((2 * nx * ny, 3), dtype=np.int64)
        cells[0::2] = first
        cells[1::2] = second
        self._cells = cells

    def _collect_edges(self) -> None:
        local = self._cells[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 3, 2)
        pairs = np.sort(local.reshape(-1, 2), axis=1)
        edges, inverse = np.unique(pairs, axis=0, return_inverse=True)
        self._edges = edges
        self._cell_edges = inverse.reshape(-1).reshape(-1, 3)

    def _tag_boundary(self) -> None:
        ny = self._ny
        col, row = np.divmod(self._edges, ny + 1)
        tags = np.full(self._edges.shape[0], TAG_INTERIOR, dtype=np.int64)
        tags[(row[:, 0] == 0) & (row[:, 1] == 0)] = TAG_WALL_LOWER
        tags[(row[:, 0] == ny) & (row[:, 1] == ny)] = TAG_WALL_UPPER
        tags[(col[:, 0] == 0) & (col[:, 1] == 0)] = TAG_END_LEFT
        tags[(col[:, 0] == self._nx) & (col[:, 1] == self._nx)] = TAG_END_RIGHT
        self._edge_tags = tags

        ncol, nrow = np.divmod(np.arange(self._nodes.shape[0]), ny + 1)
        node_tags = np.full(self._nodes.shape[0], TAG_INTERIOR, dtype=np.int64)
        node_tags[nrow == 0] = TAG_WALL_LOWER
        node_tags[nrow == ny] = TAG_WALL_UPPER
        # end tags win at the corners
        node_tags[ncol == 0] = TAG_END_LEFT
        node_tags[ncol == self._nx] = TAG_END_RIGHT
        self._node_tags = node_tags

    def _check_quality(self, mesh: TruncatedMesh) -> None:
        dets = mesh.dets
        if np.any(dets <= 0.0):
            raise MeshQualityError(f"{int(np.sum(dets <= 0.0))} cells are not positively oriented")
        worst = float(mesh.quality().min())
        if worst < self.quality_floor:
            raise MeshQualityError(
                f"worst cell quality {worst:.4g} is below the floor {self.quality_floor:.4g}",
                {"worst_quality": worst},
            )


def build_mesh(
    geom: ChannelGeometry, T: float, h: float, quality_floor: float = DEFAULT_QUALITY_FLOOR
) -> TruncatedMesh:
    """Triangulate Ω_T = {|x1| < T}.

    Raises:
        DomainTooShortError: If T < L + 1.
        GeometryError: If the walls come closer than min_width.
    """
    L = geom.straight_from
    if T < L + 1.0:
        raise DomainTooShortError(f"truncation T = {T} must satisfy T >= L + 1 = {L + 1.0}")
    geom.check_width()
    return MeshBuilder(geom, quality_floor).build(-T, T, h)


def build_slab_mesh(
    geom: ChannelGeometry, a: float, b: float, h: float, quality_floor: float = DEFAULT_QUALITY_FLOOR
) -> TruncatedMesh:
    """Stand-alone mesh of the slab a < x1 < b, with end tags on x1 = a and x1 = b."""
    geom.check_width()
    return MeshBuilder(geom, quality_floor).build(a, b, h)
