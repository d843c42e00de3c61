"""Point clouds for integrating over a mesh, with graded rules inside the carrier layer.

Carrier terms vary like powers of 1/t inside the upper-wall layer (t = depth below the
wall), so cells touching the layer get rules refined geometrically towards the wall.
"""

import math
from collections import defaultdict
from typing import Dict, List, Optional, Tuple

import numpy as np

from carrier.field import CarrierField
from channel import eval_walls
from constants import COMPOSITE_REFINEMENTS, GRADED_MAX_LEVELS, GRADED_RATIO
from fem.quadrature import (
    LOCAL_EDGES,
    CellPoints,
    TriangleRule,
    composite_rule,
    graded_edge_rule,
    graded_vertex_rule,
)
from mesh import TruncatedMesh, classify_cells, cut_points

RuleKey = Tuple[str, int]


def graded_levels(h: float, plateau: float, ratio: float = GRADED_RATIO) -> int:
    """Panels needed to shrink from the cell size h down to the plateau width."""
    if plateau <= 0.0 or plateau >= h:
        return 4
    levels = math.ceil(math.log(h / plateau) / math.log(1.0 / ratio)) + 1
    return min(GRADED_MAX_LEVELS, max(4, levels))


class CellIntegrator:
    """Chooses a quadrature rule per cell and produces flat point clouds."""

    def __init__(self, mesh: TruncatedMesh, carrier: Optional[CarrierField] = None):
        self.mesh = mesh
        self.carrier = carrier if carrier is not None and carrier.flux != 0.0 else None
        self._layer_keys: Dict[int, RuleKey] = self._classify_layer()

    def _classify_layer(self) -> Dict[int, RuleKey]:
        if self.carrier is None:
            return {}
        mesh = self.mesh
        verts = mesh.cell_vertices()
        jet = eval_walls(mesh.geometry, verts[:, :, 0])
        depth = jet.f2 - verts[:, :, 1]
        xs = verts[:, :, 0]
        reach = self.carrier.support
        near = (depth.min(axis=1) < self.carrier.epsilon) & (xs.max(axis=1) > -reach) & (
            xs.min(axis=1) < reach
        )
        on_wall = (mesh.cells % (mesh.ny + 1)) == mesh.ny
        keys: Dict[int, RuleKey] = {}
        for c in np.flatnonzero(near):
            flags = on_wall[c]
            count = int(flags.sum())
            if count >= 2:
                for k, (i, j) in enumerate(LOCAL_EDGES):
                    if flags[i] and flags[j]:
                        keys[int(c)] = ("edge", k)
                        break
            elif count == 1:
                keys[int(c)] = ("vertex", int(np.flatnonzero(flags)[0]))
            else:
                keys[int(c)] = ("composite", 0)
        return keys

    def _layer_rule(self, key: RuleKey, degree: int) -> TriangleRule:
        kind, index = key
        if kind == "composite":
            return composite_rule(degree, COMPOSITE_REFINEMENTS)
        levels = graded_levels(self.mesh.h, self.carrier.plateau)
        if kind == "edge":
            return graded_edge_rule(index, levels)
        return graded_vertex_rule(index, levels)

    def _rule_points(self, cells: np.ndarray, rule: TriangleRule) -> CellPoints:
        nq = rule.weights.shape[0]
        cell_ids = np.repeat(cells, nq)
        ref = np.tile(rule.points, (cells.shape[0], 1))
        weights = np.tile(rule.weights, cells.shape[0]) * np.abs(self.mesh.dets[cell_ids])
        return CellPoints(cell_ids, ref, self.mesh.to_physical(cell_ids, ref), weights)

    def points(self, degree: int, cells: Optional[np.ndarray] = None) -> CellPoints:
        """Rule exact to the given degree on plain cells, graded on layer cells."""
        if cells is None:
            cells = np.arange(self.mesh.n_cells)
        cells = np.asarray(cells, dtype=np.int64)
        if not self._layer_keys:
            return self.mesh.standard_points(degree, cells)
        in_layer = np.array([int(c) in self._layer_keys for c in cells], dtype=bool)
        parts: List[CellPoints] = [self.mesh.standard_points(degree, cells[~in_layer])]
        groups: Dict[RuleKey, List[int]] = defaultdict(list)
        for c in cells[in_layer]:
            groups[self._layer_keys[int(c)]].append(int(c))
        for key, members in groups.items():
            parts.append(self._rule_points(np.array(members), self._layer_rule(key, degree)))
        return CellPoints.concatenate(parts)

    def region_points(self, degree: int, a: float, b: float) -> CellPoints:
        """Points of Ω_{a,b}; cells crossing x1 = a, b are cut exactly.

        Layer cells crossing a cut keep their graded rule restricted to a <= x1 <= b.
        """
        inside, straddle = classify_cells(self.mesh, a, b)
        parts = [self.points(degree, inside)]
        if straddle.size:
            cut = cut_points(self.mesh, a, b, degree, straddle_only=True)
            layer = np.array([int(c) in self._layer_keys for c in cut.cells], dtype=bool)
            parts.append(cut.take(np.flatnonzero(~layer)))
            layer_straddle = np.array([c for c in straddle if int(c) in self._layer_keys])
            if layer_straddle.size:
                graded = self.points(degree, layer_straddle)
                x = graded.phys[:, 0]
                parts.append(graded.take(np.flatnonzero((x >= a) & (x <= b))))
        return CellPoints.concatenate(parts)
