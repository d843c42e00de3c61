"""Quadrature rules on the reference triangle {xi >= 0, eta >= 0, xi + eta <= 1}.

All triangle rules carry weights summing to 1/2 (the reference area). Rules are built
from Gauss-Legendre factors on the collapsed square, so every rule here has positive
weights.
"""

import math
from functools import lru_cache
from typing import List, NamedTuple, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss

from constants import GRADED_GAUSS_POINTS, GRADED_RATIO, GRADED_TANGENT_POINTS

# local edges as (start, end) vertex pairs, opposite vertex is the third one
LOCAL_EDGES: Tuple[Tuple[int, int], ...] = ((0, 1), (1, 2), (2, 0))


class TriangleRule(NamedTuple):
    points: np.ndarray  # (Q, 2) reference coordinates
    weights: np.ndarray  # (Q,), sum 1/2


def gauss_legendre(n: int, a: float = -1.0, b: float = 1.0) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights mapped to [a, b]."""
    x, w = leggauss(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def composite_gauss(breaks: np.ndarray, n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre with n points on every panel between consecutive breaks."""
    breaks = np.asarray(breaks, dtype=float)
    x, w = leggauss(n)
    lo = breaks[:-1, None]
    half = 0.5 * (breaks[1:, None] - lo)
    nodes = lo + half * (x[None, :] + 1.0)
    weights = half * w[None, :]
    return nodes.ravel(), weights.ravel()


def _collapsed(u: np.ndarray, wu: np.ndarray, eta: np.ndarray, weta: np.ndarray) -> TriangleRule:
    uu, ee = np.meshgrid(u, eta, indexing="ij")
    ww = np.outer(wu, weta) * (1.0 - ee)
    points = np.stack([uu * (1.0 - ee), ee], axis=-1).reshape(-1, 2)
    return TriangleRule(points, ww.ravel())


@lru_cache(maxsize=None)
def triangle_rule(degree: int) -> TriangleRule:
    """Collapsed Gauss product rule, exact for polynomials of total degree <= degree."""
    n = max(1, math.ceil((degree + 2) / 2))
    u, wu = gauss_legendre(n, 0.0, 1.0)
    return _collapsed(u, wu, u, wu)


def _barycentric(points: np.ndarray) -> np.ndarray:
    xi, eta = points[:, 0], points[:, 1]
    return np.stack([1.0 - xi - eta, xi, eta], axis=-1)


def _relabel(rule: TriangleRule, order: Tuple[int, int, int]) -> TriangleRule:
    """Send canonical vertex c to local vertex order[c]."""
    lam = _barycentric(rule.points)
    target = np.empty_like(lam)
    for canonical, local in enumerate(order):
        target[:, local] = lam[:, canonical]
    return TriangleRule(np.ascontiguousarray(target[:, 1:]), rule.weights)


def geometric_breaks(levels: int, ratio: float) -> np.ndarray:
    """Panel breaks 0, ratio**levels, ..., ratio, 1 on [0, 1]."""
    powers = ratio ** np.arange(levels, 0, -1, dtype=float)
    return np.concatenate([[0.0], powers, [1.0]])


@lru_cache(maxsize=None)
def graded_edge_rule(
    local_edge: int,
    levels: int,
    ratio: float = GRADED_RATIO,
    n_gauss: int = GRADED_GAUSS_POINTS,
    n_tangent: int = GRADED_TANGENT_POINTS,
) -> TriangleRule:
    """Rule refined geometrically towards one local edge.

    The distance to the edge is split into panels with breaks ratio**k, which resolves
    integrands varying like powers or logarithms of the distance to that edge.
    """
    u, wu = gauss_legendre(n_tangent, 0.0, 1.0)
    eta, weta = composite_gauss(geometric_breaks(levels, ratio), n_gauss)
    canonical = _collapsed(u, wu, eta, weta)
    i, j = LOCAL_EDGES[local_edge]
    k = 3 - i - j
    return _relabel(canonical, (i, j, k))


@lru_cache(maxsize=None)
def graded_vertex_rule(
    local_vertex: int,
    levels: int,
    ratio: float = GRADED_RATIO,
    n_gauss: int = GRADED_GAUSS_POINTS,
    n_tangent: int = GRADED_TANGENT_POINTS,
) -> TriangleRule:
    """Rule refined geometrically towards one local vertex (Duffy collapse at that vertex)."""
    u, wu = gauss_legendre(n_tangent, 0.0, 1.0)
    rho, wrho = composite_gauss(geometric_breaks(levels, ratio), n_gauss)
    uu, rr = np.meshgrid(u, rho, indexing="ij")
    weights = (np.outer(wu, wrho) * rr).ravel()
    # canonical vertex 2 = (0, 1) is the collapsed corner at rho = 0
    points = np.stack([uu * rr, 1.0 - rr], axis=-1).reshape(-1, 2)
    others = [v for v in range(3) if v != local_vertex]
    return _relabel(TriangleRule(points, weights), (others[0], others[1], local_vertex))


def _split(tri: np.ndarray) -> List[np.ndarray]:
    a, b, c = tri
    ab, bc, ca = 0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)
    return [np.array(t) for t in ((a, ab, ca), (ab, b, bc), (ca, bc, c), (bc, ca, ab))]


@lru_cache(maxsize=None)
def composite_rule(degree: int, refinements: int) -> TriangleRule:
    """Degree-exact rule repeated on the 4**refinements congruent sub-triangles."""
    pieces = [np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])]
    for _ in range(refinements):
        pieces = [sub for tri in pieces for sub in _split(tri)]
    base = triangle_rule(degree)
    points, weights = [], []
    for tri in pieces:
        jac = np.column_stack([tri[1] - tri[0], tri[2] - tri[0]])
        points.append(tri[0] + base.points @ jac.T)
        weights.append(base.weights * abs(np.linalg.det(jac)))
    return TriangleRule(np.concatenate(points), np.concatenate(weights))


class CellPoints(NamedTuple):
    """Flat list of quadrature points, each tied to a parent cell.

    weights are physical (already multiplied by |det J|); points of one cell are contiguous.
    """

    cells: np.ndarray  # (Q,) int
    ref: np.ndarray  # (Q, 2)
    phys: np.ndarray  # (Q, 2)
    weights: np.ndarray  # (Q,)

    @property
    def size(self) -> int:
        return int(self.cells.shape[0])

    def segments(self) -> Tuple[np.ndarray, np.ndarray]:
        """Distinct cells in storage order and the index where each cell's run starts."""
        if self.size == 0:
            return np.zeros(0, dtype=int), np.zeros(0, dtype=int)
        change = np.flatnonzero(np.diff(self.cells)) + 1
        starts = np.concatenate([[0], change])
        return self.cells[starts], starts

    def take(self, index: np.ndarray) -> "CellPoints":
        return CellPoints(self.cells[index], self.ref[index], self.phys[index], self.weights[index])

    @staticmethod
    def concatenate(parts: List["CellPoints"]) -> "CellPoints":
        """Join parts and order points by cell (stable, so runs stay contiguous)."""
        parts = [p for p in parts if p.size]
        if not parts:
            return CellPoints(
                np.zeros(0, dtype=int), np.zeros((0, 2)), np.zeros((0, 2)), np.zeros(0)
            )
        joined = CellPoints(*(np.concatenate(field) for field in zip(*parts)))
        order = np.argsort(joined.cells, kind="stable")
        return joined.take(order)
