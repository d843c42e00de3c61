from typing import Callable, Dict, NamedTuple, Optional, Protocol, Sequence, Tuple, Union, runtime_checkable

import numpy as np
import scipy.sparse as sp

from constants import NONLINEAR_DEGREE, TAG_END_LEFT
from errors import EmptyRegionError
from fem.integration import CellIntegrator
from fem.quadrature import CellPoints
from fem.spaces import FunctionSpaceLayout
from mesh import SlabSelection, TruncatedMesh, station_points

# analytic field: points (N, 2) -> (values (N, 2), gradients (N, 2, 2))
AnalyticField = Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]]


@runtime_checkable
class CellField(Protocol):
    """A field that evaluates itself on located quadrature points (e.g. carrier plus perturbation)."""

    def at_points(self, points: CellPoints) -> Tuple[np.ndarray, np.ndarray]: ...


Field = Union[np.ndarray, AnalyticField, CellField]


class NormTable(NamedTuple):
    l2: float
    l4: float
    grad: float  # ‖∇v‖
    strain: float  # ‖D(v)‖
    divergence: float  # ‖div v‖
    h1: float  # (‖v‖² + ‖∇v‖²)^{1/2}
    fluxes: Dict[float, float]

    def as_dict(self) -> Dict[str, float]:
        return {
            "l2": self.l2,
            "l4": self.l4,
            "grad": self.grad,
            "strain": self.strain,
            "divergence": self.divergence,
            "h1": self.h1,
        }


def field_values(
    field: Field, points: CellPoints, layout: Optional[FunctionSpaceLayout] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """Values (Q, 2) and gradients (Q, 2, 2) of a discrete (full DOF vector) or analytic field."""
    if isinstance(field, CellField):
        return field.at_points(points)
    if callable(field):
        values, grads = field(points.phys)
        return np.asarray(values, dtype=float), np.asarray(grads, dtype=float)
    if layout is None:
        raise ValueError("a discrete field needs its layout")
    return layout.eval_velocity(np.asarray(field, dtype=float), points)


def region_points(
    mesh: TruncatedMesh,
    region: Optional[SlabSelection] = None,
    degree: int = NONLINEAR_DEGREE,
    integrator: Optional[CellIntegrator] = None,
) -> CellPoints:
    """Quadrature over the whole mesh or an exactly cut slab."""
    integrator = integrator or CellIntegrator(mesh)
    if region is None:
        points = integrator.points(degree)
    else:
        points = integrator.region_points(degree, region.a, region.b)
    if points.size == 0:
        raise EmptyRegionError("no quadrature points in the requested region")
    return points


def section_flux(
    field: Field, mesh: TruncatedMesh, x1: float, layout: Optional[FunctionSpaceLayout] = None
) -> float:
    """∫ v1 dx2 across x1 = const."""
    points = station_points(mesh, x1)
    values, _ = field_values(field, points, layout)
    return float(values[:, 0] @ points.weights)


def column_flux_functional(layout: FunctionSpaceLayout, divergence: sp.spmatrix, column: int) -> np.ndarray:
    """Full velocity row ℓ such that ℓ·v is the weak flux of v through a vertex column.

    With χ the linear ramp equal to 1 on the columns left of `column`, 1/2 on it and 0 to
    its right, ℓ(v) = ∫ χ div v + ∫ v1 over the left end. For fields tangent to the walls
    this is -∫ v·∇χ, and it is exactly zero when B v = 0 and v vanishes on the ends.

    Args:
        layout: The velocity layout.
        divergence: Unreduced divergence block, rows -∫ q div φ.
        column: Vertex column index, 0 < column < nx.
    """
    mesh = layout.mesh
    columns = mesh.vertex_columns()
    ramp = np.where(columns < column, 1.0, np.where(columns == column, 0.5, 0.0))
    row = -np.asarray(divergence.T @ ramp, dtype=float)
    edges = mesh.boundary_edges(TAG_END_LEFT)
    ends = mesh.edges[edges]
    lengths = np.linalg.norm(mesh.nodes[ends[:, 1]] - mesh.nodes[ends[:, 0]], axis=1)
    np.add.at(row, 2 * ends[:, 0], lengths / 6.0)
    np.add.at(row, 2 * ends[:, 1], lengths / 6.0)
    np.add.at(row, 2 * (mesh.n_vertices + edges), 2.0 * lengths / 3.0)
    return row


def integrate_norms(values: np.ndarray, grads: np.ndarray, weights: np.ndarray) -> Dict[str, float]:
    sq = np.sum(values**2, axis=1)
    grad_sq = np.sum(grads**2, axis=(1, 2))
    strain = 0.5 * (grads + np.transpose(grads, (0, 2, 1)))
    div = grads[:, 0, 0] + grads[:, 1, 1]
    return {
        "l2": float(np.sqrt(sq @ weights)),
        "l4": float((sq**2 @ weights) ** 0.25),
        "grad": float(np.sqrt(grad_sq @ weights)),
        "strain": float(np.sqrt(np.sum(strain**2, axis=(1, 2)) @ weights)),
        "divergence": float(np.sqrt(div**2 @ weights)),
    }


def evaluate_norms(
    field: Field,
    mesh: TruncatedMesh,
    region: Optional[SlabSelection] = None,
    layout: Optional[FunctionSpaceLayout] = None,
    stations: Sequence[float] = (),
    integrator: Optional[CellIntegrator] = None,
    degree: int = NONLINEAR_DEGREE,
) -> NormTable:
    """L², L⁴, H¹-seminorm, ‖D(·)‖, ‖div‖ and station fluxes of a field.

    Args:
        field: Full DOF vector on `layout`, or a callable returning values and gradients.
        mesh: Mesh providing the quadrature.
        region: Slab to integrate over (exactly cut); the whole mesh by default.
        layout: Required for discrete fields.
        stations: x1 positions for cross-sectional fluxes.
        integrator: Layer-aware integrator, for fields containing the carrier.

    Raises:
        EmptyRegionError: If the region holds no quadrature points.
    """
    points = region_points(mesh, region, degree, integrator)
    values, grads = field_values(field, points, layout)
    norms = integrate_norms(values, grads, points.weights)
    fluxes = {float(c): section_flux(field, mesh, float(c), layout) for c in stations}
    return NormTable(
        l2=norms["l2"],
        l4=norms["l4"],
        grad=norms["grad"],
        strain=norms["strain"],
        divergence=norms["divergence"],
        h1=float(np.hypot(norms["l2"], norms["grad"])),
        fluxes=fluxes,
    )
