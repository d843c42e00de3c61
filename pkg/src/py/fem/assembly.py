"""Assembly of the bilinear and linear forms of the slip problem.

Matrices act on full velocity DOFs; reduce them with SparseOperator.reduced before solving.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterator, List, Optional, Union

import numpy as np
import scipy.sparse as sp

from carrier.field import CarrierField
from constants import (
    ASSEMBLY_CHUNK,
    CARRIER_EXTRA_DEGREE,
    LOG_PREFIX_ASSEMBLY,
    NONLINEAR_DEGREE,
    STANDARD_DEGREE,
)
from errors import FormSelectionError
from fem.elements import p1_values
from fem.integration import CellIntegrator
from fem.quadrature import CellPoints
from fem.spaces import Basis, FunctionSpaceLayout
from logger import logger

Frozen = Union[CarrierField, np.ndarray]
BodyForce = Callable[[np.ndarray], np.ndarray]

# carrier terms: polynomial part of degree 5 plus the extra degree for the analytic factor
CARRIER_DEGREE = NONLINEAR_DEGREE - 1 + CARRIER_EXTRA_DEGREE


class FormKind(str, Enum):
    VISCOUS = "viscous"
    GRADIENT = "gradient"
    MASS = "mass"
    CONVECTION = "convection"
    REACTION = "reaction"
    DIVERGENCE = "divergence"
    CARRIER_LOAD = "carrier_load"
    NONLINEAR_LOAD = "nonlinear_load"
    BODY_FORCE = "body_force"
    PRESSURE_MASS = "pressure_mass"


MATRIX_FORMS = {
    FormKind.VISCOUS,
    FormKind.GRADIENT,
    FormKind.MASS,
    FormKind.CONVECTION,
    FormKind.REACTION,
    FormKind.DIVERGENCE,
}
NEEDS_FROZEN = {FormKind.CONVECTION, FormKind.REACTION, FormKind.NONLINEAR_LOAD}


@dataclass(frozen=True)
class SparseOperator:
    """Assembled block in full velocity DOFs (rows: test, columns: trial)."""

    matrix: sp.csr_matrix
    role: FormKind

    @property
    def shape(self):
        return self.matrix.shape

    def reduced(self, layout: FunctionSpaceLayout, rows: bool = True, cols: bool = True) -> sp.csr_matrix:
        """Restrict to the constrained space: Pᵀ A P (velocity sides only)."""
        P = layout.prolongation
        out = self.matrix
        if rows:
            out = P.T @ out
        if cols:
            out = out @ P
        return sp.csr_matrix(out)

    def symmetry_defect(self) -> float:
        """max |A - Aᵀ| / max |A|."""
        scale = abs(self.matrix).max()
        if scale == 0.0:
            return 0.0
        return float(abs(self.matrix - self.matrix.T).max() / scale)


def _chunks(points: CellPoints, size: int = ASSEMBLY_CHUNK) -> Iterator[CellPoints]:
    """Split a point cloud into pieces of roughly `size` points that never split a cell."""
    if points.size == 0:
        return
    _, starts = points.segments()
    bounds = [0]
    for s in starts[1:]:
        if s - bounds[-1] >= size:
            bounds.append(int(s))
    bounds.append(points.size)
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        yield points.take(np.arange(lo, hi))


class FormAssembler:
    """Assembles forms on one layout, reusing point clouds per quadrature degree."""

    def __init__(self, layout: FunctionSpaceLayout, carrier: Optional[CarrierField] = None):
        self.layout = layout
        self.mesh = layout.mesh
        self.carrier = carrier
        self.integrator = CellIntegrator(self.mesh, carrier)
        self._cell_dofs = layout.cell_dofs()
        self._points = {}

    def points(self, degree: int, layered: bool = False) -> CellPoints:
        key = (degree, layered)
        if key not in self._points:
            if layered:
                self._points[key] = self.integrator.points(degree)
            else:
                self._points[key] = self.mesh.standard_points(degree)
        return self._points[key]

    def _frozen_values(self, frozen: Frozen, points: CellPoints, basis: Basis):
        if isinstance(frozen, CarrierField):
            value = frozen.evaluate(points.phys, clip=True)
            return value.g, value.grad
        frozen = np.asarray(frozen, dtype=float)
        if frozen.shape != (self.layout.n_velocity,):
            raise FormSelectionError(
                f"frozen field has {frozen.shape} entries, the layout needs ({self.layout.n_velocity},)"
            )
        return self.layout.eval_velocity(frozen, points, basis)

    def _degree_for(self, frozen: Optional[Frozen], base: int) -> CellPoints:
        if isinstance(frozen, CarrierField):
            return self.points(CARRIER_DEGREE, layered=True)
        return self.points(base)

    def _assemble_matrix(self, points: CellPoints, local_fn, n_rows: int, row_dofs, col_dofs) -> sp.csr_matrix:
        rows, cols, data = [], [], []
        for chunk in _chunks(points):
            local = local_fn(chunk)  # (Q, r, c), weights applied
            cells, starts = chunk.segments()
            per_cell = np.add.reduceat(local, starts, axis=0)
            r = row_dofs[cells]
            c = col_dofs[cells]
            rows.append(np.broadcast_to(r[:, :, None], per_cell.shape).ravel())
            cols.append(np.broadcast_to(c[:, None, :], per_cell.shape).ravel())
            data.append(per_cell.ravel())
        n_cols = self.layout.n_velocity
        if not data:
            return sp.csr_matrix((n_rows, n_cols))
        coo = sp.coo_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n_rows, n_cols),
        )
        return coo.tocsr()

    def _assemble_vector(self, points: CellPoints, local_fn, row_dofs, size: int) -> np.ndarray:
        out = np.zeros(size)
        for chunk in _chunks(points):
            local = local_fn(chunk)  # (Q, r)
            cells, starts = chunk.segments()
            per_cell = np.add.reduceat(local, starts, axis=0)
            out += np.bincount(row_dofs[cells].ravel(), weights=per_cell.ravel(), minlength=size)
        return out

    # --- matrices --- #

    def viscous(self) -> SparseOperator:
        """∫ 2 D(v):D(φ)."""

        def local(chunk: CellPoints) -> np.ndarray:
            dN = self.layout.basis(chunk).grads * np.sqrt(chunk.weights)[:, None, None]
            q = chunk.size
            block = np.zeros((q, 6, 2, 6, 2))
            gram = np.einsum("qid,qjd->qij", dN, dN)
            block[:, :, 0, :, 0] = gram
            block[:, :, 1, :, 1] = gram
            block += np.einsum("qib,qja->qiajb", dN, dN)
            return block.reshape(q, 12, 12)

        return SparseOperator(self._matrix(self.points(STANDARD_DEGREE), local), FormKind.VISCOUS)

    def gradient(self) -> SparseOperator:
        """∫ ∇v:∇φ."""

        def local(chunk: CellPoints) -> np.ndarray:
            dN = self.layout.basis(chunk).grads
            gram = np.einsum("qid,qjd->qij", dN, dN) * chunk.weights[:, None, None]
            return _componentwise(gram)

        return SparseOperator(self._matrix(self.points(STANDARD_DEGREE), local), FormKind.GRADIENT)

    def mass(self) -> SparseOperator:
        """∫ v·φ."""

        def local(chunk: CellPoints) -> np.ndarray:
            N = self.layout.basis(chunk).values
            return _componentwise(np.einsum("qi,qj->qij", N, N * chunk.weights[:, None]))

        return SparseOperator(self._matrix(self.points(STANDARD_DEGREE), local), FormKind.MASS)

    def convection(self, frozen: Frozen) -> SparseOperator:
        """∫ (b·∇v)·φ for a frozen field b."""

        def local(chunk: CellPoints) -> np.ndarray:
            basis = self.layout.basis(chunk)
            b, _ = self._frozen_values(frozen, chunk, basis)
            transport = np.einsum("qd,qjd->qj", b, basis.grads)
            return _componentwise(np.einsum("qi,qj->qij", basis.values * chunk.weights[:, None], transport))

        points = self._degree_for(frozen, NONLINEAR_DEGREE)
        return SparseOperator(self._matrix(points, local), FormKind.CONVECTION)

    def reaction(self, frozen: Frozen) -> SparseOperator:
        """∫ (v·∇b)·φ for a frozen field b."""

        def local(chunk: CellPoints) -> np.ndarray:
            basis = self.layout.basis(chunk)
            _, grad_b = self._frozen_values(frozen, chunk, basis)
            NN = np.einsum("qi,qj->qij", basis.values * chunk.weights[:, None], basis.values)
            block = np.einsum("qij,qad->qiajd", NN, grad_b)
            return block.reshape(chunk.size, 12, 12)

        points = self._degree_for(frozen, NONLINEAR_DEGREE)
        return SparseOperator(self._matrix(points, local), FormKind.REACTION)

    def divergence(self) -> SparseOperator:
        """Rows: pressure vertices; entries -∫ q div v."""

        def local(chunk: CellPoints) -> np.ndarray:
            dN = self.layout.basis(chunk).grads
            L = p1_values(chunk.ref) * chunk.weights[:, None]
            return -np.einsum("qk,qjb->qkjb", L, dN).reshape(chunk.size, 3, 12)

        points = self.points(STANDARD_DEGREE)
        matrix = self._assemble_matrix(
            points, local, self.layout.n_pressure, self.mesh.cells, self._cell_dofs
        )
        return SparseOperator(matrix, FormKind.DIVERGENCE)

    def _matrix(self, points: CellPoints, local_fn) -> sp.csr_matrix:
        return self._assemble_matrix(
            points, local_fn, self.layout.n_velocity, self._cell_dofs, self._cell_dofs
        )

    # --- loads --- #

    def carrier_load(self) -> np.ndarray:
        """-∫ 2 D(g):D(φ) + (g·∇g)·φ."""
        if self.carrier is None or self.carrier.flux == 0.0:
            return np.zeros(self.layout.n_velocity)
        carrier = self.carrier

        def local(chunk: CellPoints) -> np.ndarray:
            basis = self.layout.basis(chunk)
            value = carrier.evaluate(chunk.phys, clip=True)
            J = value.grad
            sym = J + np.transpose(J, (0, 2, 1))
            transport = np.einsum("qad,qd->qa", J, value.g)
            out = np.einsum("qad,qid->qia", sym, basis.grads)
            out += np.einsum("qa,qi->qia", transport, basis.values)
            return -(out * chunk.weights[:, None, None]).reshape(chunk.size, 12)

        points = self.points(CARRIER_DEGREE, layered=True)
        return self._assemble_vector(points, local, self._cell_dofs, self.layout.n_velocity)

    def nonlinear_load(self, frozen: np.ndarray) -> np.ndarray:
        """-∫ (w·∇w)·φ for a discrete field w."""

        def local(chunk: CellPoints) -> np.ndarray:
            basis = self.layout.basis(chunk)
            w, grad_w = self._frozen_values(frozen, chunk, basis)
            transport = np.einsum("qad,qd->qa", grad_w, w) * chunk.weights[:, None]
            return -np.einsum("qa,qi->qia", transport, basis.values).reshape(chunk.size, 12)

        points = self.points(NONLINEAR_DEGREE)
        return self._assemble_vector(points, local, self._cell_dofs, self.layout.n_velocity)

    def body_force(self, force: BodyForce, degree: int = NONLINEAR_DEGREE) -> np.ndarray:
        """∫ f·φ for an analytic f: (N, 2) -> (N, 2)."""

        def local(chunk: CellPoints) -> np.ndarray:
            f = np.asarray(force(chunk.phys), dtype=float) * chunk.weights[:, None]
            N = self.layout.basis(chunk).values
            return np.einsum("qa,qi->qia", f, N).reshape(chunk.size, 12)

        return self._assemble_vector(self.points(degree), local, self._cell_dofs, self.layout.n_velocity)

    def pressure_mass(self) -> np.ndarray:
        """m_k = ∫ L_k, so mᵀp is the integral of the pressure."""

        def local(chunk: CellPoints) -> np.ndarray:
            return p1_values(chunk.ref) * chunk.weights[:, None]

        points = self.points(2)
        return self._assemble_vector(points, local, self.mesh.cells, self.layout.n_pressure)


def _componentwise(scalar: np.ndarray) -> np.ndarray:
    """(Q, 6, 6) scalar block -> (Q, 12, 12) block acting on each component alike."""
    q = scalar.shape[0]
    block = np.zeros((q, 6, 2, 6, 2))
    block[:, :, 0, :, 0] = scalar
    block[:, :, 1, :, 1] = scalar
    return block.reshape(q, 12, 12)


def assemble_system(
    layout: FunctionSpaceLayout,
    b: Optional[Frozen],
    which: Union[FormKind, str],
    carrier: Optional[CarrierField] = None,
    force: Optional[BodyForce] = None,
) -> Union[SparseOperator, np.ndarray]:
    """Assemble one form selected by `which`.

    Args:
        layout: Function space layout.
        b: Frozen field for convection/reaction/nonlinear_load (carrier or full DOF vector);
            the carrier for carrier_load.
        which: Form selector.
        carrier: Carrier used for layer-aware quadrature when b is discrete.
        force: Analytic body force for body_force.

    Returns:
        SparseOperator for matrix forms, a load vector otherwise.

    Raises:
        FormSelectionError: On an unknown selector, a missing frozen field, or a frozen
            field that does not match the layout.
    """
    try:
        kind = FormKind(which)
    except ValueError as e:
        raise FormSelectionError(f"unknown form selector {which!r}") from e
    if kind in NEEDS_FROZEN and b is None:
        raise FormSelectionError(f"form {kind.value} needs a frozen field")
    if kind == FormKind.NONLINEAR_LOAD and isinstance(b, CarrierField):
        raise FormSelectionError("nonlinear_load takes a discrete field, not the carrier")
    if kind == FormKind.BODY_FORCE and force is None:
        raise FormSelectionError("body_force needs an analytic force")
    if kind == FormKind.CARRIER_LOAD:
        if b is not None and not isinstance(b, CarrierField):
            raise FormSelectionError("carrier_load takes the carrier as its frozen field")
        carrier = b if b is not None else carrier
    assembler = FormAssembler(layout, carrier)
    logger.info(f"{LOG_PREFIX_ASSEMBLY}: {kind.value} on {layout.n_velocity} velocity DOFs")
    dispatch = {
        FormKind.VISCOUS: assembler.viscous,
        FormKind.GRADIENT: assembler.gradient,
        FormKind.MASS: assembler.mass,
        FormKind.CONVECTION: lambda: assembler.convection(b),
        FormKind.REACTION: lambda: assembler.reaction(b),
        FormKind.DIVERGENCE: assembler.divergence,
        FormKind.CARRIER_LOAD: assembler.carrier_load,
        FormKind.NONLINEAR_LOAD: lambda: assembler.nonlinear_load(b),
        FormKind.BODY_FORCE: lambda: assembler.body_force(force),
        FormKind.PRESSURE_MASS: assembler.pressure_mass,
    }
    return dispatch[kind]()


def carrier_interpolant(layout: FunctionSpaceLayout, carrier: CarrierField) -> np.ndarray:
    """Nodal interpolant of g (full DOFs); chord midpoints are evaluated with clipping."""
    return carrier.evaluate(layout.node_coords, clip=True).g.reshape(-1)


def load_norm(vectors: List[np.ndarray]) -> float:
    return float(np.sqrt(sum(float(v @ v) for v in vectors)))
