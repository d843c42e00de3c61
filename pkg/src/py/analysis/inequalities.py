"""Discrete surrogates for the functional-inequality constants of the channel.

M1 (Poincaré on the zero-flux slip space) and 𝔠 (Korn) come from generalized eigenproblems
solved with ARPACK in shift-invert mode; M4 is a sampled lower bound; M5 comes from
minimum-gradient solutions of the divergence equation on a slab.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh, splu

from channel import ChannelGeometry
from constants import (
    ASCENT_STEPS,
    BOGOVSKII_MEAN_TOL,
    DEFAULT_QUALITY_FLOOR,
    EIGEN_MAX_ITER,
    EIGEN_TOL,
    LOG_PREFIX_EIGEN,
    NONLINEAR_DEGREE,
    RIGID_MOTION_FLOOR,
    STANDARD_DEGREE,
)
from errors import DegenerateInputError, EigenSolverError, PreconditionError, RigidMotionLeakError, SolverBreakdownError
from fem.assembly import FormAssembler
from fem.elements import p1_values, p2_values
from fem.quadrature import gauss_legendre
from fem.saddle import DIRECT, SaddleSolver
from fem.spaces import FunctionSpaceLayout, build_spaces
from logger import logger
from mesh import TruncatedMesh, station_points
from mesh_builder import build_mesh
from problem import ChannelProblem

ScalarFunction = Callable[[np.ndarray], np.ndarray]

FLUX_GAUSS_PER_COLUMN = 2


def flux_stations(mesh: TruncatedMesh) -> np.ndarray:
    """Interior column lines plus two Gauss abscissae per column.

    The section flux of a quadratic field is a cubic on each column, so vanishing at these
    stations (and at the ends, where v = 0) makes it vanish identically.
    """
    lines = mesh.x_lines
    t, _ = gauss_legendre(FLUX_GAUSS_PER_COLUMN, 0.0, 1.0)
    inner = lines[:-1, None] + np.diff(lines)[:, None] * t[None, :]
    return np.sort(np.concatenate([lines[1:-1], inner.ravel()]))


def flux_functionals(layout: FunctionSpaceLayout, stations: Sequence[float]) -> sp.csr_matrix:
    """Rows c_k with c_k · v = ∫ v1 dx2 across x1 = station k (free DOFs)."""
    rows, cols, vals = [], [], []
    for k, c in enumerate(stations):
        points = station_points(layout.mesh, float(c))
        N = p2_values(points.ref) * points.weights[:, None]
        dofs = 2 * layout.cell_nodes[points.cells]
        rows.append(np.full(dofs.size, k))
        cols.append(dofs.ravel())
        vals.append(N.ravel())
    full = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(len(stations), layout.n_velocity),
    )
    return sp.csr_matrix(full @ layout.prolongation)


def _smallest_eigenpair(
    A: sp.spmatrix, M: sp.spmatrix, what: str, OPinv: Optional[LinearOperator] = None
) -> Tuple[float, np.ndarray]:
    try:
        values, vectors = eigsh(
            sp.csc_matrix(A),
            k=1,
            M=sp.csc_matrix(M),
            sigma=0.0,
            which="LM",
            OPinv=OPinv,
            tol=EIGEN_TOL,
            maxiter=EIGEN_MAX_ITER,
        )
    except ArpackNoConvergence as e:
        logger.error(f"{LOG_PREFIX_EIGEN}: {what} did not converge")
        raise EigenSolverError(
            f"eigen solve for {what} did not converge",
            {"converged": [float(x) for x in e.eigenvalues]},
        ) from e
    except RuntimeError as e:
        logger.error(f"{LOG_PREFIX_EIGEN}: {what} failed: {e}")
        raise EigenSolverError(f"eigen solve for {what} failed: {e}") from e
    value = float(values[0])
    logger.info(f"{LOG_PREFIX_EIGEN}: {what} smallest eigenvalue {value:.10g} (n={A.shape[0]})")
    return value, vectors[:, 0]


def _constrained_inverse(K: sp.spmatrix, C: sp.spmatrix) -> LinearOperator:
    """x -> y with K y + Cᵀλ = x, C y = 0."""
    n, k = K.shape[0], C.shape[0]
    system = sp.bmat([[K, C.T], [C, None]], format="csc")
    try:
        lu = splu(system)
    except RuntimeError as e:
        raise SolverBreakdownError(f"singular constrained system: {e}", {"constraints": k}) from e

    def apply(x: np.ndarray) -> np.ndarray:
        return lu.solve(np.concatenate([np.ravel(x), np.zeros(k)]))[:n]

    return LinearOperator((n, n), matvec=apply, dtype=float)


def poincare_constant(problem: ChannelProblem) -> float:
    """M1 = 1/√λ_min of ∇-form against mass on the zero-flux slip space.

    Raises:
        EigenSolverError: If ARPACK does not converge.
    """
    C = flux_functionals(problem.layout, flux_stations(problem.mesh))
    OPinv = _constrained_inverse(problem.gradient, C)
    value, _ = _smallest_eigenpair(problem.gradient, problem.mass, "Poincaré constant", OPinv)
    if value <= 0.0:
        raise EigenSolverError(f"nonpositive Poincaré eigenvalue {value}")
    return float(1.0 / np.sqrt(value))


def korn_constant(problem: ChannelProblem) -> float:
    """𝔠 = min 2‖D(v)‖² / ‖∇v‖² over the constrained space.

    Raises:
        RigidMotionLeakError: If the minimum vanishes (a rigid motion passed the constraints).
    """
    value, _ = _smallest_eigenpair(problem.viscous, problem.gradient, "Korn constant")
    if value <= RIGID_MOTION_FLOOR:
        logger.error(f"{LOG_PREFIX_EIGEN}: Korn minimum {value:.3g}, rigid motion in the space")
        raise RigidMotionLeakError(
            f"Korn eigenvalue {value:.3g} is numerically zero; the slip constraints admit a rigid motion",
            {"eigenvalue": value},
        )
    return value


class MeshConstants(NamedTuple):
    poincare: float
    korn: float

    @property
    def a_priori(self) -> float:
        """2(1 + M1²)/𝔠, the bound on ‖v‖_{H¹} per unit carrier energy."""
        return 2.0 * (1.0 + self.poincare**2) / self.korn


@lru_cache(maxsize=8)
def mesh_constants(
    geometry: ChannelGeometry,
    half_length: float,
    h: float,
    quality_floor: float = DEFAULT_QUALITY_FLOOR,
    linear_solver: str = DIRECT,
) -> MeshConstants:
    """M1 and 𝔠 of the slip space on the mesh these parameters build, solved once per mesh."""
    base = ChannelProblem(build_mesh(geometry, half_length, h, quality_floor), None, linear_solver)
    constants = MeshConstants(poincare_constant(base), korn_constant(base))
    logger.info(
        f"{LOG_PREFIX_EIGEN}: h={h} M1={constants.poincare:.6g} korn_c={constants.korn:.6g} "
        f"a_priori={constants.a_priori:.6g}"
    )
    return constants


# --- L⁴ embedding --- #


@dataclass
class _QuarticForm:
    layout: FunctionSpaceLayout
    degree: int = NONLINEAR_DEGREE

    def __post_init__(self):
        self.points = self.layout.mesh.standard_points(self.degree)
        self.basis = self.layout.basis(self.points)
        self._dofs = self.layout.cell_dofs()[self.points.cells]

    def value_and_gradient(self, v_free: np.ndarray) -> Tuple[float, np.ndarray]:
        """∫|v|⁴ and its gradient in free DOFs."""
        values, _ = self.layout.eval_velocity(self.layout.expand(v_free), self.points, self.basis)
        sq = np.sum(values**2, axis=1)
        w = self.points.weights
        integrand = 4.0 * (sq * w)[:, None] * values  # (Q, 2)
        local = np.einsum("qa,qi->qia", integrand, self.basis.values).reshape(-1, 12)
        full = np.bincount(self._dofs.ravel(), weights=local.ravel(), minlength=self.layout.n_velocity)
        return float(sq**2 @ w), self.layout.restrict(full)


def embedding_ratio(quartic: _QuarticForm, gradient: sp.spmatrix, v: np.ndarray) -> float:
    grad_sq = float(v @ (gradient @ v))
    if grad_sq <= 0.0:
        raise DegenerateInputError("L⁴ ratio of a field with zero gradient")
    n4, _ = quartic.value_and_gradient(v)
    return float(n4**0.25 / np.sqrt(grad_sq))


def _ascend(quartic: _QuarticForm, gradient: sp.spmatrix, lu, v: np.ndarray, steps: int) -> float:
    """H¹-preconditioned ascent on ‖v‖⁴_{L⁴}/‖∇v‖⁴ with step halving."""
    v = v / np.sqrt(v @ (gradient @ v))
    n4, g4 = quartic.value_and_gradient(v)
    alpha = 1.0
    for _ in range(steps):
        if n4 <= 0.0:
            break
        direction = lu.solve(g4) / n4 - 4.0 * v
        improved = False
        for _ in range(10):
            trial = v + alpha * direction
            size = float(np.sqrt(trial @ (gradient @ trial)))
            if size == 0.0:
                alpha *= 0.5
                continue
            trial /= size
            t4, tg4 = quartic.value_and_gradient(trial)
            if t4 > n4:
                v, n4, g4 = trial, t4, tg4
                improved = True
                alpha = min(2.0 * alpha, 1.0)
                break
            alpha *= 0.5
        if not improved:
            break
    return float(max(n4, 0.0) ** 0.25)


def embedding_bound(
    problem: ChannelProblem, fields: Sequence[np.ndarray], ascent_steps: int = ASCENT_STEPS
) -> float:
    """Lower estimate of M4: max over the sample fields (after local ascent) of ‖v‖_{L⁴}/‖∇v‖.

    Raises:
        DegenerateInputError: If every sample field is zero.
    """
    gradient = problem.gradient
    nonzero = [np.asarray(v, dtype=float) for v in fields if np.any(v)]
    if not nonzero:
        raise DegenerateInputError("all sample fields are zero")
    quartic = _QuarticForm(problem.layout)
    lu = splu(sp.csc_matrix(gradient))
    best = 0.0
    for v in nonzero:
        best = max(best, embedding_ratio(quartic, gradient, v))
        if ascent_steps > 0:
            best = max(best, _ascend(quartic, gradient, lu, v, ascent_steps))
    logger.info(f"{LOG_PREFIX_EIGEN}: M4 lower estimate {best:.6g} from {len(nonzero)} fields")
    return best


# --- divergence equation --- #


@dataclass
class DivergenceSolution:
    layout: FunctionSpaceLayout
    field: np.ndarray  # full DOFs, zero on the whole boundary
    ratio: float  # ‖∇a‖ / ‖f‖
    residual: float  # ‖B a - F‖ / ‖F‖


class DivergenceSolver:
    """Minimum-gradient solutions of div a = f with a = 0 on the boundary of a slab mesh."""

    def __init__(self, mesh: TruncatedMesh):
        self.mesh = mesh
        self.layout = build_spaces(mesh, dirichlet_walls=True)
        assembler = FormAssembler(self.layout)
        self.gradient = assembler.gradient().reduced(self.layout)
        self.divergence = assembler.divergence().reduced(self.layout, rows=False)
        self.pressure_mass = assembler.pressure_mass()
        self.points = mesh.standard_points(STANDARD_DEGREE)
        self._p1 = p1_values(self.points.ref)
        self._saddle: Optional[SaddleSolver] = None

    def mean_and_norm(self, f: ScalarFunction) -> Tuple[float, float, float]:
        """(∫f, ∫|f|, ‖f‖_{L²}) with the mesh quadrature."""
        values = np.asarray(f(self.points.phys), dtype=float)
        w = self.points.weights
        return float(values @ w), float(np.abs(values) @ w), float(np.sqrt(values**2 @ w))

    def load(self, f: ScalarFunction) -> np.ndarray:
        """F_k = -∫ L_k f, matching the sign of the divergence block."""
        values = np.asarray(f(self.points.phys), dtype=float) * self.points.weights
        local = -self._p1 * values[:, None]
        nodes = self.mesh.cells[self.points.cells]
        return np.bincount(nodes.ravel(), weights=local.ravel(), minlength=self.layout.n_pressure)

    def solve(self, f: ScalarFunction) -> DivergenceSolution:
        """
        Raises:
            PreconditionError: If ∫f is not zero to 1e-10 relative to ∫|f|.
        """
        mean, total, norm = self.mean_and_norm(f)
        if abs(mean) > BOGOVSKII_MEAN_TOL * max(total, 1.0):
            raise PreconditionError(
                f"the divergence equation needs a mean-zero right-hand side, ∫f = {mean:.3g}",
                {"mean": mean},
            )
        if norm == 0.0:
            return DivergenceSolution(self.layout, np.zeros(self.layout.n_velocity), 0.0, 0.0)
        if self._saddle is None:
            self._saddle = SaddleSolver(self.gradient, self.divergence, self.pressure_mass)
        F = self.load(f)
        a, _, _ = self._saddle.solve(np.zeros(self.layout.n_free), F)
        residual = float(np.linalg.norm(self.divergence @ a - F) / np.linalg.norm(F))
        grad = float(np.sqrt(max(a @ (self.gradient @ a), 0.0)))
        return DivergenceSolution(self.layout, self.layout.expand(a), grad / norm, residual)


def mean_zero_battery(mesh: TruncatedMesh) -> List[Tuple[str, ScalarFunction]]:
    """Five right-hand sides made mean zero on the slab with the mesh quadrature."""
    center = 0.5 * (mesh.x_min + mesh.x_max)
    half = 0.5 * (mesh.x_max - mesh.x_min)
    raw: List[Tuple[str, ScalarFunction]] = [
        ("odd_bump", lambda p: np.sin(np.pi * (p[:, 0] - center) / half)),
        ("even_axial", lambda p: np.cos(np.pi * (p[:, 0] - center) / half)),
        ("cross", lambda p: p[:, 1]),
        ("saddle", lambda p: (p[:, 0] - center) * p[:, 1]),
        ("mixed", lambda p: np.sin(np.pi * p[:, 1]) * np.cos(0.5 * np.pi * (p[:, 0] - center) / half) + p[:, 1] ** 2),
    ]
    points = mesh.standard_points(STANDARD_DEGREE)
    w = points.weights
    battery = []
    for name, func in raw:
        mean = float(np.asarray(func(points.phys)) @ w) / float(w.sum())
        battery.append((name, lambda p, func=func, mean=mean: func(p) - mean))
    return battery


def bogovskii_bound(
    mesh: TruncatedMesh, f: Optional[ScalarFunction] = None
) -> Tuple[Optional[DivergenceSolution], float]:
    """Solve div a = f on a slab mesh; with f None, run the battery and return its max ratio.

    Returns:
        (solution for f or None for the battery, M5 surrogate).

    Raises:
        PreconditionError: If f does not have zero mean.
    """
    solver = DivergenceSolver(mesh)
    if f is not None:
        solution = solver.solve(f)
        return solution, solution.ratio
    ratios = []
    for name, func in mean_zero_battery(mesh):
        solution = solver.solve(func)
        ratios.append(solution.ratio)
        logger.info(
            f"{LOG_PREFIX_EIGEN}: divergence battery {name}: ratio={solution.ratio:.6g} "
            f"residual={solution.residual:.3g}"
        )
    return None, max(ratios)
