import time
from functools import cached_property, wraps
from typing import Callable, Dict, Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from carrier.field import CarrierField
from constants import LOG_PREFIX_ASSEMBLY
from fem.assembly import FormAssembler
from fem.norms import column_flux_functional
from fem.saddle import DIRECT, SaddleSolver
from fem.spaces import FunctionSpaceLayout, build_spaces
from logger import logger
from mesh import TruncatedMesh


def timed(label: str):
    def decorator(func: Callable):
        @wraps(func)
        def wrapper(*args, **kwargs):
            start = time.perf_counter()
            result = func(*args, **kwargs)
            logger.info(f"{LOG_PREFIX_ASSEMBLY}: {label} took {time.perf_counter() - start:.3f}s")
            return result

        return wrapper

    return decorator


class ChannelProblem:
    """Holds the mesh, layout and carrier of one run and assembles operators on demand.

    Every operator is reduced to the constrained velocity space and cached, so repeated
    solves (Picard iterations, random loads, eigenproblems) share one assembly.
    """

    def __init__(
        self,
        mesh: TruncatedMesh,
        carrier: Optional[CarrierField] = None,
        linear_solver: str = DIRECT,
        layout: Optional[FunctionSpaceLayout] = None,
    ):
        self.mesh = mesh
        self.carrier = carrier
        self.linear_solver_kind = linear_solver
        self.layout = layout or build_spaces(mesh)
        self.assembler = FormAssembler(self.layout, carrier)
        self._flux_rows: Dict[int, np.ndarray] = {}

    @property
    def flux(self) -> float:
        return self.carrier.flux if self.carrier is not None else 0.0

    def _reduce(self, matrix: sp.spmatrix) -> sp.csr_matrix:
        P = self.layout.prolongation
        return sp.csr_matrix(P.T @ matrix @ P)

    @cached_property
    @timed("viscous block")
    def viscous(self) -> sp.csr_matrix:
        return self._reduce(self.assembler.viscous().matrix)

    @cached_property
    @timed("gradient block")
    def gradient(self) -> sp.csr_matrix:
        return self._reduce(self.assembler.gradient().matrix)

    @cached_property
    @timed("mass block")
    def mass(self) -> sp.csr_matrix:
        return self._reduce(self.assembler.mass().matrix)

    @cached_property
    def h1(self) -> sp.csr_matrix:
        return sp.csr_matrix(self.mass + self.gradient)

    @cached_property
    @timed("divergence block")
    def divergence_full(self) -> sp.csr_matrix:
        return sp.csr_matrix(self.assembler.divergence().matrix)

    @cached_property
    def divergence(self) -> sp.csr_matrix:
        return sp.csr_matrix(self.divergence_full @ self.layout.prolongation)

    @cached_property
    def pressure_mass(self) -> np.ndarray:
        return self.assembler.pressure_mass()

    @cached_property
    @timed("carrier convection")
    def carrier_convection(self) -> sp.csr_matrix:
        if self.flux == 0.0:
            return sp.csr_matrix((self.layout.n_free, self.layout.n_free))
        return self._reduce(self.assembler.convection(self.carrier).matrix)

    @cached_property
    @timed("carrier reaction")
    def carrier_reaction(self) -> sp.csr_matrix:
        if self.flux == 0.0:
            return sp.csr_matrix((self.layout.n_free, self.layout.n_free))
        return self._reduce(self.assembler.reaction(self.carrier).matrix)

    @cached_property
    @timed("carrier load")
    def carrier_load(self) -> np.ndarray:
        return self.layout.restrict(self.assembler.carrier_load())

    @cached_property
    def linear_operator(self) -> sp.csr_matrix:
        """Viscous block plus the frozen carrier terms g·∇v + v·∇g."""
        return sp.csr_matrix(self.viscous + self.carrier_convection + self.carrier_reaction)

    @cached_property
    def linear_solver(self) -> SaddleSolver:
        return SaddleSolver(
            self.linear_operator, self.divergence, self.pressure_mass, self.linear_solver_kind
        )

    def oseen_solver(self, frozen_full: np.ndarray) -> SaddleSolver:
        """Solver for the operator with v^k added to the transporting field."""
        convection = self._reduce(self.assembler.convection(frozen_full).matrix)
        return SaddleSolver(
            self.linear_operator + convection,
            self.divergence,
            self.pressure_mass,
            self.linear_solver_kind,
        )

    def stokes_solver(self) -> SaddleSolver:
        return SaddleSolver(self.viscous, self.divergence, self.pressure_mass, self.linear_solver_kind)

    def station_flux(self, velocity_full: np.ndarray, x1: float) -> float:
        """Weak flux of a full velocity vector through the vertex column nearest x1."""
        column = self.mesh.nearest_column(x1)
        if column not in self._flux_rows:
            self._flux_rows[column] = column_flux_functional(self.layout, self.divergence_full, column)
        return float(self._flux_rows[column] @ velocity_full)

    def nonlinear_load(self, velocity_full: np.ndarray) -> np.ndarray:
        """Reduced -∫ (w·∇w)·φ."""
        if not np.any(velocity_full):
            return np.zeros(self.layout.n_free)
        return self.layout.restrict(self.assembler.nonlinear_load(velocity_full))

    @cached_property
    def _h1_lu(self):
        return splu(sp.csc_matrix(self.h1))

    def h1_norm(self, velocity_free: np.ndarray) -> float:
        return float(np.sqrt(max(velocity_free @ (self.h1 @ velocity_free), 0.0)))

    def dual_norm(self, functional: np.ndarray) -> float:
        """sup over constrained φ of ⟨r, φ⟩ / ‖φ‖_{H¹}."""
        if not np.any(functional):
            return 0.0
        return float(np.sqrt(max(functional @ self._h1_lu.solve(functional), 0.0)))
