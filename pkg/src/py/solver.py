from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from carrier.field import CarrierField
from carrier.verification import CarrierEnergy, carrier_energy
from constants import (
    DAMPING_FLOOR,
    DEFAULT_DAMPING,
    DEFAULT_DELTA_TARGET,
    DEFAULT_MAX_ITERS,
    DEFAULT_PICARD_TOL,
    LOG_PREFIX_PICARD,
    NONLINEAR_DEGREE,
)
from errors import NonConvergenceError
from export.records import IterationRow
from fem.norms import NormTable, integrate_norms, region_points
from fem.quadrature import CellPoints
from fem.saddle import DIRECT, SCHUR, MixedField
from logger import logger
from mesh import SlabSelection, TruncatedMesh, slab_submesh
from problem import ChannelProblem


class Scheme(str, Enum):
    PICARD = "picard"
    OSEEN = "oseen"


class SolveOptions(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    picard_tol: float = Field(
        default=DEFAULT_PICARD_TOL, gt=0.0, description="relative H¹ increment threshold"
    )
    max_iters: int = Field(default=DEFAULT_MAX_ITERS, ge=1, description="iteration cap")
    damping: float = Field(
        default=DEFAULT_DAMPING, gt=0.0, le=1.0, description="initial relaxation factor ω"
    )
    delta_target: float = Field(
        default=DEFAULT_DELTA_TARGET, gt=0.0, description="coercivity margin δ asked of the carrier"
    )
    scheme: Scheme = Field(default=Scheme.PICARD, description="picard: lagged v·∇v; oseen: v^k·∇v")
    linear_solver: str = Field(default=DIRECT, pattern=f"^({DIRECT}|{SCHUR})$")


@dataclass
class SolutionBundle:
    """A (possibly partial) fixed-point run: v, p, the carrier and the iteration table."""

    problem: ChannelProblem
    field: MixedField
    history: List[IterationRow]
    converged: bool
    load_norm: float
    options: SolveOptions
    start_label: str = "zero"
    notes: List[str] = field(default_factory=list)

    @property
    def carrier(self) -> CarrierField:
        return self.problem.carrier

    @property
    def mesh(self) -> TruncatedMesh:
        return self.problem.mesh

    @property
    def iterations(self) -> int:
        return len(self.history)

    @property
    def increments(self) -> List[float]:
        return [row.increment for row in self.history]

    @property
    def residual(self) -> float:
        return self.history[-1].residual if self.history else 0.0

    @property
    def relative_residual(self) -> float:
        return self.residual / self.load_norm if self.load_norm > 0.0 else self.residual

    @property
    def perturbation_h1(self) -> float:
        return self.problem.h1_norm(self.field.velocity_free)

    @cached_property
    def carrier_energy(self) -> CarrierEnergy:
        return carrier_energy(self.carrier)

    @property
    def a_priori_quotient(self) -> float:
        """‖v‖_{H¹} / (∫|∇g|² + |g·∇g|²)^{1/2}; 0 when both vanish."""
        energy = self.carrier_energy.total
        if energy <= 0.0:
            return 0.0
        return self.perturbation_h1 / float(np.sqrt(energy))

    def contraction_ratios(self) -> List[float]:
        inc = self.increments
        return [b / a for a, b in zip(inc[:-1], inc[1:]) if a > 0.0]

    def perturbation_fluxes(self, stations: Sequence[float]) -> List[float]:
        return [self.problem.station_flux(self.field.velocity, float(c)) for c in stations]


def _as_free(problem: ChannelProblem, start: Union[None, MixedField, np.ndarray]) -> MixedField:
    layout = problem.layout
    if start is None:
        return MixedField.zeros(layout)
    if isinstance(start, MixedField):
        return MixedField(layout, start.velocity_free.copy(), start.pressure.copy())
    start = np.asarray(start, dtype=float)
    if start.shape == (layout.n_free,):
        return MixedField(layout, start.copy(), np.zeros(layout.n_pressure))
    if start.shape == (layout.n_velocity,):
        return MixedField(layout, layout.restrict(start), np.zeros(layout.n_pressure))
    raise ValueError(f"start iterate has shape {start.shape}, expected free or full velocity DOFs")


def solve_linearized(
    problem: ChannelProblem,
    frozen: Optional[np.ndarray] = None,
    load_scale: float = 1.0,
) -> MixedField:
    """One application of the fixed-point map: solve the linearized problem.

    The left-hand side carries -div 2D(v) + g·∇v + v·∇g; the load is the carrier functional,
    plus -(w·∇w, φ) when a frozen full velocity w is given.

    Raises:
        SolverBreakdownError: If the saddle factorization or solve fails.
    """
    load = load_scale * problem.carrier_load
    if frozen is not None:
        load = load + problem.nonlinear_load(frozen)
    solver = problem.linear_solver
    v, p, residual = solver.solve(load)
    return MixedField(problem.layout, v, p, residual, list(solver.history))


def weak_residual(problem: ChannelProblem, state: MixedField, load_scale: float = 1.0) -> float:
    """Dual H¹ norm of the nonlinear residual over the constrained test space.

    r(φ) = s·⟨carrier load, φ⟩ - (v·∇v, φ) - ∫ 2D(v):D(φ) - ((g·∇v + v·∇g), φ) + ∫ p div φ.
    """
    r = load_scale * problem.carrier_load + problem.nonlinear_load(state.velocity)
    r = r - problem.linear_operator @ state.velocity_free - problem.divergence.T @ state.pressure
    return problem.dual_norm(r)


def _relative(increment: float, size: float) -> float:
    """Increment relative to max(‖v‖_{H¹}, 1) so runs converging to v = 0 terminate."""
    return increment / max(size, 1.0)


def picard_solve(
    problem: ChannelProblem,
    opts: Optional[SolveOptions] = None,
    start: Union[None, MixedField, np.ndarray] = None,
    start_label: str = "zero",
) -> SolutionBundle:
    """Damped fixed-point iteration v^{k+1} = (1 - ω) v^k + ω K(v^k).

    ω starts at opts.damping and is halved (down to 1/8) whenever the weak residual grows.
    The run stops when the relative H¹ increment is below picard_tol and the weak residual is
    below 10·picard_tol times the reference residual: the norm of the carrier load, or the
    starting residual when that is larger (nonzero starts at zero flux).

    Raises:
        NonConvergenceError: After max_iters iterations; `partial` holds the last bundle.
    """
    opts = opts or SolveOptions()
    state = _as_free(problem, start)
    load_norm = problem.dual_norm(problem.carrier_load)
    residual = weak_residual(problem, state)
    reference = max(load_norm, residual)
    omega = opts.damping
    history: List[IterationRow] = []
    notes: List[str] = []
    logger.info(
        f"{LOG_PREFIX_PICARD}: start={start_label} scheme={opts.scheme.value} flux={problem.flux} "
        f"load={load_norm:.4e} residual={residual:.4e}"
    )

    for k in range(1, opts.max_iters + 1):
        frozen = state.velocity
        if opts.scheme == Scheme.OSEEN and np.any(frozen):
            solver = problem.oseen_solver(frozen)
            v_hat, p_hat, _ = solver.solve(problem.carrier_load)
        else:
            step = solve_linearized(problem, frozen)
            v_hat, p_hat = step.velocity_free, step.pressure
        candidate = MixedField(
            problem.layout,
            (1.0 - omega) * state.velocity_free + omega * v_hat,
            (1.0 - omega) * state.pressure + omega * p_hat,
        )
        increment = _relative(
            problem.h1_norm(candidate.velocity_free - state.velocity_free),
            problem.h1_norm(candidate.velocity_free),
        )
        new_residual = weak_residual(problem, candidate)
        history.append(IterationRow(k, increment, new_residual, omega))
        logger.info(
            f"{LOG_PREFIX_PICARD}: it={k} increment={increment:.4e} residual={new_residual:.4e} omega={omega}"
        )
        state = candidate
        if increment <= opts.picard_tol and new_residual <= 10.0 * opts.picard_tol * reference:
            return SolutionBundle(problem, state, history, True, load_norm, opts, start_label, notes)
        if new_residual > residual and omega > DAMPING_FLOOR:
            omega = max(0.5 * omega, DAMPING_FLOOR)
            notes.append(f"damping halved to {omega} at iteration {k}")
            logger.warning(f"{LOG_PREFIX_PICARD}: residual grew, damping halved to {omega}")
        residual = new_residual

    partial = SolutionBundle(problem, state, history, False, load_norm, opts, start_label, notes)
    logger.error(f"{LOG_PREFIX_PICARD}: no convergence after {opts.max_iters} iterations")
    raise NonConvergenceError(
        f"fixed-point iteration did not converge in {opts.max_iters} iterations "
        f"(last increment {history[-1].increment:.3e}, residual {history[-1].residual:.3e})",
        {
            "increments": [row.increment for row in history],
            "residuals": [row.residual for row in history],
            "damping": omega,
        },
        partial=partial,
    )


class ReconstructedFlow:
    """u = g + v on the truncated channel."""

    def __init__(self, bundle: SolutionBundle):
        self.bundle = bundle
        self.problem = bundle.problem
        self.carrier = bundle.carrier
        self.layout = bundle.problem.layout
        self.velocity = bundle.field.velocity

    def _carrier_at(self, phys: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        if self.carrier is None or self.carrier.flux == 0.0:
            return np.zeros((phys.shape[0], 2)), np.zeros((phys.shape[0], 2, 2))
        value = self.carrier.evaluate(phys, clip=True)
        return value.g, value.grad

    def at_points(self, points: CellPoints) -> Tuple[np.ndarray, np.ndarray]:
        g, grad_g = self._carrier_at(points.phys)
        v, grad_v = self.layout.eval_velocity(self.velocity, points)
        return g + v, grad_g + grad_v

    def __call__(self, phys: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Evaluate u at arbitrary points of the channel (located on the mesh)."""
        phys = np.atleast_2d(np.asarray(phys, dtype=float))
        cells, ref = self.problem.mesh.locate(phys)
        return self.at_points(CellPoints(cells, ref, phys, np.ones(phys.shape[0])))

    def station_flux(self, x1: float) -> float:
        """Flux of g (exact quadrature) plus the weak flux of v at the vertex column nearest x1."""
        mesh = self.problem.mesh
        x_column = float(mesh.x_lines[mesh.nearest_column(x1)])
        carrier_part = self.carrier.section_flux(x_column) if self.carrier is not None else 0.0
        return carrier_part + self.problem.station_flux(self.velocity, x1)

    def _region(self, region: Optional[SlabSelection]) -> CellPoints:
        return region_points(
            self.problem.mesh, region, NONLINEAR_DEGREE, self.problem.assembler.integrator
        )

    def norms(self, region: Optional[SlabSelection] = None, stations: Sequence[float] = ()) -> NormTable:
        points = self._region(region)
        values, grads = self.at_points(points)
        n = integrate_norms(values, grads, points.weights)
        return NormTable(
            l2=n["l2"],
            l4=n["l4"],
            grad=n["grad"],
            strain=n["strain"],
            divergence=n["divergence"],
            h1=float(np.hypot(n["l2"], n["grad"])),
            fluxes={float(c): self.station_flux(float(c)) for c in stations},
        )

    def far_field_deviation(self, t: float) -> float:
        """‖u - U‖_{H¹} over |x1| > t."""
        mesh = self.problem.mesh
        if t >= mesh.x_max:
            return 0.0
        U = self.carrier.far_field if self.carrier is not None else np.zeros(2)
        total = 0.0
        for a, b in ((max(t, mesh.x_min), mesh.x_max), (mesh.x_min, min(-t, mesh.x_max))):
            if b <= a:
                continue
            points = self._region(slab_submesh(mesh, a, b))
            values, grads = self.at_points(points)
            diff = values - U
            total += float((np.sum(diff**2, axis=1) + np.sum(grads**2, axis=(1, 2))) @ points.weights)
        return float(np.sqrt(total))


def reconstruct_u(bundle: SolutionBundle, stations: Sequence[float] = ()) -> Tuple[ReconstructedFlow, NormTable]:
    """Evaluator for u = g + v together with its norms over Ω_T and station fluxes."""
    flow = ReconstructedFlow(bundle)
    return flow, flow.norms(stations=stations)
