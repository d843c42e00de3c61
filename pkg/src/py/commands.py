"""The batch commands: each builds what it needs from a RunConfig and writes its reports."""

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from analysis.decay import decay_profile, growth_profile
from analysis.inequalities import MeshConstants, bogovskii_bound, embedding_bound, mesh_constants
from analysis.reports import ConstantEntry, ConstantsReport
from analysis.uniqueness import bracket_flux_threshold, multistart_uniqueness
from carrier.field import CarrierField
from carrier.smallness import certification_sweep, random_solenoidal_fields, smallness_ratio
from carrier.verification import hardy_scaling, verify_carrier
from config import RunConfig
from constants import (
    CHECK_COLUMNS,
    CONSTANT_COLUMNS,
    CONVERGENCE_COLUMNS,
    DECAY_COLUMNS,
    DISTANCE_COLUMNS,
    EXIT_INVARIANT,
    EXIT_OK,
    FLUX_STATION_TOL,
    FLUX_STATIONS,
    GROWTH_COLUMNS,
    ITERATION_COLUMNS,
    SWEEP_COLUMNS,
)
from errors import NonConvergenceError, SlipChannelError
from export.csv_report import write_records
from export.manifest import CheckSummary, RunManifest
from export.records import CheckRow, ConstantRow, ReportRecord
from export.vtk_writer import write_boundary_vtk, write_matrix, write_solution_vtk
from fem.manufactured import MMS_HALF_LENGTH, convergence_study
from logger import command_log, logger
from mesh import TruncatedMesh
from mesh_builder import build_mesh, build_slab_mesh
from problem import ChannelProblem
from solver import SolutionBundle, picard_solve, reconstruct_u
from utils import make_rng

HARDY_BAND = 2.0
VELOCITY_ORDER_BAND = (1.7, 2.3)
PRESSURE_ORDER_BAND = (1.5, 2.5)
CONSTANTS_STREAM = 17


@dataclass
class CommandContext:
    """What one command invocation shares: the config, the output folder and the collected checks."""

    config: RunConfig
    directory: Path
    checks: List[CheckRow] = field(default_factory=list)
    outputs: List[str] = field(default_factory=list)

    def write(self, name: str, records: Sequence[ReportRecord], columns: Sequence[str]) -> None:
        self.outputs.append(str(write_records(self.directory / name, records, columns)))

    def build_mesh(self, h: Optional[float] = None) -> TruncatedMesh:
        mesh = self.config.mesh
        return build_mesh(self.config.geometry, mesh.half_length, h or mesh.h, mesh.quality_floor)

    @cached_property
    def mesh(self) -> TruncatedMesh:
        return self.build_mesh()

    @cached_property
    def carrier(self) -> CarrierField:
        return CarrierField(self.config.carrier_params)

    @cached_property
    def problem(self) -> ChannelProblem:
        return ChannelProblem(self.mesh, self.carrier, self.config.solver.linear_solver)

    def mesh_constants(self, h: Optional[float] = None) -> MeshConstants:
        mesh = self.config.mesh
        return mesh_constants(
            self.config.geometry, mesh.half_length, h or mesh.h, mesh.quality_floor, self.config.solver.linear_solver
        )

    def t_grid(self) -> np.ndarray:
        T = self.config.mesh.half_length
        grid = np.arange(1.0, T + 1e-9, self.config.analysis.t_step)
        return grid[grid <= T]

    def stations(self) -> np.ndarray:
        T = self.config.mesh.half_length
        return np.linspace(-T, T, FLUX_STATIONS)[1:-1]

    def solve(self) -> SolutionBundle:
        try:
            bundle = picard_solve(self.problem, self.config.solver)
        except NonConvergenceError as e:
            if e.partial is not None:
                self.write("iterations.csv", e.partial.history, ITERATION_COLUMNS)
            raise
        self.write("iterations.csv", bundle.history, ITERATION_COLUMNS)
        return bundle


def _band(name: str, value: float, band) -> List[CheckRow]:
    lo, hi = band
    return [CheckRow.at_least(f"{name}_min", value, lo), CheckRow.at_most(f"{name}_max", value, hi)]


def verify_carrier_command(ctx: CommandContext) -> None:
    params = ctx.config.carrier_params
    report = verify_carrier(params)
    ctx.checks.extend(report.checks(params))
    rows = [
        ConstantRow("energy_gradient", report.energy_gradient, "∫|∇g|^2"),
        ConstantRow("energy_convective", report.energy_convective, "∫|g·∇g|^2"),
        ConstantRow("mu_relaxation", report.mu_relaxation, "max -mu'(t)t/epsilon"),
        ConstantRow("pi_slope", report.pi_slope, "max |pi'|"),
        ConstantRow("pi_curvature", report.pi_curvature, "max |pi''|"),
        ConstantRow("layer_samples", report.layer_samples, "depth samples inside the layer"),
    ]
    if params.flux != 0.0:
        scaling = hardy_scaling(params)
        rows.extend(ConstantRow("hardy_ratio", ratio, f"epsilon = {eps}") for eps, ratio in scaling)
        ratios = [ratio for _, ratio in scaling]
        ctx.checks.append(CheckRow.at_most("hardy_band", max(ratios) / min(ratios), HARDY_BAND))
    for warning in report.warnings:
        logger.warning(f"verify-carrier: {warning}")
    ctx.write("carrier.csv", rows, CONSTANT_COLUMNS)


def solve_command(ctx: CommandContext) -> None:
    bundle = ctx.solve()
    stations = ctx.stations()
    _, norms = reconstruct_u(bundle, stations)
    flux = bundle.problem.flux
    scale = abs(flux) if flux != 0.0 else 1.0
    flux_error = max(abs(f - flux) for f in norms.fluxes.values()) / scale
    bound = ctx.mesh_constants().a_priori
    rows = [ConstantRow(f"u_{name}", value, "norm of u = g + v over the truncated channel")
            for name, value in norms.as_dict().items()]
    rows += [
        ConstantRow("perturbation_h1", bundle.perturbation_h1, "‖v‖_H1"),
        ConstantRow("relative_residual", bundle.relative_residual, "dual norm of the weak residual / load"),
        ConstantRow("a_priori_quotient", bundle.a_priori_quotient, "‖v‖_H1 / carrier energy^(1/2)"),
        ConstantRow("a_priori_bound", bound, "2(1 + M1^2)/korn_c"),
    ]
    ctx.write("solution.csv", rows, CONSTANT_COLUMNS)
    ctx.checks += [
        CheckRow.at_most("relative_residual", bundle.relative_residual, 10.0 * ctx.config.solver.picard_tol),
        CheckRow.at_most("station_flux_error", flux_error, FLUX_STATION_TOL),
        CheckRow.at_most("a_priori_quotient", bundle.a_priori_quotient, bound),
    ]
    ctx.outputs.append(str(write_solution_vtk(bundle, ctx.directory / "solution.vtk")))
    ctx.outputs.append(str(write_boundary_vtk(ctx.mesh, ctx.directory / "boundary.vtk")))
    if ctx.config.dev:
        ctx.outputs.append(str(write_matrix(bundle.problem.viscous, ctx.directory / "viscous.coo")))


def constants_command(ctx: CommandContext) -> None:
    config = ctx.config
    solver_kind = config.solver.linear_solver
    base = ChannelProblem(ctx.mesh, None, solver_kind)
    coarse, fine = ctx.mesh_constants(), ctx.mesh_constants(0.5 * config.mesh.h)
    rng = make_rng(config.seed, CONSTANTS_STREAM)
    fields = random_solenoidal_fields(base, config.analysis.samples, rng)
    slab = build_slab_mesh(config.geometry, -0.5, 0.5, config.mesh.h, config.mesh.quality_floor)

    ratio = None
    if config.flux != 0.0:
        carried = ChannelProblem(ctx.mesh, ctx.carrier, solver_kind, layout=base.layout)
        ratio = max(smallness_ratio(carried, v) for v in fields)
    report = ConstantsReport(
        h=config.mesh.h,
        M1=coarse.poincare,
        M1_refined=fine.poincare,
        M4=embedding_bound(base, fields),
        M5=bogovskii_bound(slab)[1],
        korn_c=coarse.korn,
        korn_c_refined=fine.korn,
        smallness_ratio=ratio,
        empirical_C=[
            ConstantEntry(name="C3", value=coarse.a_priori, provenance="a priori bound per unit carrier energy")
        ],
    )
    ctx.write("constants.csv", report.rows(), CONSTANT_COLUMNS)
    ctx.checks.extend(report.checks())


def decay_command(ctx: CommandContext) -> None:
    bundle = ctx.solve()
    report = decay_profile(bundle, ctx.t_grid())
    ctx.write("decay.csv", report.rows(), DECAY_COLUMNS)
    rows = [ConstantRow("verdict_" + report.verdict.value, 1.0, "decay classification")]
    for name in ("fitted_rate", "r_squared", "C4_empirical", "C5_empirical", "consistency_error"):
        value = getattr(report, name)
        if value is not None:
            rows.append(ConstantRow(name, value, f"log-linear fit on {list(report.fit_window)}"))
    ctx.write("decay_fit.csv", rows, CONSTANT_COLUMNS)
    ctx.checks.extend(report.checks())


def growth_command(ctx: CommandContext) -> None:
    bundle = ctx.solve()
    report = growth_profile(bundle, ctx.t_grid())
    ctx.write("growth.csv", report.rows(), GROWTH_COLUMNS)
    ctx.write(
        "growth_fit.csv",
        [ConstantRow("C6_empirical", report.C6_empirical, f"attained at t = {report.argmax_t}")],
        CONSTANT_COLUMNS,
    )
    ctx.checks.extend(report.checks())
    ctx.checks.append(CheckRow.at_least("C6_attained_inside", float(report.attained_inside), 1.0))


def uniqueness_command(ctx: CommandContext) -> None:
    config = ctx.config
    report = multistart_uniqueness(ctx.problem, opts=config.solver, seed=config.seed)
    ctx.write("distances.csv", report.distance_rows(), DISTANCE_COLUMNS)
    rows = [ConstantRow("verdict_" + report.verdict.value, 1.0, f"starts {report.labels}")]
    if report.contraction_estimate is not None:
        rows.append(ConstantRow("contraction_estimate", report.contraction_estimate, "max increment ratio"))
    if report.normalized_tail is not None:
        rows.append(ConstantRow("normalized_tail", report.normalized_tail, "max y(t)/t^3 over the tail"))
    for failure in report.failures:
        logger.error(f"uniqueness: {failure}")
    if config.analysis.bracket_flux:
        bracket = bracket_flux_threshold(
            ctx.mesh, config.carrier_params, config.analysis.bracket_hi, config.analysis.bracket_steps,
            config.solver, config.seed,
        )
        rows.extend(bracket.rows())
    ctx.write("uniqueness.csv", rows, CONSTANT_COLUMNS)
    ctx.checks.extend(report.checks())


def mms_command(ctx: CommandContext) -> None:
    rows = convergence_study(ctx.config.analysis.mms_h, MMS_HALF_LENGTH, ctx.config.solver.linear_solver)
    ctx.write("convergence.csv", rows, CONVERGENCE_COLUMNS)
    finest = rows[-1]
    ctx.checks += _band("velocity_order", finest.velocity_order, VELOCITY_ORDER_BAND)
    ctx.checks += _band("pressure_order", finest.pressure_order, PRESSURE_ORDER_BAND)


def certify_command(ctx: CommandContext) -> None:
    config = ctx.config
    eps, dist = config.cutoffs.epsilon, config.cutoffs.dist
    epsilons = config.analysis.epsilon_grid or [eps, eps / 2.0, eps / 4.0]
    dists = config.analysis.dist_grid or [dist, 2.0 * dist]
    korn_c = ctx.mesh_constants().korn
    result = certification_sweep(
        ctx.mesh, config.flux, epsilons, dists, korn_c, config.analysis.samples, config.seed,
        config.carrier.smooth_pi, config.solver.linear_solver,
    )
    ctx.write("sweep.csv", result.rows, SWEEP_COLUMNS)
    rows = [ConstantRow("korn_c", korn_c, "generalized eigenproblem, 2D:D vs gradient")]
    if result.chosen is not None:
        rows.append(ConstantRow("chosen_epsilon", result.chosen[0], "largest certified epsilon"))
        rows.append(ConstantRow("chosen_dist", result.chosen[1], "smallest certified dist at that epsilon"))
    ctx.write("certification.csv", rows, CONSTANT_COLUMNS)
    ctx.checks.append(CheckRow.at_least("certified", float(result.certified), 1.0))
    for row in result.rows:
        try:
            milder = result.ratio_at(0.5 * row.epsilon, 2.0 * row.dist)
        except KeyError:
            continue
        ctx.checks.append(CheckRow.at_most(f"ratio_shrinks_eps{row.epsilon:g}_dist{row.dist:g}",
                                           milder - row.max_ratio, -np.finfo(float).tiny))


COMMANDS: Dict[str, Callable[[CommandContext], None]] = {
    "verify-carrier": verify_carrier_command,
    "solve": solve_command,
    "constants": constants_command,
    "decay": decay_command,
    "growth": growth_command,
    "uniqueness": uniqueness_command,
    "mms-convergence": mms_command,
    "certify": certify_command,
}


def run(command: str, config: RunConfig, output_dir: Optional[Path] = None) -> int:
    """Run one command, write its reports, checks and manifest, and return the exit status.

    0 when every check passes, 3 when a check fails, and the error's own code (1 or 2) when
    a module raises; the diagnostic then goes verbatim into the manifest.
    """
    if command not in COMMANDS:
        raise ValueError(f"unknown command {command!r}, expected one of {sorted(COMMANDS)}")
    directory = Path(output_dir or config.run.output_dir) / command
    directory.mkdir(parents=True, exist_ok=True)
    ctx = CommandContext(config, directory)
    manifest = RunManifest(
        command=command,
        config=config.resolved(),
        seed=config.seed,
        fingerprint=config.fingerprint,
        dev=config.dev,
    )
    with command_log(command, directory) as log_path:
        logger.info(f"{command}: starting, output in {directory}")
        try:
            COMMANDS[command](ctx)
            failed = [c.name for c in ctx.checks if not c.passed]
            manifest.exit_status = EXIT_INVARIANT if failed else EXIT_OK
            if failed:
                logger.error(f"{command}: failed checks {failed}")
        except SlipChannelError as e:
            logger.error(f"{command}: {type(e).__name__}: {e}")
            manifest.exit_status = e.exit_code
            manifest.error = f"{type(e).__name__}: {e}"
            manifest.diagnostics = e.diagnostics
        ctx.write("checks.csv", ctx.checks, CHECK_COLUMNS)
        manifest.checks = CheckSummary.from_checks(ctx.checks)
        manifest.outputs = [*ctx.outputs, str(log_path)]
        manifest.write(directory)
        logger.info(f"{command}: exit status {manifest.exit_status}")
    return manifest.exit_status
