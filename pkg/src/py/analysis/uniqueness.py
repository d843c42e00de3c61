"""Uniqueness check: fixed-point runs from several starts and the growth of their difference."""

from dataclasses import dataclass
from itertools import combinations
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from analysis.decay import gradient_energy
from analysis.reports import FluxBracket, SaintVenantVerdict, UniquenessReport, UniquenessVerdict
from carrier.field import CarrierField, CarrierParams
from carrier.smallness import random_solenoidal_fields
from constants import (
    EXACT_ZERO_LEVEL,
    FLUX_STATIONS,
    GROWTH_TAIL_FLOOR,
    GROWTH_TAIL_SLOPE,
    LOG_PREFIX_UNIQUENESS,
    SAINT_VENANT_EXPONENT,
    START_SCALE,
)
from errors import DegenerateInputError, InvalidGridError, NonConvergenceError, PreconditionError
from fem.assembly import carrier_interpolant
from fem.saddle import MixedField
from fem.spaces import FunctionSpaceLayout
from logger import logger
from mesh import TruncatedMesh
from problem import ChannelProblem
from solver import SolutionBundle, SolveOptions, picard_solve
from utils import is_strictly_increasing, make_rng

START_STREAM = 13


@dataclass
class StartIterate:
    label: str
    field: MixedField


def default_starts(problem: ChannelProblem, seed: int = 0) -> List[StartIterate]:
    """Zero, a random solenoidal field, and the scaled carrier projection (when Φ ≠ 0).

    The random start has ‖v‖_{H¹} = 0.1. The carrier start is 0.1 times the energy projection
    of the nodal carrier interpolant onto the discretely solenoidal slip fields.
    """
    layout = problem.layout
    starts = [StartIterate("zero", MixedField.zeros(layout))]

    v = random_solenoidal_fields(problem, 1, make_rng(seed, START_STREAM))[0]
    v = START_SCALE * v / problem.h1_norm(v)
    starts.append(StartIterate("random", MixedField(layout, v, np.zeros(layout.n_pressure))))

    if problem.flux != 0.0:
        c = layout.restrict(carrier_interpolant(layout, problem.carrier))
        w, _, _ = problem.stokes_solver().solve(problem.viscous @ c)
        starts.append(
            StartIterate("carrier", MixedField(layout, START_SCALE * w, np.zeros(layout.n_pressure)))
        )
    return starts


def cutoff_energy(layout: FunctionSpaceLayout, velocity: np.ndarray, t: float) -> float:
    """y(t) = ∫ ζ|∇w|² with ζ = clip(t - |x1|, 0, 1)."""
    plateau = gradient_energy(layout, velocity, 1.0 - t, t - 1.0) if t > 1.0 else 0.0
    right = gradient_energy(layout, velocity, max(t - 1.0, 0.0), t, lambda x: t - x)
    left = gradient_energy(layout, velocity, -t, min(1.0 - t, 0.0), lambda x: t + x)
    return plateau + right + left


class SaintVenantResult(NamedTuple):
    verdict: SaintVenantVerdict
    exponent: float
    tail_slope: Optional[float]
    violations: int


def saint_venant_check(
    t: Sequence[float],
    z: Sequence[float],
    m: float = SAINT_VENANT_EXPONENT,
    c0: float = 1.0,
    tau1: Optional[float] = None,
    t0: Optional[float] = None,
    tolerance: float = EXACT_ZERO_LEVEL,
) -> SaintVenantResult:
    """Classify a sampled nonnegative series against the growth dichotomy for z ≤ c0·(z')^m.

    trivial: max z ≤ tolerance. growth: the tail of t^{-m/(m-1)}·z has a log-log slope of
    at least -0.1 and stays above a tenth of its maximum. Anything else is inconsistent with
    the hypothesis. Samples with z' ≥ tau1 where z > c0·(z')^m are counted as violations.

    Raises:
        InvalidGridError: If t is not strictly increasing or z has another length.
        PreconditionError: If m <= 1 or z has negative entries.
    """
    t = np.asarray(t, dtype=float)
    z = np.asarray(z, dtype=float)
    if not is_strictly_increasing(t) or z.shape != t.shape:
        raise InvalidGridError(f"need a strictly increasing grid matching z, got t={list(t)}")
    if m <= 1.0:
        raise PreconditionError(f"the exponent m = {m} must be > 1")
    if np.any(z < 0.0):
        raise PreconditionError("the series must be nonnegative")
    exponent = m / (m - 1.0)

    dz = np.gradient(z, t)
    active = dz >= (tau1 if tau1 is not None else 0.0)
    violations = int(np.sum(active & (z > c0 * np.maximum(dz, 0.0) ** m)))

    if z.max() <= tolerance:
        return SaintVenantResult(SaintVenantVerdict.TRIVIAL, exponent, None, violations)

    start = t0 if t0 is not None else t[t.size // 2]
    tail = (t >= start) & (z > 0.0)
    if np.sum(tail) < 2:
        return SaintVenantResult(SaintVenantVerdict.INCONSISTENT, exponent, None, violations)
    normalized = z[tail] * t[tail] ** (-exponent)
    slope = float(np.polyfit(np.log(t[tail]), np.log(normalized), 1)[0])
    bounded_below = normalized.min() >= GROWTH_TAIL_FLOOR * normalized.max()
    if slope >= GROWTH_TAIL_SLOPE and bounded_below:
        verdict = SaintVenantVerdict.GROWTH
    else:
        verdict = SaintVenantVerdict.INCONSISTENT
    return SaintVenantResult(verdict, exponent, slope, violations)


def _growth_grid(mesh: TruncatedMesh, t_grid: Optional[Sequence[float]]) -> np.ndarray:
    if t_grid is None:
        return np.linspace(1.0, mesh.x_max, max(int(round(2 * (mesh.x_max - 1.0))) + 1, 2))
    t = np.asarray(t_grid, dtype=float)
    if not is_strictly_increasing(t) or t[0] <= 0.0 or t[-1] > mesh.x_max:
        raise InvalidGridError(f"the growth grid must be strictly increasing inside (0, {mesh.x_max}]")
    return t


def _station_flux_error(bundle: SolutionBundle) -> float:
    """Largest weak flux |ℓ(v)| over interior vertex columns, relative to |Φ| (absolute when Φ = 0)."""
    mesh = bundle.mesh
    stations = np.linspace(mesh.x_min, mesh.x_max, FLUX_STATIONS)[1:-1]
    worst = max(abs(f) for f in bundle.perturbation_fluxes(stations))
    scale = abs(bundle.problem.flux)
    return worst / scale if scale > 0.0 else worst


def multistart_uniqueness(
    problem: ChannelProblem,
    starts: Optional[Sequence[StartIterate]] = None,
    opts: Optional[SolveOptions] = None,
    t_grid: Optional[Sequence[float]] = None,
    seed: int = 0,
) -> UniquenessReport:
    """Run the fixed-point iteration from every start and compare the limits.

    The runs coincide when every pairwise H¹ distance is at most 10·picard_tol·max(1, ‖v‖_{H¹}).
    The growth series y(t) = ∫ζ|∇w|² is taken for the most distant pair and classified with
    saint_venant_check at the resolution of the coincidence threshold. A run that does not
    converge makes the verdict inconclusive; converged runs are still compared.
    """
    opts = opts or SolveOptions()
    starts = list(starts) if starts is not None else default_starts(problem, seed)
    if len(starts) < 2:
        raise DegenerateInputError(f"a uniqueness run needs at least two starts, got {len(starts)}")
    t = _growth_grid(problem.mesh, t_grid)

    bundles: List[SolutionBundle] = []
    iterations: List[int] = []
    failures: List[str] = []
    for start in starts:
        try:
            bundle = picard_solve(problem, opts, start.field, start.label)
        except NonConvergenceError as e:
            logger.error(f"{LOG_PREFIX_UNIQUENESS}: start {start.label} did not converge: {e}")
            failures.append(f"{start.label}: {e}")
            iterations.append(e.partial.iterations if e.partial is not None else opts.max_iters)
            continue
        bundles.append(bundle)
        iterations.append(bundle.iterations)

    size = max((b.perturbation_h1 for b in bundles), default=0.0)
    threshold = 10.0 * opts.picard_tol * max(1.0, size)
    distances: List[Tuple[str, str, float]] = []
    pairs = list(combinations(bundles, 2))
    for a, b in pairs:
        d = problem.h1_norm(a.field.velocity_free - b.field.velocity_free)
        distances.append((a.start_label, b.start_label, d))
        logger.info(f"{LOG_PREFIX_UNIQUENESS}: distance {a.start_label} - {b.start_label} = {d:.4e}")

    ratios = [r for b in bundles for r in b.contraction_ratios()]
    report = dict(
        flux=problem.flux,
        labels=[s.label for s in starts],
        distances=distances,
        threshold=threshold,
        contraction_estimate=max(ratios) if ratios else None,
        iterations=iterations,
        failures=failures,
        station_flux_error=_station_flux_error(bundles[0]) if bundles else None,
    )
    if pairs:
        a, b = pairs[int(np.argmax([d for _, _, d in distances]))]
        difference = problem.layout.expand(a.field.velocity_free - b.field.velocity_free)
        y = np.array([cutoff_energy(problem.layout, difference, float(s)) for s in t])
        tail = t >= t[t.size // 2]
        check = saint_venant_check(t, y, tolerance=max(threshold**2, EXACT_ZERO_LEVEL))
        report.update(
            growth_t=t.tolist(),
            growth_y=y.tolist(),
            normalized_tail=float(np.max(y[tail] / t[tail] ** 3)),
            saint_venant=check.verdict,
        )

    if failures:
        verdict = UniquenessVerdict.INCONCLUSIVE
    elif all(d <= threshold for _, _, d in distances):
        verdict = UniquenessVerdict.COINCIDE
    else:
        verdict = UniquenessVerdict.DISTINCT
    logger.info(f"{LOG_PREFIX_UNIQUENESS}: flux={problem.flux} verdict={verdict.value} threshold={threshold:.3e}")
    return UniquenessReport(verdict=verdict, **report)


def bracket_flux_threshold(
    mesh: TruncatedMesh,
    params: CarrierParams,
    flux_hi: float,
    steps: int,
    opts: Optional[SolveOptions] = None,
    seed: int = 0,
) -> FluxBracket:
    """Bisect on Φ between 0 and flux_hi over multi-start verdicts.

    Φ = 0 always coincides (every run converges to v = 0). When flux_hi itself coincides the
    bracket has no upper end.
    """
    if flux_hi <= 0.0:
        raise PreconditionError(f"bracket_hi = {flux_hi} must be positive")
    opts = opts or SolveOptions()
    layout = ChannelProblem(mesh, None, opts.linear_solver).layout

    def verdict_at(flux: float) -> UniquenessVerdict:
        problem = ChannelProblem(mesh, CarrierField(params.with_flux(flux)), opts.linear_solver, layout=layout)
        return multistart_uniqueness(problem, opts=opts, seed=seed).verdict

    bracket = FluxBracket(lower=0.0)
    verdict = verdict_at(flux_hi)
    bracket.trials.append((flux_hi, verdict))
    if verdict == UniquenessVerdict.COINCIDE:
        bracket.lower = flux_hi
        return bracket
    lo, hi = 0.0, flux_hi
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        verdict = verdict_at(mid)
        bracket.trials.append((mid, verdict))
        if verdict == UniquenessVerdict.COINCIDE:
            lo = mid
        else:
            hi = mid
        logger.info(f"{LOG_PREFIX_UNIQUENESS}: bracket [{lo}, {hi}] after flux={mid} ({verdict.value})")
    bracket.lower, bracket.upper = lo, hi
    return bracket
