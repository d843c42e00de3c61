"""Truncated-energy profiles of a solution: exponential decay of v and slab growth of u."""

from typing import List, Optional, Sequence, Tuple

import numpy as np

from analysis.reports import DecayReport, DecayVerdict, GrowthReport
from constants import DECAY_FD_STEP, EXACT_ZERO_LEVEL, LOG_PREFIX_DECAY, STANDARD_DEGREE
from errors import InvalidGridError
from fem.spaces import FunctionSpaceLayout
from logger import logger
from mesh import TruncatedMesh, cut_points, slab_submesh
from solver import ReconstructedFlow, SolutionBundle
from utils import is_strictly_increasing


def gradient_energy(layout: FunctionSpaceLayout, velocity: np.ndarray, a: float, b: float, weight=None) -> float:
    """∫ over a < x1 < b of weight(x1)·|∇v|² for a full velocity vector, slab cut exactly."""
    mesh = layout.mesh
    a, b = max(a, mesh.x_min), min(b, mesh.x_max)
    if b <= a:
        return 0.0
    points = cut_points(mesh, a, b, STANDARD_DEGREE)
    if points.size == 0:
        return 0.0
    _, grads = layout.eval_velocity(velocity, points)
    density = np.sum(grads**2, axis=(1, 2)) * points.weights
    if weight is not None:
        density = density * weight(points.phys[:, 0])
    return float(density.sum())


def truncated_energy(bundle: SolutionBundle, t: float, side: int = 1) -> float:
    """y±(t) = ∫ ζ±|∇v|² with ζ⁺ = clip(x1 - t + 1, 0, 1) and ζ⁻ its mirror image."""
    mesh = bundle.mesh
    layout, velocity = bundle.problem.layout, bundle.field.velocity
    if side > 0:
        plateau = gradient_energy(layout, velocity, t, mesh.x_max)
        ramp = gradient_energy(layout, velocity, t - 1.0, t, lambda x: x - t + 1.0)
    else:
        plateau = gradient_energy(layout, velocity, mesh.x_min, -t)
        ramp = gradient_energy(layout, velocity, -t, -t + 1.0, lambda x: -x - t + 1.0)
    return plateau + ramp


def edge_energy(bundle: SolutionBundle, t: float) -> float:
    """∫ over E⁺ = Ω_{t-1,t} of |∇v|², which equals -(y⁺)'(t)."""
    return gradient_energy(bundle.problem.layout, bundle.field.velocity, t - 1.0, t)


def _energy_breakpoints(mesh: TruncatedMesh) -> np.ndarray:
    """t where the plateau edge t or the ramp foot t - 1 crosses a vertex column."""
    return np.unique(np.concatenate([mesh.x_lines, mesh.x_lines + 1.0]))


def _one_sided_derivative(bundle: SolutionBundle, s: float, breakpoints: np.ndarray) -> float:
    """(y⁺)'(s) from the quintic through six samples of y⁺ on a side of s free of breakpoints.

    Between breakpoints y⁺ is a polynomial of degree five in t, so the interpolant is exact.
    """
    x_max = bundle.mesh.x_max
    right = breakpoints[breakpoints > s + 1e-12]
    left = breakpoints[breakpoints < s - 1e-12]
    ahead = min(DECAY_FD_STEP, x_max - s, (right[0] - s) if right.size else np.inf)
    behind = min(DECAY_FD_STEP, (s - left[-1]) if left.size else np.inf)
    step = ahead if ahead >= behind else -behind
    nodes = np.linspace(0.0, 1.0, 6)
    samples = [truncated_energy(bundle, s + step * n, +1) for n in nodes]
    coefficients = np.polynomial.polynomial.polyfit(nodes, samples, 5)
    return float(coefficients[1] / step)


def _check_grid(t_grid: Sequence[float], mesh: TruncatedMesh) -> np.ndarray:
    t = np.asarray(t_grid, dtype=float)
    if t.size == 0 or (t.size > 1 and not is_strictly_increasing(t)):
        raise InvalidGridError(f"the t grid must be non-empty and strictly increasing, got {list(t)}")
    if t[0] < 1.0 or t[-1] > mesh.x_max:
        raise InvalidGridError(f"the t grid must lie in [1, {mesh.x_max}], got [{t[0]}, {t[-1]}]")
    return t


def _log_linear_fit(t: np.ndarray, y: np.ndarray) -> Tuple[float, float]:
    """Slope of log y against t and the r² of the fit."""
    logs = np.log(y)
    slope, intercept = np.polyfit(t, logs, 1)
    fitted = slope * t + intercept
    ss_res = float(np.sum((logs - fitted) ** 2))
    ss_tot = float(np.sum((logs - logs.mean()) ** 2))
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0.0 else 1.0
    return float(slope), r_squared


def _consistency_error(t: np.ndarray, y: np.ndarray, c4: float) -> float:
    """max over window pairs of |e^{-(t2-t1)/C4} / (y(t2)/y(t1)) - 1|."""
    worst = 0.0
    for i in range(t.size):
        for j in range(i + 1, t.size):
            predicted = np.exp(-(t[j] - t[i]) / c4)
            observed = y[j] / y[i]
            worst = max(worst, abs(predicted / observed - 1.0))
    return worst


def decay_profile(
    bundle: SolutionBundle,
    t_grid: Sequence[float],
    window: Optional[Tuple[float, float]] = None,
    flow: Optional[ReconstructedFlow] = None,
) -> DecayReport:
    """y±(t), -(y⁺)' from the edge energy and from samples of y⁺, and the exponential fit.

    The fit window defaults to [2𝔡 + 1, T - 1]. C5 is estimated as max over the window of
    ‖u - U‖_{H¹(|x1|>t)}·e^{t/C4}.

    Raises:
        InvalidGridError: If t_grid is not strictly increasing inside [1, T].
    """
    mesh = bundle.mesh
    t = _check_grid(t_grid, mesh)
    if window is None:
        dist = bundle.carrier.dist if bundle.carrier is not None else 0.0
        window = (2.0 * dist + 1.0, mesh.x_max - 1.0)

    y_plus = [truncated_energy(bundle, s, +1) for s in t]
    y_minus = [truncated_energy(bundle, s, -1) for s in t]
    edges = [edge_energy(bundle, s) for s in t]
    breakpoints = _energy_breakpoints(mesh)
    fd = [_one_sided_derivative(bundle, float(s), breakpoints) for s in t]

    y = np.asarray(y_plus)
    in_window = (t >= window[0] - 1e-12) & (t <= window[1] + 1e-12)
    report = dict(
        t_grid=t.tolist(),
        y_plus=y_plus,
        y_minus=y_minus,
        edge_energy=edges,
        dy_plus_fd=fd,
        fit_window=(float(window[0]), float(window[1])),
    )
    scope = y[in_window] if in_window.any() else y
    if np.all(scope <= EXACT_ZERO_LEVEL):
        logger.info(f"{LOG_PREFIX_DECAY}: y+ below {EXACT_ZERO_LEVEL} on the window, exact zero")
        return DecayReport(verdict=DecayVerdict.EXACT_ZERO, **report)
    usable = in_window & (y > EXACT_ZERO_LEVEL)
    if np.sum(usable) < 3:
        logger.warning(f"{LOG_PREFIX_DECAY}: fewer than 3 grid points in the window {window}")
        return DecayReport(verdict=DecayVerdict.INSUFFICIENT, **report)

    slope, r_squared = _log_linear_fit(t[usable], y[usable])
    if slope >= 0.0:
        logger.warning(f"{LOG_PREFIX_DECAY}: no decay, log-slope {slope:.4g}")
        return DecayReport(verdict=DecayVerdict.NO_DECAY, fitted_rate=-slope, r_squared=r_squared, **report)

    rate = -slope
    c4 = 1.0 / rate
    flow = flow or ReconstructedFlow(bundle)
    c5 = max(flow.far_field_deviation(float(s)) * np.exp(s / c4) for s in t[usable])
    consistency = _consistency_error(t[usable], y[usable], c4)
    logger.info(
        f"{LOG_PREFIX_DECAY}: rate={rate:.6g} r2={r_squared:.6f} C4={c4:.6g} C5={c5:.6g} "
        f"consistency={consistency:.3g}"
    )
    return DecayReport(
        verdict=DecayVerdict.DECAY,
        fitted_rate=rate,
        r_squared=r_squared,
        C4_empirical=c4,
        C5_empirical=float(c5),
        consistency_error=consistency,
        **report,
    )


def growth_profile(
    bundle: SolutionBundle, t_grid: Sequence[float], flow: Optional[ReconstructedFlow] = None
) -> GrowthReport:
    """Per-slab H¹ + L⁴ size of u on Ω_{t-1,t} and cumulative ‖∇u‖ over Ω_t = {|x1| < t}.

    C6 is the max over the grid of ‖∇u‖_{L²(Ω_t)} / (1 + √t).

    Raises:
        InvalidGridError: If t_grid is not strictly increasing inside [1, T].
    """
    mesh = bundle.mesh
    t = _check_grid(t_grid, mesh)
    flow = flow or ReconstructedFlow(bundle)
    slab_h1: List[float] = []
    slab_l4: List[float] = []
    cumulative: List[float] = []
    for s in t:
        slab = flow.norms(slab_submesh(mesh, s - 1.0, s))
        slab_h1.append(slab.h1)
        slab_l4.append(slab.l4)
        cumulative.append(flow.norms(slab_submesh(mesh, -s, s)).grad)
    normalized = [c / (1.0 + np.sqrt(s)) for c, s in zip(cumulative, t)]
    index = int(np.argmax(normalized))
    c6 = float(normalized[index])
    logger.info(f"{LOG_PREFIX_DECAY}: growth C6={c6:.6g} attained at t={t[index]}")
    return GrowthReport(
        t_grid=t.tolist(),
        slab_h1=slab_h1,
        slab_l4=slab_l4,
        cumulative_grad=cumulative,
        normalized=[float(n) for n in normalized],
        C6_empirical=c6,
        argmax_t=float(t[index]),
    )
