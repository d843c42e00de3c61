import math
from typing import NamedTuple, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from carrier.cutoffs import mu_breaks, mu_cutoff, pi_cutoff
from channel import ChannelGeometry, contains, eval_walls
from constants import (
    EPSILON_CAP,
    EPSILON_CELLS,
    EPSILON_FLOOR,
    LOG_PREFIX_CARRIER,
    SECTION_GAUSS_POINTS,
    WALL_TOLERANCE,
)
from errors import DomainError
from fem.quadrature import composite_gauss, gauss_legendre
from logger import logger

BULK_PANEL = 0.25
AXIAL_PANEL = 0.5


class CutoffParams(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    epsilon: float = Field(..., gt=0.0, lt=1.0, description="wall-layer thickness ε")
    dist: float = Field(..., gt=0.0, description="transition offset 𝔡")
    smooth_pi: bool = Field(default=False, description="use the C∞ axial transition")


class CarrierParams(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    flux: float = Field(..., description="prescribed flux Φ (signed)")
    cutoffs: CutoffParams
    geometry: ChannelGeometry

    @model_validator(mode="after")
    def validate_layer_fits(self) -> "CarrierParams":
        eps = self.cutoffs.epsilon
        if eps >= 0.5 * self.geometry.min_width:
            raise ValueError(
                f"epsilon = {eps} must be < m/2 = {0.5 * self.geometry.min_width}"
            )
        if self.cutoffs.dist <= self.geometry.straight_from:
            raise ValueError(
                f"dist = {self.cutoffs.dist} must be > L = {self.geometry.straight_from}"
            )
        return self

    def with_flux(self, flux: float) -> "CarrierParams":
        return self.model_copy(update={"flux": float(flux)})

    def with_cutoffs(self, epsilon: float, dist: float) -> "CarrierParams":
        cutoffs = self.cutoffs.model_copy(update={"epsilon": epsilon, "dist": dist})
        return CarrierParams(flux=self.flux, cutoffs=cutoffs, geometry=self.geometry)


def default_cutoffs(
    geom: ChannelGeometry,
    h: float,
    epsilon: Optional[float] = None,
    dist: Optional[float] = None,
    smooth_pi: bool = False,
) -> CutoffParams:
    """Resolve "auto" cutoff parameters.

    ε = min(max(8h, 0.05), 0.9·m/2, 0.9) so the layer spans several cells, and 𝔡 = 2L
    (1 for a channel with no bump region). Explicit values pass through unchanged.
    """
    if epsilon is None:
        wanted = max(EPSILON_CELLS * h, EPSILON_FLOOR)
        epsilon = min(wanted, EPSILON_CAP * 0.5 * geom.min_width, EPSILON_CAP)
        if epsilon < wanted:
            logger.warning(
                f"{LOG_PREFIX_CARRIER}: epsilon clamped from {wanted:.4g} to {epsilon:.4g}; "
                f"the layer spans only {epsilon / h:.3g} cells"
            )
    if dist is None:
        L = geom.straight_from
        dist = 2.0 * L if L > 0.0 else 1.0
    return CutoffParams(epsilon=epsilon, dist=dist, smooth_pi=smooth_pi)


class StreamJet(NamedTuple):
    G: np.ndarray  # (N,)
    grad: np.ndarray  # (N, 2)
    hess: np.ndarray  # (N, 2, 2)


class CarrierValue(NamedTuple):
    g: np.ndarray  # (N, 2)
    grad: np.ndarray  # (N, 2, 2), grad[:, a, b] = d g_a / d x_b

    @property
    def divergence(self) -> np.ndarray:
        return self.grad[:, 0, 0] + self.grad[:, 1, 1]


class TensorPoints(NamedTuple):
    points: np.ndarray  # (N, 2)
    weights: np.ndarray  # (N,)
    depth: np.ndarray  # (N,) distance below the upper wall


class CarrierField:
    """Solenoidal field g carrying flux Φ, with analytic first derivatives.

    G = Φ μ(f2(x1) - x2) is a stream function attached to the upper wall. Inside |x1| < 𝔡
    the carrier is (∂2G, -∂1G); further out it blends into (Φ/2, 0) through π(x1).
    """

    def __init__(self, params: CarrierParams):
        self.params = params
        self.geometry = params.geometry
        self.flux = params.flux
        self.epsilon = params.cutoffs.epsilon
        self.dist = params.cutoffs.dist
        self.smooth_pi = params.cutoffs.smooth_pi
        self.breaks = mu_breaks(self.epsilon)

    @property
    def far_field(self) -> np.ndarray:
        return np.array([0.5 * self.flux, 0.0])

    @property
    def plateau(self) -> float:
        return self.breaks.delta

    @property
    def support(self) -> float:
        """Beyond |x1| >= 7𝔡/4 the carrier equals the far field exactly."""
        return 1.75 * self.dist

    def _check_points(self, points: np.ndarray) -> None:
        inside = contains(self.geometry, points, rtol=WALL_TOLERANCE)
        if not np.all(inside):
            bad = points[~inside][0]
            raise DomainError(
                f"point ({bad[0]:.6g}, {bad[1]:.6g}) lies outside the closed channel"
            )

    def stream(self, points: np.ndarray, clip: bool = False) -> StreamJet:
        """G, ∇G and ∇²G at points (N, 2).

        With clip=True, points slightly outside the channel (chords of curved walls) are
        evaluated at the nearest admissible depth instead of raising.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if not clip:
            self._check_points(points)
        jet = eval_walls(self.geometry, points[:, 0])
        depth = np.maximum(jet.f2 - points[:, 1], 0.0)
        mu = mu_cutoff(depth, self.epsilon)
        phi = self.flux
        G = phi * mu.value
        a = phi * mu.d1
        grad = np.stack([a * jet.df2, -a], axis=-1)
        hess = np.empty((points.shape[0], 2, 2))
        hess[:, 0, 0] = phi * (mu.d2 * jet.df2**2 + mu.d1 * jet.d2f2)
        hess[:, 0, 1] = hess[:, 1, 0] = -phi * mu.d2 * jet.df2
        hess[:, 1, 1] = phi * mu.d2
        return StreamJet(G, grad, hess)

    def _branch(self, points: np.ndarray, stream: StreamJet, outer: np.ndarray) -> CarrierValue:
        x1, x2 = points[:, 0], points[:, 1]
        pi = pi_cutoff(x1, self.dist, self.smooth_pi)
        phi = self.flux
        G, dG, ddG = stream
        n = points.shape[0]
        g = np.empty((n, 2))
        grad = np.empty((n, 2, 2))

        g[:, 0] = dG[:, 1] * (1.0 - pi.value) + 0.5 * phi * pi.value
        grad[:, 0, 0] = ddG[:, 0, 1] * (1.0 - pi.value) + pi.d1 * (0.5 * phi - dG[:, 1])
        grad[:, 0, 1] = ddG[:, 1, 1] * (1.0 - pi.value)

        shear = G - 0.5 * phi * (x2 + 1.0)
        g[:, 1] = np.where(outer, pi.d1 * shear, -dG[:, 0])
        grad[:, 1, 0] = np.where(outer, pi.d2 * shear + pi.d1 * dG[:, 0], -ddG[:, 0, 0])
        grad[:, 1, 1] = np.where(outer, -pi.d1 * (0.5 * phi - dG[:, 1]), -ddG[:, 0, 1])
        return CarrierValue(g, grad)

    def evaluate(self, points: np.ndarray, clip: bool = False) -> CarrierValue:
        """g and ∇g at points (N, 2)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        stream = self.stream(points, clip=clip)
        outer = np.abs(points[:, 0]) >= self.dist
        return self._branch(points, stream, outer)

    def evaluate_branch(self, points: np.ndarray, outer: bool) -> CarrierValue:
        """Evaluate one branch formula everywhere; used to compare the two at |x1| = 𝔡."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        stream = self.stream(points, clip=True)
        return self._branch(points, stream, np.full(points.shape[0], outer))

    def depth_rule(
        self, width: float, n: int = SECTION_GAUSS_POINTS, bulk_panels: Optional[int] = None
    ):
        """Nodes and weights in t on [0, width] resolving the layer in ln t."""
        if width <= self.epsilon:
            raise DomainError(f"section width {width} does not exceed epsilon {self.epsilon}")
        brk = self.breaks
        t_plateau, w_plateau = gauss_legendre(n, 0.0, brk.delta)
        ramp_panels = max(1, math.ceil(brk.ramp_end - brk.ramp_start))
        log_breaks = np.concatenate(
            [
                [brk.plateau_end],
                np.linspace(brk.ramp_start, brk.ramp_end, ramp_panels + 1),
                [brk.support_end],
            ]
        )
        s, ws = composite_gauss(log_breaks, n)
        t_log, w_log = np.exp(s), ws * np.exp(s)
        if bulk_panels is None:
            bulk_panels = max(1, math.ceil((width - self.epsilon) / BULK_PANEL))
        t_bulk, w_bulk = composite_gauss(np.linspace(self.epsilon, width, bulk_panels + 1), n)
        return (
            np.concatenate([t_plateau, t_log, t_bulk]),
            np.concatenate([w_plateau, w_log, w_bulk]),
        )

    def section_flux(self, x1: float, n: int = SECTION_GAUSS_POINTS) -> float:
        """∫ g1 dx2 across Σ(x1)."""
        jet = eval_walls(self.geometry, np.array([x1]))
        f1, f2 = float(jet.f1[0]), float(jet.f2[0])
        t, w = self.depth_rule(f2 - f1, n)
        pts = np.stack([np.full(t.shape, x1), f2 - t], axis=-1)
        return float(self.evaluate(pts, clip=True).g[:, 0] @ w)

    def axial_breaks(self, a: float, b: float, extra: Sequence[float] = ()) -> np.ndarray:
        L, d = self.geometry.straight_from, self.dist
        marks = [0.0, L, -L]
        for factor in (1.0, 1.25, 1.5, 1.75):
            marks += [factor * d, -factor * d]
        marks += list(extra)
        inner = [m for m in marks if a < m < b]
        breaks = np.unique(np.concatenate([[a, b], inner]))
        refined = [breaks[:1]]
        for lo, hi in zip(breaks[:-1], breaks[1:]):
            pieces = max(1, math.ceil((hi - lo) / AXIAL_PANEL - 1e-12))
            refined.append(np.linspace(lo, hi, pieces + 1)[1:])
        return np.concatenate(refined)

    def tensor_points(
        self, a: float, b: float, extra: Sequence[float] = (), n: int = SECTION_GAUSS_POINTS
    ) -> TensorPoints:
        """Product quadrature over Ω_{a,b} in (x1, depth below the upper wall)."""
        x, wx = composite_gauss(self.axial_breaks(a, b, extra), n)
        jet = eval_walls(self.geometry, x)
        widths = jet.f2 - jet.f1
        bulk = max(1, math.ceil((float(widths.max()) - self.epsilon) / BULK_PANEL))
        rows_t, rows_w = [], []
        for width in widths:
            t, w = self.depth_rule(float(width), n, bulk)
            rows_t.append(t)
            rows_w.append(w)
        t = np.stack(rows_t)
        w = np.stack(rows_w) * wx[:, None]
        x2 = jet.f2[:, None] - t
        points = np.stack([np.broadcast_to(x[:, None], t.shape), x2], axis=-1).reshape(-1, 2)
        return TensorPoints(points, w.ravel(), t.ravel())


def stream_G(x: np.ndarray, params: CarrierParams) -> StreamJet:
    return CarrierField(params).stream(x)


def carrier_eval(x: np.ndarray, params: CarrierParams) -> CarrierValue:
    return CarrierField(params).evaluate(x)
