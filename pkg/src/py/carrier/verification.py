from typing import Callable, List, NamedTuple, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from carrier.cutoffs import mu_cutoff, pi_bounds, pi_cutoff
from carrier.field import CarrierField, CarrierParams
from channel import eval_walls, wall_normals, wall_tangents
from constants import LAYER_SAMPLES_MIN, LOG_PREFIX_CARRIER
from errors import DegenerateInputError, PreconditionError
from export.records import CheckRow
from logger import logger

# Callable returning (w, ∂2w) at points (N, 2)
ScalarField = Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]]


class CarrierSampling(BaseModel):
    """Where verify_carrier samples the carrier."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    axial: int = Field(default=201, ge=3, description="sample columns in x1")
    depth: int = Field(default=64, ge=2, description="samples per column in depth")
    stations: int = Field(default=20, ge=1, description="flux stations")
    wall_points: int = Field(default=200, ge=1, description="samples per wall")


class CarrierEnergy(NamedTuple):
    gradient: float  # ∫|∇g|², scales as Φ²
    convective: float  # ∫|g·∇g|², scales as Φ⁴

    @property
    def total(self) -> float:
        return self.gradient + self.convective


class CarrierReport(BaseModel):
    max_div: float = Field(..., ge=0.0, description="max |div g| from the analytic gradient")
    max_normal_flux: float = Field(..., ge=0.0, description="max |g·n| on both walls")
    max_slip_stress: float = Field(..., ge=0.0, description="max |n·D(g)·τ| on both walls")
    flux_stations: List[float] = Field(default_factory=list)
    flux_errors: List[float] = Field(default_factory=list, description="|flux - Φ| per station")
    far_field_error: float = Field(..., ge=0.0, description="sup |g - U| for |x1| >= 7𝔡/4")
    seam_error: float = Field(..., ge=0.0, description="branch mismatch of g, ∇g at |x1| = 𝔡")
    energy_gradient: float = Field(..., ge=0.0)
    energy_convective: float = Field(..., ge=0.0)
    mu_relaxation: float = Field(..., ge=0.0, description="max -μ'(t)·t/ε")
    pi_slope: float = Field(..., ge=0.0, description="max |π'|")
    pi_curvature: float = Field(..., ge=0.0, description="max |π''|")
    layer_samples: int = Field(..., ge=0, description="depth samples inside the ε-layer")
    warnings: List[str] = Field(default_factory=list)

    @property
    def energy(self) -> float:
        return self.energy_gradient + self.energy_convective

    def checks(self, params: CarrierParams, tolerance: float = 1e-10) -> List[CheckRow]:
        phi_scale = max(1.0, abs(params.flux))
        slope, curvature = pi_bounds(params.cutoffs.dist, params.cutoffs.smooth_pi)
        rows = [
            CheckRow.at_most("max_div", self.max_div, tolerance * phi_scale),
            CheckRow.at_most("max_normal_flux", self.max_normal_flux, tolerance * phi_scale),
            CheckRow.at_most("max_slip_stress", self.max_slip_stress, tolerance * phi_scale),
            CheckRow.at_most(
                "max_flux_error", max(self.flux_errors, default=0.0), tolerance * phi_scale
            ),
            CheckRow.at_most("far_field_error", self.far_field_error, tolerance * phi_scale),
            CheckRow.at_most("seam_error", self.seam_error, tolerance * phi_scale),
            CheckRow.at_most("mu_relaxation", self.mu_relaxation, 1.0 + 1e-9),
            CheckRow.at_most("pi_slope", self.pi_slope, slope * (1.0 + 1e-12)),
            CheckRow.at_most("pi_curvature", self.pi_curvature, curvature * (1.0 + 1e-12)),
        ]
        return rows


def _sample_points(field: CarrierField, sampling: CarrierSampling) -> np.ndarray:
    reach = field.support + 1.0
    x1 = np.linspace(-reach, reach, sampling.axial)
    jet = eval_walls(field.geometry, x1)
    layer = np.geomspace(field.plateau * 0.5, field.epsilon, sampling.depth // 2)
    rest = np.linspace(0.0, 1.0, sampling.depth - layer.size)
    rows = []
    for f1, f2 in zip(jet.f1, jet.f2):
        depth = np.concatenate([layer, field.epsilon + rest * (f2 - f1 - field.epsilon)])
        rows.append(np.stack([np.full(depth.shape, 0.0), f2 - depth], axis=-1))
    points = np.concatenate(rows)
    points[:, 0] = np.repeat(x1, sampling.depth)
    return points


def _wall_residuals(field: CarrierField, sampling: CarrierSampling) -> Tuple[float, float]:
    reach = field.support + 1.0
    x1 = np.linspace(-reach, reach, sampling.wall_points)
    jet = eval_walls(field.geometry, x1)
    normal_flux, slip_stress = 0.0, 0.0
    for upper, heights in ((True, jet.f2), (False, jet.f1)):
        points = np.stack([x1, heights], axis=-1)
        value = field.evaluate(points)
        n = wall_normals(field.geometry, x1, upper)
        tau = wall_tangents(field.geometry, x1, upper)
        strain = 0.5 * (value.grad + np.transpose(value.grad, (0, 2, 1)))
        normal_flux = max(normal_flux, float(np.max(np.abs(np.sum(value.g * n, axis=1)))))
        stress = np.einsum("qa,qab,qb->q", n, strain, tau)
        slip_stress = max(slip_stress, float(np.max(np.abs(stress))))
    return normal_flux, slip_stress


def _seam_error(field: CarrierField, sampling: CarrierSampling) -> float:
    worst = 0.0
    for side in (-1.0, 1.0):
        x1 = np.full(sampling.depth, side * field.dist)
        jet = eval_walls(field.geometry, x1)
        x2 = np.linspace(jet.f1[0], jet.f2[0], sampling.depth)
        points = np.stack([x1, x2], axis=-1)
        inner = field.evaluate_branch(points, outer=False)
        outer = field.evaluate_branch(points, outer=True)
        worst = max(
            worst,
            float(np.max(np.abs(inner.g - outer.g))),
            float(np.max(np.abs(inner.grad - outer.grad))),
        )
    return worst


def carrier_energy(field: CarrierField) -> CarrierEnergy:
    """∫|∇g|² and ∫|g·∇g|² over Ω_{2𝔡}; outside it ∇g vanishes."""
    if field.flux == 0.0:
        return CarrierEnergy(0.0, 0.0)
    reach = 2.0 * field.dist
    quad = field.tensor_points(-reach, reach)
    value = field.evaluate(quad.points, clip=True)
    grad_sq = np.sum(value.grad**2, axis=(1, 2))
    convective = np.einsum("qab,qb->qa", value.grad, value.g)
    return CarrierEnergy(
        float(grad_sq @ quad.weights), float(np.sum(convective**2, axis=1) @ quad.weights)
    )


def verify_carrier(params: CarrierParams, sampling: Optional[CarrierSampling] = None) -> CarrierReport:
    """Check solenoidality, slip compatibility, flux and far-field behaviour of the carrier.

    Args:
        params: Carrier parameters.
        sampling: Sample counts; defaults resolve the layer with 32 depth samples.

    Returns:
        CarrierReport with all residuals. An under-resolved layer is reported as a warning
        rather than raised.
    """
    sampling = sampling or CarrierSampling()
    field = CarrierField(params)
    warnings: List[str] = []

    points = _sample_points(field, sampling)
    value = field.evaluate(points, clip=True)
    max_div = float(np.max(np.abs(value.divergence)))

    far = np.abs(points[:, 0]) >= field.support
    far_err = float(np.max(np.abs(value.g[far] - field.far_field))) if np.any(far) else 0.0

    normal_flux, slip_stress = _wall_residuals(field, sampling)

    reach = field.support + 1.0
    stations = np.linspace(-reach, reach, sampling.stations)
    fluxes = [field.section_flux(float(c)) for c in stations]
    flux_errors = [abs(f - params.flux) for f in fluxes]

    layer_samples = sampling.depth // 2
    if layer_samples < LAYER_SAMPLES_MIN:
        message = (
            f"only {layer_samples} samples across the epsilon-layer "
            f"(need {LAYER_SAMPLES_MIN}); residuals may miss the layer"
        )
        warnings.append(message)
        logger.warning(f"{LOG_PREFIX_CARRIER}: {message}")

    energy = carrier_energy(field)

    t = np.geomspace(field.plateau * 1e-3, field.epsilon, 10_000)
    mu = mu_cutoff(t, field.epsilon)
    relaxation = float(np.max(-mu.d1 * t / field.epsilon))
    x = np.linspace(-2.0 * field.dist, 2.0 * field.dist, 10_001)
    pi = pi_cutoff(x, field.dist, field.smooth_pi)

    report = CarrierReport(
        max_div=max_div,
        max_normal_flux=normal_flux,
        max_slip_stress=slip_stress,
        flux_stations=[float(c) for c in stations],
        flux_errors=flux_errors,
        far_field_error=far_err,
        seam_error=_seam_error(field, sampling),
        energy_gradient=energy.gradient,
        energy_convective=energy.convective,
        mu_relaxation=relaxation,
        pi_slope=float(np.max(np.abs(pi.d1))),
        pi_curvature=float(np.max(np.abs(pi.d2))),
        layer_samples=layer_samples,
        warnings=warnings,
    )
    logger.info(
        f"{LOG_PREFIX_CARRIER}: Φ={params.flux} ε={field.epsilon} 𝔡={field.dist} "
        f"div={report.max_div:.3g} flux_err={max(flux_errors):.3g} energy={report.energy:.6g}"
    )
    return report


def hardy_ratio(params: CarrierParams, w: ScalarField, wall_samples: int = 101) -> float:
    """(∫ w²|∂2G|²) / (Φ² ε² ∫ |∂2w|²) over Ω_{2𝔡}.

    Args:
        params: Carrier parameters (Φ ≠ 0).
        w: Callable giving (w, ∂2w) at points; must vanish on the upper wall.
        wall_samples: Upper-wall points used to check that w vanishes there.

    Raises:
        DegenerateInputError: If w vanishes identically on the quadrature grid, or Φ = 0.
        PreconditionError: If w is nonzero on the upper wall.
    """
    field = CarrierField(params)
    if params.flux == 0.0:
        raise DegenerateInputError("hardy ratio is undefined for zero flux")
    reach = 2.0 * field.dist
    quad = field.tensor_points(-reach, reach)
    values, d2 = w(quad.points)
    denominator = float((d2**2) @ quad.weights)
    scale = float(np.max(np.abs(values))) if values.size else 0.0
    if denominator == 0.0 and scale == 0.0:
        raise DegenerateInputError("test field w vanishes identically")

    x1 = np.linspace(-reach, reach, wall_samples)
    jet = eval_walls(field.geometry, x1)
    on_wall, _ = w(np.stack([x1, jet.f2], axis=-1))
    if np.max(np.abs(on_wall)) > 1e-12 * max(scale, 1.0):
        raise PreconditionError(
            f"test field must vanish on the upper wall, max |w| there = {np.max(np.abs(on_wall)):.3g}"
        )
    if denominator == 0.0:
        raise DegenerateInputError("test field has no x2-variation; the quotient is undefined")

    dG2 = field.stream(quad.points, clip=True).grad[:, 1]
    numerator = float((values**2 * dG2**2) @ quad.weights)
    return numerator / (params.flux**2 * field.epsilon**2 * denominator)


def layer_test_field(params: CarrierParams) -> ScalarField:
    """w = t(1 - t/ε)₊ with t = f2(x1) - x2, the distance-like coordinate to the upper wall."""
    geometry, eps = params.geometry, params.cutoffs.epsilon

    def w(points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        t = eval_walls(geometry, points[:, 0]).f2 - points[:, 1]
        inside = t < eps
        values = np.where(inside, t * (1.0 - t / eps), 0.0)
        # ∂2 t = -1
        d2 = np.where(inside, -(1.0 - 2.0 * t / eps), 0.0)
        return values, d2

    return w


def hardy_scaling(params: CarrierParams, halvings: int = 2) -> List[Tuple[float, float]]:
    """hardy_ratio for the layer test field at ε, ε/2, ..., as (ε, ratio) pairs."""
    rows = []
    eps = params.cutoffs.epsilon
    for _ in range(halvings + 1):
        scaled = params.with_cutoffs(eps, params.cutoffs.dist)
        rows.append((eps, hardy_ratio(scaled, layer_test_field(scaled))))
        eps *= 0.5
    return rows
