from enum import Enum
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from constants import DECAY_CONSISTENCY, FLUX_STATION_TOL
from export.records import CheckRow, ConstantRow, DecayRow, DistanceRow, GrowthRow


class ConstantEntry(BaseModel):
    name: str
    value: float
    provenance: str = Field(..., description="how the surrogate was obtained")


class ConstantsReport(BaseModel):
    """Computed surrogates for the inequality constants of one geometry and mesh."""

    model_config = ConfigDict(extra="forbid")

    h: float
    M1: float = Field(..., gt=0.0, description="Poincaré constant on the zero-flux slip space")
    M1_refined: Optional[float] = Field(default=None, description="M1 at h/2")
    M4: float = Field(..., ge=0.0, description="lower estimate of the L⁴ embedding constant")
    M5: float = Field(..., ge=0.0, description="largest ‖∇a‖/‖f‖ over the divergence battery")
    korn_c: float = Field(..., gt=0.0, le=2.0 + 1e-9, description="discrete Korn constant 𝔠")
    korn_c_refined: Optional[float] = None
    smallness_ratio: Optional[float] = Field(default=None, description="certified carrier ratio")
    empirical_C: List[ConstantEntry] = Field(default_factory=list)

    @property
    def coercivity_margin(self) -> Optional[float]:
        if self.smallness_ratio is None:
            return None
        return 0.5 * self.korn_c - self.smallness_ratio

    @property
    def a_priori_constant(self) -> float:
        """2(1 + M1²)/𝔠, the bound on ‖v‖_{H¹} per unit carrier energy."""
        return 2.0 * (1.0 + self.M1**2) / self.korn_c

    def rows(self) -> List[ConstantRow]:
        rows = [
            ConstantRow("M1", self.M1, "generalized eigenproblem, gradient vs mass, zero-flux slip space"),
            ConstantRow("M4", self.M4, "max of random-field ratios after ascent (lower bound)"),
            ConstantRow("M5", self.M5, "constrained minimum-gradient solves on a unit slab"),
            ConstantRow("korn_c", self.korn_c, "generalized eigenproblem, 2D:D vs gradient"),
            ConstantRow("a_priori", self.a_priori_constant, "2(1 + M1^2)/korn_c"),
        ]
        if self.M1_refined is not None:
            rows.append(ConstantRow("M1_refined", self.M1_refined, f"same, h = {self.h / 2}"))
        if self.korn_c_refined is not None:
            rows.append(ConstantRow("korn_c_refined", self.korn_c_refined, f"same, h = {self.h / 2}"))
        if self.smallness_ratio is not None:
            rows.append(ConstantRow("smallness_ratio", self.smallness_ratio, "certification sweep"))
            rows.append(ConstantRow("coercivity_margin", self.coercivity_margin, "korn_c/2 - smallness_ratio"))
        rows.extend(ConstantRow(c.name, c.value, c.provenance) for c in self.empirical_C)
        return rows

    def checks(self) -> List[CheckRow]:
        checks = [
            CheckRow.at_most("korn_c_at_most_2", self.korn_c, 2.0),
            CheckRow.at_least("M1_positive", self.M1, np.finfo(float).tiny),
        ]
        if self.M1_refined is not None:
            drift = abs(self.M1_refined - self.M1) / self.M1
            checks.append(CheckRow.at_most("M1_mesh_drift", drift, 0.02))
        if self.korn_c_refined is not None:
            drift = abs(self.korn_c_refined - self.korn_c) / self.korn_c
            checks.append(CheckRow.at_most("korn_c_mesh_drift", drift, 0.02))
        if self.smallness_ratio is not None:
            checks.append(CheckRow.at_least("coercivity_margin", self.coercivity_margin, 0.0))
        return checks


class DecayVerdict(str, Enum):
    DECAY = "decay"
    EXACT_ZERO = "exact_zero"
    NO_DECAY = "no_decay"
    INSUFFICIENT = "insufficient"


class DecayReport(BaseModel):
    """Truncated energies y±(t) of the perturbation and the exponential fit on the window."""

    model_config = ConfigDict(extra="forbid")

    t_grid: List[float]
    y_plus: List[float]
    y_minus: List[float]
    edge_energy: List[float] = Field(..., description="∫ over Ω_{t-1,t} of |∇v|², equal to -(y⁺)'")
    dy_plus_fd: List[float] = Field(..., description="derivative of y⁺ from interpolated samples")
    fit_window: Tuple[float, float]
    verdict: DecayVerdict
    fitted_rate: Optional[float] = None
    r_squared: Optional[float] = None
    C4_empirical: Optional[float] = None
    C5_empirical: Optional[float] = None
    consistency_error: Optional[float] = None

    @model_validator(mode="after")
    def validate_lengths(self) -> "DecayReport":
        n = len(self.t_grid)
        for name in ("y_plus", "y_minus", "edge_energy", "dy_plus_fd"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} has {len(getattr(self, name))} entries, t_grid has {n}")
        return self

    def rows(self) -> List[DecayRow]:
        return [
            DecayRow(t, yp, ym, fd, e)
            for t, yp, ym, fd, e in zip(self.t_grid, self.y_plus, self.y_minus, self.dy_plus_fd, self.edge_energy)
        ]

    def derivative_mismatch(self) -> float:
        """max |(y⁺)'_fd + ∫_{E⁺}|∇v|²| relative to the largest edge energy."""
        scale = max(self.edge_energy) if self.edge_energy else 0.0
        if scale <= 0.0:
            return 0.0
        diffs = [abs(fd + e) for fd, e in zip(self.dy_plus_fd, self.edge_energy)]
        return max(diffs) / scale

    def monotonicity_defect(self) -> float:
        """Largest increase of y⁺ along the grid, relative to max y⁺."""
        y = np.asarray(self.y_plus)
        if y.size < 2 or y.max() <= 0.0:
            return 0.0
        return float(max(np.max(np.diff(y)), 0.0) / y.max())

    def checks(self, fd_tolerance: float = 1e-8) -> List[CheckRow]:
        checks = [
            CheckRow.at_most("y_plus_nonincreasing", self.monotonicity_defect(), 1e-12),
            CheckRow.at_most("dy_plus_matches_edge_energy", self.derivative_mismatch(), fd_tolerance),
        ]
        if self.verdict == DecayVerdict.EXACT_ZERO:
            return checks
        checks.append(CheckRow.at_least("fitted_rate_positive", self.fitted_rate or 0.0, np.finfo(float).tiny))
        checks.append(CheckRow.at_least("fit_r_squared", self.r_squared or 0.0, 0.99))
        if self.consistency_error is not None:
            checks.append(CheckRow.at_most("decay_consistency", self.consistency_error, DECAY_CONSISTENCY))
        return checks


class GrowthReport(BaseModel):
    model_config = ConfigDict(extra="forbid")

    t_grid: List[float]
    slab_h1: List[float]
    slab_l4: List[float]
    cumulative_grad: List[float]
    normalized: List[float] = Field(..., description="cumulative_grad / (1 + √t)")
    C6_empirical: float
    argmax_t: Optional[float] = None

    @property
    def attained_inside(self) -> bool:
        """The maximum of the normalized series is not at the last grid point."""
        if not self.normalized or self.C6_empirical == 0.0:
            return True
        return int(np.argmax(self.normalized)) < len(self.normalized) - 1

    def rows(self) -> List[GrowthRow]:
        return [
            GrowthRow(t, h1, l4, c, n)
            for t, h1, l4, c, n in zip(self.t_grid, self.slab_h1, self.slab_l4, self.cumulative_grad, self.normalized)
        ]

    def checks(self) -> List[CheckRow]:
        finite = float(np.isfinite(self.C6_empirical))
        return [CheckRow.at_least("C6_finite", finite, 1.0)]


class SaintVenantVerdict(str, Enum):
    TRIVIAL = "trivial"
    GROWTH = "growth"
    INCONSISTENT = "inconsistent"


class UniquenessVerdict(str, Enum):
    COINCIDE = "coincide"
    DISTINCT = "distinct"
    INCONCLUSIVE = "inconclusive"


class UniquenessReport(BaseModel):
    """Solutions reached from several starts and how far apart they are."""

    model_config = ConfigDict(extra="forbid")

    flux: float
    labels: List[str]
    distances: List[Tuple[str, str, float]] = Field(default_factory=list)
    threshold: float = Field(..., description="distance at or below which two runs coincide")
    contraction_estimate: Optional[float] = None
    iterations: List[int] = Field(default_factory=list)
    growth_t: List[float] = Field(default_factory=list)
    growth_y: List[float] = Field(default_factory=list)
    normalized_tail: Optional[float] = Field(default=None, description="max y(t)/t³ over the tail")
    saint_venant: Optional[SaintVenantVerdict] = None
    verdict: UniquenessVerdict
    failures: List[str] = Field(default_factory=list)
    station_flux_error: Optional[float] = None

    def distance_rows(self) -> List[DistanceRow]:
        return [DistanceRow(a, b, d) for a, b, d in self.distances]

    @property
    def max_distance(self) -> float:
        return max((d for _, _, d in self.distances), default=0.0)

    def checks(self) -> List[CheckRow]:
        converged = 0.0 if self.failures else 1.0
        checks = [
            CheckRow.at_least("all_starts_converged", converged, 1.0),
            CheckRow.at_most("max_pairwise_distance", self.max_distance, self.threshold),
        ]
        if self.station_flux_error is not None:
            checks.append(CheckRow.at_most("perturbation_zero_flux", self.station_flux_error, FLUX_STATION_TOL))
        if self.verdict == UniquenessVerdict.COINCIDE and self.saint_venant is not None:
            trivial = float(self.saint_venant == SaintVenantVerdict.TRIVIAL)
            checks.append(CheckRow.at_least("difference_growth_trivial", trivial, 1.0))
        return checks


class FluxBracket(BaseModel):
    """Empirical bracket of the flux below which several starts find a single solution."""

    model_config = ConfigDict(extra="forbid")

    lower: float = Field(..., ge=0.0, description="largest flux tried with verdict coincide")
    upper: Optional[float] = Field(default=None, description="smallest flux tried without it")
    trials: List[Tuple[float, UniquenessVerdict]] = Field(default_factory=list)

    def rows(self) -> List[ConstantRow]:
        rows = [ConstantRow("flux_threshold_lower", self.lower, "bisection on multi-start verdicts")]
        if self.upper is not None:
            rows.append(ConstantRow("flux_threshold_upper", self.upper, "bisection on multi-start verdicts"))
        return rows
