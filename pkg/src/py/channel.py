from enum import Enum
from typing import NamedTuple, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from constants import DEFAULT_MIN_WIDTH, DEFAULT_STRAIGHT_FROM
from errors import GeometryError

ArrayLike = Union[float, np.ndarray]


class ProfileFamily(str, Enum):
    SYMMETRIC = "symmetric"
    UPPER = "upper"


class WallJet(NamedTuple):
    """Wall heights and their first two derivatives at a set of abscissae."""

    f1: np.ndarray
    f2: np.ndarray
    df1: np.ndarray
    df2: np.ndarray
    d2f1: np.ndarray
    d2f2: np.ndarray


def bump(s: ArrayLike) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Quintic C² bump phi(s) = 1 - 10r³ + 15r⁴ - 6r⁵ with r = |s|, zero for r >= 1.

    Returns:
        phi, phi' and phi'' with respect to s.
    """
    s = np.asarray(s, dtype=float)
    r = np.abs(s)
    inside = r < 1.0
    rr = np.where(inside, r, 1.0)
    one_minus = 1.0 - rr
    phi = np.where(inside, 1.0 - rr**3 * (10.0 - 15.0 * rr + 6.0 * rr**2), 0.0)
    dphi_dr = -30.0 * rr**2 * one_minus**2
    d2phi_dr2 = -60.0 * rr * one_minus * (1.0 - 2.0 * rr)
    dphi = np.where(inside, np.sign(s) * dphi_dr, 0.0)
    d2phi = np.where(inside, d2phi_dr2, 0.0)
    return phi, dphi, d2phi


class ChannelGeometry(BaseModel):
    """Channel {f1(x1) < x2 < f2(x1)} whose walls are flat (x2 = ±1) for |x1| >= L."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    profile: ProfileFamily = Field(
        default=ProfileFamily.SYMMETRIC,
        description="symmetric: both walls carry the bump; upper: only f2 does",
    )
    amplitude: float = Field(default=0.0, description="bump amplitude a (dimensionless)")
    straight_from: float = Field(
        default=DEFAULT_STRAIGHT_FROM,
        ge=0.0,
        description="L, walls are flat for |x1| >= L",
    )
    min_width: float = Field(
        default=DEFAULT_MIN_WIDTH, gt=0.0, description="m, lower bound on f2 - f1"
    )

    @model_validator(mode="after")
    def validate_bump_support(self) -> "ChannelGeometry":
        if self.amplitude != 0.0 and self.straight_from <= 0.0:
            raise ValueError("a bump (amplitude != 0) needs straight_from > 0")
        return self

    def narrowest_width(self) -> float:
        """Smallest f2 - f1 over the whole channel (attained at x1 = 0 or in the flat part)."""
        a = self.amplitude
        if self.profile == ProfileFamily.SYMMETRIC:
            return 2.0 * min(1.0, 1.0 + a)
        return min(2.0, 2.0 + a)

    def widest_width(self) -> float:
        a = self.amplitude
        if self.profile == ProfileFamily.SYMMETRIC:
            return 2.0 * max(1.0, 1.0 + a)
        return max(2.0, 2.0 + a)

    def check_width(self) -> None:
        """Raises GeometryError when f2 - f1 drops below min_width somewhere."""
        narrowest = self.narrowest_width()
        if narrowest < self.min_width:
            raise GeometryError(
                f"degenerate geometry: min(f2 - f1) = {narrowest:.6g} < m = {self.min_width:.6g}"
            )


def eval_walls(geom: ChannelGeometry, x1: ArrayLike) -> WallJet:
    """Evaluate both walls and their derivatives.

    Args:
        geom: The channel geometry.
        x1: Axial coordinate(s), any shape.

    Returns:
        WallJet of arrays shaped like x1. Outside [-L, L] the values are exactly (-1, 1, 0, 0, 0, 0).
    """
    x1 = np.asarray(x1, dtype=float)
    a = geom.amplitude
    L = geom.straight_from
    if a == 0.0 or L == 0.0:
        zeros = np.zeros_like(x1)
        return WallJet(-np.ones_like(x1), np.ones_like(x1), zeros, zeros.copy(), zeros.copy(), zeros.copy())

    phi, dphi, d2phi = bump(x1 / L)
    f2 = 1.0 + a * phi
    df2 = a * dphi / L
    d2f2 = a * d2phi / L**2
    if geom.profile == ProfileFamily.SYMMETRIC:
        return WallJet(-f2, f2, -df2, df2, -d2f2, d2f2)
    zeros = np.zeros_like(x1)
    return WallJet(-np.ones_like(x1), f2, zeros, df2, zeros.copy(), d2f2)


def wall_normals(geom: ChannelGeometry, x1: ArrayLike, upper: bool) -> np.ndarray:
    """Analytic outward unit normals of one wall, shape x1.shape + (2,)."""
    jet = eval_walls(geom, x1)
    if upper:
        slope = jet.df2
        normal = np.stack([-slope, np.ones_like(slope)], axis=-1)
    else:
        slope = jet.df1
        normal = np.stack([slope, -np.ones_like(slope)], axis=-1)
    return normal / np.sqrt(1.0 + slope**2)[..., None]


def wall_tangents(geom: ChannelGeometry, x1: ArrayLike, upper: bool) -> np.ndarray:
    """Unit tangents (1, f')/|(1, f')| pointing towards +x1."""
    jet = eval_walls(geom, x1)
    slope = jet.df2 if upper else jet.df1
    tangent = np.stack([np.ones_like(slope), slope], axis=-1)
    return tangent / np.sqrt(1.0 + slope**2)[..., None]


def contains(geom: ChannelGeometry, points: np.ndarray, rtol: float = 0.0) -> np.ndarray:
    """True where f1(x1) - tol <= x2 <= f2(x1) + tol, tol relative to the local width."""
    points = np.asarray(points, dtype=float)
    jet = eval_walls(geom, points[..., 0])
    tol = rtol * (jet.f2 - jet.f1)
    x2 = points[..., 1]
    return (x2 >= jet.f1 - tol) & (x2 <= jet.f2 + tol)
