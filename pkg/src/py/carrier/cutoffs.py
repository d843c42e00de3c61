"""Scalar cutoff functions used to build the flux carrier.

mu(t; eps) switches from 1 at the upper wall (t = 0) to 0 at depth t = eps with
-mu'(t) * t <= eps. pi(t; d) switches from 0 for |t| <= 5d/4 to 1 for |t| >= 7d/4.
"""

import math
from functools import lru_cache
from typing import NamedTuple, Tuple, Union

import numpy as np

from constants import MU_BLEND_FRACTION, PI_SMOOTH_RELAXATION, PI_SMOOTH_STEP_WIDTH
from errors import DomainError
from fem.quadrature import gauss_legendre

ArrayLike = Union[float, np.ndarray]


class CutoffJet(NamedTuple):
    value: np.ndarray
    d1: np.ndarray
    d2: np.ndarray


class MuBreaks(NamedTuple):
    """Junctions of mu in the log variable s = ln t.

    plateau_end = ln(delta); mu is exactly 1 below it and exactly 0 above ln(eps).
    """

    plateau_end: float
    ramp_start: float
    ramp_end: float
    support_end: float
    blend: float

    @property
    def delta(self) -> float:
        return math.exp(self.plateau_end)

    def all(self) -> Tuple[float, float, float, float]:
        return (self.plateau_end, self.ramp_start, self.ramp_end, self.support_end)


def mu_breaks(eps: float) -> MuBreaks:
    if not 0.0 < eps < 1.0:
        raise DomainError(f"epsilon must lie in (0, 1), got {eps}")
    width = 1.0 / eps
    blend = MU_BLEND_FRACTION * width
    s_e = math.log(eps)
    s_d = s_e - width - 2.0 * blend
    return MuBreaks(s_d, s_d + 2.0 * blend, s_e - 2.0 * blend, s_e, blend)


def mu_cutoff(t: ArrayLike, eps: float) -> CutoffJet:
    """Logarithmic cutoff with rounded corners and its first two t-derivatives.

    In s = ln t the profile is 1, a quadratic blend, a line of slope -eps, a quadratic
    blend and 0, so -mu'(t) * t = -dmu/ds never exceeds eps.

    Args:
        t: Distance below the upper wall, t >= 0.
        eps: Layer thickness in (0, 1).

    Returns:
        CutoffJet(mu, mu', mu'') shaped like t.

    Raises:
        DomainError: If some t < 0 or eps is outside (0, 1).
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0):
        raise DomainError(f"mu cutoff needs t >= 0, got min t = {float(np.min(t)):.6g}")
    brk = mu_breaks(eps)
    k = eps
    w = brk.blend
    positive = t > 0.0
    s = np.log(np.where(positive, t, 1.0))
    s = np.where(positive, s, -np.inf)

    value = np.zeros_like(t)
    ds = np.zeros_like(t)
    dss = np.zeros_like(t)

    plateau = s <= brk.plateau_end
    first = (s > brk.plateau_end) & (s < brk.ramp_start)
    ramp = (s >= brk.ramp_start) & (s <= brk.ramp_end)
    last = (s > brk.ramp_end) & (s < brk.support_end)

    value[plateau] = 1.0
    u = s[first] - brk.plateau_end
    value[first] = 1.0 - k * u**2 / (4.0 * w)
    ds[first] = -k * u / (2.0 * w)
    dss[first] = -k / (2.0 * w)
    value[ramp] = 1.0 - k * (s[ramp] - brk.plateau_end - w)
    ds[ramp] = -k
    u = brk.support_end - s[last]
    value[last] = k * u**2 / (4.0 * w)
    ds[last] = -k * u / (2.0 * w)
    dss[last] = k / (2.0 * w)

    tt = np.where(positive, t, 1.0)
    d1 = np.where(positive, ds / tt, 0.0)
    d2 = np.where(positive, (dss - ds) / tt**2, 0.0)
    return CutoffJet(value, d1, d2)


def _step_profile(r: np.ndarray, d: float) -> CutoffJet:
    """C^{1,1} profile on r >= 0 with a triangular first derivative over [5d/4, 7d/4]."""
    a, m, b = 1.25 * d, 1.5 * d, 1.75 * d
    c = 8.0 / d**2
    value = np.zeros_like(r)
    d1 = np.zeros_like(r)
    d2 = np.zeros_like(r)
    rising = (r > a) & (r <= m)
    falling = (r > m) & (r < b)
    value[rising] = c * (r[rising] - a) ** 2
    d1[rising] = 2.0 * c * (r[rising] - a)
    d2[rising] = 2.0 * c
    value[falling] = 1.0 - c * (b - r[falling]) ** 2
    d1[falling] = 2.0 * c * (b - r[falling])
    d2[falling] = -2.0 * c
    value[r >= b] = 1.0
    return CutoffJet(value, d1, d2)


def _smooth_step(z: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for z <= 0, 1 for z >= 1."""
    z = np.clip(z, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        f = np.where(z > 0.0, np.exp(-1.0 / np.where(z > 0.0, z, 1.0)), 0.0)
        g = np.where(z < 1.0, np.exp(-1.0 / np.where(z < 1.0, 1.0 - z, 1.0)), 0.0)
    return f / (f + g)


_STEP_GAUSS = 48


def _step_integral(z: np.ndarray) -> np.ndarray:
    """Integral of the smooth step from 0 to z."""
    z = np.asarray(z, dtype=float)
    out = np.where(z >= 1.0, 0.5 + (z - 1.0), 0.0)
    inside = (z > 0.0) & (z < 1.0)
    if np.any(inside):
        u, w = gauss_legendre(_STEP_GAUSS, 0.0, 1.0)
        zi = z[inside]
        out[inside] = zi * (_smooth_step(np.outer(zi, u)) @ w)
    return out


def _step_second_integral(z: np.ndarray) -> np.ndarray:
    """Integral of _step_integral from 0 to z."""
    z = np.asarray(z, dtype=float)
    base = _step_second_integral_at_one()
    out = np.where(z >= 1.0, base + 0.5 * (z - 1.0) + 0.5 * (z - 1.0) ** 2, 0.0)
    inside = (z > 0.0) & (z < 1.0)
    if np.any(inside):
        u, w = gauss_legendre(_STEP_GAUSS, 0.0, 1.0)
        zi = z[inside]
        out[inside] = zi**2 * (_smooth_step(np.outer(zi, u)) @ ((1.0 - u) * w))
    return out


@lru_cache(maxsize=1)
def _step_second_integral_at_one() -> float:
    u, w = gauss_legendre(_STEP_GAUSS, 0.0, 1.0)
    return float(_smooth_step(u) @ ((1.0 - u) * w))


def _unit_smooth_profile(x: np.ndarray, rho: float, scale: float) -> CutoffJet:
    shifts = (0.0, 0.5 - 0.5 * rho, 1.0 - rho)
    coeffs = (1.0, -2.0, 1.0)
    d2 = sum(c * _smooth_step((x - s) / rho) for c, s in zip(coeffs, shifts))
    d1 = rho * sum(c * _step_integral((x - s) / rho) for c, s in zip(coeffs, shifts))
    value = rho**2 * sum(c * _step_second_integral((x - s) / rho) for c, s in zip(coeffs, shifts))
    return CutoffJet(scale * value, scale * d1, scale * d2)


@lru_cache(maxsize=8)
def smooth_profile_scale(rho: float = PI_SMOOTH_STEP_WIDTH) -> float:
    """Scale c making the unit smooth profile reach exactly 1 at x = 1."""
    return 1.0 / float(_unit_smooth_profile(np.array([1.0]), rho, 1.0).value[0])


def _smooth_profile(r: np.ndarray, d: float) -> CutoffJet:
    half = 0.5 * d
    x = (r - 1.25 * d) / half
    rho = PI_SMOOTH_STEP_WIDTH
    jet = _unit_smooth_profile(x, rho, smooth_profile_scale(rho))
    value = np.where(x >= 1.0, 1.0, np.where(x <= 0.0, 0.0, jet.value))
    return CutoffJet(value, jet.d1 / half, jet.d2 / half**2)


def pi_cutoff(t: ArrayLike, d: float, smooth: bool = False) -> CutoffJet:
    """Axial cutoff pi(t) = p(|t|) and its first two t-derivatives.

    Args:
        t: Axial coordinate(s).
        d: Transition offset, d > 0.
        smooth: Use the C-infinity profile instead of the piecewise quadratic one.

    Returns:
        CutoffJet(pi, pi', pi''). pi' = sign(t) p'(|t|) and pi'' = p''(|t|).
    """
    if not d > 0.0:
        raise DomainError(f"transition offset d must be positive, got {d}")
    t = np.asarray(t, dtype=float)
    r = np.abs(t)
    jet = _smooth_profile(r, d) if smooth else _step_profile(r, d)
    return CutoffJet(jet.value, np.sign(t) * jet.d1, jet.d2)


def pi_bounds(d: float, smooth: bool = False) -> Tuple[float, float]:
    """Admissible (max pi', max |pi''|) for the chosen profile."""
    factor = 1.0 + PI_SMOOTH_RELAXATION if smooth else 1.0
    return factor * 4.0 / d, factor * 16.0 / d**2
