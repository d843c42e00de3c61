"""Manufactured slip solution on a straight channel and the h-convergence study built on it.

u1 = s(x1) cos(πx2), u2 = -s'(x1) sin(πx2)/π with s = (1 - (x1/T)²)⁴ is divergence free,
has u2 = ∂2u1 + ∂1u2 = 0 on x2 = ±1 and vanishes with s' at x1 = ±T. The pressure
p = sin(πx1/T) cos(πx2/2) has zero mean.
"""

import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from channel import ChannelGeometry
from constants import LOG_PREFIX_SADDLE, NONLINEAR_DEGREE
from export.records import ConvergenceRow
from fem.assembly import FormAssembler
from fem.saddle import DIRECT, solve_saddle
from fem.spaces import build_spaces
from logger import logger
from mesh_builder import MeshBuilder

MMS_HALF_LENGTH = 1.5
MMS_MESH_SIZES = (0.25, 0.125, 0.0625)


class SlipManufacturedSolution:
    def __init__(self, half_length: float = MMS_HALF_LENGTH):
        if half_length <= 0.0:
            raise ValueError(f"half_length must be positive, got {half_length}")
        self.half_length = half_length

    def profile(self, x1: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """s and its first three derivatives in x1."""
        T = self.half_length
        r = x1 / T
        q = 1.0 - r**2
        s = q**4
        ds = -8.0 * r * q**3 / T
        d2s = (-8.0 * q**3 + 48.0 * r**2 * q**2) / T**2
        d3s = (144.0 * r * q**2 - 192.0 * r**3 * q) / T**3
        return s, ds, d2s, d3s

    def velocity(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        x1, x2 = points[:, 0], points[:, 1]
        s, ds, d2s, _ = self.profile(x1)
        c, sn = np.cos(np.pi * x2), np.sin(np.pi * x2)
        values = np.stack([s * c, -ds * sn / np.pi], axis=-1)
        grads = np.empty((points.shape[0], 2, 2))
        grads[:, 0, 0] = ds * c
        grads[:, 0, 1] = -np.pi * s * sn
        grads[:, 1, 0] = -d2s * sn / np.pi
        grads[:, 1, 1] = -ds * c
        return values, grads

    def pressure(self, points: np.ndarray) -> np.ndarray:
        k = np.pi / self.half_length
        return np.sin(k * points[:, 0]) * np.cos(0.5 * np.pi * points[:, 1])

    def force(self, points: np.ndarray) -> np.ndarray:
        """f = -Δu + ∇p (div u = 0, so -div 2D(u) = -Δu)."""
        x1, x2 = points[:, 0], points[:, 1]
        s, ds, d2s, d3s = self.profile(x1)
        c, sn = np.cos(np.pi * x2), np.sin(np.pi * x2)
        k = np.pi / self.half_length
        dp1 = k * np.cos(k * x1) * np.cos(0.5 * np.pi * x2)
        dp2 = -0.5 * np.pi * np.sin(k * x1) * np.sin(0.5 * np.pi * x2)
        f1 = -(d2s - np.pi**2 * s) * c + dp1
        f2 = (d3s / np.pi - np.pi * ds) * sn + dp2
        return np.stack([f1, f2], axis=-1)


@dataclass
class ManufacturedErrors:
    h: float
    velocity_h1: float
    pressure_l2: float
    n_free: int


def solve_manufactured(
    h: float,
    half_length: float = MMS_HALF_LENGTH,
    linear_solver: str = DIRECT,
) -> ManufacturedErrors:
    """Stokes solve with the manufactured body force; H¹ velocity and L² pressure errors."""
    exact = SlipManufacturedSolution(half_length)
    geometry = ChannelGeometry(amplitude=0.0, straight_from=0.0)
    mesh = MeshBuilder(geometry).build(-half_length, half_length, h)
    layout = build_spaces(mesh)
    assembler = FormAssembler(layout)

    A = assembler.viscous().reduced(layout)
    B = assembler.divergence().reduced(layout, rows=False)
    f = layout.restrict(assembler.body_force(exact.force))
    solution = solve_saddle(layout, A, B, f, assembler.pressure_mass(), linear_solver)

    points = mesh.standard_points(NONLINEAR_DEGREE)
    values, grads = layout.eval_velocity(solution.velocity, points)
    exact_values, exact_grads = exact.velocity(points.phys)
    w = points.weights
    err_sq = np.sum((values - exact_values) ** 2, axis=1) @ w
    err_sq += np.sum((grads - exact_grads) ** 2, axis=(1, 2)) @ w
    dp = layout.eval_pressure(solution.pressure, points) - exact.pressure(points.phys)
    dp -= (dp @ w) / w.sum()
    errors = ManufacturedErrors(
        h=h,
        velocity_h1=float(math.sqrt(err_sq)),
        pressure_l2=float(math.sqrt(dp**2 @ w)),
        n_free=layout.n_free,
    )
    logger.info(
        f"{LOG_PREFIX_SADDLE}: manufactured h={h} dofs={layout.n_free} "
        f"|u-uh|_H1={errors.velocity_h1:.4e} |p-ph|_L2={errors.pressure_l2:.4e}"
    )
    return errors


def observed_orders(hs: Sequence[float], errors: Sequence[float]) -> List[float]:
    """log(e_{k-1}/e_k)/log(h_{k-1}/h_k); NaN for the coarsest level."""
    orders = [float("nan")]
    for k in range(1, len(hs)):
        if errors[k] <= 0.0 or errors[k - 1] <= 0.0:
            orders.append(float("nan"))
            continue
        orders.append(math.log(errors[k - 1] / errors[k]) / math.log(hs[k - 1] / hs[k]))
    return orders


def convergence_study(
    h_values: Sequence[float] = MMS_MESH_SIZES,
    half_length: float = MMS_HALF_LENGTH,
    linear_solver: str = DIRECT,
) -> List[ConvergenceRow]:
    """Errors and observed orders over a sequence of decreasing mesh sizes.

    Raises:
        ValueError: If fewer than two sizes are given or they do not decrease.
    """
    hs = [float(h) for h in h_values]
    if len(hs) < 2 or any(b >= a for a, b in zip(hs[:-1], hs[1:])):
        raise ValueError(f"need at least two strictly decreasing mesh sizes, got {hs}")
    results = [solve_manufactured(h, half_length, linear_solver) for h in hs]
    v_orders = observed_orders(hs, [r.velocity_h1 for r in results])
    p_orders = observed_orders(hs, [r.pressure_l2 for r in results])
    return [
        ConvergenceRow(r.h, r.velocity_h1, r.pressure_l2, vo, po)
        for r, vo, po in zip(results, v_orders, p_orders)
    ]
