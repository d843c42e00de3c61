"""Quadratic (velocity) and linear (pressure) Lagrange elements on the reference triangle.

Local node order: vertices 0, 1, 2 then edge midpoints of (0,1), (1,2), (2,0).
"""

import numpy as np

_DLAMBDA = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
_EDGE_PAIRS = ((0, 1), (1, 2), (2, 0))


def barycentric(points: np.ndarray) -> np.ndarray:
    points = np.atleast_2d(points)
    xi, eta = points[:, 0], points[:, 1]
    return np.stack([1.0 - xi - eta, xi, eta], axis=-1)


def p1_values(points: np.ndarray) -> np.ndarray:
    return barycentric(points)


def p2_values(points: np.ndarray) -> np.ndarray:
    """(Q, 6) basis values."""
    lam = barycentric(points)
    values = np.empty((lam.shape[0], 6))
    values[:, :3] = lam * (2.0 * lam - 1.0)
    for e, (i, j) in enumerate(_EDGE_PAIRS):
        values[:, 3 + e] = 4.0 * lam[:, i] * lam[:, j]
    return values


def p2_gradients(points: np.ndarray) -> np.ndarray:
    """(Q, 6, 2) reference gradients d/dxi, d/deta."""
    lam = barycentric(points)
    grads = np.empty((lam.shape[0], 6, 2))
    for i in range(3):
        grads[:, i, :] = (4.0 * lam[:, i] - 1.0)[:, None] * _DLAMBDA[i][None, :]
    for e, (i, j) in enumerate(_EDGE_PAIRS):
        grads[:, 3 + e, :] = 4.0 * (
            lam[:, i, None] * _DLAMBDA[j][None, :] + lam[:, j, None] * _DLAMBDA[i][None, :]
        )
    return grads


def affine_maps(vertices: np.ndarray):
    """Per-cell affine data for x = x0 + J xi.

    Args:
        vertices: (F, 3, 2) cell vertex coordinates.

    Returns:
        origin (F, 2), jacobian (F, 2, 2), inverse jacobian (F, 2, 2), det (F,).
    """
    origin = vertices[:, 0, :]
    jac = np.stack([vertices[:, 1, :] - origin, vertices[:, 2, :] - origin], axis=-1)
    det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    inv = np.empty_like(jac)
    inv[:, 0, 0] = jac[:, 1, 1] / det
    inv[:, 1, 1] = jac[:, 0, 0] / det
    inv[:, 0, 1] = -jac[:, 0, 1] / det
    inv[:, 1, 0] = -jac[:, 1, 0] / det
    return origin, jac, inv, det
