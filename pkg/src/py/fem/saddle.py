from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, gmres, splu

from constants import LINEAR_RESIDUAL_TOL, LOG_PREFIX_SADDLE, SCHUR_RESTART
from errors import SolverBreakdownError
from fem.spaces import FunctionSpaceLayout
from logger import logger

DIRECT = "direct"
SCHUR = "schur"
BREAKDOWN_RESIDUAL = 1e-6


@dataclass
class MixedField:
    """Discrete velocity/pressure pair; velocity stored in constrained (free) coordinates."""

    layout: FunctionSpaceLayout
    velocity_free: np.ndarray
    pressure: np.ndarray
    residual: float = 0.0
    history: List[float] = field(default_factory=list)

    @property
    def velocity(self) -> np.ndarray:
        """Full nodal velocity (2N,), exactly satisfying the node constraints."""
        return self.layout.expand(self.velocity_free)

    @classmethod
    def zeros(cls, layout: FunctionSpaceLayout) -> "MixedField":
        return cls(layout, np.zeros(layout.n_free), np.zeros(layout.n_pressure))

    def scaled(self, factor: float) -> "MixedField":
        return MixedField(self.layout, factor * self.velocity_free, factor * self.pressure)


def _saddle_matrix(A: sp.spmatrix, B: sp.spmatrix, m: np.ndarray) -> sp.csc_matrix:
    m_col = sp.csr_matrix(m.reshape(-1, 1))
    return sp.bmat(
        [
            [A, B.T, None],
            [B, None, m_col],
            [None, m_col.T, sp.csr_matrix((1, 1))],
        ],
        format="csc",
    )


class SaddleSolver:
    """Factorized saddle system [[A, Bᵀ, 0], [B, 0, m], [0, mᵀ, 0]].

    The single multiplier row fixes the pressure gauge mᵀp = 0; the factorization is
    reused for every right-hand side.
    """

    def __init__(self, A: sp.spmatrix, B: sp.spmatrix, m: np.ndarray, method: str = DIRECT):
        self.A = sp.csc_matrix(A)
        self.B = sp.csr_matrix(B)
        self.m = np.asarray(m, dtype=float)
        self.method = method
        self.n_v = A.shape[0]
        self.n_p = B.shape[0]
        self.history: List[float] = []
        if method == DIRECT:
            self.system = _saddle_matrix(self.A, self.B, self.m)
            self._lu = self._factorize(self.system, "saddle system")
        elif method == SCHUR:
            self._lu = self._factorize(self.A, "velocity block")
            self._mass_diag = np.where(self.m > 0.0, self.m, 1.0)
        else:
            raise ValueError(f"unknown linear solver {method!r}")
        logger.info(
            f"{LOG_PREFIX_SADDLE}: {method} factorization, {self.n_v} velocity + {self.n_p} pressure unknowns"
        )

    @staticmethod
    def _factorize(matrix: sp.csc_matrix, what: str):
        try:
            lu = splu(matrix)
        except RuntimeError as e:
            logger.error(f"{LOG_PREFIX_SADDLE}: factorization of the {what} failed: {e}")
            raise SolverBreakdownError(
                f"singular {what}: {e}", {"size": matrix.shape[0]}
            ) from e
        pivots = np.abs(lu.U.diagonal())
        smallest = float(pivots.min()) if pivots.size else 0.0
        if pivots.size and smallest <= 1e-14 * float(pivots.max()):
            logger.error(f"{LOG_PREFIX_SADDLE}: {what} is numerically singular (pivot {smallest:.3g})")
            raise SolverBreakdownError(
                f"numerically singular {what}, smallest pivot {smallest:.3g}",
                {"smallest_pivot": smallest, "largest_pivot": float(pivots.max())},
            )
        return lu

    def solve(self, f: np.ndarray, g: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray, float]:
        """Solve A v + Bᵀ p = f, B v + m λ = g, mᵀ p = 0.

        The multiplier λ vanishes whenever Bᵀ1 = 0 and g has zero sum, so B v = g then.

        Returns:
            (v, p, relative algebraic residual).

        Raises:
            SolverBreakdownError: If the residual shows the solve failed.
        """
        g = np.zeros(self.n_p) if g is None else np.asarray(g, dtype=float)
        if self.method == DIRECT:
            rhs = np.concatenate([f, g, [0.0]])
            sol = self._lu.solve(rhs)
            v, p = sol[: self.n_v], sol[self.n_v : self.n_v + self.n_p]
            lam = sol[-1]
        else:
            v, p, lam = self._solve_schur(f, g)
        p = p - (self.m @ p) / self.m.sum()
        residual = self._residual(v, p, f, g)
        logger.debug(f"{LOG_PREFIX_SADDLE}: gauge multiplier {lam:.3g}")
        if residual > BREAKDOWN_RESIDUAL:
            logger.error(f"{LOG_PREFIX_SADDLE}: residual {residual:.3g} after solve")
            raise SolverBreakdownError(
                f"saddle solve residual {residual:.3g} exceeds {BREAKDOWN_RESIDUAL}",
                {"residual": residual, "history": list(self.history)},
            )
        if residual > LINEAR_RESIDUAL_TOL:
            logger.warning(f"{LOG_PREFIX_SADDLE}: residual {residual:.3g} above {LINEAR_RESIDUAL_TOL}")
        return v, p, residual

    def _residual(self, v, p, f, g) -> float:
        """Continuity is measured against the mean-free part of g, without the multiplier."""
        r1 = self.A @ v + self.B.T @ p - f
        r2 = self.B @ v - (g - self.m * (g.sum() / self.m.sum()))
        absolute = float(np.sqrt(r1 @ r1 + r2 @ r2))
        scale = float(np.linalg.norm(f) + np.linalg.norm(g))
        return absolute / scale if scale > 0.0 else absolute

    def _solve_schur(self, f: np.ndarray, g: np.ndarray):
        """GMRES on the pressure/multiplier Schur complement, A solved by the factorization."""
        lu, B, m, n_p = self._lu, self.B, self.m, self.n_p

        def apply(x: np.ndarray) -> np.ndarray:
            p, lam = x[:n_p], x[n_p]
            Sp = B @ lu.solve(B.T @ p)
            return np.concatenate([Sp - m * lam, [-(m @ p)]])

        def precondition(x: np.ndarray) -> np.ndarray:
            return np.concatenate([x[:n_p] / self._mass_diag, [x[n_p]]])

        operator = LinearOperator((n_p + 1, n_p + 1), matvec=apply)
        preconditioner = LinearOperator((n_p + 1, n_p + 1), matvec=precondition)
        rhs = np.concatenate([B @ lu.solve(f) - g, [0.0]])
        self.history = []
        if not np.any(rhs):
            return lu.solve(f), np.zeros(n_p), 0.0
        sol, info = gmres(
            operator,
            rhs,
            rtol=0.1 * LINEAR_RESIDUAL_TOL,
            atol=0.0,
            restart=SCHUR_RESTART,
            maxiter=20 * n_p,
            M=preconditioner,
            callback=self.history.append,
            callback_type="pr_norm",
        )
        if info != 0:
            logger.error(f"{LOG_PREFIX_SADDLE}: gmres stopped with info={info}")
            raise SolverBreakdownError(
                f"Schur complement GMRES did not converge (info={info})",
                {"history": list(self.history)},
            )
        p, lam = sol[:n_p], sol[n_p]
        v = lu.solve(f - B.T @ p)
        return v, p, lam


def solve_saddle(
    layout: FunctionSpaceLayout,
    A: sp.spmatrix,
    B: sp.spmatrix,
    f: np.ndarray,
    m: np.ndarray,
    method: str = DIRECT,
) -> MixedField:
    """Solve the reduced saddle problem once and wrap the result.

    Args:
        layout: Layout the reduced blocks live on.
        A: Reduced velocity block (n_free, n_free).
        B: Reduced divergence block (n_pressure, n_free).
        f: Reduced load (n_free,).
        m: Pressure mass vector (n_pressure,).
        method: "direct" or "schur".
    """
    solver = SaddleSolver(A, B, m, method)
    v, p, residual = solver.solve(f)
    return MixedField(layout, v, p, residual, list(solver.history))
