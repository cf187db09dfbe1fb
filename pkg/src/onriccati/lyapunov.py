"""
Discrete Lyapunov (Stein) equation solvers.

Two orientations are provided:

    solve_stein_transposed:  P = F^T P F + V   (value matrices)
    solve_stein:             X = F X F^T + V   (steady-state covariances)

and two backends: a direct solve of the n^2 x n^2 Kronecker system, used up to
``DIRECT_MAX_DIM``, and the doubling iteration for larger problems.
"""

import logging

import numpy as np
from scipy import linalg

from .errors import DimensionError, NoConvergenceError, UnstableClosedLoopError
from .matcore import as_matrix, as_sym, check_square, spectral_radius

logger = logging.getLogger(__name__)

STABILITY_MARGIN = 1e-9
DIRECT_MAX_DIM = 20
DOUBLING_TOL = 1e-14
DOUBLING_MAX_ITER = 200

BACKENDS = ("auto", "direct", "doubling")


def _check_problem(F, V):
    f = as_matrix(F, "F")
    n = check_square(f, "F")
    v = as_sym(V, "V")
    if v.shape[0] != n:
        raise DimensionError(f"F is {f.shape} but V is {v.shape}")
    radius = spectral_radius(f)
    if radius >= 1.0 - STABILITY_MARGIN:
        raise UnstableClosedLoopError(
            f"closed loop is not stable: spectral radius {radius:.12g}", radius
        )
    return f, v


def _direct(Ft: np.ndarray, V: np.ndarray) -> np.ndarray:
    # Row-major vec: vec(Ft^T P Ft) = kron(Ft^T, Ft^T) vec(P).
    n = V.shape[0]
    lhs = np.eye(n * n) - np.kron(Ft.T, Ft.T)
    p = linalg.solve(lhs, V.reshape(-1))
    return p.reshape(n, n)


def _doubling(Ft: np.ndarray, V: np.ndarray) -> np.ndarray:
    P = V.copy()
    F = Ft.copy()
    for k in range(DOUBLING_MAX_ITER):
        update = F.T @ P @ F
        P = P + update
        F = F @ F
        scale = max(np.linalg.norm(P, 2), 1e-300)
        if np.linalg.norm(update, 2) <= DOUBLING_TOL * scale:
            logger.debug("doubling converged after %d squarings", k + 1)
            return P
    raise NoConvergenceError(
        f"doubling iteration did not converge in {DOUBLING_MAX_ITER} squarings"
    )


def _solve(Ft: np.ndarray, V: np.ndarray, backend: str) -> np.ndarray:
    if backend not in BACKENDS:
        raise ValueError(
            f"unknown Stein backend {backend!r}; expected one of {BACKENDS}"
        )
    if backend == "auto":
        backend = "direct" if V.shape[0] <= DIRECT_MAX_DIM else "doubling"
    P = _direct(Ft, V) if backend == "direct" else _doubling(Ft, V)
    return 0.5 * (P + P.T)


def solve_stein_transposed(F, V, backend: str = "auto") -> np.ndarray:
    """
    Solve P = F^T P F + V for symmetric P.

    Args:
        F: Square closed-loop matrix with spectral radius below 1 - 1e-9.
        V: Symmetric PSD forcing term of the same size.
        backend: ``"direct"``, ``"doubling"`` or ``"auto"``.

    Returns:
        The unique symmetric solution, equal to sum_i (F^T)^i V F^i.

    Raises:
        UnstableClosedLoopError: If F is not stable with the required margin.
    """
    f, v = _check_problem(F, V)
    return _solve(f, v, backend)


def solve_stein(F, V, backend: str = "auto") -> np.ndarray:
    """
    Solve X = F X F^T + V for symmetric X.

    This is the covariance orientation; it is ``solve_stein_transposed`` applied
    to F^T.
    """
    f, v = _check_problem(F, V)
    return _solve(f.T, v, backend)


def stein_residual(F, V, P) -> float:
    """Spectral norm of P - F^T P F - V."""
    f = as_matrix(F, "F")
    p = as_matrix(P, "P")
    return float(np.linalg.norm(p - f.T @ p @ f - as_matrix(V, "V"), 2))
