"""
Dense real-matrix primitives shared by every solver in the package.

Matrices are plain float64 ``numpy.ndarray`` values. Scalars and 1-d inputs
are promoted with ``numpy.atleast_2d`` so the scalar examples of the online
update can be written as bare floats.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg

from .errors import DimensionError, InvalidInputError, NotPSDError

# Relative slack below which negative eigenvalues count as round-off.
PSD_SLACK = 1e-12


def as_matrix(M, name: str = "matrix") -> np.ndarray:
    """
    Convert ``M`` to a finite 2-d float64 array.

    Args:
        M: Array-like, scalar or nested sequence.
        name: Name used in error messages.

    Returns:
        A new 2-d float64 array.

    Raises:
        InvalidInputError: If any entry is NaN or infinite.
    """
    arr = np.atleast_2d(np.array(M, dtype=float))
    if arr.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return arr


def check_square(M: np.ndarray, name: str = "matrix") -> int:
    """Return the dimension of ``M`` or raise if it is not square."""
    if M.shape[0] != M.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {M.shape}")
    return M.shape[0]


def as_sym(M, name: str = "matrix") -> np.ndarray:
    """Canonical symmetric matrix (M + M^T) / 2."""
    arr = as_matrix(M, name)
    check_square(arr, name)
    return 0.5 * (arr + arr.T)


def op_norm(M) -> float:
    """Largest singular value of ``M``."""
    arr = as_matrix(M)
    if arr.size == 0:
        return 0.0
    return float(np.linalg.norm(arr, 2))


def spectral_radius(M) -> float:
    """Largest eigenvalue modulus of the square matrix ``M``."""
    arr = as_matrix(M)
    check_square(arr)
    return float(np.max(np.abs(np.linalg.eigvals(arr))))


def trace_dot(A, B) -> float:
    """
    Trace inner product Tr(A^T B).

    Args:
        A: First matrix.
        B: Second matrix, same shape as ``A``.

    Returns:
        The sum of the entrywise products.
    """
    a = as_matrix(A, "A")
    b = as_matrix(B, "B")
    if a.shape != b.shape:
        raise DimensionError(f"trace_dot shape mismatch: {a.shape} vs {b.shape}")
    return float(np.sum(a * b))


def eig_sym(P) -> np.ndarray:
    """Ascending eigenvalues of the symmetric part of ``P``."""
    return np.linalg.eigvalsh(as_sym(P))


def min_eig_sym(P) -> float:
    """Smallest eigenvalue of the symmetric matrix ``P``."""
    return float(eig_sym(P)[0])


def max_eig_sym(P) -> float:
    """Largest eigenvalue of the symmetric matrix ``P``."""
    return float(eig_sym(P)[-1])


def is_pd(P, floor: float = 0.0) -> bool:
    """True when every eigenvalue of ``P`` exceeds ``floor``."""
    return min_eig_sym(P) > floor


@dataclass(frozen=True)
class SymSqrt:
    """Symmetric square root of a PSD matrix and, when it exists, its inverse."""

    root: np.ndarray
    inv_root: Optional[np.ndarray]
    eigenvalues: np.ndarray


def sym_sqrt(P) -> SymSqrt:
    """
    Symmetric PSD square root via an eigendecomposition.

    Eigenvalues in [-1e-12 ||P||, 0) are clamped to zero; the inverse root is
    only provided when the smallest eigenvalue is strictly positive.

    Raises:
        NotPSDError: If ``P`` has an eigenvalue below the round-off slack.
    """
    sym = as_sym(P, "P")
    w, V = np.linalg.eigh(sym)
    scale = max(float(np.max(np.abs(w))) if w.size else 0.0, 0.0)
    if w.size and w[0] < -PSD_SLACK * scale:
        raise NotPSDError(f"matrix is not PSD: smallest eigenvalue {w[0]:.3e}")
    w = np.clip(w, 0.0, None)
    s = np.sqrt(w)
    root = (V * s) @ V.T
    root = 0.5 * (root + root.T)
    inv_root = None
    if w.size and w[0] > 0.0:
        inv_root = (V / s) @ V.T
        inv_root = 0.5 * (inv_root + inv_root.T)
    return SymSqrt(root=root, inv_root=inv_root, eigenvalues=w)


def solve_spd(G, rhs) -> np.ndarray:
    """Solve G X = rhs for symmetric positive-definite ``G`` without forming G^-1."""
    return linalg.solve(as_sym(G, "G"), as_matrix(rhs, "rhs"), assume_a="pos")
