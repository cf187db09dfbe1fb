"""
Discrete algebraic Riccati equation machinery.

Feedback gains, the Riccati difference map (used forward as value iteration and
backward for finite horizons), Newton-Hewer policy iteration and the DARE
solver built on them.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import (
    DimensionError,
    InvalidCostError,
    NoConvergenceError,
    NotStabilizableError,
    UnstableClosedLoopError,
)
from .lyapunov import solve_stein_transposed
from .matcore import (
    as_matrix,
    as_sym,
    check_square,
    min_eig_sym,
    op_norm,
    solve_spd,
    spectral_radius,
)

logger = logging.getLogger(__name__)

DARE_RESIDUAL_TOL = 1e-11
HEWER_STEP_TOL = 1e-12
BOOTSTRAP_MARGIN = 1e-6
BOOTSTRAP_MAX_STEPS = 10_000
DEFAULT_MAX_ITER = 100


@dataclass(frozen=True)
class Policy:
    """Linear state feedback u = -K x with its cached closed-loop matrix A - BK."""

    K: np.ndarray
    closed_loop: np.ndarray

    @classmethod
    def from_gain(cls, K, A, B) -> "Policy":
        k = as_matrix(K, "K")
        a = as_matrix(A, "A")
        b = as_matrix(B, "B")
        if k.shape != (b.shape[1], a.shape[0]):
            expected = (b.shape[1], a.shape[0])
            raise DimensionError(f"gain has shape {k.shape}, expected {expected}")
        return cls(K=k, closed_loop=a - b @ k)

    @property
    def spectral_radius(self) -> float:
        return spectral_radius(self.closed_loop)

    def is_stable(self, margin: float = 0.0) -> bool:
        return self.spectral_radius < 1.0 - margin


@dataclass(frozen=True)
class DareProblem:
    """The data (A, B, Q, R) of an infinite-horizon LQ problem."""

    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        A = as_matrix(self.A, "A")
        B = as_matrix(self.B, "B")
        n = check_square(A, "A")
        if B.shape[0] != n:
            raise DimensionError(f"B has {B.shape[0]} rows, A is {n}x{n}")
        Q = as_sym(self.Q, "Q")
        R = as_sym(self.R, "R")
        if Q.shape[0] != n or R.shape[0] != B.shape[1]:
            raise DimensionError(
                f"cost shapes {Q.shape}, {R.shape} do not match n={n}, m={B.shape[1]}"
            )
        if min_eig_sym(Q) <= 0.0:
            raise InvalidCostError("Q must be positive definite")
        if min_eig_sym(R) <= 0.0:
            raise InvalidCostError("R must be positive definite")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    def with_costs(self, Q, R) -> "DareProblem":
        return DareProblem(self.A, self.B, Q, R)


@dataclass(frozen=True)
class DareSolution:
    """Stabilizing DARE solution P*, its gain K* and solver bookkeeping."""

    P_star: np.ndarray
    K_star: np.ndarray
    iterations: int
    residual: float
    bootstrap_steps: int = 0
    history: Tuple[np.ndarray, ...] = field(default=(), repr=False)


PolicyLike = Union[Policy, np.ndarray, Sequence]


def gain(P, A, B, R) -> np.ndarray:
    """
    Feedback gain K = (B^T P B + R)^-1 B^T P A.

    Args:
        P: Symmetric PSD value matrix (n x n).
        A: State matrix (n x n).
        B: Input matrix (n x m).
        R: Positive-definite input cost (m x m).

    Returns:
        The m x n gain.

    Raises:
        InvalidCostError: If R is not positive definite.
    """
    p = as_sym(P, "P")
    a = as_matrix(A, "A")
    b = as_matrix(B, "B")
    r = as_sym(R, "R")
    if min_eig_sym(r) <= 0.0:
        raise InvalidCostError("R must be positive definite")
    bp = b.T @ p
    return solve_spd(bp @ b + r, bp @ a)


def riccati_step(P, prob: DareProblem) -> np.ndarray:
    """One application of P -> A^T P A - A^T P B (B^T P B + R)^-1 B^T P A + Q."""
    p = as_sym(P, "P")
    A, B = prob.A, prob.B
    bpa = B.T @ p @ A
    K = solve_spd(B.T @ p @ B + prob.R, bpa)
    nxt = A.T @ p @ A - bpa.T @ K + prob.Q
    return 0.5 * (nxt + nxt.T)


def _as_policy(K: PolicyLike, prob: DareProblem) -> Policy:
    if isinstance(K, Policy):
        return K
    return Policy.from_gain(K, prob.A, prob.B)


def policy_value(K: PolicyLike, prob: DareProblem) -> np.ndarray:
    """Value matrix of a stable gain: P = (A-BK)^T P (A-BK) + K^T R K + Q."""
    policy = _as_policy(K, prob)
    forcing = prob.Q + policy.K.T @ prob.R @ policy.K
    return solve_stein_transposed(policy.closed_loop, forcing)


def hewer_step(K: PolicyLike, prob: DareProblem) -> Tuple[np.ndarray, Policy]:
    """
    One Newton-Hewer step: evaluate the policy, then improve it.

    Args:
        K: Stable gain (or ``Policy``).
        prob: The LQ problem.

    Returns:
        Tuple of (value matrix of K, improved policy).

    Raises:
        UnstableClosedLoopError: If K does not stabilize (A, B).
    """
    P = policy_value(K, prob)
    K_next = gain(P, prob.A, prob.B, prob.R)
    return P, Policy.from_gain(K_next, prob.A, prob.B)


def value_iteration(prob: DareProblem, iterations: int = 500, P0=None) -> np.ndarray:
    """Run the Riccati difference recursion forward from P0 (default Q)."""
    P = prob.Q.copy() if P0 is None else as_sym(P0, "P0")
    for _ in range(iterations):
        P = riccati_step(P, prob)
    return P


def find_stabilizing_gain(
    prob: DareProblem,
    max_steps: int = BOOTSTRAP_MAX_STEPS,
    margin: float = BOOTSTRAP_MARGIN,
) -> Tuple[Policy, int]:
    """
    Bootstrap a stabilizing gain by value iteration from P = Q.

    Returns:
        Tuple of (first policy with spectral radius <= 1 - margin, steps taken).

    Raises:
        NotStabilizableError: If no such gain appears within ``max_steps``
            or the iterates overflow.
    """
    P = prob.Q.copy()
    for step in range(max_steps + 1):
        policy = Policy.from_gain(gain(P, prob.A, prob.B, prob.R), prob.A, prob.B)
        if policy.spectral_radius <= 1.0 - margin:
            logger.debug("stabilizing gain found after %d value-iteration steps", step)
            return policy, step
        P = riccati_step(P, prob)
        if not np.all(np.isfinite(P)) or np.linalg.norm(P, 2) > 1e250:
            break
    raise NotStabilizableError(
        f"no stabilizing gain found by value iteration within {max_steps} steps"
    )


def solve_dare(
    prob: DareProblem,
    tol: float = DARE_RESIDUAL_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    initial_gain: Optional[PolicyLike] = None,
) -> DareSolution:
    """
    Solve the DARE by Newton-Hewer iteration.

    A stabilizing starting gain is taken from ``initial_gain`` when it is
    stable, otherwise bootstrapped by value iteration. Iteration stops once
    ||P_k - P_{k-1}|| <= 1e-12 max(1, ||P_k||), or when the step stops
    shrinking at round-off level.

    Args:
        prob: The LQ problem.
        tol: Relative DARE residual tolerance, scaled by max(1, ||P*||).
        max_iter: Maximum number of Hewer steps.
        initial_gain: Optional warm start.

    Returns:
        A ``DareSolution`` whose ``history`` holds every Hewer value matrix.

    Raises:
        NotStabilizableError: If no stabilizing gain can be found.
        NoConvergenceError: If the iteration budget or tolerance is not met.
    """
    policy = None
    bootstrap_steps = 0
    if initial_gain is not None:
        candidate = _as_policy(initial_gain, prob)
        if candidate.is_stable(BOOTSTRAP_MARGIN):
            policy = candidate
    if policy is None:
        policy, bootstrap_steps = find_stabilizing_gain(prob)

    history: List[np.ndarray] = []
    prev_step = np.inf
    converged = False
    P = None
    for k in range(1, max_iter + 1):
        P, policy = hewer_step(policy, prob)
        history.append(P)
        if len(history) < 2:
            continue
        step = float(np.linalg.norm(P - history[-2], 2))
        scale = max(1.0, op_norm(P))
        if step <= HEWER_STEP_TOL * scale:
            converged = True
            break
        if step >= prev_step and step <= 1e-8 * scale:
            # round-off floor: further steps only shuffle the last digits
            converged = True
            break
        prev_step = step
    if not converged:
        raise NoConvergenceError(
            f"Newton-Hewer did not converge in {max_iter} iterations"
        )

    residual = float(np.linalg.norm(P - riccati_step(P, prob), 2))
    if residual > tol * max(1.0, op_norm(P)):
        raise NoConvergenceError(
            f"DARE residual {residual:.3e} above tolerance "
            f"after {len(history)} iterations"
        )
    logger.debug(
        "DARE solved in %d Hewer steps (residual %.3e)", len(history), residual
    )
    return DareSolution(
        P_star=P,
        K_star=policy.K,
        iterations=len(history),
        residual=residual,
        bootstrap_steps=bootstrap_steps,
        history=tuple(history),
    )


def is_stabilizable(A, B) -> bool:
    """Behavioral stabilizability test: does solve_dare(A, B, I, I) succeed?"""
    a = as_matrix(A, "A")
    b = as_matrix(B, "B")
    prob = DareProblem(a, b, np.eye(a.shape[0]), np.eye(b.shape[1]))
    try:
        solve_dare(prob)
    except (NotStabilizableError, NoConvergenceError, UnstableClosedLoopError):
        return False
    return True


def backward_riccati(
    A, B, Qs: Sequence, Rs: Sequence
) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    """
    Finite-horizon gains from the dynamic Riccati recursion with P_T = Q_T.

    Args:
        A: State matrix.
        B: Input matrix.
        Qs: State costs Q_1..Q_T.
        Rs: Input costs R_1..R_T (R_T is unused: the last stage has no input).

    Returns:
        Tuple of (gains K_1..K_{T-1}, value matrices P_1..P_T).
    """
    if len(Qs) != len(Rs) or not Qs:
        raise DimensionError("Qs and Rs must be non-empty and of equal length")
    a = as_matrix(A, "A")
    b = as_matrix(B, "B")
    T = len(Qs)
    values: List[np.ndarray] = [None] * T
    gains: List[np.ndarray] = [None] * (T - 1)
    values[T - 1] = as_sym(Qs[T - 1], "Q_T")
    for t in range(T - 2, -1, -1):
        prob = DareProblem(a, b, Qs[t], Rs[t])
        gains[t] = gain(values[t + 1], a, b, prob.R)
        values[t] = riccati_step(values[t + 1], prob)
    return gains, values
