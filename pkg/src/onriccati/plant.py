"""
Linear-Gaussian plant x_{t+1} = A x_t + B u_t + w_t under linear feedback.

Stochastic rollouts exist for validation; every expected cost is computed by
exact covariance propagation, X_{t+1} = (A-BK) X_t (A-BK)^T + W.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import DimensionError, NotPSDError
from .lyapunov import solve_stein
from .matcore import (
    as_matrix,
    as_sym,
    check_square,
    min_eig_sym,
    op_norm,
    sym_sqrt,
    trace_dot,
)

logger = logging.getLogger(__name__)

TRANSIENT_TOL = 1e-15


@dataclass(frozen=True)
class SystemModel:
    """Dynamics (A, B) and noise covariance W, with W^1/2 cached for sampling."""

    A: np.ndarray
    B: np.ndarray
    W: Optional[np.ndarray] = None
    W_sqrt: Optional[np.ndarray] = None

    def __post_init__(self):
        A = as_matrix(self.A, "A")
        B = as_matrix(self.B, "B")
        n = check_square(A, "A")
        if B.shape[0] != n:
            raise DimensionError(f"B has {B.shape[0]} rows, A is {n}x{n}")
        W = np.eye(n) if self.W is None else as_sym(self.W, "W")
        if W.shape != (n, n):
            raise DimensionError(f"W has shape {W.shape}, expected {(n, n)}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "W_sqrt", sym_sqrt(W).root)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def omega(self) -> float:
        """Tr(W)."""
        return float(np.trace(self.W))

    @property
    def b_norm(self) -> float:
        return op_norm(self.B)

    def closed_loop(self, K) -> np.ndarray:
        return self.A - self.B @ as_matrix(K, "K")


@dataclass(frozen=True)
class CostPair:
    """One round's positive-definite cost matrices (Q_t, R_t)."""

    Q: np.ndarray
    R: np.ndarray


def _check_cov(X, n: int) -> np.ndarray:
    x = as_sym(X, "X")
    if x.shape != (n, n):
        raise DimensionError(f"covariance has shape {x.shape}, expected {(n, n)}")
    return x


def rollout_step(x, K, sys: SystemModel, rng: np.random.Generator) -> np.ndarray:
    """
    Advance the state one step under u = -K x.

    Args:
        x: State of shape (n,) or a batch of shape (N, n).
        K: Gain (m x n).
        sys: The plant.
        rng: Source of the standard-normal noise factor z.

    Returns:
        (A - BK) x + W^1/2 z, with the shape of ``x``.
    """
    state = np.asarray(x, dtype=float)
    if state.shape[-1] != sys.n or state.ndim > 2:
        raise DimensionError(f"state has shape {state.shape}, expected (..., {sys.n})")
    F = sys.closed_loop(K)
    z = rng.standard_normal(state.shape)
    return state @ F.T + z @ sys.W_sqrt.T


def rollout(
    x1, gains: Sequence, sys: SystemModel, rng: np.random.Generator
) -> np.ndarray:
    """States x_1..x_{T+1} under the gain sequence K_1..K_T."""
    states = [np.asarray(x1, dtype=float)]
    for K in gains:
        states.append(rollout_step(states[-1], K, sys, rng))
    return np.array(states)


def sample_initial_states(
    n_samples: int, sys: SystemModel, rng: np.random.Generator, mean=None, X1=None
) -> np.ndarray:
    """Draw x_1 ~ N(mean, X1) for a batch; the default is the deterministic x_1 = 0."""
    mean = np.zeros(sys.n) if mean is None else np.asarray(mean, dtype=float)
    if X1 is None:
        return np.tile(mean, (n_samples, 1))
    root = sym_sqrt(_check_cov(X1, sys.n)).root
    return mean + rng.standard_normal((n_samples, sys.n)) @ root.T


def propagate_cov(X, K, sys: SystemModel) -> np.ndarray:
    """(A - BK) X (A - BK)^T + W, symmetrized."""
    x = _check_cov(X, sys.n)
    if min_eig_sym(x) < -1e-12 * max(1.0, op_norm(x)):
        raise NotPSDError("covariance is not PSD")
    F = sys.closed_loop(K)
    nxt = F @ x @ F.T + sys.W
    return 0.5 * (nxt + nxt.T)


def stage_weight(Q, R, K) -> np.ndarray:
    """The matrix Q + K^T R K whose trace product with X is the stage cost."""
    k = as_matrix(K, "K")
    return as_sym(Q, "Q") + k.T @ as_sym(R, "R") @ k


def expected_stage_cost(X, Q, R, K) -> float:
    """E[x^T Q x + u^T R u] = (Q + K^T R K) . X for x ~ (0, X), u = -K x."""
    return trace_dot(stage_weight(Q, R, K), X)


def steady_covariance(K, sys: SystemModel) -> np.ndarray:
    """Fixed point of ``propagate_cov``; requires A - BK stable."""
    return solve_stein(sys.closed_loop(K), sys.W)


def covariance_trajectory(
    gains: Sequence, sys: SystemModel, X1=None
) -> List[np.ndarray]:
    """Covariances X_1..X_{T+1} under K_1..K_T (X_1 defaults to 0)."""
    X = np.zeros((sys.n, sys.n)) if X1 is None else _check_cov(X1, sys.n)
    covs = [X]
    for K in gains:
        X = propagate_cov(X, K, sys)
        covs.append(X)
    return covs


def expected_total_cost(
    gains: Sequence, costs: Sequence[CostPair], sys: SystemModel, X1=None
) -> Tuple[float, np.ndarray]:
    """
    Sum over t of J_t(K_t) for a time-varying gain sequence.

    Args:
        gains: K_1..K_T.
        costs: (Q_t, R_t) for t = 1..T.
        sys: The plant.
        X1: Initial covariance, default 0.

    Returns:
        Tuple of (total, per-round stage costs).
    """
    if len(gains) != len(costs):
        raise DimensionError(f"{len(gains)} gains for {len(costs)} cost rounds")
    X = np.zeros((sys.n, sys.n)) if X1 is None else _check_cov(X1, sys.n)
    stage = np.empty(len(costs))
    for t, (K, cost) in enumerate(zip(gains, costs)):
        stage[t] = expected_stage_cost(X, cost.Q, cost.R, K)
        X = propagate_cov(X, K, sys)
    return float(stage.sum()), stage


def finite_horizon_cost(
    gains: Sequence, costs: Sequence[CostPair], sys: SystemModel, X1=None
) -> float:
    """
    Expected J_T = E[x_T^T Q_T x_T + sum_{t<T} (x_t^T Q_t x_t + u_t^T R_t u_t)].

    ``gains`` holds K_1..K_{T-1}; the last stage carries no input cost.
    """
    if len(gains) != len(costs) - 1:
        raise DimensionError(f"{len(gains)} gains for a horizon of {len(costs)}")
    X = np.zeros((sys.n, sys.n)) if X1 is None else _check_cov(X1, sys.n)
    total = 0.0
    for K, cost in zip(gains, costs[:-1]):
        total += expected_stage_cost(X, cost.Q, cost.R, K)
        X = propagate_cov(X, K, sys)
    return total + trace_dot(costs[-1].Q, X)


def cost_totals(costs: Sequence[CostPair]) -> Tuple[np.ndarray, np.ndarray]:
    """Sums of Q_t and of R_t over the stream."""
    return sum(c.Q for c in costs), sum(c.R for c in costs)


def fixed_policy_total_cost(
    K,
    costs: Sequence[CostPair],
    sys: SystemModel,
    X1=None,
    totals: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> float:
    """
    Sum over t of J_t(K) for one fixed stable gain.

    X_t = X_hat + F^{t-1} (X_1 - X_hat) F^{t-1}^T, so the steady part is paid
    through the summed costs and only the decaying transient is propagated,
    until it falls below 1e-15 of ||X_hat||.
    """
    k = as_matrix(K, "K")
    F = sys.closed_loop(k)
    X_hat = steady_covariance(k, sys)
    SQ, SR = cost_totals(costs) if totals is None else totals
    total = trace_dot(SQ, X_hat) + trace_dot(SR, k @ X_hat @ k.T)
    X = np.zeros((sys.n, sys.n)) if X1 is None else _check_cov(X1, sys.n)
    D = X - X_hat
    floor = TRANSIENT_TOL * max(np.linalg.norm(X_hat), 1e-300)
    for cost in costs:
        if np.linalg.norm(D) <= floor:
            break
        total += trace_dot(stage_weight(cost.Q, cost.R, k), D)
        D = F @ D @ F.T
    return float(total)
