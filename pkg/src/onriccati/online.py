"""
Online Riccati update for linear-quadratic control with changing costs.

Each round the learner acts with its current gain K_t, then receives
(Q_t, R_t), folds them into running averages, evaluates K_t against the
averaged costs through one Stein solve, and emits
K_{t+1} = (B^T P_t B + Rbar_t)^-1 B^T P_t A. At round t* a one-time inner
Newton-Hewer loop on the frozen averages contracts the value matrix so that
later increments decay like 1/t.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    DegenerateBoundError,
    InvalidCostError,
    InvalidInputError,
    InvariantViolationError,
    ResetDivergenceError,
    UnstableClosedLoopError,
)
from .lyapunov import solve_stein_transposed
from .matcore import (
    as_matrix,
    as_sym,
    max_eig_sym,
    min_eig_sym,
    op_norm,
    spectral_radius,
)
from .plant import CostPair, SystemModel
from .riccati import DareProblem, find_stabilizing_gain, gain, policy_value

logger = logging.getLogger(__name__)

ASSUMPTION_SLACK = 1e-9
RESET_MAX_ITER = 10 ** 6
RESET_THRESHOLD_FLOOR = 1e-13


@dataclass(frozen=True)
class OnlineParams:
    """
    Parameters of the online update.

    ``mu`` and ``sigma`` bound the costs (mu I <= Q_t, R_t; traces <= sigma).
    ``nu_estimate`` is the assumed ceiling on P_t; ``None`` takes lambda_max(P_1).
    ``t_star_override`` pins the reset round instead of the closed form.
    """

    mu: float
    sigma: float
    horizon: int
    nu_estimate: Optional[float] = None
    t_star_override: Optional[int] = None
    reset_max_iter: int = RESET_MAX_ITER
    reset_floor: float = RESET_THRESHOLD_FLOOR

    def __post_init__(self):
        if not (self.sigma > self.mu > 0.0):
            raise InvalidInputError(
                f"need sigma > mu > 0, got mu={self.mu}, sigma={self.sigma}"
            )
        if self.nu_estimate is not None and not self.nu_estimate > self.mu:
            raise InvalidInputError(
                f"nu_estimate ({self.nu_estimate}) must exceed mu ({self.mu})"
            )
        if self.horizon < 1:
            raise InvalidInputError(f"horizon must be at least 1, got {self.horizon}")
        if self.t_star_override is not None and self.t_star_override < 1:
            raise InvalidInputError("t_star_override must be at least 1")

    def kappa(self, nu: Optional[float] = None) -> float:
        nu = self.nu_estimate if nu is None else nu
        return math.sqrt(nu / self.mu)

    def gamma(self, nu: Optional[float] = None) -> float:
        return 1.0 / (2.0 * self.kappa(nu) ** 2)

    @classmethod
    def from_costs(
        cls, costs: Sequence[CostPair], horizon: Optional[int] = None, **kwargs
    ) -> "OnlineParams":
        """Read the tightest admissible mu and sigma off a cost stream."""
        mu = min(min(min_eig_sym(c.Q), min_eig_sym(c.R)) for c in costs)
        sigma = max(max(float(np.trace(c.Q)), float(np.trace(c.R))) for c in costs)
        if sigma <= mu:
            # scalar unit costs give sigma == mu; widen to keep sigma > mu
            sigma = mu * (1.0 + 1e-9)
        return cls(mu=mu, sigma=sigma, horizon=horizon or len(costs), **kwargs)


@dataclass
class RoundRecord:
    """Diagnostics for one round t."""

    t: int
    dP_norm: float
    dK_norm: float
    dK_next_norm: float
    rho_closed_loop: float
    pmax_eig: float
    k_norm: float
    closed_loop_norm: float
    dQbar_norm: float
    dRbar_norm: float
    nu_violation: bool = False
    reset_iterations: int = 0


@dataclass
class OnlineState:
    """
    Full state of the online update before round ``t``.

    ``K`` is the gain that will act at round ``t``; ``P`` is P_{t-1}.
    """

    params: OnlineParams
    t: int
    K: np.ndarray
    Qbar: Optional[np.ndarray] = None
    Rbar: Optional[np.ndarray] = None
    P: Optional[np.ndarray] = None
    nu: Optional[float] = None
    t_star: Optional[int] = None
    reset_done: bool = False
    qbar_range: List[float] = field(default_factory=lambda: [math.inf, -math.inf])
    rbar_range: List[float] = field(default_factory=lambda: [math.inf, -math.inf])
    diagnostics: List[RoundRecord] = field(default_factory=list)
    gains: List[np.ndarray] = field(default_factory=list)
    values: List[np.ndarray] = field(default_factory=list)
    keep_history: bool = True

    @property
    def kappa(self) -> float:
        return self.params.kappa(self.nu)

    @property
    def gamma(self) -> float:
        return self.params.gamma(self.nu)


def compute_t_star(
    kappa: float, gamma: float, mu: float, sigma: float, b_norm: float
) -> int:
    """
    Reset round ceil((4 k^3 |B| / (g mu)) (2 s k + 2 k^3 |B| s (1 + k^2) / g) + 1).
    """
    if b_norm < 0.0:
        raise InvalidInputError("b_norm must be nonnegative")
    lead = 4.0 * kappa ** 3 * b_norm / (gamma * mu)
    inner = 2.0 * sigma * kappa + (
        2.0 * kappa ** 3 * b_norm * sigma * (1.0 + kappa ** 2) / gamma
    )
    return max(1, int(math.ceil(lead * inner + 1.0)))


def t_star(params: OnlineParams, b_norm: float, nu: Optional[float] = None) -> int:
    """Reset round for ``params``; ``t_star_override`` wins when set."""
    if params.t_star_override is not None:
        return params.t_star_override
    kappa, gamma = params.kappa(nu), params.gamma(nu)
    return compute_t_star(kappa, gamma, params.mu, params.sigma, b_norm)


def compute_reset_threshold(
    kappa: float, gamma: float, sigma: float, b_norm: float, t_star_value: int
) -> float:
    """(2 sigma / |B| + 4 kappa^2 sigma (1 + kappa^2) / gamma) / t*."""
    if b_norm <= 0.0:
        raise DegenerateBoundError("reset threshold is undefined for B = 0")
    budget = 2.0 * sigma / b_norm + (
        4.0 * kappa ** 2 * sigma * (1.0 + kappa ** 2) / gamma
    )
    return budget / t_star_value


def reset_threshold(
    params: OnlineParams, b_norm: float, t_star_value: int, nu: Optional[float] = None
) -> float:
    """Stopping threshold of the reset loop for ``params``."""
    kappa, gamma = params.kappa(nu), params.gamma(nu)
    return compute_reset_threshold(kappa, gamma, params.sigma, b_norm, t_star_value)


def increment_budget(
    params: OnlineParams, b_norm: float, nu: Optional[float] = None
) -> float:
    """The constant m in ||P_{t+1} - P_t|| <= m / t after the reset."""
    if b_norm <= 0.0:
        raise DegenerateBoundError("increment budget is undefined for B = 0")
    kappa, gamma = params.kappa(nu), params.gamma(nu)
    sigma = params.sigma
    return 2.0 * sigma / b_norm + 4.0 * kappa ** 2 * sigma * (1.0 + kappa ** 2) / gamma


def initial_state(
    sys: SystemModel, params: OnlineParams, K1=None, keep_history: bool = True
) -> OnlineState:
    """
    Start the update from a stable gain K_1.

    Without ``K1`` the gain is bootstrapped by value iteration on identity costs.
    """
    if K1 is None:
        prob = DareProblem(sys.A, sys.B, np.eye(sys.n), np.eye(sys.m))
        K1 = find_stabilizing_gain(prob)[0].K
    K = as_matrix(K1, "K1")
    radius = spectral_radius(sys.closed_loop(K))
    if radius >= 1.0:
        raise UnstableClosedLoopError(
            f"initial gain is not stable: spectral radius {radius:.6g}", radius
        )
    state = OnlineState(
        params=params, t=1, K=K, nu=params.nu_estimate, keep_history=keep_history
    )
    if params.nu_estimate is not None:
        state.t_star = t_star(params, sys.b_norm, params.nu_estimate)
    elif params.t_star_override is not None:
        state.t_star = params.t_star_override
    state.gains.append(K)
    return state


def _check_cost(M, name: str, params: OnlineParams) -> np.ndarray:
    mat = as_sym(M, name)
    scale = max(1.0, op_norm(mat))
    if min_eig_sym(mat) < params.mu - ASSUMPTION_SLACK * scale:
        raise InvalidCostError(f"{name} has lambda_min below mu = {params.mu:.6g}")
    if float(np.trace(mat)) > params.sigma + ASSUMPTION_SLACK * scale:
        raise InvalidCostError(f"{name} has trace above sigma = {params.sigma:.6g}")
    return mat


def _update_nu(state: OnlineState, pmax: float, b_norm: float) -> bool:
    params = state.params
    if state.nu is None:
        state.nu = max(pmax, params.mu)
        if state.t_star is None:
            state.t_star = t_star(params, b_norm, state.nu)
        return False
    if pmax <= state.nu:
        return False
    logger.warning(
        "round %d: lambda_max(P) = %.6g exceeds nu estimate %.6g; enlarging",
        state.t,
        pmax,
        state.nu,
    )
    state.nu = pmax
    if not state.reset_done and params.t_star_override is None:
        state.t_star = t_star(params, b_norm, state.nu)
    return True


def _reset(
    state: OnlineState, P: np.ndarray, sys: SystemModel
) -> Tuple[np.ndarray, int]:
    params = state.params
    threshold = max(
        reset_threshold(params, sys.b_norm, state.t_star, state.nu), params.reset_floor
    )
    prob = DareProblem(sys.A, sys.B, state.Qbar, state.Rbar)
    P_prev = P
    for ell in range(1, params.reset_max_iter + 1):
        K_hat = gain(P_prev, sys.A, sys.B, state.Rbar)
        P_hat = policy_value(K_hat, prob)
        if np.linalg.norm(P_hat - P_prev, 2) <= threshold:
            logger.debug(
                "reset at t=%d settled after %d steps (threshold %.3e)",
                state.t,
                ell,
                threshold,
            )
            return P_hat, ell
        P_prev = P_hat
    raise ResetDivergenceError(
        f"reset loop did not settle within {params.reset_max_iter} steps"
    )


def observe(state: OnlineState, Q_t, R_t, sys: SystemModel) -> OnlineState:
    """
    Process round ``state.t``: receive (Q_t, R_t) and emit K_{t+1}.

    Args:
        state: Current state; mutated in place.
        Q_t: State cost revealed after acting.
        R_t: Input cost revealed after acting.
        sys: The plant.

    Returns:
        The same ``state``, advanced by one round.

    Raises:
        InvalidCostError: If the costs break the (mu, sigma) bounds.
        InvariantViolationError: If a closed loop turns unstable.
        ResetDivergenceError: If the reset loop does not settle.
    """
    params = state.params
    t = state.t
    Q = _check_cost(Q_t, "Q_t", params)
    R = _check_cost(R_t, "R_t", params)

    if t == 1:
        Qbar, Rbar = Q, R
    else:
        Qbar = ((t - 1) / t) * state.Qbar + Q / t
        Rbar = ((t - 1) / t) * state.Rbar + R / t
        Qbar = 0.5 * (Qbar + Qbar.T)
        Rbar = 0.5 * (Rbar + Rbar.T)
    dQbar = 0.0 if state.Qbar is None else float(np.linalg.norm(Qbar - state.Qbar, 2))
    dRbar = 0.0 if state.Rbar is None else float(np.linalg.norm(Rbar - state.Rbar, 2))
    state.Qbar, state.Rbar = Qbar, Rbar
    for rng, mat in ((state.qbar_range, Qbar), (state.rbar_range, Rbar)):
        rng[0] = min(rng[0], min_eig_sym(mat))
        rng[1] = max(rng[1], max_eig_sym(mat))

    K = state.K
    F = sys.closed_loop(K)
    try:
        P = solve_stein_transposed(F, Qbar + K.T @ Rbar @ K)
    except UnstableClosedLoopError as exc:
        raise InvariantViolationError(
            f"round {t}: acting gain is not stable ({exc})"
        ) from exc

    violated = _update_nu(state, max_eig_sym(P), sys.b_norm)

    reset_iterations = 0
    if not state.reset_done and state.t_star is not None and t >= state.t_star:
        if sys.b_norm > 0.0:
            P, reset_iterations = _reset(state, P, sys)
        else:
            logger.debug("B = 0: reset skipped at t=%d", t)
        state.reset_done = True

    K_next = gain(P, sys.A, sys.B, Rbar)
    rho_next = spectral_radius(sys.closed_loop(K_next))
    if rho_next >= 1.0:
        raise InvariantViolationError(
            f"round {t}: emitted gain is not stable (spectral radius {rho_next:.12g})"
        )

    prev_K = state.gains[-2] if len(state.gains) >= 2 else None
    state.diagnostics.append(
        RoundRecord(
            t=t,
            dP_norm=0.0 if state.P is None else float(np.linalg.norm(P - state.P, 2)),
            dK_norm=0.0 if prev_K is None else float(np.linalg.norm(K - prev_K, 2)),
            dK_next_norm=float(np.linalg.norm(K_next - K, 2)),
            rho_closed_loop=spectral_radius(F),
            pmax_eig=max_eig_sym(P),
            k_norm=op_norm(K),
            closed_loop_norm=op_norm(F),
            dQbar_norm=dQbar,
            dRbar_norm=dRbar,
            nu_violation=violated,
            reset_iterations=reset_iterations,
        )
    )
    if state.keep_history:
        state.values.append(P)
        state.gains.append(K_next)
    else:
        state.gains[:] = [K, K_next]
    state.P = P
    state.K = K_next
    state.t = t + 1
    return state


def run_online(
    sys: SystemModel,
    costs: Sequence[CostPair],
    params: Optional[OnlineParams] = None,
    K1=None,
    keep_history: bool = True,
) -> OnlineState:
    """Run the update over a cost stream; ``params`` default to its bounds."""
    if params is None:
        params = OnlineParams.from_costs(costs)
    state = initial_state(sys, params, K1, keep_history)
    for cost in costs:
        observe(state, cost.Q, cost.R, sys)
    logger.info(
        "online run finished: T=%d, max rho=%.6f, max lambda(P)=%.6g, reset at %s",
        len(costs),
        max((r.rho_closed_loop for r in state.diagnostics), default=0.0),
        max((r.pmax_eig for r in state.diagnostics), default=0.0),
        state.t_star,
    )
    return state


@dataclass
class IncrementConstants:
    """Measured constants of the 1/t decay of value and gain increments."""

    m_hat: float
    kappa_eff: float
    gain_bounds: np.ndarray  # bound on ||K_{t+1} - K_t|| for rounds t = 2..T
    gain_increments: np.ndarray  # measured ||K_{t+1} - K_t|| for the same rounds
    scaled_increments: np.ndarray  # (t - 1) ||P_t - P_{t-1}|| for rounds t = 2..T


def increment_constants(state: OnlineState, sys: SystemModel) -> IncrementConstants:
    """
    Measured m_hat = max_t t ||P_{t+1} - P_t|| and the gain-increment bound.

    The bound is (kappa_eff / mu) (||B|| m_hat + 2 sigma) / (t - 1) with
    kappa_eff the largest of kappa, ||K_t|| and ||A - B K_t|| over the run.
    """
    records = state.diagnostics[1:]
    params = state.params
    scaled = np.array([(r.t - 1) * r.dP_norm for r in records])
    m_hat = float(scaled.max()) if scaled.size else 0.0
    kappa_eff = max(
        [state.kappa if state.nu is not None else 0.0]
        + [r.k_norm for r in state.diagnostics]
        + [r.closed_loop_norm for r in state.diagnostics]
    )
    t = np.array([r.t for r in records], dtype=float)
    lead = (kappa_eff / params.mu) * (sys.b_norm * m_hat + 2.0 * params.sigma)
    bounds = lead / np.maximum(t - 1.0, 1.0)
    measured = np.array([r.dK_next_norm for r in records])
    return IncrementConstants(m_hat, kappa_eff, bounds, measured, scaled)


def cost_average_increments(state: OnlineState) -> np.ndarray:
    """Rows (t, ||Qbar_t - Qbar_{t-1}||, ||Rbar_t - Rbar_{t-1}||) for t >= 2."""
    return np.array([(r.t, r.dQbar_norm, r.dRbar_norm) for r in state.diagnostics[1:]])


def scalar_bound(
    A: float, B: float, Qmin: float, Qmax: float, Rmin: float, Rmax: float
) -> float:
    """
    Ceiling nu on the scalar value sequence P_t.

    Args:
        A: Scalar state coefficient.
        B: Scalar input coefficient, nonzero.
        Qmin, Qmax: Extremes of the averaged state costs.
        Rmin, Rmax: Extremes of the averaged input costs.

    Returns:
        max{(A^2/B^2) Rmax + Qmax, [Qmax (B^2 p + Rmin)^2 + B^2 p^2 A^2 Rmax]
        / [(B^2 p + Rmin)^2 - A^2 Rmin^2]} where p is the minimum admissible P.

    Raises:
        DegenerateBoundError: If B = 0 or the second denominator is not positive.
    """
    if B == 0.0:
        raise DegenerateBoundError("scalar bound needs B != 0")
    if not (0.0 < Qmin <= Qmax and 0.0 < Rmin <= Rmax):
        raise InvalidInputError("need 0 < Qmin <= Qmax and 0 < Rmin <= Rmax")
    a2, b2 = A * A, B * B
    root = math.sqrt((Rmin - a2 * Rmin - Qmin * b2) ** 2 + 4.0 * b2 * Qmin * Rmin)
    p_min = (a2 * Rmin - Rmin + Qmin * b2 + root) / (2.0 * b2)
    first = (a2 / b2) * Rmax + Qmax
    lead = (b2 * p_min + Rmin) ** 2
    denominator = lead - a2 * Rmin ** 2
    if denominator <= 0.0:
        raise DegenerateBoundError(f"scalar bound denominator is {denominator:.3e}")
    second = (Qmax * lead + b2 * p_min ** 2 * a2 * Rmax) / denominator
    return max(first, second)


def scalar_bound_for_run(state: OnlineState, sys: SystemModel) -> float:
    """``scalar_bound`` evaluated at the extremes of the run's averaged costs."""
    if sys.n != 1 or sys.m != 1:
        raise InvalidInputError("scalar bound applies to n = m = 1 only")
    return scalar_bound(
        float(sys.A[0, 0]),
        float(sys.B[0, 0]),
        state.qbar_range[0],
        state.qbar_range[1],
        state.rbar_range[0],
        state.rbar_range[1],
    )
