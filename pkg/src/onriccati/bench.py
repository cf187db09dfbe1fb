"""
Regret experiments for the online Riccati update.

Runs the online update next to two per-round DARE baselines on a shared system
and cost stream, prices every gain sequence exactly by covariance propagation,
and compares against a fixed hindsight comparator. Also hosts the
boundedness probe, the four-term regret decomposition and a sampler of the
one-step value map around P*.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy import optimize

from .config import ComparatorSection, CostsSection, ExperimentConfig
from .errors import (
    ComparatorError,
    ConfigError,
    DegenerateBoundError,
    GenerationError,
    InvalidInputError,
    InvariantViolationError,
    NotStabilizableError,
    UnstableClosedLoopError,
)
from .matcore import max_eig_sym, op_norm, spectral_radius, trace_dot
from .online import (
    OnlineParams,
    OnlineState,
    increment_constants,
    run_online,
    scalar_bound_for_run,
)
from .plant import (
    CostPair,
    SystemModel,
    covariance_trajectory,
    cost_totals,
    expected_total_cost,
    fixed_policy_total_cost,
    stage_weight,
    steady_covariance,
)
from .riccati import (
    DareProblem,
    find_stabilizing_gain,
    gain,
    is_stabilizable,
    policy_value,
    solve_dare,
)
from .stability import cert_for_policy
from .utils import spawn_rngs

logger = logging.getLogger(__name__)

MAX_REJECTIONS = 100
UNBOUNDED_LEVEL = 1e12

__all__ = [
    "ExperimentConfig",
    "RegretLedger",
    "Decomposition",
    "ProbeTrial",
    "WalkState",
    "gen_costs",
    "cost_stream",
    "gen_system",
    "system_from_config",
    "comparator_fixed",
    "run_experiment",
    "run_trials",
    "probe_boundedness",
    "regret_decomposition",
    "decomposition_bounds",
    "ValueMapSample",
    "value_map_samples",
]


@dataclass
class WalkState:
    """Current level r_t of the bounded random walk."""

    r: Optional[float] = None


def _diag_input_cost(m: int, r: float) -> np.ndarray:
    # first ceil(m/2) entries stay at 1, the rest follow r_t
    diag = np.ones(m)
    diag[int(math.ceil(m / 2)):] = r
    return np.diag(diag)


def gen_costs(
    kind: str,
    dims,
    rng: np.random.Generator,
    t: int = 1,
    options: Optional[CostsSection] = None,
    walk: Optional[WalkState] = None,
) -> CostPair:
    """
    Draw the costs (Q_t, R_t) of round ``t``.

    Args:
        kind: One of wishart, diag_uniform, diag_random_walk, constant,
            uniform_box or custom.
        dims: Tuple (n, m).
        rng: Source of randomness.
        t: Round index; the random walk starts fresh at t = 1.
        options: Cost options (defaults when None).
        walk: State of the random walk, carried between rounds.

    Returns:
        Positive-definite ``CostPair``.

    Raises:
        ConfigError: On an unknown kind or a Wishart dof below the dimension.
    """
    n, m = dims
    opts = options or CostsSection(kind=kind)
    if kind == "wishart":
        if opts.dof < max(n, m):
            raise ConfigError(
                f"wishart dof {opts.dof} is below the dimension {max(n, m)}"
            )
        G = rng.standard_normal((opts.dof, n))
        H = rng.standard_normal((opts.dof, m))
        return CostPair(G.T @ G, H.T @ H)
    if kind == "diag_uniform":
        r = rng.uniform(opts.r_low, opts.r_high)
        return CostPair(np.eye(n), _diag_input_cost(m, r))
    if kind == "diag_random_walk":
        walk = walk if walk is not None else WalkState()
        if walk.r is None or t == 1:
            walk.r = float(rng.uniform(opts.r_low, opts.r_high))
        else:
            u = rng.uniform()
            if u < opts.walk_prob:
                step = opts.walk_step
            elif u < 2 * opts.walk_prob:
                step = -opts.walk_step
            else:
                step = 0.0
            walk.r = float(np.clip(walk.r + step, opts.r_low, opts.r_high))
        return CostPair(np.eye(n), _diag_input_cost(m, walk.r))
    if kind == "constant":
        Q = np.eye(n) if opts.Q is None else np.asarray(opts.Q, dtype=float)
        R = np.eye(m) if opts.R is None else np.asarray(opts.R, dtype=float)
        return CostPair(Q, R)
    if kind == "uniform_box":
        return CostPair(
            np.diag(rng.uniform(opts.q_low, opts.q_high, size=n)),
            np.diag(rng.uniform(opts.r_low, opts.r_high, size=m)),
        )
    if kind == "custom":
        if opts.Q is None or opts.R is None:
            raise ConfigError("custom costs need both Q and R")
        Q, R = np.asarray(opts.Q, dtype=float), np.asarray(opts.R, dtype=float)
        return CostPair(Q, R)
    raise ConfigError(f"unknown cost kind {kind!r}")


def cost_stream(
    options: CostsSection, n: int, m: int, horizon: int, rng: np.random.Generator
) -> List[CostPair]:
    """The first ``horizon`` rounds of the configured cost stream."""
    walk = WalkState()
    costs = [
        gen_costs(options.kind, (n, m), rng, t, options, walk)
        for t in range(1, horizon + 1)
    ]
    for cost in costs:
        if cost.Q.shape != (n, n) or cost.R.shape != (m, m):
            raise ConfigError(
                f"cost shapes {cost.Q.shape}, {cost.R.shape} do not match n={n}, m={m}"
            )
    return costs


def gen_system(
    n: int,
    m: int,
    rng: np.random.Generator,
    a_range: float = 3.0,
    b_range: float = 2.0,
) -> SystemModel:
    """
    Draw A ~ U[-a, a] and B ~ U[-b, b] entrywise until (A, B) is stabilizable.

    Raises:
        GenerationError: After 100 consecutive rejections.
    """
    for attempt in range(1, MAX_REJECTIONS + 1):
        A = rng.uniform(-a_range, a_range, size=(n, n))
        B = rng.uniform(-b_range, b_range, size=(n, m))
        if is_stabilizable(A, B):
            logger.debug("system accepted after %d draws", attempt)
            return SystemModel(A, B)
    raise GenerationError(f"no stabilizable system in {MAX_REJECTIONS} draws")


def system_from_config(
    config: ExperimentConfig, rng: np.random.Generator
) -> SystemModel:
    section = config.system
    if section.source == "explicit":
        A = np.asarray(section.A, dtype=float)
        B = np.asarray(section.B, dtype=float)
        sys = SystemModel(A, B, section.W)
        if not is_stabilizable(sys.A, sys.B):
            raise NotStabilizableError("configured (A, B) is not stabilizable")
        return sys
    sys = gen_system(section.n, section.m, rng, section.a_range, section.b_range)
    if section.W is not None:
        sys = SystemModel(sys.A, sys.B, section.W)
    return sys


def _average_costs(costs: Sequence[CostPair]):
    SQ, SR = cost_totals(costs)
    return SQ / len(costs), SR / len(costs)


def comparator_fixed(
    costs: Sequence[CostPair],
    sys: SystemModel,
    X1=None,
    options: Optional[ComparatorSection] = None,
):
    """
    Best fixed stable gain in hindsight.

    Starts from K* of the averaged costs and refines it by Nelder-Mead on the
    exact expected total cost; candidates with spectral radius >= 1 - margin
    are rejected. The result is never worse than K*.

    Returns:
        Tuple of (comparator gain, its total cost, K*).

    Raises:
        ComparatorError: If K* itself is not an admissible candidate.
    """
    opts = options or ComparatorSection()
    Qbar, Rbar = _average_costs(costs)
    K_star = solve_dare(DareProblem(sys.A, sys.B, Qbar, Rbar)).K_star
    totals = cost_totals(costs)

    def objective(flat):
        K = flat.reshape(K_star.shape)
        if spectral_radius(sys.closed_loop(K)) >= 1.0 - opts.margin:
            return np.inf
        try:
            return fixed_policy_total_cost(K, costs, sys, X1, totals)
        except UnstableClosedLoopError:
            return np.inf

    best_cost = objective(K_star.ravel())
    if not np.isfinite(best_cost):
        raise ComparatorError("K* is not an admissible comparator")
    best = K_star
    if opts.search and opts.max_iter > 0:
        result = optimize.minimize(
            objective,
            K_star.ravel(),
            method="Nelder-Mead",
            options={"maxiter": opts.max_iter, "xatol": 1e-12, "fatol": 1e-12},
        )
        if np.isfinite(result.fun) and result.fun < best_cost:
            best, best_cost = result.x.reshape(K_star.shape), float(result.fun)
    logger.debug("comparator cost %.12g over %d rounds", best_cost, len(costs))
    return best, float(best_cost), K_star


@dataclass
class RegretLedger:
    """
    Per-round expected costs, regret series and diagnostics of one trial.

    ``regret`` holds cumulative cost minus the cumulative cost of the full
    horizon comparator; ``checkpoint_regret`` holds R(T) for each checkpoint
    horizon against that prefix's own comparator.
    """

    horizon: int
    system: SystemModel
    costs: List[CostPair]
    X1: np.ndarray
    stage_costs: Dict[str, np.ndarray] = field(default_factory=dict)
    gains: Dict[str, List[np.ndarray]] = field(default_factory=dict)
    rho: Dict[str, np.ndarray] = field(default_factory=dict)
    pmax: Dict[str, np.ndarray] = field(default_factory=dict)
    failures: Dict[str, str] = field(default_factory=dict)
    comparator_gain: Optional[np.ndarray] = None
    comparator_costs: Optional[np.ndarray] = None
    K_star: Optional[np.ndarray] = None
    regret: Dict[str, np.ndarray] = field(default_factory=dict)
    checkpoint_regret: Dict[int, Dict[str, float]] = field(default_factory=dict)
    checkpoint_gains: Dict[int, np.ndarray] = field(default_factory=dict)
    online_state: Optional[OnlineState] = None

    @property
    def algorithms(self) -> List[str]:
        return list(self.stage_costs)

    def average_regret(self, algorithm: str) -> np.ndarray:
        return self.regret[algorithm] / np.arange(1, self.horizon + 1)

    def final_regret(self, algorithm: str) -> float:
        return self.checkpoint_regret[self.horizon][algorithm]

    def summary(self) -> List[Dict[str, float]]:
        """One row per algorithm: regrets, max radius and max lambda(P)."""
        rows = []
        for name in self.algorithms:
            final = self.final_regret(name)
            row = {
                "algorithm": name,
                "final_regret": final,
                "average_regret": final / self.horizon,
                "max_rho": _nanmax(self.rho[name]),
                "max_pmax": _nanmax(self.pmax[name]),
                "failed": name in self.failures,
            }
            if self.K_star is not None and self.gains.get(name):
                gap = self.gains[name][-1] - self.K_star
                row["gain_gap"] = float(np.linalg.norm(gap, 2))
            rows.append(row)
        return rows


def _nanmax(series: np.ndarray) -> float:
    return float(np.nanmax(series)) if series.size else math.nan


def _run_baseline(
    name: str,
    costs: Sequence[CostPair],
    sys: SystemModel,
    K1: np.ndarray,
    horizon: int,
):
    # fll: DARE of the running averages; recent: DARE of the last revealed costs
    gains = [K1]
    rho, pmax = [spectral_radius(sys.closed_loop(K1))], [math.nan]
    Qbar = Rbar = None
    for t, cost in enumerate(costs[: horizon - 1], start=1):
        if name == "fll":
            Qbar = cost.Q if Qbar is None else ((t - 1) / t) * Qbar + cost.Q / t
            Rbar = cost.R if Rbar is None else ((t - 1) / t) * Rbar + cost.R / t
            prob = DareProblem(sys.A, sys.B, Qbar, Rbar)
        else:
            prob = DareProblem(sys.A, sys.B, cost.Q, cost.R)
        sol = solve_dare(prob, initial_gain=gains[-1])
        gains.append(sol.K_star)
        rho.append(spectral_radius(sys.closed_loop(sol.K_star)))
        pmax.append(max_eig_sym(sol.P_star))
    return gains, np.array(rho), np.array(pmax)


def _online_params(config: ExperimentConfig, costs: Sequence[CostPair]) -> OnlineParams:
    section = config.online
    derived = OnlineParams.from_costs(costs)
    mu = derived.mu if section.mu is None else section.mu
    sigma = derived.sigma if section.sigma is None else section.sigma
    return OnlineParams(
        mu=mu,
        sigma=sigma,
        horizon=len(costs),
        nu_estimate=section.nu_estimate,
        t_star_override=section.t_star,
    )


def _trial_rngs(seed: int, trial: int, count: int) -> List[np.random.Generator]:
    return spawn_rngs(np.random.SeedSequence(seed).spawn(trial + 1)[trial], count)


def _initial_gain(kind: str, costs: Sequence[CostPair], sys: SystemModel) -> np.ndarray:
    # dare: K* of the stream's averaged costs, known in hindsight
    if kind == "dare":
        Qbar, Rbar = _average_costs(costs)
        return solve_dare(DareProblem(sys.A, sys.B, Qbar, Rbar)).K_star
    prob = DareProblem(sys.A, sys.B, np.eye(sys.n), np.eye(sys.m))
    return find_stabilizing_gain(prob)[0].K


def run_experiment(config: ExperimentConfig, trial: int = 0) -> RegretLedger:
    """
    Run every configured algorithm on one shared system and cost stream.

    All algorithms share one K_1: the bootstrap gain of (A, B, I, I), or K*
    of the averaged costs when ``online.initial_gain`` is ``dare``. Stage
    costs are exact expectations from covariance propagation with
    X_1 = x1_scale * I. An algorithm whose gain turns unstable is recorded in
    ``failures`` and its series is padded with NaN.
    """
    exp = config.experiment
    sys_rng, cost_rng = _trial_rngs(exp.seed, trial, 2)
    sys = system_from_config(config, sys_rng)
    T = exp.horizon
    costs = cost_stream(config.costs, sys.n, sys.m, T, cost_rng)
    X1 = exp.x1_scale * np.eye(sys.n)
    K1 = _initial_gain(config.online.initial_gain, costs, sys)
    ledger = RegretLedger(horizon=T, system=sys, costs=costs, X1=X1)

    for name in exp.algorithms:
        try:
            if name == "online":
                state = run_online(sys, costs, _online_params(config, costs), K1)
                ledger.online_state = state
                gains = state.gains[:T]
                rho = np.array([r.rho_closed_loop for r in state.diagnostics])
                pmax = np.array([r.pmax_eig for r in state.diagnostics])
            else:
                gains, rho, pmax = _run_baseline(name, costs, sys, K1, T)
            _, stage = expected_total_cost(gains, costs, sys, X1)
        except (InvariantViolationError, UnstableClosedLoopError) as exc:
            logger.error("%s failed: %s", name, exc)
            ledger.failures[name] = str(exc)
            gains, stage = [], np.full(T, np.nan)
            rho = pmax = np.full(T, np.nan)
        ledger.gains[name] = gains
        ledger.stage_costs[name] = stage
        ledger.rho[name] = rho
        ledger.pmax[name] = pmax

    K_comp, _, K_star = comparator_fixed(costs, sys, X1, config.comparator)
    ledger.comparator_gain, ledger.K_star = K_comp, K_star
    _, ledger.comparator_costs = expected_total_cost([K_comp] * T, costs, sys, X1)
    comparator_cum = np.cumsum(ledger.comparator_costs)
    for name, stage in ledger.stage_costs.items():
        ledger.regret[name] = np.cumsum(stage) - comparator_cum

    for horizon in sorted({c for c in exp.checkpoints if c <= T} | {T}):
        if horizon == T:
            K_h = K_comp
        else:
            K_h = comparator_fixed(costs[:horizon], sys, X1, config.comparator)[0]
        comp_total = fixed_policy_total_cost(K_h, costs[:horizon], sys, X1)
        ledger.checkpoint_gains[horizon] = K_h
        ledger.checkpoint_regret[horizon] = {
            name: float(np.sum(stage[:horizon]) - comp_total)
            for name, stage in ledger.stage_costs.items()
        }
    logger.info(
        "trial %d: T=%d, final regret %s",
        trial,
        T,
        ", ".join(f"{k}={v:.6g}" for k, v in ledger.checkpoint_regret[T].items()),
    )
    return ledger


def run_trials(config: ExperimentConfig) -> List[RegretLedger]:
    """``experiment.trials`` independent runs, each on its own derived seed."""
    return [run_experiment(config, trial) for trial in range(config.experiment.trials)]


@dataclass
class Decomposition:
    """
    Cumulative series of the four regret terms up to ``horizon``.

    transient:             sum (Q_t + K_t'R_tK_t) . (X_t - Xhat_t)
    policy_drift:          sum (Q_t + K_t'R_tK_t) . Xhat_t - (Q_t + K*'R_tK*) . Xhat*
    comparator_gap:        sum (Q_t + K*'R_tK*) . Xhat* - (Q_t + Kc'R_tKc) . Xhat_c
    comparator_transient:  sum (Q_t + Kc'R_tKc) . (Xhat_c - X_t^c)
    """

    horizon: int
    transient: np.ndarray
    policy_drift: np.ndarray
    comparator_gap: np.ndarray
    comparator_transient: np.ndarray
    regret: float
    K_star: np.ndarray
    comparator_gain: np.ndarray
    X_star: np.ndarray
    X_comparator: np.ndarray

    @property
    def total(self) -> float:
        return float(
            self.transient[-1]
            + self.policy_drift[-1]
            + self.comparator_gap[-1]
            + self.comparator_transient[-1]
        )


def regret_decomposition(
    ledger: RegretLedger, horizon: Optional[int] = None
) -> Decomposition:
    """
    Split the online regret at ``horizon`` (default T) into its four terms.

    K* solves the DARE of the averaged costs of the prefix and the comparator
    is that checkpoint's hindsight gain. The terms telescope, so their sum is
    the regret.
    """
    if ledger.online_state is None or "online" in ledger.failures:
        raise ComparatorError("decomposition needs a completed online run")
    h = ledger.horizon if horizon is None else horizon
    if h not in ledger.checkpoint_gains:
        raise ComparatorError(f"horizon {h} is not a checkpoint of this ledger")
    sys, X1 = ledger.system, ledger.X1
    costs = ledger.costs[:h]
    gains = ledger.gains["online"][:h]
    K_comp = ledger.checkpoint_gains[h]
    Qbar, Rbar = _average_costs(costs)
    K_star = solve_dare(DareProblem(sys.A, sys.B, Qbar, Rbar)).K_star
    X_star = steady_covariance(K_star, sys)
    X_comp = steady_covariance(K_comp, sys)
    covs = covariance_trajectory(gains, sys, X1)
    comp_covs = covariance_trajectory([K_comp] * h, sys, X1)

    terms = np.empty((4, h))
    for t, (K, cost) in enumerate(zip(gains, costs)):
        w = stage_weight(cost.Q, cost.R, K)
        w_star = stage_weight(cost.Q, cost.R, K_star)
        w_comp = stage_weight(cost.Q, cost.R, K_comp)
        X_hat = steady_covariance(K, sys)
        terms[0, t] = trace_dot(w, covs[t] - X_hat)
        terms[1, t] = trace_dot(w, X_hat) - trace_dot(w_star, X_star)
        terms[2, t] = trace_dot(w_star, X_star) - trace_dot(w_comp, X_comp)
        terms[3, t] = trace_dot(w_comp, X_comp - comp_covs[t])
    series = np.cumsum(terms, axis=1)
    return Decomposition(
        horizon=h,
        transient=series[0],
        policy_drift=series[1],
        comparator_gap=series[2],
        comparator_transient=series[3],
        regret=ledger.checkpoint_regret[h]["online"],
        K_star=K_star,
        comparator_gain=K_comp,
        X_star=X_star,
        X_comparator=X_comp,
    )


def decomposition_bounds(
    ledger: RegretLedger, decomposition: Decomposition
) -> Dict[str, float]:
    """
    Right-hand sides of the transient, policy-drift and comparator-transient
    bounds evaluated with measured constants.

    kappa and gamma come from the run's final nu estimate, m_hat from the
    measured value increments, and M, M' from the covariance drift constants
    2 k^6 w/(mu g^2) |B| (|B| m + 2 s) and k^6 w/(mu g^2) |B|^2 (|B| m + 2 s)^2.
    The comparator-transient bound uses the comparator's own certificate.
    """
    state = ledger.online_state
    sys = ledger.system
    h = decomposition.horizon
    params = state.params
    mu, sigma = params.mu, params.sigma
    kappa, gamma = state.kappa, state.gamma
    omega, b_norm = sys.omega, sys.b_norm
    m_hat = increment_constants(state, sys).m_hat
    drift = b_norm * m_hat + 2.0 * sigma
    M = 2.0 * kappa ** 6 * omega / (mu * gamma ** 2) * b_norm * drift
    M_prime = kappa ** 6 * omega / (mu * gamma ** 2) * b_norm ** 2 * drift ** 2
    decay = 1.0 - math.exp(-2.0 * gamma ** 2)

    gains = ledger.gains["online"][:h]
    covs = covariance_trajectory(gains, sys, ledger.X1)
    gaps = [op_norm(covs[t] - steady_covariance(K, sys)) for t, K in enumerate(gains)]
    t_star = min(state.t_star or h, h)
    transient = t_star * sigma * (1.0 + kappa ** 2) * max(gaps[:t_star])
    if h > t_star:
        transient += 2.0 * kappa ** 4 * sigma * (
            gaps[t_star - 1] * math.exp(-2.0 * gamma ** 2 * t_star) / decay
            + M_prime * math.pi ** 2 / (6.0 * decay)
            + M / decay * math.log(h / t_star)
        )

    P_T = state.values[h - 1] if state.values else state.P
    Qbar, Rbar = _average_costs(ledger.costs[:h])
    P_star = solve_dare(DareProblem(sys.A, sys.B, Qbar, Rbar)).P_star
    policy_drift = h * omega * op_norm(P_T - P_star) + (
        kappa ** 4 * omega / (gamma * mu ** 3) * drift ** 2 * (1.0 + math.log(h))
    )

    K_comp = decomposition.comparator_gain
    cert = cert_for_policy(sys.A, sys.B, K_comp, Qbar, Rbar)
    kappa_c = max(cert.kappa, op_norm(K_comp))
    gamma_c = 1.0 / (2.0 * kappa_c ** 2)
    comparator_transient = (
        sigma * (1.0 + kappa_c ** 2) * kappa_c ** 2 / (1.0 - math.exp(-2.0 * gamma_c))
        * op_norm(decomposition.X_comparator - ledger.X1)
    )
    return {
        "transient": transient,
        "policy_drift": policy_drift,
        "comparator_transient": comparator_transient,
        "M": M,
        "M_prime": M_prime,
        "m_hat": m_hat,
        "kappa": kappa,
        "gamma": gamma,
    }


@dataclass
class ProbeTrial:
    """lambda_max(P_t) series of one probe trial."""

    trial: int
    series: np.ndarray
    flagged: bool
    bound: Optional[float] = None
    error: Optional[str] = None

    @property
    def max_eig(self) -> float:
        return float(np.max(self.series)) if self.series.size else math.nan

    @property
    def max_eig_after_first(self) -> float:
        """Max over t >= 2; P_1 only reflects the arbitrary initial gain."""
        return float(np.max(self.series[1:])) if self.series.size > 1 else math.nan


def probe_boundedness(
    config: ExperimentConfig, random_initial_gain: bool = True
) -> List[ProbeTrial]:
    """
    Run the online update on ``experiment.trials`` random cost streams and
    record lambda_max(P_t).

    With ``random_initial_gain`` each trial bootstraps K_1 from a random
    Wishart cost pair, otherwise from (I, I). Trials with lambda_max above
    1e12, or that break stability, are flagged. For scalar systems the bound
    column holds the scalar ceiling at the run's extreme averaged costs.
    """
    exp = config.experiment
    results = []
    for trial in range(exp.trials):
        sys_rng, cost_rng, gain_rng = _trial_rngs(exp.seed, trial, 3)
        sys = system_from_config(config, sys_rng)
        costs = cost_stream(config.costs, sys.n, sys.m, exp.horizon, cost_rng)
        if random_initial_gain:
            dof = max(sys.n, sys.m) + 1
            seed_costs = gen_costs(
                "wishart", (sys.n, sys.m), gain_rng, options=CostsSection(dof=dof)
            )
            Q0 = seed_costs.Q + 1e-3 * np.eye(sys.n)
            R0 = seed_costs.R + 1e-3 * np.eye(sys.m)
        else:
            Q0, R0 = np.eye(sys.n), np.eye(sys.m)
        K1 = find_stabilizing_gain(DareProblem(sys.A, sys.B, Q0, R0))[0].K
        try:
            params = _online_params(config, costs)
            state = run_online(sys, costs, params, K1, keep_history=False)
        except (InvariantViolationError, UnstableClosedLoopError) as exc:
            logger.warning("probe trial %d broke stability: %s", trial, exc)
            results.append(ProbeTrial(trial, np.array([]), True, error=str(exc)))
            continue
        series = np.array([r.pmax_eig for r in state.diagnostics])
        flagged = bool(series.max() > UNBOUNDED_LEVEL)
        bound = None
        if sys.n == 1 and sys.m == 1 and sys.b_norm > 0.0:
            try:
                bound = scalar_bound_for_run(state, sys)
            except DegenerateBoundError as exc:
                logger.debug("probe trial %d: no scalar bound (%s)", trial, exc)
        if flagged:
            logger.warning(
                "probe trial %d: lambda_max(P) reached %.3e", trial, series.max()
            )
        results.append(ProbeTrial(trial, series, flagged, bound))
    return results


@dataclass
class ValueMapSample:
    """One evaluation of P_t -> P_{t+1} at P_t = P* + Omega."""

    omega_norm: float
    p_next_norm: float  # inf when K_{t+1} does not stabilize
    rho_next: float


def value_map_samples(
    prob: DareProblem, trials: int, rng: np.random.Generator, scale: float = 1.0
) -> List[ValueMapSample]:
    """
    Sample the one-step value map around the DARE solution.

    Each trial draws Omega = c G^T G / (n + 1) with G standard normal and c
    log-uniform in [1e-3, 1e3] * scale, sets K_{t+1} = gain(P* + Omega) and
    records ||P_{t+1}|| for the value P_{t+1} of K_{t+1} next to
    rho(A - B K_{t+1}).
    """
    if trials < 1 or scale <= 0.0:
        raise InvalidInputError("value map sampling needs trials >= 1 and scale > 0")
    P_star = solve_dare(prob).P_star
    n = prob.n
    samples = []
    for _ in range(trials):
        level = scale * 10.0 ** rng.uniform(-3.0, 3.0)
        G = rng.standard_normal((n + 1, n))
        omega = level * (G.T @ G) / (n + 1)
        K_next = gain(P_star + omega, prob.A, prob.B, prob.R)
        rho = spectral_radius(prob.A - prob.B @ K_next)
        try:
            p_next = op_norm(policy_value(K_next, prob))
        except UnstableClosedLoopError:
            p_next = math.inf
        samples.append(ValueMapSample(op_norm(omega), p_next, rho))
    worst = max(samples, key=lambda s: s.rho_next)
    logger.info(
        "value map: %d samples, largest rho %.6f with ||P_next|| = %.6g",
        trials,
        worst.rho_next,
        worst.p_next_norm,
    )
    return samples
