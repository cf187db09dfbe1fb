"""
Strong-stability certificates and the covariance bounds they imply.

A gain K is (kappa, gamma)-strongly stable when A - BK = H L H^-1 with
||L|| <= 1 - gamma, ||H|| ||H^-1|| <= kappa and ||K|| <= kappa. Certificates
here are always built from a value matrix P with H = P^-1/2, so
L = P^1/2 (A - BK) P^-1/2.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .errors import BoundViolationError, InvalidInputError, UnstableClosedLoopError
from .lyapunov import solve_stein_transposed
from .matcore import (
    as_matrix,
    as_sym,
    max_eig_sym,
    min_eig_sym,
    op_norm,
    spectral_radius,
    sym_sqrt,
)

logger = logging.getLogger(__name__)

CERT_SLACK = 1e-8


@dataclass(frozen=True)
class StabilityParams:
    """
    Strong-stability constants derived from a cost floor and a value ceiling.

    kappa = sqrt(nu / mu) and gamma = 1 / (2 kappa^2). ``sigma`` is the trace
    ceiling of the costs; it is carried along for the bounds that need it.
    """

    mu: float
    nu: float
    sigma: Optional[float] = None

    def __post_init__(self):
        if not (self.mu > 0.0):
            raise InvalidInputError(f"mu must be positive, got {self.mu}")
        if self.nu < self.mu:
            raise InvalidInputError(f"nu ({self.nu}) must not be below mu ({self.mu})")

    @property
    def kappa(self) -> float:
        return math.sqrt(self.nu / self.mu)

    @property
    def gamma(self) -> float:
        return 1.0 / (2.0 * self.kappa ** 2)

    @property
    def alpha(self) -> float:
        return 1.0 / math.sqrt(self.nu)

    @property
    def beta(self) -> float:
        return 1.0 / math.sqrt(self.mu)


@dataclass(frozen=True)
class StrongStabilityCert:
    """Witness (H, L) for (kappa, gamma)-strong stability of a gain K."""

    kappa: float
    gamma: float
    H: np.ndarray
    L: np.ndarray
    K: np.ndarray
    H_inv: Optional[np.ndarray] = None
    alpha: Optional[float] = None
    beta: Optional[float] = None

    def __post_init__(self):
        H = as_matrix(self.H, "H")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "L", as_matrix(self.L, "L"))
        object.__setattr__(self, "K", as_matrix(self.K, "K"))
        if self.H_inv is None:
            object.__setattr__(self, "H_inv", np.linalg.inv(H))
        if self.beta is None:
            object.__setattr__(self, "beta", op_norm(H))
        if self.alpha is None:
            object.__setattr__(self, "alpha", 1.0 / op_norm(self.H_inv))


@dataclass
class Violation:
    """One failed inequality: ``value`` exceeded ``limit`` by ``margin``."""

    name: str
    value: float
    limit: float

    @property
    def margin(self) -> float:
        return self.value - self.limit


@dataclass
class CertReport:
    """Outcome of ``verify_cert``."""

    ok: bool
    violations: List[Violation] = field(default_factory=list)
    # ||K|| <= kappa is reported separately; it does not affect ``ok``.
    gain_bound_ok: bool = True
    gain_norm: float = 0.0

    @property
    def strict_ok(self) -> bool:
        return self.ok and self.gain_bound_ok


@dataclass
class SequentialReport:
    """Outcome of ``verify_sequential``; ``first_failure`` indexes the certificates."""

    ok: bool
    first_failure: Optional[int] = None
    violations: List[Violation] = field(default_factory=list)


def cert_from_value_matrix(P, A, B, K, params: StabilityParams) -> StrongStabilityCert:
    """
    Build the P-based certificate for gain K.

    Args:
        P: Value matrix of K, with mu I <= P <= nu I.
        A: State matrix.
        B: Input matrix.
        K: Stable gain.
        params: Constants (mu, nu) defining kappa and gamma.

    Returns:
        Certificate with H = P^-1/2 and L = P^1/2 (A - BK) P^-1/2.

    Raises:
        BoundViolationError: If P leaves [mu I, nu I] or P - (A-BK)^T P (A-BK)
            is not above mu I.
        UnstableClosedLoopError: If A - BK is not stable.
    """
    p = as_sym(P, "P")
    k = as_matrix(K, "K")
    F = as_matrix(A, "A") - as_matrix(B, "B") @ k
    radius = spectral_radius(F)
    if radius >= 1.0:
        raise UnstableClosedLoopError(
            f"gain is not stable: spectral radius {radius:.12g}", radius
        )
    scale = max(1.0, op_norm(p))
    lo, hi = min_eig_sym(p), max_eig_sym(p)
    if lo < params.mu - CERT_SLACK * scale:
        raise BoundViolationError(
            f"lambda_min(P) = {lo:.6g} is below mu = {params.mu:.6g}"
        )
    if hi > params.nu + CERT_SLACK * scale:
        raise BoundViolationError(
            f"lambda_max(P) = {hi:.6g} exceeds nu = {params.nu:.6g}"
        )
    decrease = min_eig_sym(p - F.T @ p @ F)
    if decrease < params.mu - CERT_SLACK * scale:
        raise BoundViolationError(
            f"P - F^T P F has lambda_min {decrease:.6g} below mu = {params.mu:.6g}"
        )

    root = sym_sqrt(p)
    L = root.root @ F @ root.inv_root
    gain_norm = op_norm(k)
    if gain_norm > params.kappa + CERT_SLACK:
        logger.warning("gain norm %.6g exceeds kappa %.6g", gain_norm, params.kappa)
    return StrongStabilityCert(
        kappa=params.kappa,
        gamma=params.gamma,
        H=root.inv_root,
        L=L,
        K=k,
        H_inv=root.root,
        alpha=params.alpha,
        beta=params.beta,
    )


def cert_for_policy(A, B, K, Q, R) -> StrongStabilityCert:
    """
    Constructive existence certificate for a stable gain.

    P solves P = (A-BK)^T P (A-BK) + Q + K^T R K; mu is lambda_min of the
    forcing and nu is lambda_max(P).
    """
    a = as_matrix(A, "A")
    b = as_matrix(B, "B")
    k = as_matrix(K, "K")
    forcing = as_sym(Q, "Q") + k.T @ as_sym(R, "R") @ k
    P = solve_stein_transposed(a - b @ k, forcing)
    mu = min_eig_sym(forcing)
    params = StabilityParams(mu=mu, nu=max(max_eig_sym(P), mu))
    return cert_from_value_matrix(P, a, b, k, params)


def verify_cert(cert: StrongStabilityCert, A, B) -> CertReport:
    """
    Check the certificate inequalities with additive slack 1e-8.

    Never raises; failed checks are listed in the report.
    """
    violations: List[Violation] = []
    try:
        F = as_matrix(A, "A") - as_matrix(B, "B") @ cert.K
        mismatch = op_norm(F - cert.H @ cert.L @ cert.H_inv)
        limit = CERT_SLACK * max(1.0, op_norm(F))
        if mismatch > limit:
            violations.append(Violation("similarity", mismatch, limit))
        norm_L = op_norm(cert.L)
        if norm_L > 1.0 - cert.gamma + CERT_SLACK:
            violations.append(Violation("norm_L", norm_L, 1.0 - cert.gamma))
        cond_H = op_norm(cert.H) * op_norm(cert.H_inv)
        if cond_H > cert.kappa + CERT_SLACK:
            violations.append(Violation("cond_H", cond_H, cert.kappa))
        gain_norm = op_norm(cert.K)
    except (ValueError, np.linalg.LinAlgError) as exc:
        logger.debug("certificate check failed: %s", exc)
        return CertReport(ok=False, violations=[Violation("malformed", math.inf, 0.0)])
    return CertReport(
        ok=not violations,
        violations=violations,
        gain_bound_ok=gain_norm <= cert.kappa + CERT_SLACK,
        gain_norm=gain_norm,
    )


def verify_sequential(certs: Sequence[StrongStabilityCert], A, B) -> SequentialReport:
    """
    Check sequential strong stability of a list of certificates.

    Each certificate must verify on its own, share (kappa, gamma), keep
    ||H_t|| <= beta and ||H_t^-1|| <= 1/alpha with beta/alpha <= kappa, and
    consecutive pairs must satisfy ||H_{t+1}^-1 H_t|| <= 1 + gamma.
    """
    if not certs:
        return SequentialReport(ok=True)
    kappa, gamma = certs[0].kappa, certs[0].gamma
    alpha, beta = math.inf, 0.0
    for idx, cert in enumerate(certs):
        if abs(cert.kappa - kappa) > CERT_SLACK or abs(cert.gamma - gamma) > CERT_SLACK:
            return SequentialReport(
                ok=False,
                first_failure=idx,
                violations=[Violation("shared_params", cert.kappa, kappa)],
            )
        report = verify_cert(cert, A, B)
        if not report.ok:
            return SequentialReport(
                ok=False, first_failure=idx, violations=report.violations
            )
        alpha = min(alpha, cert.alpha)
        beta = max(beta, cert.beta)
        norm_H, norm_H_inv = op_norm(cert.H), op_norm(cert.H_inv)
        if norm_H > beta + CERT_SLACK:
            return SequentialReport(False, idx, [Violation("norm_H", norm_H, beta)])
        if norm_H_inv > 1.0 / alpha + CERT_SLACK:
            violation = Violation("norm_H_inv", norm_H_inv, 1.0 / alpha)
            return SequentialReport(False, idx, [violation])
        if beta / alpha > kappa + CERT_SLACK:
            violation = Violation("beta_over_alpha", beta / alpha, kappa)
            return SequentialReport(False, idx, [violation])
        if idx > 0:
            link = op_norm(cert.H_inv @ certs[idx - 1].H)
            if link > 1.0 + gamma + CERT_SLACK:
                violation = Violation("link", link, 1.0 + gamma)
                return SequentialReport(False, idx, [violation])
    return SequentialReport(ok=True)


def covariance_decay_bound(
    kappa: float, gamma: float, t: int, init_gap: float
) -> float:
    """kappa^2 exp(-2 gamma t) init_gap, the covariance gap after t steps."""
    return kappa ** 2 * math.exp(-2.0 * gamma * t) * init_gap


def sequential_covariance_bound(
    kappa: float, gamma: float, t: int, init_gap: float, etas: Sequence[float]
) -> float:
    """
    Covariance tracking bound under a sequentially strongly stable gain sequence.

    Returns kappa^2 e^{-2 gamma^2 t} init_gap
    + kappa^2 sum_{s=0}^{t-1} e^{-2 gamma^2 s} eta_{t-s}, where ``etas[i]`` is
    eta_{i+1}.
    """
    if len(etas) < t:
        raise InvalidInputError(f"need at least {t} eta values, got {len(etas)}")
    if any(eta < 0.0 for eta in etas[:t]):
        raise InvalidInputError("eta values must be nonnegative")
    rate = 2.0 * gamma ** 2
    tail = sum(math.exp(-rate * s) * etas[t - s - 1] for s in range(t))
    return kappa ** 2 * (math.exp(-rate * t) * init_gap + tail)
