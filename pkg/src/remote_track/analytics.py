"""Closed-form metrics for the remote tracking system.

The error-level chain for the randomized stationary (RS) policy is built for
general N and solved numerically.  Joint stationary distributions, and hence
reconstruction error and actuation cost for the change-aware and
semantics-aware policies, are available for N in {2, 3} only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .policies import NoClosedForm, Policy
from .process import CostMatrix, SourceModel


class ReducibleChainError(ValueError):
    """The chain has more than one closed class, so no unique stationary law."""


@dataclass(frozen=True)
class ErrorChain:
    matrix: np.ndarray
    n_states: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (self.n_states, self.n_states):
            raise ValueError(f"expected a {self.n_states}x{self.n_states} matrix, got {m.shape}")
        if np.any(m < -1e-15) or np.any(m > 1 + 1e-15):
            raise ValueError("transition probabilities must lie in [0, 1]")
        if np.max(np.abs(m.sum(axis=1) - 1.0)) > 1e-12:
            raise ValueError("rows of the transition matrix must sum to 1")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)


@dataclass(frozen=True)
class StationaryDistribution:
    pi: np.ndarray
    method: str = "linear"

    def residual(self, matrix: np.ndarray) -> float:
        return float(np.max(np.abs(self.pi @ matrix - self.pi)))


@dataclass(frozen=True)
class ConsecutiveChain:
    """Two-parameter chain of the consecutive-error counter.

    ``p_0e`` = Pr[error next | synced now], ``p_ee`` = Pr[error next | error now].
    """

    p_0e: float
    p_ee: float

    def __post_init__(self):
        for name in ("p_0e", "p_ee"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1], got {v}")


@dataclass(frozen=True)
class JointStationary:
    """Stationary law of (X_t, X_hat_t); ``pi_joint[i, j]`` with i the source state."""

    pi_joint: np.ndarray
    policy: Policy

    @property
    def p_error(self) -> float:
        return float(self.pi_joint.sum() - np.trace(self.pi_joint))


@dataclass(frozen=True)
class OptimizationResult:
    p_star: float
    p_error_star: float
    eta: float
    feasibility: dict


def _check_prob(name: str, value: float) -> None:
    if not (0.0 <= value <= 1.0):
        raise ValueError(f"{name} must lie in [0, 1], got {value}")


def build_error_chain(source: SourceModel, p_sample: float, p_s: float) -> ErrorChain:
    """Transition matrix of E_t = |X_t - X_hat_t| under the RS policy."""
    _check_prob("p_sample", p_sample)
    _check_prob("p_s", p_s)
    N = source.n_states
    if N < 2:
        raise ValueError("need at least two source states")
    p, q = source.p_change, source.p_stay
    h0 = p_sample * (1.0 - p_s)  # sampled, transmission lost
    h1 = p_sample * p_s  # sampled and decoded
    # a: source moves to one given state and X_hat is not refreshed;
    # b: source stays and X_hat is not refreshed.
    a = p * h0 + p * (1.0 - p_sample)
    b = q * h0 + q * (1.0 - p_sample)

    P = np.zeros((N, N))
    for i in range(N):
        for j in range(N):
            if i == 0 and j == 0:
                v = q + (N - 1) * p * h1
            elif j == 0:
                v = p + q * h1 + (N - 2) * p * h1
            elif i == 0:
                v = 2.0 * (1.0 - j / N) * a
            elif i == j:
                if 2 * i <= N - 1:
                    v = (N - 2 * i) / (N - i) * a + b
                else:
                    v = b
            elif i == 1:
                v = (2 * N - 2 * j - 1) / (N - 1) * a
            elif j == 1:
                v = (2 * N - 2 * i - 1) / (N - i) * a
            elif j > i:
                if j + 1 <= N <= i + j - 1:
                    v = (N - j) / (N - i) * a
                elif N >= i + j:
                    v = (2 * N - i - 2 * j) / (N - i) * a
                else:
                    v = 0.0
            else:
                if i + 1 <= N <= i + j - 1:
                    v = a
                elif N >= i + j:
                    v = (2 * N - j - 2 * i) / (N - i) * a
                else:
                    v = 0.0
            P[i, j] = v
    return ErrorChain(P, N, dict(p=p, q=q, p_sample=p_sample, p_s=p_s))


def _closed_classes(P: np.ndarray) -> list[set]:
    n = P.shape[0]
    reach = (P > 0) | np.eye(n, dtype=bool)
    for k in range(n):
        reach |= reach[:, [k]] & reach[[k], :]
    classes = []
    for i in range(n):
        cls = set(np.flatnonzero(reach[i] & reach[:, i]).tolist())
        closed = all(set(np.flatnonzero(reach[s]).tolist()) <= cls for s in cls)
        if closed and cls not in classes:
            classes.append(cls)
    return classes


def power_iteration(P: np.ndarray, tol: float = 1e-13, max_iter: int = 10**6) -> np.ndarray:
    n = P.shape[0]
    pi = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        nxt = pi @ P
        nxt /= nxt.sum()
        if np.max(np.abs(nxt - pi)) < tol:
            return nxt
        pi = nxt
    raise RuntimeError("power iteration did not converge")


def stationary(chain: "ErrorChain | np.ndarray") -> StationaryDistribution:
    """Solve pi P = pi, sum(pi) = 1.

    One balance equation is replaced by the normalization row.  Power
    iteration is the fallback when that system is numerically singular.
    """
    P = np.asarray(chain.matrix if isinstance(chain, ErrorChain) else chain, dtype=float)
    n = P.shape[0]
    if len(_closed_classes(P)) > 1:
        raise ReducibleChainError("chain has several closed classes; stationary law is not unique")
    A = P.T - np.eye(n)
    A[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    method = "linear"
    try:
        if np.linalg.cond(A) > 1e12:
            raise np.linalg.LinAlgError("ill-conditioned")
        pi = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError:
        pi = power_iteration(P)
        method = "power"
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    return StationaryDistribution(pi=pi, method=method)


def p_error_n3(P: np.ndarray) -> float:
    """Reconstruction error of a 3-level error chain in explicit form."""
    phi = (
        1
        + P[2, 1]
        - P[1, 1]
        - P[0, 0]
        - P[0, 0] * P[2, 1]
        + P[0, 0] * P[1, 1]
        + P[0, 1] * P[2, 0]
        - P[0, 1] * P[1, 0]
    )
    return float(phi / (phi + P[2, 0] - P[2, 0] * P[1, 1] + P[1, 0] * P[2, 1]))


def p_error_rs(source: SourceModel, p_sample: float, p_s: float) -> float:
    """Time-averaged reconstruction error of the RS policy."""
    N, p = source.n_states, source.p_change
    s = p_sample * p_s
    if N == 2:
        denom = 4 * p + 2 * s - 4 * p * s
        return 0.0 if denom == 0 else 2 * p * (1 - s) / denom
    chain = build_error_chain(source, p_sample, p_s)
    if p == 0.0:
        return 0.0
    if N == 3:
        return p_error_n3(chain.matrix)
    return float(1.0 - stationary(chain).pi[0])


def p_error_policy(policy: "Policy | str", source: SourceModel, p_s: float) -> float:
    return joint_stationary(policy, source, p_s=p_s).p_error


def variance(p_error: float) -> float:
    _check_prob("p_error", p_error)
    return p_error - p_error * p_error


def consecutive_from_chain(chain: ErrorChain) -> ConsecutiveChain:
    P = chain.matrix
    p_0e = min(max(1.0 - P[0, 0], 0.0), 1.0)
    p_ee = min(max(1.0 - P[1, 0], 0.0), 1.0)
    return ConsecutiveChain(p_0e, p_ee)


def _require_escape(cc: ConsecutiveChain) -> None:
    if cc.p_ee >= 1.0:
        raise ValueError("p_ee = 1: erroneous runs never end, no stationary law")


def consecutive_stationary(cc: ConsecutiveChain, run_length: int) -> float:
    """Stationary probability of being ``run_length`` slots into an error run."""
    _require_escape(cc)
    if run_length < 0:
        raise ValueError("run_length must be nonnegative")
    denom = 1.0 + cc.p_0e - cc.p_ee
    if run_length == 0:
        return (1.0 - cc.p_ee) / denom
    return cc.p_0e * (1.0 - cc.p_ee) * cc.p_ee ** (run_length - 1) / denom


def avg_consecutive_error(cc: ConsecutiveChain) -> float:
    _require_escape(cc)
    a, b = cc.p_0e, cc.p_ee
    return a / (1.0 + a - 2.0 * b - a * b + b * b)


def memory_cost(cc: ConsecutiveChain, kappa: float, horizon: int) -> float:
    """Expected kappa**x penalty over run lengths x = 1..horizon."""
    _require_escape(cc)
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    a, b = cc.p_0e, cc.p_ee
    r = kappa * b
    base = kappa * a * (1.0 - b) / (1.0 + a - b)
    if r == 1.0:
        return base * horizon
    e = r - 1.0
    if abs(e) < 0.5:
        # (1 - r**n) / (1 - r) without cancellation as r -> 1
        return base * math.expm1(horizon * math.log1p(e)) / e
    return base * (1.0 - r**horizon) / (1.0 - r)


def _joint_n2(kind: Policy, p: float, p_s: float, p_sample: float) -> np.ndarray:
    if kind is Policy.RANDOMIZED_STATIONARY:
        s = p_sample * p_s
        denom = 4 * p + 2 * s * (1 - 2 * p)
        if denom == 0:
            return np.full((2, 2), 0.25)
        diag = (p + (1 - p) * s) / denom
        off = p * (1 - s) / denom
    elif kind is Policy.CHANGE_AWARE:
        denom = 4 - 2 * p_s
        diag = 1 / denom
        off = (1 - p_s) / denom
    else:
        denom = 4 * p + 2 * p_s - 4 * p * p_s
        if denom == 0:
            return np.full((2, 2), 0.25)
        diag = (p + p_s - p * p_s) / denom
        off = p * (1 - p_s) / denom
    return np.array([[diag, off], [off, diag]])


def _joint_n3(kind: Policy, p: float, p_s: float, p_sample: float) -> np.ndarray:
    if kind is Policy.RANDOMIZED_STATIONARY:
        s = p_sample * p_s
        denom = 9 * p + 3 * s - 9 * p * s
        if denom == 0:
            return np.full((3, 3), 1 / 9)
        diag = (p + s - p * s) / denom
        off = (p - p * s) / denom
    elif kind is Policy.CHANGE_AWARE:
        denom = 9 - 3 * p_s
        diag = (1 + p_s) / denom
        off = (1 - p_s) / denom
    else:
        denom = 9 * p + 3 * p_s - 9 * p * p_s
        if denom == 0:
            return np.full((3, 3), 1 / 9)
        diag = (p + p_s - p * p_s) / denom
        off = p * (1 - p_s) / denom
    return np.where(np.eye(3, dtype=bool), diag, off)


def joint_stationary(
    policy: "Policy | str",
    source: SourceModel,
    p_sample: float = 1.0,
    p_s: float = 1.0,
) -> JointStationary:
    """Stationary distribution of (X_t, X_hat_t) for RS, CA or SA at N in {2, 3}."""
    kind = Policy.parse(policy)
    if kind is Policy.UNIFORM:
        raise NoClosedForm("no closed-form joint distribution for the uniform policy")
    _check_prob("p_s", p_s)
    _check_prob("p_sample", p_sample)
    N = source.n_states
    if N == 2:
        pi = _joint_n2(kind, source.p_change, p_s, p_sample)
    elif N == 3:
        pi = _joint_n3(kind, source.p_change, p_s, p_sample)
    else:
        raise NoClosedForm(f"no closed-form joint distribution for N={N}")
    return JointStationary(pi_joint=pi, policy=kind)


def actuation_cost(pi: "JointStationary | np.ndarray", costs: "CostMatrix | np.ndarray") -> float:
    joint = np.asarray(pi.pi_joint if isinstance(pi, JointStationary) else pi, dtype=float)
    c = costs.costs if isinstance(costs, CostMatrix) else CostMatrix(costs).costs
    if joint.shape != c.shape:
        raise ValueError(f"shape mismatch: joint {joint.shape} vs costs {c.shape}")
    off = ~np.eye(joint.shape[0], dtype=bool)
    return float(np.sum(c[off] * joint[off]))


def sa_rate_n2(p: float, p_s: float) -> float:
    denom = 2 * p + p_s - 2 * p * p_s
    return 0.0 if denom == 0 else p / denom


def optimize_rs(
    source: SourceModel,
    p_s: float,
    eta: float,
    period_d: Optional[int] = None,
) -> OptimizationResult:
    """Minimize the RS reconstruction error subject to sampling rate <= eta.

    The objective is decreasing in the sampling probability, so the budget is
    always spent: ``p_star = min(eta, 1)``.
    """
    if source.n_states != 2:
        raise NoClosedForm("the constrained optimum is available in closed form for N=2 only")
    if not eta > 0:
        raise ValueError(f"eta must be positive, got {eta}")
    _check_prob("p_s", p_s)
    p = source.p_change
    p_star = min(eta, 1.0)
    s = p_s * p_star
    denom = 4 * p + 2 * s - 4 * p * s
    p_err = 0.0 if denom == 0 else 2 * (p - p * s) / denom
    feasibility = {
        "SA": sa_rate_n2(p, p_s) <= eta,
        "CA": p <= eta,
    }
    if period_d is not None:
        feasibility["uniform"] = 1.0 / period_d <= eta
    return OptimizationResult(p_star=p_star, p_error_star=p_err, eta=eta, feasibility=feasibility)


def rs_vs_ca_threshold(source: SourceModel, p_s: float) -> float:
    """Sampling probability above which RS has lower error than CA (N=3)."""
    if source.n_states != 3:
        raise NoClosedForm("the RS/CA threshold is known for N=3 only")
    p = source.p_change
    denom = 1.0 - p_s * (1.0 - 2.0 * p)
    return math.inf if denom == 0 else 2.0 * p / denom
