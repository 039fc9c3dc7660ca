"""Time-slotted Monte Carlo simulation of sampling, erasure and reconstruction.

Each slot consumes three uniforms from a PCG64 stream, in this order: source
transition, policy draw, channel draw.  The draws are taken even when unused
so that the stream position depends only on the slot index.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .policies import Policy, PolicyConfig, make_decider
from .process import ChannelModel, CostMatrix, SourceModel

_CHUNK = 1 << 16
MAX_HORIZON = 10**10


@dataclass(frozen=True)
class SimulationConfig:
    source: SourceModel
    channel: ChannelModel
    policy: PolicyConfig
    horizon_slots: int = 10**6
    seed: int = 0
    memory_kappa: float = 2.0
    memory_horizon_n: int = 10
    cost_matrix: Optional[CostMatrix] = None
    burn_in: int = 1000

    def __post_init__(self):
        if int(self.horizon_slots) != self.horizon_slots or self.horizon_slots < 1:
            raise ValueError(f"horizon_slots must be a positive integer, got {self.horizon_slots!r}")
        if self.horizon_slots + self.burn_in > MAX_HORIZON:
            raise OverflowError(f"horizon of {self.horizon_slots + self.burn_in} slots exceeds {MAX_HORIZON}")
        if self.burn_in < 0:
            raise ValueError("burn_in must be nonnegative")
        if not (0 <= int(self.seed) < 2**64):
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.memory_kappa <= 0:
            raise ValueError("memory_kappa must be positive")
        if int(self.memory_horizon_n) != self.memory_horizon_n or self.memory_horizon_n < 1:
            raise ValueError("memory_horizon_n must be a positive integer")
        if self.cost_matrix is not None and self.cost_matrix.n_states != self.source.n_states:
            raise ValueError("cost matrix size does not match the number of source states")

    def replace(self, **changes) -> "SimulationConfig":
        from dataclasses import replace

        return replace(self, **changes)


@dataclass
class MetricsReport:
    """Empirical time averages over the measured window of ``slots`` slots."""

    slots: int
    p_error: float
    variance: float
    avg_consecutive_error: float
    cost_memory_error: float
    cost_actuation_error: float
    sampling_rate: float
    success_rate: float
    consecutive_histogram: dict = field(default_factory=dict)
    joint_occupancy: np.ndarray = None
    error_transitions: np.ndarray = None

    @property
    def standard_error(self) -> float:
        """Binomial standard error of ``p_error`` (ignores autocorrelation)."""
        return math.sqrt(self.p_error * (1.0 - self.p_error) / self.slots)


def run(config: SimulationConfig) -> MetricsReport:
    source = config.source
    n = source.n_states
    q = source.p_stay
    p = source.p_change
    p_s = config.channel.p_s
    decide = make_decider(config.policy)
    top = n - 2

    kappa_pow = [0.0] + [float(config.memory_kappa) ** x for x in range(1, config.memory_horizon_n + 1)]
    mem_n = config.memory_horizon_n
    costs = (config.cost_matrix.costs if config.cost_matrix is not None else 1.0 - np.eye(n)).tolist()

    joint = [[0] * n for _ in range(n)]
    trans = [[0] * n for _ in range(n)]
    hist: Counter = Counter()
    n_err = 0
    n_sampled = 0
    n_decoded = 0
    run_len = 0  # length of the current erroneous run, including burn-in slots
    win_run = 0  # same, counting measured slots only
    sum_run = 0
    mem_cost = 0.0
    act_cost = 0.0

    x = 0
    x_hat = 0
    err = 0
    burn_in = config.burn_in
    total = burn_in + config.horizon_slots
    rng = np.random.Generator(np.random.PCG64(int(config.seed)))

    t = 0
    while t < total:
        m = min(_CHUNK, total - t)
        draws = rng.random((m, 3)).tolist()
        for u_src, u_pol, u_ch in draws:
            t += 1
            # source transition X_{t-1} -> X_t (fixed interval partition)
            if u_src < q or p == 0.0:
                nxt = x
            else:
                k = int((u_src - q) / p)
                if k > top:
                    k = top
                nxt = k if k < x else k + 1
            sampled = decide(x, nxt, x_hat, t, u_pol)
            if sampled and u_ch < p_s:
                x_hat = nxt
                decoded = True
            else:
                decoded = False
            x = nxt
            new_err = x - x_hat if x >= x_hat else x_hat - x
            if new_err:
                run_len += 1
            else:
                run_len = 0
            if t > burn_in:
                trans[err][new_err] += 1
                joint[x][x_hat] += 1
                if sampled:
                    n_sampled += 1
                    if decoded:
                        n_decoded += 1
                if new_err:
                    n_err += 1
                    win_run += 1
                    sum_run += run_len
                    if run_len <= mem_n:
                        mem_cost += kappa_pow[run_len]
                    act_cost += costs[x][x_hat]
                elif win_run:
                    hist[win_run] += 1
                    win_run = 0
            err = new_err
    if win_run:
        hist[win_run] += 1

    slots = config.horizon_slots
    p_error = n_err / slots
    joint_occ = np.array(joint, dtype=float) / slots
    return MetricsReport(
        slots=slots,
        p_error=p_error,
        variance=p_error - p_error * p_error,
        avg_consecutive_error=sum_run / slots,
        cost_memory_error=mem_cost / slots,
        cost_actuation_error=act_cost / slots,
        sampling_rate=n_sampled / slots,
        success_rate=n_decoded / n_sampled if n_sampled else math.nan,
        consecutive_histogram=dict(sorted(hist.items())),
        joint_occupancy=joint_occ,
        error_transitions=np.array(trans, dtype=np.int64),
    )


@dataclass(frozen=True)
class ErrorChainEstimate:
    """Empirical transition frequencies of the error level ``|X - X_hat|``.

    Rows never visited are NaN and ``known[i]`` is False.
    """

    matrix: np.ndarray
    visits: np.ndarray
    known: np.ndarray

    def standard_errors(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.sqrt(self.matrix * (1.0 - self.matrix) / self.visits[:, None])


def error_chain_from_counts(counts: np.ndarray) -> ErrorChainEstimate:
    counts = np.asarray(counts, dtype=float)
    visits = counts.sum(axis=1)
    known = visits > 0
    matrix = np.full(counts.shape, np.nan)
    matrix[known] = counts[known] / visits[known, None]
    return ErrorChainEstimate(matrix=matrix, visits=visits, known=known)


def estimate_error_chain(config: SimulationConfig) -> ErrorChainEstimate:
    return error_chain_from_counts(run(config).error_transitions)


def consecutive_params_from_counts(counts: np.ndarray) -> tuple[Optional[float], Optional[float]]:
    """Aggregate error-level transitions into (p_0e, p_ee); None when unvisited."""
    counts = np.asarray(counts)
    from_sync = counts[0].sum()
    from_err = counts[1:].sum()
    p_0e = counts[0, 1:].sum() / from_sync if from_sync else None
    p_ee = counts[1:, 1:].sum() / from_err if from_err else None
    return (None if p_0e is None else float(p_0e), None if p_ee is None else float(p_ee))


def estimate_consecutive_params(config: SimulationConfig) -> tuple[Optional[float], Optional[float]]:
    return consecutive_params_from_counts(run(config).error_transitions)


def replicate(config: SimulationConfig, replications: int) -> list[MetricsReport]:
    """Independent runs with seeds ``seed, seed + 1, ...``."""
    return [run(config.replace(seed=config.seed + r)) for r in range(replications)]


__all__ = [
    "SimulationConfig",
    "MetricsReport",
    "ErrorChainEstimate",
    "run",
    "replicate",
    "estimate_error_chain",
    "estimate_consecutive_params",
    "error_chain_from_counts",
    "consecutive_params_from_counts",
    "Policy",
]
