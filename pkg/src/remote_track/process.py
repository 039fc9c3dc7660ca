"""Source, channel and joint-state models for the remote tracking system.

The source is an N-state symmetric Markov chain: it keeps its state with
probability ``q`` and jumps to each of the other ``N - 1`` states with
probability ``p``.  The channel is a per-slot erasure: a transmitted sample is
decoded with probability ``p_s`` and discarded otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

_TOL = 1e-12


def db_to_linear(value_db: float) -> float:
    return 10.0 ** (value_db / 10.0)


def dbm_to_watts(value_dbm: float) -> float:
    return 10.0 ** ((value_dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class SourceModel:
    """Symmetric N-state DTMC.

    ``p_stay`` is derived from ``q + (N - 1) p = 1``.
    """

    n_states: int
    p_change: float
    p_stay: float = field(init=False)

    def __post_init__(self):
        n = self.n_states
        if not isinstance(n, (int, np.integer)) or n < 2:
            raise ValueError(f"n_states must be an integer >= 2, got {n!r}")
        p = float(self.p_change)
        p_max = 1.0 / (n - 1)
        if not (-_TOL <= p <= p_max + _TOL):
            raise ValueError(f"p_change must lie in [0, 1/(N-1)] = [0, {p_max:.6g}], got {p}")
        p = min(max(p, 0.0), p_max)
        q = 1.0 - (n - 1) * p
        object.__setattr__(self, "n_states", int(n))
        object.__setattr__(self, "p_change", p)
        object.__setattr__(self, "p_stay", max(q, 0.0))

    def transition_row(self, state: int) -> np.ndarray:
        row = np.full(self.n_states, self.p_change)
        row[state] = self.p_stay
        return row

    def transition_matrix(self) -> np.ndarray:
        n = self.n_states
        return np.full((n, n), self.p_change) + (self.p_stay - self.p_change) * np.eye(n)


@dataclass(frozen=True)
class ChannelModel:
    """Erasure channel with success probability ``p_s``.

    In ``direct`` mode ``p_s`` is given.  In ``physical`` mode it is computed
    from the Rayleigh-fading link budget
    ``p_s = exp(-gamma * noise_var / (tx_power * distance**-pathloss_exp))``.
    All physical quantities are linear (watts, metres, linear SNR).
    """

    mode: str = "direct"
    p_s: Optional[float] = None
    tx_power: Optional[float] = None
    noise_var: Optional[float] = None
    distance: Optional[float] = None
    pathloss_exp: Optional[float] = None
    snr_threshold: Optional[float] = None

    def __post_init__(self):
        if self.mode == "direct":
            if self.p_s is None or not (0.0 <= self.p_s <= 1.0):
                raise ValueError(f"direct channel needs p_s in [0, 1], got {self.p_s!r}")
            object.__setattr__(self, "p_s", float(self.p_s))
        elif self.mode == "physical":
            missing = [
                name
                for name in ("tx_power", "noise_var", "distance", "pathloss_exp", "snr_threshold")
                if getattr(self, name) is None
            ]
            if missing:
                raise ValueError(f"physical channel is missing {', '.join(missing)}")
            if self.tx_power <= 0:
                raise ValueError("tx_power must be positive")
            if self.noise_var < 0:
                raise ValueError("noise_var must be nonnegative")
            if self.distance <= 0:
                raise ValueError("distance must be positive")
            if self.pathloss_exp <= 2:
                raise ValueError("pathloss exponent must exceed 2")
            if self.snr_threshold < 0:
                raise ValueError("snr_threshold must be nonnegative (linear)")
            received = self.tx_power * self.distance ** (-self.pathloss_exp)
            p_s = math.exp(-self.snr_threshold * self.noise_var / received)
            object.__setattr__(self, "p_s", p_s)
        else:
            raise ValueError(f"unknown channel mode {self.mode!r}")

    @classmethod
    def direct(cls, p_s: float) -> "ChannelModel":
        return cls(mode="direct", p_s=p_s)

    @classmethod
    def physical(
        cls,
        tx_power: float,
        noise_var: float,
        distance: float,
        pathloss_exp: float,
        snr_threshold: float,
    ) -> "ChannelModel":
        return cls(
            mode="physical",
            tx_power=tx_power,
            noise_var=noise_var,
            distance=distance,
            pathloss_exp=pathloss_exp,
            snr_threshold=snr_threshold,
        )

    def with_threshold(self, snr_threshold: float) -> "ChannelModel":
        """Same link budget at a different (linear) SNR threshold."""
        if self.mode != "physical":
            raise ValueError("only physical channels have an SNR threshold")
        return ChannelModel.physical(
            self.tx_power, self.noise_var, self.distance, self.pathloss_exp, snr_threshold
        )


# Link budget that reproduces the reported operating points p_s(0 dB) = 0.922
# and p_s(10 dB) = 0.445: r = 30 m, beta = 4, P_tx = 1 mW, noise 1e-10 W.
REFERENCE_LINK = dict(tx_power=1e-3, noise_var=1e-10, distance=30.0, pathloss_exp=4.0)


def reference_channel(gamma_db: float) -> ChannelModel:
    return ChannelModel.physical(snr_threshold=db_to_linear(gamma_db), **REFERENCE_LINK)


@dataclass(frozen=True)
class SystemState:
    x: int
    x_hat: int
    slot: int = 0

    @property
    def error(self) -> int:
        return abs(self.x - self.x_hat)

    @property
    def synced(self) -> bool:
        return self.x == self.x_hat


@dataclass(frozen=True)
class CostMatrix:
    """Actuation cost ``C[i, j]`` of acting on ``j`` when the source is in ``i``."""

    costs: np.ndarray

    def __post_init__(self):
        c = np.array(self.costs, dtype=float)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError(f"cost matrix must be square, got shape {c.shape}")
        if np.any(np.diag(c) != 0):
            raise ValueError("cost matrix diagonal must be zero")
        if np.any(c < 0):
            raise ValueError("cost matrix entries must be nonnegative")
        c.setflags(write=False)
        object.__setattr__(self, "costs", c)

    @property
    def n_states(self) -> int:
        return self.costs.shape[0]

    @classmethod
    def uniform(cls, n_states: int, cost: float = 1.0) -> "CostMatrix":
        return cls(cost * (1.0 - np.eye(n_states)))


def success_probability(channel: ChannelModel) -> float:
    return channel.p_s


def source_step(model: SourceModel, current: int, random_draw: float) -> int:
    """Advance the source one slot using a single uniform draw.

    ``[0, q)`` keeps the state; the rest of the unit interval is split into
    ``N - 1`` cells of width ``p`` assigned to the other states in ascending
    order.
    """
    q = model.p_stay
    if random_draw < q or model.p_change == 0.0:
        return current
    k = int((random_draw - q) / model.p_change)
    if k > model.n_states - 2:
        k = model.n_states - 2
    return k if k < current else k + 1


def channel_outcome(channel: ChannelModel, random_draw: float) -> bool:
    """True when the sample is decoded; a failed sample is simply dropped."""
    return random_draw < channel.p_s
