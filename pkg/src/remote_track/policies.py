"""Joint sampling/transmission policies.

A sampled slot is transmitted in the same slot, so a single decision covers
both actions.  Only the semantics-aware policy looks at the reconstruction
``x_hat``; it relies on ACK/NACK feedback to know it.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

from .process import ChannelModel, SourceModel


class NoClosedForm(LookupError):
    """No analytical expression is known for this case; simulate instead."""


class Policy(str, enum.Enum):
    UNIFORM = "uniform"
    CHANGE_AWARE = "change_aware"
    SEMANTICS_AWARE = "semantics_aware"
    RANDOMIZED_STATIONARY = "randomized_stationary"

    @property
    def short(self) -> str:
        return _SHORT[self]

    @classmethod
    def parse(cls, value: "str | Policy") -> "Policy":
        if isinstance(value, Policy):
            return value
        key = str(value).strip().lower().replace("-", "_")
        if key in _ALIASES:
            return _ALIASES[key]
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown policy {value!r}") from None

    @property
    def needs_feedback(self) -> bool:
        return self is Policy.SEMANTICS_AWARE


_SHORT = {
    Policy.UNIFORM: "uniform",
    Policy.CHANGE_AWARE: "CA",
    Policy.SEMANTICS_AWARE: "SA",
    Policy.RANDOMIZED_STATIONARY: "RS",
}
_ALIASES = {
    "ca": Policy.CHANGE_AWARE,
    "sa": Policy.SEMANTICS_AWARE,
    "rs": Policy.RANDOMIZED_STATIONARY,
    "randomized": Policy.RANDOMIZED_STATIONARY,
}


@dataclass(frozen=True)
class PolicyConfig:
    kind: Policy
    period_d: int = 1
    p_sample: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", Policy.parse(self.kind))
        if self.kind is Policy.UNIFORM and (int(self.period_d) != self.period_d or self.period_d < 1):
            raise ValueError(f"uniform policy needs an integer period_d >= 1, got {self.period_d!r}")
        if self.kind is Policy.RANDOMIZED_STATIONARY and not (0.0 <= self.p_sample <= 1.0):
            raise ValueError(f"p_sample must lie in [0, 1], got {self.p_sample!r}")

    @classmethod
    def uniform(cls, period_d: int) -> "PolicyConfig":
        return cls(Policy.UNIFORM, period_d=period_d)

    @classmethod
    def change_aware(cls) -> "PolicyConfig":
        return cls(Policy.CHANGE_AWARE)

    @classmethod
    def semantics_aware(cls) -> "PolicyConfig":
        return cls(Policy.SEMANTICS_AWARE)

    @classmethod
    def randomized(cls, p_sample: float) -> "PolicyConfig":
        return cls(Policy.RANDOMIZED_STATIONARY, p_sample=p_sample)


@dataclass(frozen=True)
class PolicyContext:
    """What the transmitter knows when deciding at ``slot`` (= t + 1)."""

    prev_x: int
    next_x: int
    x_hat: int
    slot: int
    feedback_available: bool = True


# (prev_x, next_x, x_hat, slot, draw) -> sample?
Decider = Callable[[int, int, int, int, float], bool]


def make_decider(config: PolicyConfig, feedback_available: bool = True) -> Decider:
    """Return the per-slot decision rule for ``config``.

    The simulator calls this directly in its inner loop; ``decide_sample`` is
    the same rule behind the context-object interface.
    """
    kind = config.kind
    if kind is Policy.UNIFORM:
        d = int(config.period_d)
        return lambda prev_x, next_x, x_hat, slot, u: slot % d == 0
    if kind is Policy.CHANGE_AWARE:
        return lambda prev_x, next_x, x_hat, slot, u: next_x != prev_x
    if kind is Policy.SEMANTICS_AWARE:
        if not feedback_available:
            raise ValueError("semantics-aware policy requires ACK/NACK feedback")
        # synced: react to a source change; erroneous: sample unless the
        # source has moved onto the current reconstruction.
        return lambda prev_x, next_x, x_hat, slot, u: (
            next_x != prev_x if prev_x == x_hat else next_x != x_hat
        )
    p_sample = config.p_sample
    return lambda prev_x, next_x, x_hat, slot, u: u < p_sample


def decide_sample(config: PolicyConfig, ctx: PolicyContext, random_draw: float) -> bool:
    decide = make_decider(config, ctx.feedback_available)
    return decide(ctx.prev_x, ctx.next_x, ctx.x_hat, ctx.slot, random_draw)


def sampling_rate(config: PolicyConfig, source: SourceModel, channel: ChannelModel) -> float:
    """Long-run fraction of slots in which a sample is taken.

    Raises ``NoClosedForm`` for the semantics-aware policy with N > 2.
    """
    kind = config.kind
    p = source.p_change
    if kind is Policy.RANDOMIZED_STATIONARY:
        return config.p_sample
    if kind is Policy.UNIFORM:
        return 1.0 / config.period_d
    if kind is Policy.CHANGE_AWARE:
        return (source.n_states - 1) * p
    if source.n_states == 2:
        p_s = channel.p_s
        denom = 2 * p + p_s - 2 * p * p_s
        return 0.0 if denom == 0 else p / denom
    raise NoClosedForm(f"no closed-form sampling rate for {kind.value} with N={source.n_states}")
