"""Flat ``key = value`` experiment configuration.

Example::

    # two-state source, RS sampling
    n_states = 2
    p = 0.1, 0.3          # comma lists define a grid axis
    p_s = 0.5
    policy = randomized_stationary
    p_sample = 0.5

Channel: give either ``p_s`` (direct) or ``gamma_db`` (physical link budget
built from ``tx_power_dbm``, ``noise_dbm``, ``distance_m``, ``pathloss_exp``),
never both.  Decibel values are converted to linear units here.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Iterator, Optional

from .policies import Policy, PolicyConfig
from .process import ChannelModel, CostMatrix, SourceModel, db_to_linear, dbm_to_watts

MODES = ("analyze", "simulate", "optimize", "sweep", "reproduce")
TARGETS = ("table1", "table2", "fig3", "custom")

# Defaults reproduce p_s = 0.922 at 0 dB and 0.445 at 10 dB.
DEFAULT_LINK = {"tx_power_dbm": 0.0, "noise_dbm": -70.0, "distance_m": 30.0, "pathloss_exp": 4.0}


class ConfigError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def _int(text: str) -> int:
    value = float(text)
    if not value.is_integer():
        raise ValueError(f"expected an integer, got {text!r}")
    return int(value)


def _prob(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"expected a probability in [0, 1], got {text}")
    return value


def _positive(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise ValueError(f"expected a positive number, got {text}")
    return value


def _n_states(text: str) -> int:
    value = _int(text)
    if value < 2:
        raise ValueError(f"n_states must be >= 2, got {value}")
    return value


def _pos_int(text: str) -> int:
    value = _int(text)
    if value < 1:
        raise ValueError(f"expected a positive integer, got {value}")
    return value


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    return value


def _pathloss(text: str) -> float:
    value = float(text)
    if not value > 2:
        raise ValueError(f"pathloss exponent must exceed 2, got {value}")
    return value


def _choice(options):
    def parse(text: str) -> str:
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {text!r}")
        return text

    return parse


# key -> (parser, is_list)
_KEYS: dict[str, tuple[Any, bool]] = {
    "mode": (_choice(MODES), False),
    "target": (_choice(TARGETS), False),
    "n_states": (_n_states, True),
    "p": (_prob, True),
    "p_s": (_prob, True),
    "gamma_db": (float, True),
    "tx_power_dbm": (float, False),
    "noise_dbm": (float, False),
    "distance_m": (_positive, False),
    "pathloss_exp": (_pathloss, False),
    "policy": (lambda s: Policy.parse(s), True),
    "period_d": (_pos_int, True),
    "p_sample": (_prob, True),
    "horizon": (_pos_int, False),
    "seed": (_seed, False),
    "kappa": (_positive, True),
    "memory_n": (_pos_int, True),
    "eta": (_positive, True),
    "cost_matrix": (float, True),
    "replications": (_pos_int, False),
    "output": (str, False),
}


@dataclass
class ExperimentSpec:
    mode: str = "analyze"
    target: str = "custom"
    n_states: list = field(default_factory=lambda: [2])
    p: list = field(default_factory=lambda: [0.1])
    p_s: Optional[list] = None
    gamma_db: Optional[list] = None
    tx_power_dbm: float = DEFAULT_LINK["tx_power_dbm"]
    noise_dbm: float = DEFAULT_LINK["noise_dbm"]
    distance_m: float = DEFAULT_LINK["distance_m"]
    pathloss_exp: float = DEFAULT_LINK["pathloss_exp"]
    policy: list = field(default_factory=lambda: [Policy.RANDOMIZED_STATIONARY])
    period_d: list = field(default_factory=lambda: [5])
    p_sample: list = field(default_factory=lambda: [1.0])
    horizon: int = 10**6
    seed: int = 0
    kappa: list = field(default_factory=lambda: [2.0])
    memory_n: list = field(default_factory=lambda: [10])
    eta: list = field(default_factory=lambda: [1.0])
    cost_matrix: Optional[list] = None
    replications: int = 1
    output: Optional[str] = None

    def __post_init__(self):
        if self.p_s is not None and self.gamma_db is not None:
            raise ConfigError("give either p_s or gamma_db, not both")
        if self.p_s is None and self.gamma_db is None:
            self.p_s = [1.0]

    def channel(self, value: float) -> ChannelModel:
        if self.gamma_db is None:
            return ChannelModel.direct(value)
        return ChannelModel.physical(
            tx_power=dbm_to_watts(self.tx_power_dbm),
            noise_var=dbm_to_watts(self.noise_dbm),
            distance=self.distance_m,
            pathloss_exp=self.pathloss_exp,
            snr_threshold=db_to_linear(value),
        )

    def costs_for(self, n_states: int) -> Optional[CostMatrix]:
        if self.cost_matrix is None:
            return None
        if len(self.cost_matrix) != n_states * n_states:
            raise ValueError(f"cost_matrix has {len(self.cost_matrix)} entries, N={n_states} needs {n_states**2}")
        rows = [self.cost_matrix[i * n_states : (i + 1) * n_states] for i in range(n_states)]
        return CostMatrix(rows)

    def points(self) -> Iterator["GridPoint"]:
        """Grid points in a fixed order (last axis varies fastest)."""
        channel_axis = self.p_s if self.gamma_db is None else self.gamma_db
        for n, p, ch, pol, d, ps_, kappa, mem_n, eta in itertools.product(
            self.n_states, self.p, channel_axis, self.policy, self.period_d,
            self.p_sample, self.kappa, self.memory_n, self.eta,
        ):
            yield GridPoint(self, n, p, ch, pol, d, ps_, kappa, mem_n, eta)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if value is None or (f.name in DEFAULT_LINK and self.gamma_db is None):
                continue
            if isinstance(value, list):
                value = ", ".join(v.value if isinstance(v, Policy) else repr(v) for v in value)
            lines.append(f"{f.name} = {value}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class GridPoint:
    spec: ExperimentSpec
    n_states: int
    p: float
    channel_value: float
    policy: Policy
    period_d: int
    p_sample: float
    kappa: float
    memory_n: int
    eta: float

    @property
    def gamma_db(self) -> Optional[float]:
        return None if self.spec.gamma_db is None else self.channel_value

    def source(self) -> SourceModel:
        return SourceModel(self.n_states, self.p)

    def channel(self) -> ChannelModel:
        return self.spec.channel(self.channel_value)

    def policy_config(self) -> PolicyConfig:
        return PolicyConfig(self.policy, period_d=self.period_d, p_sample=self.p_sample)

    def costs(self) -> Optional[CostMatrix]:
        return self.spec.costs_for(self.n_states)


def _split_list(raw: str) -> list[str]:
    return [item.strip() for item in raw.split(",") if item.strip()]


def parse_config_text(text: str) -> ExperimentSpec:
    values: dict[str, Any] = {}
    where: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, _, rhs = line.partition("=")
        key, rhs = key.strip(), rhs.strip()
        if key not in _KEYS:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in values:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        parser, is_list = _KEYS[key]
        try:
            if is_list:
                items = _split_list(rhs)
                if not items:
                    raise ValueError("empty list")
                values[key] = [parser(item) for item in items]
            else:
                values[key] = parser(rhs)
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}", lineno) from None
        where[key] = lineno

    if "p_s" in values and "gamma_db" in values:
        raise ConfigError("p_s and gamma_db are mutually exclusive", max(where["p_s"], where["gamma_db"]))
    link_keys = [k for k in DEFAULT_LINK if k in values]
    if link_keys and "gamma_db" not in values:
        raise ConfigError(f"{link_keys[0]} only applies with gamma_db", where[link_keys[0]])
    if "cost_matrix" in values:
        flat = values["cost_matrix"]
        n = round(len(flat) ** 0.5)
        lineno = where["cost_matrix"]
        if n * n != len(flat):
            raise ConfigError("cost_matrix must have N*N entries", lineno)
        if "n_states" in values and any(k != n for k in values["n_states"]):
            raise ConfigError(f"cost_matrix is {n}x{n} but n_states = {values['n_states']}", lineno)
        try:
            CostMatrix([flat[i * n : (i + 1) * n] for i in range(n)])
        except ValueError as exc:
            raise ConfigError(f"cost_matrix: {exc}", lineno) from None
    return ExperimentSpec(**values)


def parse_config(path: "str | Path") -> ExperimentSpec:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
    return parse_config_text(text)
