"""Experiment drivers: grid evaluation, sweeps and the published tables/figure.

Every driver returns a ``ResultTable``; ``write_csv`` serializes it with full
double precision.  Simulated cells record the seed they were run with.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Optional, Sequence

import numpy as np

from . import analytics
from .config import ExperimentSpec, GridPoint
from .policies import NoClosedForm, Policy, PolicyConfig, sampling_rate
from .process import ChannelModel, SourceModel, reference_channel
from .simulator import SimulationConfig, run

CLOSED = "closed-form"
SIMULATED = "simulated"

TABLE1_ROWS = [(0.1, 0.922), (0.1, 0.445), (0.3, 0.922), (0.3, 0.445)]
TABLE1_P_SAMPLE = 0.7
TABLE1_PERIOD = 5
TABLE2_P = [0.1, 0.3, 0.5, 0.7, 0.9]
TABLE2_P_S = 0.5
TABLE2_ETA = 0.5
TABLE2_PERIOD = 5
FIG3_GAMMA_DB = [0.0, 2.0, 4.0, 6.0, 8.0, 10.0]
FIG3_P = [0.1, 0.3]


@dataclass
class ResultTable:
    header: list
    rows: list = field(default_factory=list)

    def add(self, **row) -> None:
        unknown = set(row) - set(self.header)
        if unknown:
            raise KeyError(f"columns not in header: {sorted(unknown)}")
        self.rows.append(row)

    def column(self, name: str) -> list:
        return [row.get(name) for row in self.rows]


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, Policy):
        return value.value
    return str(value)


def to_csv(table: ResultTable) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.header)
    for row in table.rows:
        writer.writerow([_cell(row.get(col)) for col in table.header])
    return buf.getvalue()


def write_csv(table: ResultTable, path: "str | Path") -> None:
    Path(path).write_text(to_csv(table), encoding="utf-8")


def cell_seed(seed: int, *index: int) -> int:
    """Deterministic 64-bit seed for one simulated cell."""
    return int(np.random.SeedSequence([seed, *index]).generate_state(1, dtype=np.uint64)[0])


def worker_count() -> int:
    raw = os.environ.get("REMOTE_TRACK_THREADS")
    cap = os.cpu_count() or 1
    if not raw:
        return 1
    try:
        return max(1, min(int(raw), cap))
    except ValueError:
        return 1


def _map(fn: Callable, items: Sequence, workers: Optional[int] = None) -> list:
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# -- closed-form evaluation ---------------------------------------------------

def closed_form_metrics(
    policy: PolicyConfig,
    source: SourceModel,
    channel: ChannelModel,
    kappa: float = 2.0,
    memory_n: int = 10,
    costs=None,
) -> dict:
    """Every metric with a known closed form; missing ones are None."""
    out = dict.fromkeys(
        ["p_error", "variance", "avg_consecutive_error", "cost_memory_error",
         "cost_actuation_error", "sampling_rate"]
    )
    kind = policy.kind
    p_s = channel.p_s
    try:
        out["sampling_rate"] = sampling_rate(policy, source, channel)
    except NoClosedForm:
        pass
    if kind is Policy.RANDOMIZED_STATIONARY:
        out["p_error"] = analytics.p_error_rs(source, policy.p_sample, p_s)
        chain = analytics.build_error_chain(source, policy.p_sample, p_s)
        cc = analytics.consecutive_from_chain(chain)
        if cc.p_ee < 1.0:
            out["avg_consecutive_error"] = analytics.avg_consecutive_error(cc)
            out["cost_memory_error"] = analytics.memory_cost(cc, kappa, memory_n)
    elif kind is not Policy.UNIFORM and source.n_states in (2, 3):
        out["p_error"] = analytics.p_error_policy(kind, source, p_s)
    if out["p_error"] is not None:
        out["variance"] = analytics.variance(out["p_error"])
    if kind is not Policy.UNIFORM and source.n_states in (2, 3):
        joint = analytics.joint_stationary(kind, source, policy.p_sample, p_s)
        c = costs if costs is not None else 1.0 - np.eye(source.n_states)
        out["cost_actuation_error"] = analytics.actuation_cost(joint, c)
    return out


METRICS = ["p_error", "variance", "avg_consecutive_error", "cost_memory_error",
           "cost_actuation_error", "sampling_rate"]
POINT_COLUMNS = ["n_states", "p", "q", "p_s", "gamma_db", "policy", "period_d",
                 "p_sample", "kappa", "memory_n", "eta"]


def _point_row(point: GridPoint) -> dict:
    row = dict(
        n_states=point.n_states, p=point.p, gamma_db=point.gamma_db, policy=point.policy,
        period_d=point.period_d, p_sample=point.p_sample, kappa=point.kappa,
        memory_n=point.memory_n, eta=point.eta,
    )
    try:
        row["q"] = point.source().p_stay
        row["p_s"] = point.channel().p_s
    except ValueError:
        row["q"] = None
        row["p_s"] = point.channel_value if point.gamma_db is None else None
    return row


def analyze(spec: ExperimentSpec) -> ResultTable:
    header = POINT_COLUMNS + METRICS + ["method", "feasible", "provenance", "note"]
    table = ResultTable(header)
    for point in spec.points():
        row = _point_row(point)
        source, channel = point.source(), point.channel()
        policy = point.policy_config()
        metrics = closed_form_metrics(policy, source, channel, point.kappa, point.memory_n, point.costs())
        rate = metrics["sampling_rate"]
        missing = [k for k, v in metrics.items() if v is None]
        table.add(
            **row, **metrics, method=CLOSED,
            feasible=None if rate is None else rate <= point.eta,
            provenance=f"analytics[{policy.kind.short}]",
            note=f"no closed form: {' '.join(missing)}" if missing else "",
        )
    return table


# -- simulation ----------------------------------------------------------------

def _simulate_job(job: tuple) -> dict:
    point, seed, horizon, strict = job
    row = _point_row(point)
    try:
        config = SimulationConfig(
            source=point.source(), channel=point.channel(), policy=point.policy_config(),
            horizon_slots=horizon, seed=seed, memory_kappa=point.kappa,
            memory_horizon_n=point.memory_n, cost_matrix=point.costs(),
        )
    except ValueError as exc:
        if strict:
            raise
        return dict(row, feasible=False, note=f"invalid point: {exc}", seed=seed, method=SIMULATED)
    report = run(config)
    row.update({m: getattr(report, m) for m in METRICS})
    row["success_rate"] = report.success_rate
    try:
        row["p_error_closed_form"] = closed_form_metrics(
            config.policy, config.source, config.channel)["p_error"]
    except NoClosedForm:
        row["p_error_closed_form"] = None
    row.update(
        seed=seed, method=SIMULATED, feasible=report.sampling_rate <= point.eta,
        provenance=f"simulator.run(seed={seed})", note="",
    )
    return row


def simulate(spec: ExperimentSpec, strict: bool = True) -> ResultTable:
    """K grid points x R replications, one simulated row each.

    With ``strict=False`` (sweep) invalid points yield a flagged row instead
    of an exception.
    """
    header = (POINT_COLUMNS + ["replication", "seed"] + METRICS
              + ["success_rate", "p_error_closed_form", "method", "feasible", "provenance", "note"])
    jobs, reps = [], []
    for k, point in enumerate(spec.points()):
        for r in range(spec.replications):
            jobs.append((point, cell_seed(spec.seed, k, r), spec.horizon, strict))
            reps.append(r)
    table = ResultTable(header)
    for r, row in zip(reps, _map(_simulate_job, jobs)):
        table.add(replication=r, **row)
    return table


def sweep(spec: ExperimentSpec) -> ResultTable:
    return simulate(spec, strict=False)


def optimize(spec: ExperimentSpec) -> ResultTable:
    header = ["n_states", "p", "q", "p_s", "eta", "p_star", "p_error_star",
              "p_error_sa", "feasible_sa", "feasible_ca", "period_d", "feasible_uniform",
              "method", "provenance"]
    table = ResultTable(header)
    seen = set()
    for point in spec.points():
        key = (point.n_states, point.p, point.channel_value, point.eta, point.period_d)
        if key in seen:
            continue
        seen.add(key)
        source, channel = point.source(), point.channel()
        res = analytics.optimize_rs(source, channel.p_s, point.eta, period_d=point.period_d)
        table.add(
            n_states=source.n_states, p=source.p_change, q=source.p_stay, p_s=channel.p_s,
            eta=point.eta, p_star=res.p_star, p_error_star=res.p_error_star,
            p_error_sa=analytics.p_error_policy(Policy.SEMANTICS_AWARE, source, channel.p_s),
            feasible_sa=res.feasibility["SA"], feasible_ca=res.feasibility["CA"],
            period_d=point.period_d, feasible_uniform=res.feasibility["uniform"],
            method=CLOSED, provenance="analytics.optimize_rs",
        )
    return table


# -- published tables ------------------------------------------------------------

def _uniform_job(job: tuple) -> float:
    n, p, p_s, d, horizon, seed = job
    config = SimulationConfig(SourceModel(n, p), ChannelModel.direct(p_s),
                              PolicyConfig.uniform(d), horizon_slots=horizon, seed=seed)
    return run(config).p_error


def table1(seed: int = 1, horizon: int = 10**6) -> ResultTable:
    """Reconstruction error, N=3, p_sample=0.7; uniform cells simulated with d=5."""
    header = ["p", "q", "p_s", "semantics_aware", "change_aware", "uniform", "randomized_stationary",
              "method_semantics_aware", "method_change_aware", "method_uniform",
              "method_randomized_stationary", "uniform_seed", "provenance"]
    table = ResultTable(header)
    seeds = [cell_seed(seed, k) for k in range(len(TABLE1_ROWS))]
    uniform = _map(_uniform_job, [(3, p, ps, TABLE1_PERIOD, horizon, s)
                                  for (p, ps), s in zip(TABLE1_ROWS, seeds)])
    for (p, p_s), u, s in zip(TABLE1_ROWS, uniform, seeds):
        source = SourceModel(3, p)
        table.add(
            p=p, q=source.p_stay, p_s=p_s,
            semantics_aware=analytics.p_error_policy(Policy.SEMANTICS_AWARE, source, p_s),
            change_aware=analytics.p_error_policy(Policy.CHANGE_AWARE, source, p_s),
            uniform=u,
            randomized_stationary=analytics.p_error_rs(source, TABLE1_P_SAMPLE, p_s),
            method_semantics_aware=CLOSED, method_change_aware=CLOSED,
            method_uniform=SIMULATED, method_randomized_stationary=CLOSED,
            uniform_seed=s,
            provenance=("SA,CA:analytics.p_error_policy; RS:analytics.p_error_rs; "
                        f"uniform:simulator.run(d={TABLE1_PERIOD},T={horizon})"),
        )
    return table


def table2(seed: int = 1, horizon: int = 10**6) -> ResultTable:
    """Constrained minimum error, N=2, p_s=0.5, eta=0.5.

    RS is the unconstrained optimum (sample every slot) and is therefore
    flagged infeasible; RSC is the constrained optimum.
    """
    header = ["p", "q", "semantics_aware", "feasible_semantics_aware", "change_aware",
              "feasible_change_aware", "uniform", "feasible_uniform", "rsc", "rsc_p_star",
              "rs", "feasible_rs", "method_uniform", "uniform_seed", "provenance"]
    table = ResultTable(header)
    seeds = [cell_seed(seed, k) for k in range(len(TABLE2_P))]
    uniform = _map(_uniform_job, [(2, p, TABLE2_P_S, TABLE2_PERIOD, horizon, s)
                                  for p, s in zip(TABLE2_P, seeds)])
    for p, u, s in zip(TABLE2_P, uniform, seeds):
        source = SourceModel(2, p)
        opt = analytics.optimize_rs(source, TABLE2_P_S, TABLE2_ETA, period_d=TABLE2_PERIOD)
        table.add(
            p=p, q=source.p_stay,
            semantics_aware=analytics.p_error_policy(Policy.SEMANTICS_AWARE, source, TABLE2_P_S),
            feasible_semantics_aware=opt.feasibility["SA"],
            change_aware=analytics.p_error_policy(Policy.CHANGE_AWARE, source, TABLE2_P_S),
            feasible_change_aware=opt.feasibility["CA"],
            uniform=u, feasible_uniform=opt.feasibility["uniform"],
            rsc=opt.p_error_star, rsc_p_star=opt.p_star,
            rs=analytics.p_error_rs(source, 1.0, TABLE2_P_S), feasible_rs=1.0 <= TABLE2_ETA,
            method_uniform=SIMULATED, uniform_seed=s,
            provenance=("SA,CA:analytics.p_error_policy; RSC:analytics.optimize_rs; "
                        f"RS:analytics.p_error_rs(p_sample=1); uniform:simulator.run(d={TABLE2_PERIOD},T={horizon})"),
        )
    return table


def _fig3_job(job: tuple) -> float:
    p, gamma_db, kind, p_sample, d, kappa, n, horizon, seed = job
    config = SimulationConfig(
        SourceModel(3, p), reference_channel(gamma_db),
        PolicyConfig(kind, period_d=d, p_sample=p_sample),
        horizon_slots=horizon, seed=seed, memory_kappa=kappa, memory_horizon_n=n,
    )
    return run(config).cost_memory_error


FIG3_POLICIES = [Policy.SEMANTICS_AWARE, Policy.CHANGE_AWARE, Policy.UNIFORM, Policy.RANDOMIZED_STATIONARY]


def fig3(
    seed: int = 1,
    horizon: int = 10**6,
    kappa: float = 2.0,
    memory_n: int = 10,
    p_sample: float = 0.7,
    p_values: Iterable[float] = FIG3_P,
    gamma_db: Iterable[float] = FIG3_GAMMA_DB,
    period_d: int = TABLE1_PERIOD,
    replications: int = 3,
) -> ResultTable:
    """Cost of memory error against the SNR threshold, N=3.

    One row per (p, gamma, policy): the replication mean of the simulated
    cost, plus the closed form where one exists (RS).
    """
    header = ["p", "q", "gamma_db", "p_s", "policy", "cost_memory_error", "std_error",
              "replications", "cost_memory_error_closed_form", "method", "base_seed", "provenance"]
    p_values, gamma_db = list(p_values), list(gamma_db)
    cells, jobs = [], []
    for a, p in enumerate(p_values):
        for b, g in enumerate(gamma_db):
            for c, kind in enumerate(FIG3_POLICIES):
                base = cell_seed(seed, a, b, c)
                cells.append((p, g, kind, base))
                jobs.extend((p, g, kind, p_sample, period_d, kappa, memory_n, horizon,
                             cell_seed(seed, a, b, c, r)) for r in range(replications))
    values = _map(_fig3_job, jobs)
    table = ResultTable(header)
    for idx, (p, g, kind, base) in enumerate(cells):
        vals = np.array(values[idx * replications : (idx + 1) * replications])
        channel = reference_channel(g)
        source = SourceModel(3, p)
        closed = None
        if kind is Policy.RANDOMIZED_STATIONARY:
            cc = analytics.consecutive_from_chain(analytics.build_error_chain(source, p_sample, channel.p_s))
            closed = analytics.memory_cost(cc, kappa, memory_n)
        table.add(
            p=p, q=source.p_stay, gamma_db=g, p_s=channel.p_s, policy=kind,
            cost_memory_error=float(vals.mean()),
            std_error=float(vals.std(ddof=1) / math.sqrt(replications)) if replications > 1 else None,
            replications=replications, cost_memory_error_closed_form=closed,
            method=SIMULATED, base_seed=base,
            provenance=f"simulator.run(T={horizon},kappa={kappa},n={memory_n})"
                       + ("; analytics.memory_cost" if closed is not None else ""),
        )
    return table
