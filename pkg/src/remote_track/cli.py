"""Command-line entry point: ``remote-track <command> [options]``."""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from . import experiments
from .config import ConfigError, ExperimentSpec, parse_config
from .policies import NoClosedForm, Policy

COMMANDS = ("analyze", "simulate", "optimize", "sweep",
            "reproduce-table1", "reproduce-table2", "reproduce-fig3")


def _floats(text: str) -> list:
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text: str) -> list:
    return [int(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="remote-track",
        description="Remote reconstruction of a Markov source over an erasure channel.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def common(p: argparse.ArgumentParser, horizon: int = 10**6) -> None:
        p.add_argument("-o", "--output", help="CSV output path")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--horizon", type=int, default=None, help=f"simulated slots (default {horizon})")

    for name in ("analyze", "simulate", "optimize", "sweep"):
        p = sub.add_parser(name, help=f"{name} a parameter grid")
        common(p)
        p.add_argument("-c", "--config", help="key = value configuration file")
        p.add_argument("--n-states", type=_ints)
        p.add_argument("--p", type=_floats, help="comma list of change probabilities")
        p.add_argument("--p-s", type=_floats, help="comma list of success probabilities")
        p.add_argument("--gamma-db", type=_floats, help="comma list of SNR thresholds in dB")
        p.add_argument("--policy", type=lambda s: [Policy.parse(x) for x in s.split(",")])
        p.add_argument("--p-sample", type=_floats)
        p.add_argument("--period-d", type=_ints)
        p.add_argument("--kappa", type=_floats)
        p.add_argument("--memory-n", "--n", dest="memory_n", type=_ints)
        p.add_argument("--eta", type=_floats)
        p.add_argument("--replications", type=int)

    for name in ("reproduce-table1", "reproduce-table2"):
        p = sub.add_parser(name, help=f"regenerate {name.split('-')[1]}")
        common(p)

    p = sub.add_parser("reproduce-fig3", help="cost of memory error against gamma")
    common(p)
    p.add_argument("--kappa", type=float, default=2.0)
    p.add_argument("--n", dest="memory_n", type=int, default=10)
    p.add_argument("--p-sample", type=float, default=0.7)
    p.add_argument("--p", dest="p_values", type=_floats, default=experiments.FIG3_P,
                   help="comma list of p (q = 1 - 2p)")
    p.add_argument("--gamma-db", type=_floats, default=experiments.FIG3_GAMMA_DB)
    p.add_argument("--period-d", type=int, default=experiments.TABLE1_PERIOD)
    p.add_argument("--replications", type=int, default=3)
    return parser


_OVERRIDES = ("n_states", "p", "p_s", "gamma_db", "policy", "p_sample", "period_d",
              "kappa", "memory_n", "eta", "replications", "seed", "horizon", "output")


def _spec_from_args(args: argparse.Namespace) -> ExperimentSpec:
    spec = parse_config(args.config) if args.config else ExperimentSpec()
    spec.mode = args.command
    for name in _OVERRIDES:
        value = getattr(args, name, None)
        if value is None:
            continue
        if name == "p_s":
            spec.gamma_db = None
        elif name == "gamma_db":
            spec.p_s = None
        setattr(spec, name, value)
    if args.p_s is not None and args.gamma_db is not None:
        raise ConfigError("give either --p-s or --gamma-db, not both")
    return spec


def _summary(table: experiments.ResultTable, columns: Sequence[str], limit: int = 40) -> str:
    shown = [c for c in columns if c in table.header]
    lines = ["  ".join(f"{c:>14}" for c in shown)]
    for row in table.rows[:limit]:
        cells = []
        for c in shown:
            v = row.get(c)
            if isinstance(v, float):
                cells.append(f"{v:>14.4f}")
            else:
                cells.append(f"{experiments._cell(v):>14}")
        lines.append("  ".join(cells))
    if len(table.rows) > limit:
        lines.append(f"... {len(table.rows) - limit} more rows")
    return "\n".join(lines)


def _run(args: argparse.Namespace) -> tuple[experiments.ResultTable, list]:
    cmd = args.command
    seed = 1 if args.seed is None else args.seed
    horizon = 10**6 if args.horizon is None else args.horizon
    if cmd == "reproduce-table1":
        return experiments.table1(seed, horizon), ["p", "p_s", "semantics_aware", "change_aware",
                                                    "uniform", "randomized_stationary"]
    if cmd == "reproduce-table2":
        return experiments.table2(seed, horizon), ["p", "semantics_aware", "change_aware", "uniform",
                                                    "rsc", "rs", "feasible_semantics_aware",
                                                    "feasible_change_aware"]
    if cmd == "reproduce-fig3":
        table = experiments.fig3(seed, horizon, args.kappa, args.memory_n, args.p_sample,
                                 args.p_values, args.gamma_db, args.period_d, args.replications)
        return table, ["p", "gamma_db", "p_s", "policy", "cost_memory_error",
                       "cost_memory_error_closed_form"]
    spec = _spec_from_args(args)
    args.output = args.output or spec.output
    if cmd == "analyze":
        return experiments.analyze(spec), ["n_states", "p", "p_s", "policy", "p_error", "sampling_rate"]
    if cmd == "optimize":
        return experiments.optimize(spec), ["p", "p_s", "eta", "p_star", "p_error_star",
                                            "feasible_sa", "feasible_ca"]
    table = experiments.sweep(spec) if cmd == "sweep" else experiments.simulate(spec)
    return table, ["n_states", "p", "p_s", "policy", "replication", "p_error", "p_error_closed_form",
                   "feasible"]


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        table, columns = _run(args)
    except (ConfigError, NoClosedForm, ValueError, OverflowError) as exc:
        print(f"remote-track: error: {exc}", file=sys.stderr)
        return 2
    output = args.output
    if output:
        try:
            experiments.write_csv(table, output)
        except OSError as exc:
            print(f"remote-track: error: cannot write {output}: {exc.strerror or exc}", file=sys.stderr)
            return 1
    print(_summary(table, columns))
    if output:
        print(f"wrote {len(table.rows)} rows to {output}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
