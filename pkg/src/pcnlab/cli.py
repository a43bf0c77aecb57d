"""Command-line entry point: ``pcnlab <command> [options]``.

Every option can also come from a flat TOML file given with ``--config``;
explicit flags win over the file, and the file wins over built-in defaults.

Exit codes: 0 ok, 2 usage or configuration error, 3 resource budget
exceeded, 4 output I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Sequence

try:
    import tomllib  # type: ignore[import-not-found]
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .core import CostParams, PcnError, StreamFormatError, TransactionStream, UnsupportedParams, parse_money
from .experiments import (
    DEFAULT_GRID,
    POLICIES,
    RAW_COLUMNS,
    TABLE_POLICIES,
    RunMetrics,
    SweepSpec,
    _dispatch,
    _fmt,
    _metric_cells,
    compare,
    sweep,
)
from .generators import GridTooCoarse, StreamConfig, adversary_epoch_stream, adversary_epsilon_stream, sample_stream
from .funds import prefix_funds_bidirectional
from .netgraph import ParseError, cycle_histogram, load_edge_list
from .offline import DEFAULT_MAX_S, DEFAULT_MAX_T, BudgetExceeded, CapExceeded, dp_solve
from .online import HeuristicParams

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_BUDGET = 3
EXIT_IO = 4


class UsageError(Exception):
    pass


class OutputError(Exception):
    pass


# ---------------------------------------------------------------------------
# option table
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Opt:
    name: str  # dest and TOML key
    flag: str
    convert: Callable[[Any], Any]
    default: Any
    help: str


def _money(v) -> Fraction:
    try:
        return parse_money(str(v))
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"not a number: {v!r}") from None


def _int(v) -> int:
    try:
        if isinstance(v, bool):
            raise ValueError
        return int(str(v))
    except ValueError:
        raise UsageError(f"not an integer: {v!r}") from None


def _float(v) -> float:
    try:
        return float(v)
    except (TypeError, ValueError):
        raise UsageError(f"not a number: {v!r}") from None


def _str(v) -> str:
    return str(v)


COST_OPTS = [
    Opt("R", "--R", _money, Fraction(0), "per-coin fee rate R"),
    Opt("f1", "--f1", _money, Fraction(3), "on-chain recharge fee f1"),
    Opt("f2", "--f2", _money, Fraction(2), "base forwarding fee f2"),
    Opt("C", "--C", _int, 2, "rebalancing cycle length minus one"),
]
STREAM_OPTS = [
    Opt("sigma", "--sigma", _float, 3.0, "folded-normal standard deviation"),
    Opt("p", "--p", _float, 0.5, "probability of a left-to-right transaction"),
    Opt("length", "--length", _int, 50, "transactions per stream"),
    Opt("seeds", "--seeds", _int, 50, "number of seeded streams"),
    Opt("first_seed", "--first-seed", _int, 0, "first seed; seeds are consecutive"),
]
ALPHA = Opt("alpha", "--alpha", _money, Fraction(2), "ON-II recharge laxity alpha (>= 1)")
JOBS = Opt("jobs", "--jobs", _int, 1, "worker processes for seed-parallel runs")
CAPS = [
    Opt("max_S", "--max-S", _int, DEFAULT_MAX_S, "DP capacity budget"),
    Opt("max_t", "--max-t", _int, DEFAULT_MAX_T, "DP stream-length budget"),
]


def _add_opts(p: argparse.ArgumentParser, opts: Sequence[Opt]) -> None:
    for o in opts:
        shown = _fmt(o.default) if isinstance(o.default, Fraction) else o.default
        text = o.help if "(default:" in o.help else f"{o.help} (default: {shown})"
        p.add_argument(o.flag, dest=o.name, default=None, metavar=o.name.upper(), help=text)


def _resolve(args: argparse.Namespace, opts: Sequence[Opt], config: dict) -> dict:
    out = {}
    for o in opts:
        raw = getattr(args, o.name, None)
        if raw is None:
            raw = config.get(o.name, o.default)
        out[o.name] = o.convert(raw) if raw is not None else None
    return out


def _load_config(path: str | None, allowed: Sequence[str]) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as e:
        raise UsageError(f"bad config file {path}: {e}") from None
    for k, v in data.items():
        if isinstance(v, dict):
            raise UsageError(f"config must be flat; table [{k}] not allowed")
        if k not in allowed:
            raise UsageError(f"unknown config key {k!r}")
    return data


def _params(vals: dict) -> CostParams:
    try:
        return CostParams(R=vals["R"], f1=vals["f1"], f2=vals["f2"], C=vals["C"])
    except ValueError as e:
        raise UsageError(str(e)) from None


def _stream_cfg(vals: dict, seed: int) -> StreamConfig:
    try:
        return StreamConfig(vals["sigma"], vals["p"], vals["length"], seed)
    except ValueError as e:
        raise UsageError(str(e)) from None


def _heuristic(vals: dict) -> HeuristicParams:
    try:
        return HeuristicParams(vals["alpha"])
    except ValueError as e:
        raise UsageError(str(e)) from None


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text, encoding="utf-8", newline="\n")
    except OSError as e:
        raise OutputError(f"cannot write {path}: {e}") from None


def _read_stream(path: str) -> TransactionStream:
    try:
        return TransactionStream.read_csv(path)
    except FileNotFoundError:
        raise UsageError(f"stream file not found: {path}") from None
    except (StreamFormatError, ValueError, UnicodeDecodeError) as e:
        raise UsageError(f"bad stream file {path}: {e}") from None


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


SIM_OPTS = COST_OPTS + STREAM_OPTS + [ALPHA] + CAPS + [
    Opt("policy", "--policy", _str, "on", f"policy: {', '.join(POLICIES)}"),
    Opt("stream_file", "--stream-file", _str, None, "run on this stream CSV instead of generated streams (default: none)"),
    Opt("trace", "--trace", _str, "trace.jsonl", "JSON-lines trace output"),
    Opt("metrics", "--metrics", _str, "metrics.csv", "per-stream metrics CSV output"),
]


def cmd_simulate(args, config) -> int:
    v = _resolve(args, SIM_OPTS, config)
    params = _params(v)
    policy = v["policy"]
    if policy not in POLICIES:
        raise UsageError(f"unknown policy {policy!r}")
    h = _heuristic(v)
    if v["stream_file"]:
        streams = [(0, _read_stream(v["stream_file"]))]
    else:
        streams = [(s, sample_stream(_stream_cfg(v, s)))
                   for s in range(v["first_seed"], v["first_seed"] + v["seeds"])]
    trace_lines, rows = [], []
    for seed, stream in streams:
        sol = dp_solve(stream, params, max_S=v["max_S"], max_t=v["max_t"])
        if policy == "off":
            m = RunMetrics.from_offline(sol)
        else:
            funds = None
            if policy in ("on", "on-i", "on-ii"):
                funds = prefix_funds_bidirectional(stream, params, max_S=v["max_S"], max_t=v["max_t"])
            run = _dispatch(stream, params, policy, h, funds)
            m = RunMetrics.from_run(run, sol.total_cost)
            for step in run.trace:
                trace_lines.append(json.dumps({"seed": seed, **step.to_dict()}))
        rows.append([str(params.C), _fmt(params.f2), policy, str(seed)] + _metric_cells(m))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RAW_COLUMNS)
    w.writerows(rows)
    _write(v["metrics"], buf.getvalue())
    _write(v["trace"], "".join(line + "\n" for line in trace_lines))
    return EXIT_OK


def _parse_grid_point(text: str) -> tuple[int, Fraction]:
    point = {}
    for part in text.split(":"):
        key, sep, val = part.partition("=")
        if not sep or key.strip() not in ("C", "f2"):
            raise UsageError(f"bad grid point {text!r}; expected C=<int>:f2=<fee>")
        point[key.strip()] = val.strip()
    if set(point) != {"C", "f2"}:
        raise UsageError(f"grid point {text!r} must set both C and f2")
    return _int(point["C"]), _money(point["f2"])


CMP_OPTS = [o for o in COST_OPTS if o.name in ("R", "f1")] + STREAM_OPTS + [ALPHA, JOBS] + CAPS + [
    Opt("grid", "--grid", _str, None, "grid points 'C=2:f2=2', comma-separated (default: C in {2,8} x f2 in {0.5,2})"),
    Opt("policies", "--policies", _str, ",".join(TABLE_POLICIES), "comma-separated policies"),
    Opt("out", "--out", _str, "compare.csv", "raw CSV path; aggregates go to <stem>.agg.csv"),
]


def _policies(text: str) -> tuple[str, ...]:
    out = tuple(p.strip() for p in text.split(",") if p.strip())
    if not out:
        raise UsageError("no policies given")
    for p in out:
        if p not in POLICIES:
            raise UsageError(f"unknown policy {p!r}")
    return out


def _agg_path(out: str) -> str:
    p = Path(out)
    stem = p.name[: -len(".csv")] if p.name.endswith(".csv") else p.name
    return str(p.with_name(stem + ".agg.csv"))


def cmd_compare(args, config) -> int:
    v = _resolve(args, CMP_OPTS, config)
    grid = DEFAULT_GRID if not v["grid"] else tuple(_parse_grid_point(g) for g in v["grid"].split(",") if g.strip())
    if not grid:
        raise UsageError("empty grid")
    for C, f2 in grid:
        _params({**v, "C": C, "f2": f2})
    result = compare(
        grid,
        f1=v["f1"],
        R=v["R"],
        seeds=range(v["first_seed"], v["first_seed"] + v["seeds"]),
        length=v["length"],
        sigma=v["sigma"],
        p_ltr=v["p"],
        policies=_policies(v["policies"]),
        alpha=_heuristic(v).alpha,
        jobs=v["jobs"],
        max_S=v["max_S"],
    )
    _write(v["out"], result.raw_csv())
    _write(_agg_path(v["out"]), result.agg_csv())
    return EXIT_OK


SWEEP_OPTS = COST_OPTS[:3] + [Opt("C", "--C", _int, 4, "rebalancing cycle length minus one")] + STREAM_OPTS + [ALPHA, JOBS] + CAPS + [
    Opt("param", "--param", _str, "sigma", "swept parameter: sigma or p"),
    Opt("values", "--grid", _str, None, "grid 'start:stop:step' (inclusive) or comma list "
        "(default: 3:19:2 for sigma, 0.1:0.9:0.1 for p)"),
    Opt("policies", "--policies", _str, ",".join(TABLE_POLICIES), "comma-separated policies"),
    Opt("out", "--out", _str, "sweep.csv", "output CSV"),
]


def _parse_values(text: str) -> tuple[float, ...]:
    text = text.strip()
    if not text:
        return ()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"bad range {text!r}; expected start:stop:step")
        start, stop, step = (_money(x) for x in parts)
        if step <= 0:
            raise UsageError("grid step must be positive")
        out, x = [], start
        while x <= stop:
            out.append(float(x))
            x += step
        return tuple(out)
    return tuple(_float(x) for x in text.split(",") if x.strip())


def cmd_sweep(args, config) -> int:
    v = _resolve(args, SWEEP_OPTS, config)
    if v["param"] not in ("sigma", "p"):
        raise UsageError(f"--param must be sigma or p, got {v['param']!r}")
    if v["values"] is None:
        v["values"] = "3:19:2" if v["param"] == "sigma" else "0.1:0.9:0.1"
    values = _parse_values(v["values"])
    if not values:
        raise UsageError("empty sweep grid")
    params = _params(v)
    try:
        spec = SweepSpec(
            v["param"],
            values,
            base=_stream_cfg(v, 0),
            params=params,
            policies=_policies(v["policies"]),
            seeds=tuple(range(v["first_seed"], v["first_seed"] + v["seeds"])),
            alpha=_heuristic(v).alpha,
        )
    except ValueError as e:
        raise UsageError(str(e)) from None
    _write(v["out"], sweep(spec, jobs=v["jobs"], max_S=v["max_S"]).to_csv())
    return EXIT_OK


ADV_OPTS = [
    Opt("variant", "--variant", _str, "epoch", "epoch or epsilon"),
    Opt("A", "--A", _int, 8, "epoch: size of the phase-0 transaction"),
    Opt("c", "--c", _int, 1, "epoch: branching parameter c"),
    Opt("C", "--C", _int, 4, "epoch: rebalancing cycle parameter C"),
    Opt("f1", "--f1", _money, Fraction(3), "epsilon: on-chain fee f1"),
    Opt("epsilon", "--epsilon", _money, Fraction(3), "epsilon: transactions have size epsilon/3"),
    Opt("length", "--length", _int, 10, "epsilon: number of transactions"),
    Opt("out", "--out", _str, "-", "stream CSV output (default: stdout)"),
]


def cmd_adversary(args, config) -> int:
    v = _resolve(args, ADV_OPTS, config)
    try:
        if v["variant"] == "epoch":
            stream = adversary_epoch_stream(v["A"], v["c"], v["C"])
        elif v["variant"] == "epsilon":
            stream = adversary_epsilon_stream(v["f1"], v["epsilon"], v["length"])
        else:
            raise UsageError(f"unknown variant {v['variant']!r}; choose epoch or epsilon")
    except (GridTooCoarse, ValueError) as e:
        raise UsageError(str(e)) from None
    _write(v["out"], stream.to_csv())
    return EXIT_OK


CYC_OPTS = [
    Opt("input", "--input", _str, None, "edge-list CSV 'node_a,node_b' (# comments allowed) (default: none, required)"),
    Opt("out", "--out", _str, "-", "histogram CSV output (default: stdout)"),
]


def cmd_cycles(args, config) -> int:
    v = _resolve(args, CYC_OPTS, config)
    if not v["input"]:
        raise UsageError("--input is required")
    try:
        g = load_edge_list(v["input"])
    except FileNotFoundError:
        raise UsageError(f"input file not found: {v['input']}") from None
    except (ParseError, UnicodeDecodeError) as e:
        raise UsageError(f"bad edge list: {e}") from None
    if g.self_loops_dropped:
        print(f"warning: dropped {g.self_loops_dropped} self-loop(s)", file=sys.stderr)
    _write(v["out"], cycle_histogram(g).to_csv())
    return EXIT_OK


DP_OPTS = COST_OPTS + CAPS + [
    Opt("stream_file", "--stream-file", _str, None, "stream CSV to solve (default: none, required)"),
    Opt("out", "--out", _str, "-", "solution JSON output (default: stdout)"),
]


def cmd_dp_exact(args, config) -> int:
    v = _resolve(args, DP_OPTS, config)
    if not v["stream_file"]:
        raise UsageError("--stream-file is required")
    stream = _read_stream(v["stream_file"])
    sol = dp_solve(stream, _params(v), max_S=v["max_S"], max_t=v["max_t"])
    _write(v["out"], json.dumps(sol.to_dict()) + "\n")
    return EXIT_OK


COMMANDS = {
    "simulate": (cmd_simulate, SIM_OPTS, "run one policy on generated or file-supplied streams"),
    "compare": (cmd_compare, CMP_OPTS, "OFF/ON/ON-I/ON-II comparison table"),
    "sweep": (cmd_sweep, SWEEP_OPTS, "mean cost per policy over a sigma or p grid"),
    "adversary": (cmd_adversary, ADV_OPTS, "emit an adversarial stream CSV"),
    "cycles": (cmd_cycles, CYC_OPTS, "shortest-cycle histogram of a channel graph"),
    "dp-exact": (cmd_dp_exact, DP_OPTS, "exact offline optimum of a stream as JSON"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pcnlab", description="Payment-channel admission-control laboratory.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True
    for name, (_, opts, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", default=None, metavar="FILE", help="flat TOML file; flags override its keys")
        _add_opts(p, opts)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    fn, opts, _ = COMMANDS[args.command]
    try:
        config = _load_config(args.config, [o.name for o in opts])
        return fn(args, config)
    except (UsageError, UnsupportedParams, CapExceeded) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except BudgetExceeded as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BUDGET
    except OutputError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except PcnError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
