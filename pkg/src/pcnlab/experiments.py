"""Experiment harness: per-run metrics, the OFF/ON/ON-I/ON-II comparison,
parameter sweeps and per-stream competitive-ratio checks.

One DP sweep per stream serves both as the funds oracle for the online
policies and as OFF's cost, so a bidirectional run costs one DP plus one
backtrack.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterable, Sequence

from scipy.stats import spearmanr

from .core import CostParams, TransactionStream, format_money, parse_money, require_unidirectional
from .funds import off_unidirectional_reject
from .generators import StreamConfig, sample_stream
from .offline import OfflineSolution, dp_solve, prefix_optima
from .online import (
    GOLDEN,
    HeuristicParams,
    PolicyRun,
    accept_all_policy,
    bucketed_policy,
    level_count,
    on_i_policy,
    on_ii_policy,
    reject_aware_policy,
)

POLICIES = ("off", "on", "on-i", "on-ii", "accept-all", "reject-aware")
TABLE_POLICIES = ("off", "on", "on-i", "on-ii")
BIDIRECTIONAL = ("on", "on-i", "on-ii")


@dataclass(frozen=True)
class RunMetrics:
    cost: Fraction
    locked_funds: Fraction
    accept_rate: Fraction
    rebalanced_amount: Fraction
    recharge_count: int
    off_cost: Fraction
    ratio: Fraction | None  # None when off_cost == 0

    @classmethod
    def from_run(cls, run: PolicyRun, off_cost: Fraction) -> "RunMetrics":
        led = run.ledger
        n = led.accepted_count + led.rejected_count
        return cls(
            cost=led.total,
            locked_funds=run.capacity,
            accept_rate=Fraction(led.accepted_count, n) if n else Fraction(0),
            rebalanced_amount=led.rebalanced_amount,
            recharge_count=led.recharge_count,
            off_cost=off_cost,
            ratio=led.total / off_cost if off_cost > 0 else None,
        )

    @classmethod
    def from_offline(cls, sol: OfflineSolution) -> "RunMetrics":
        n = len(sol.decisions)
        return cls(
            cost=sol.total_cost,
            locked_funds=Fraction(sol.funds),
            accept_rate=Fraction(sol.accepted_count, n) if n else Fraction(0),
            rebalanced_amount=Fraction(sol.rebalanced_amount),
            recharge_count=1 if sol.opened_channel else 0,
            off_cost=sol.total_cost,
            ratio=Fraction(1) if sol.total_cost > 0 else None,
        )


def run_policy(
    stream: TransactionStream,
    params: CostParams,
    policy: str,
    heuristic: HeuristicParams | None = None,
    *,
    solution: OfflineSolution | None = None,
    funds: Sequence[Fraction] | None = None,
    max_S: int | None = None,
) -> RunMetrics:
    """Run one policy on one stream and measure it against the DP optimum.

    ``solution``/``funds`` let callers share one DP across several policies.
    """
    kw = {} if max_S is None else {"max_S": max_S}
    if solution is None:
        solution = dp_solve(stream, params, **kw)
    if policy == "off":
        return RunMetrics.from_offline(solution)
    if policy in BIDIRECTIONAL and funds is None:
        funds = [Fraction(a) for a in prefix_optima(stream, params, **kw).funds[1:]]
    run = _dispatch(stream, params, policy, heuristic, funds)
    return RunMetrics.from_run(run, solution.total_cost)


def _dispatch(stream, params, policy, heuristic, funds) -> PolicyRun:
    if policy == "on":
        return bucketed_policy(stream, params, funds)
    if policy == "on-i":
        return on_i_policy(stream, params, funds)
    if policy == "on-ii":
        return on_ii_policy(stream, params, heuristic or HeuristicParams(), funds)
    if policy == "accept-all":
        return accept_all_policy(stream, params)
    if policy == "reject-aware":
        return reject_aware_policy(stream, params)
    raise ValueError(f"unknown policy {policy!r}; choose from {', '.join(POLICIES)}")


def run_policies(
    stream: TransactionStream,
    params: CostParams,
    policies: Sequence[str],
    heuristic: HeuristicParams | None = None,
    max_S: int | None = None,
) -> list[RunMetrics]:
    kw = {} if max_S is None else {"max_S": max_S}
    solution = dp_solve(stream, params, **kw)
    funds = None
    if any(p in BIDIRECTIONAL for p in policies):
        funds = [Fraction(a) for a in prefix_optima(stream, params, **kw).funds[1:]]
    return [run_policy(stream, params, p, heuristic, solution=solution, funds=funds) for p in policies]


# ---------------------------------------------------------------------------
# aggregation
# ---------------------------------------------------------------------------


def _mean(values: Sequence[Fraction]) -> Fraction:
    return sum(values, Fraction(0)) / len(values) if values else Fraction(0)


@dataclass(frozen=True)
class AggregateMetrics:
    runs: int
    cost: Fraction
    locked_funds: Fraction
    accept_rate: Fraction
    rebalanced_amount: Fraction
    recharge_count: Fraction
    off_cost: Fraction
    ratio: Fraction | None  # mean over runs with a defined ratio
    config: dict = field(default_factory=dict, compare=False)

    @classmethod
    def of(cls, metrics: Sequence[RunMetrics], config: dict | None = None) -> "AggregateMetrics":
        ratios = [m.ratio for m in metrics if m.ratio is not None]
        return cls(
            runs=len(metrics),
            cost=_mean([m.cost for m in metrics]),
            locked_funds=_mean([m.locked_funds for m in metrics]),
            accept_rate=_mean([m.accept_rate for m in metrics]),
            rebalanced_amount=_mean([m.rebalanced_amount for m in metrics]),
            recharge_count=_mean([Fraction(m.recharge_count) for m in metrics]),
            off_cost=_mean([m.off_cost for m in metrics]),
            ratio=_mean(ratios) if ratios else None,
            config=dict(config or {}),
        )


def _fmt(v) -> str:
    if v is None:
        return "NA"
    if isinstance(v, (int, Fraction)):
        return format_money(v)
    return str(v)


def _parse(text: str) -> Fraction | None:
    return None if text == "NA" else parse_money(text)


RAW_COLUMNS = (
    "param_C", "param_f2", "policy", "seed", "cost", "locked_funds",
    "accept_rate", "rebalanced", "recharges", "off_cost", "ratio",
)
AGG_COLUMNS = (
    "param_C", "param_f2", "policy", "runs", "cost", "locked_funds",
    "accept_rate", "rebalanced", "recharges", "off_cost", "ratio",
)
SWEEP_COLUMNS = (
    "sweep_param", "value", "policy", "runs", "cost", "locked_funds",
    "accept_rate", "rebalanced", "recharges", "off_cost", "ratio",
)


def _metric_cells(m) -> list[str]:
    return [
        _fmt(m.cost), _fmt(m.locked_funds), _fmt(m.accept_rate), _fmt(m.rebalanced_amount),
        _fmt(m.recharge_count), _fmt(m.off_cost), _fmt(m.ratio),
    ]


def _to_csv(header: Sequence[str], rows: Iterable[Sequence[str]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


@dataclass(frozen=True)
class RawRow:
    C: int
    f2: Fraction
    policy: str
    seed: int
    metrics: RunMetrics


@dataclass(frozen=True)
class AggRow:
    C: int
    f2: Fraction
    policy: str
    agg: AggregateMetrics


@dataclass
class CompareResult:
    raw: list[RawRow]
    aggregates: list[AggRow]

    def raw_csv(self) -> str:
        return _to_csv(
            RAW_COLUMNS,
            ([str(r.C), _fmt(r.f2), r.policy, str(r.seed)] + _metric_cells(r.metrics) for r in self.raw),
        )

    def agg_csv(self) -> str:
        return _to_csv(
            AGG_COLUMNS,
            ([str(a.C), _fmt(a.f2), a.policy, str(a.agg.runs)] + _metric_cells(a.agg) for a in self.aggregates),
        )

    def lookup(self, C: int, f2, policy: str) -> AggregateMetrics:
        f2 = Fraction(f2)
        for a in self.aggregates:
            if a.C == C and a.f2 == f2 and a.policy == policy:
                return a.agg
        raise KeyError((C, f2, policy))


def parse_agg_csv(text: str) -> list[AggRow]:
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != AGG_COLUMNS:
        raise ValueError(f"unexpected header {reader.fieldnames!r}")
    out = []
    for row in reader:
        agg = AggregateMetrics(
            runs=int(row["runs"]),
            cost=_parse(row["cost"]),
            locked_funds=_parse(row["locked_funds"]),
            accept_rate=_parse(row["accept_rate"]),
            rebalanced_amount=_parse(row["rebalanced"]),
            recharge_count=_parse(row["recharges"]),
            off_cost=_parse(row["off_cost"]),
            ratio=_parse(row["ratio"]),
        )
        out.append(AggRow(int(row["param_C"]), parse_money(row["param_f2"]), row["policy"], agg))
    return out


# ---------------------------------------------------------------------------
# seed-parallel execution
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Job:
    stream_cfg: StreamConfig
    params: CostParams
    policies: tuple[str, ...]
    alpha: Fraction
    max_S: int | None


def _run_job(job: _Job) -> list[RunMetrics]:
    stream = sample_stream(job.stream_cfg)
    return run_policies(stream, job.params, job.policies, HeuristicParams(job.alpha), job.max_S)


def _map_jobs(jobs: Sequence[_Job], n_workers: int) -> list[list[RunMetrics]]:
    """Results come back in job order whatever the worker count."""
    if n_workers <= 1 or len(jobs) <= 1:
        return [_run_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n_workers) as ex:
        return list(ex.map(_run_job, jobs, chunksize=max(1, len(jobs) // (4 * n_workers))))


def seeds_for(n_seeds: int, first_seed: int = 0) -> list[int]:
    return list(range(first_seed, first_seed + n_seeds))


# ---------------------------------------------------------------------------
# comparison table
# ---------------------------------------------------------------------------


DEFAULT_GRID = ((2, Fraction(1, 2)), (2, Fraction(2)), (8, Fraction(1, 2)), (8, Fraction(2)))


def compare(
    grid: Sequence[tuple[int, Fraction]] = DEFAULT_GRID,
    *,
    f1=3,
    R=0,
    seeds: Sequence[int] = tuple(range(50)),
    length: int = 50,
    sigma: float = 3.0,
    p_ltr: float = 0.5,
    policies: Sequence[str] = TABLE_POLICIES,
    alpha=2,
    jobs: int = 1,
    max_S: int | None = None,
) -> CompareResult:
    policies = tuple(policies)
    work = []
    for C, f2 in grid:
        params = CostParams(R=R, f1=f1, f2=f2, C=C)
        for s in seeds:
            work.append(_Job(StreamConfig(sigma, p_ltr, length, s), params, policies, Fraction(alpha), max_S))
    results = _map_jobs(work, jobs)
    raw, aggs = [], []
    it = iter(results)
    for C, f2 in grid:
        per_policy: dict[str, list[RunMetrics]] = {p: [] for p in policies}
        for s in seeds:
            for p, m in zip(policies, next(it)):
                per_policy[p].append(m)
                raw.append(RawRow(C, Fraction(f2), p, s, m))
        for p in policies:
            cfg = {"C": C, "f2": Fraction(f2), "f1": Fraction(f1), "R": Fraction(R), "policy": p}
            aggs.append(AggRow(C, Fraction(f2), p, AggregateMetrics.of(per_policy[p], cfg)))
    return CompareResult(raw, aggs)


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepSpec:
    param: str  # "sigma" | "p"
    grid: tuple[float, ...]
    base: StreamConfig = StreamConfig()
    params: CostParams = CostParams(R=0, f1=3, f2=2, C=4)
    policies: tuple[str, ...] = TABLE_POLICIES
    seeds: tuple[int, ...] = tuple(range(50))
    alpha: Fraction = Fraction(2)

    def __post_init__(self):
        if self.param not in ("sigma", "p"):
            raise ValueError(f"sweep parameter must be 'sigma' or 'p', got {self.param!r}")
        grid = tuple(self.grid)
        if not grid:
            raise ValueError("sweep grid is empty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("sweep grid must be strictly increasing")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "policies", tuple(self.policies))
        object.__setattr__(self, "seeds", tuple(self.seeds))

    def stream_config(self, value: float, seed: int) -> StreamConfig:
        if self.param == "sigma":
            return replace(self.base, sigma=float(value), seed=seed)
        return replace(self.base, p_ltr=float(value), seed=seed)


@dataclass(frozen=True)
class SweepRow:
    param: str
    value: float
    policy: str
    agg: AggregateMetrics


@dataclass
class SweepResult:
    spec: SweepSpec
    rows: list[SweepRow]

    def to_csv(self) -> str:
        return _to_csv(
            SWEEP_COLUMNS,
            ([r.param, repr(float(r.value)), r.policy, str(r.agg.runs)] + _metric_cells(r.agg) for r in self.rows),
        )

    def series(self, policy: str) -> list[tuple[float, Fraction]]:
        return [(r.value, r.agg.cost) for r in self.rows if r.policy == policy]


def sweep(spec: SweepSpec, jobs: int = 1, max_S: int | None = None) -> SweepResult:
    work = [
        _Job(spec.stream_config(v, s), spec.params, spec.policies, spec.alpha, max_S)
        for v in spec.grid
        for s in spec.seeds
    ]
    results = iter(_map_jobs(work, jobs))
    rows = []
    for v in spec.grid:
        per_policy: dict[str, list[RunMetrics]] = {p: [] for p in spec.policies}
        for _ in spec.seeds:
            for p, m in zip(spec.policies, next(results)):
                per_policy[p].append(m)
        for p in spec.policies:
            rows.append(SweepRow(spec.param, v, p, AggregateMetrics.of(per_policy[p], {spec.param: v})))
    return SweepResult(spec, rows)


def spearman(xs: Sequence[float], ys: Sequence[float]) -> float:
    return float(spearmanr(xs, ys).statistic)


# ---------------------------------------------------------------------------
# competitive checks
# ---------------------------------------------------------------------------


def off_accept_all(stream: TransactionStream, params: CostParams) -> Fraction:
    """Reference OFF without rejection: one up-front recharge of the volume."""
    require_unidirectional(stream)
    return params.f1 + stream.total() if len(stream) else Fraction(0)


def off_reject_aware(stream: TransactionStream, params: CostParams) -> Fraction:
    return off_unidirectional_reject(stream, params)[1]


def within_golden_bound(on: Fraction, off: Fraction) -> bool:
    """Exact test of ``on <= (2 + (sqrt 5 - 1)/2) * off`` for off >= 0.

    With z = 2*on - 3*off the bound reads z <= sqrt(5) * off.
    """
    z = 2 * on - 3 * off
    return z <= 0 or z * z <= 5 * off * off


@dataclass(frozen=True)
class PolicyBound:
    label: str
    reference: Callable[[TransactionStream, CostParams], Fraction]
    holds: Callable[[Fraction, Fraction], bool]


def policy_bound(policy: str, params: CostParams) -> PolicyBound:
    if policy == "accept-all":
        return PolicyBound("2", off_accept_all, lambda on, off: on <= 2 * off)
    if policy == "reject-aware":
        return PolicyBound("2+(sqrt5-1)/2", off_reject_aware, within_golden_bound)
    if policy == "on":
        c = 7 + 2 * level_count(params.C)
        return PolicyBound(str(c), lambda s, p: dp_solve(s, p).total_cost, lambda on, off: on <= c * off)
    raise ValueError(f"no proven bound for policy {policy!r}")


@dataclass(frozen=True)
class CompetitiveReport:
    policy: str
    bound: str
    n_streams: int
    checked: int  # streams with a positive reference cost
    worst_ratio: Fraction | None
    violations: tuple[int, ...]  # seeds

    @property
    def ok(self) -> bool:
        return not self.violations


def competitive_check(
    params: CostParams,
    n_streams: int,
    stream_config: StreamConfig,
    policy: str,
    *,
    first_seed: int = 0,
) -> CompetitiveReport:
    """Worst cost/reference ratio over seeded streams, plus every seed where
    the proven bound fails (exact comparison)."""
    bound = policy_bound(policy, params)
    worst = None
    violations = []
    checked = 0
    for seed in seeds_for(n_streams, first_seed):
        stream = sample_stream(replace(stream_config, seed=seed))
        on = _dispatch(stream, params, policy, None, None).cost
        off = bound.reference(stream, params)
        if not bound.holds(on, off):
            violations.append(seed)
        if off > 0:
            checked += 1
            r = on / off
            worst = r if worst is None or r > worst else worst
    return CompetitiveReport(policy, bound.label, n_streams, checked, worst, tuple(violations))


def golden_bound_float() -> float:
    return 2 + float(GOLDEN)


def write_text(path: str | Path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8", newline="\n")
