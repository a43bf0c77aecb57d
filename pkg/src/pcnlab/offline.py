"""Exact offline optimum (OFF) for the bidirectional channel problem.

OFF opens the channel once with an initial split ``(f_left, f_right)`` and
then, per transaction, rejects it, accepts it, or rebalances toward the sender
and accepts.  It may also decline to open a channel at all and reject
everything.  The DP runs on integers scaled by the lcm of the fee
denominators so costs stay exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import _kernels
from .core import (
    ChannelState,
    CostLedger,
    CostParams,
    Direction,
    PcnError,
    Transaction,
    TransactionStream,
    apply_accept,
    format_money,
)

DEFAULT_MAX_S = 2000
DEFAULT_MAX_T = 200


class BudgetExceeded(PcnError):
    pass


class NonIntegerAmount(PcnError):
    pass


class CapExceeded(PcnError):
    pass


@dataclass(frozen=True)
class DpBounds:
    S: int

    def __post_init__(self):
        if self.S < 0:
            raise ValueError("S must be >= 0")


@dataclass(frozen=True)
class Decision:
    i: int  # 1-based transaction index
    action: str  # "accept" | "reject" | "rebalance"
    amount: int | None = None  # rebalanced coins, only for "rebalance" (then accept)

    def to_dict(self) -> dict:
        d = {"i": self.i, "action": self.action}
        if self.amount is not None:
            d["amount"] = str(self.amount)
        return d


@dataclass(frozen=True)
class OfflineSolution:
    total_cost: Fraction
    initial_funds_left: int
    initial_funds_right: int
    opened_channel: bool
    decisions: tuple[Decision, ...]

    @property
    def funds(self) -> int:
        return self.initial_funds_left + self.initial_funds_right

    @property
    def rebalanced_amount(self) -> int:
        return sum(d.amount for d in self.decisions if d.action == "rebalance")

    @property
    def accepted_count(self) -> int:
        return sum(1 for d in self.decisions if d.action != "reject")

    def to_dict(self) -> dict:
        return {
            "cost": format_money(self.total_cost),
            "f_left": str(self.initial_funds_left),
            "f_right": str(self.initial_funds_right),
            "opened": self.opened_channel,
            "decisions": [d.to_dict() for d in self.decisions],
        }


@dataclass(frozen=True)
class PrefixOptima:
    """OFF's cost and locked funds for every prefix X_0 .. X_t."""

    costs: tuple[Fraction, ...]
    funds: tuple[int, ...]

    def __len__(self):
        return len(self.costs)


@dataclass
class _Scaled:
    unit: int
    amounts: np.ndarray
    is_ltr: np.ndarray
    rej: np.ndarray
    crs: int
    cf2s: int
    f1s: int


def _scale(stream: TransactionStream, params: CostParams) -> _Scaled:
    unit = math.lcm(params.R.denominator, params.f1.denominator, params.f2.denominator)
    for tx in stream:
        if not isinstance(tx.amount, int):
            raise NonIntegerAmount(f"amount {tx.amount!r} is not an integer")
    amounts = np.array(stream.amounts, dtype=np.int64)
    is_ltr = np.array([tx.direction is Direction.LTR for tx in stream], dtype=np.bool_)
    r_s = int(params.R * unit)
    f2_s = int(params.f2 * unit)
    rej = amounts * r_s + f2_s
    return _Scaled(unit, amounts, is_ltr, rej, params.C * r_s, params.C * f2_s, int(params.f1 * unit))


def dp_bound(stream: TransactionStream, params: CostParams) -> DpBounds:
    """Largest channel capacity OFF could profitably lock."""
    by_volume = stream.total()
    reject_all = sum((params.R * tx.amount + params.f2 for tx in stream), Fraction(0))
    by_fees = math.floor(reject_all - params.f1)
    return DpBounds(max(0, min(by_volume, by_fees)))


def _check_budget(stream, bounds, max_S, max_t):
    if bounds.S > max_S:
        raise BudgetExceeded(f"DP bound S={bounds.S} exceeds cap {max_S}")
    if len(stream) > max_t:
        raise BudgetExceeded(f"stream length {len(stream)} exceeds cap {max_t}")


def prefix_optima(
    stream: TransactionStream,
    params: CostParams,
    bounds: DpBounds | None = None,
    *,
    max_S: int = DEFAULT_MAX_S,
    max_t: int = DEFAULT_MAX_T,
    backend: str | None = None,
) -> PrefixOptima:
    """OFF's optimum on every prefix from a single forward sweep.

    The bound for the whole stream dominates the bound of every prefix, and
    ties are broken toward the smallest capacity, so each entry equals a
    standalone solve of that prefix.
    """
    bounds = bounds or dp_bound(stream, params)
    _check_budget(stream, bounds, max_S, max_t)
    sc = _scale(stream, params)
    best, best_cap, _ = _kernels.dp_forward(
        sc.amounts, sc.is_ltr, sc.rej, sc.crs, sc.cf2s, sc.unit, sc.f1s, bounds.S, backend=backend
    )
    no_channel = np.concatenate(([0], np.cumsum(sc.rej)))
    costs, funds = [], []
    for i in range(len(stream) + 1):
        # ties go to opening the channel
        if int(best[i]) <= int(no_channel[i]):
            costs.append(Fraction(int(best[i]), sc.unit))
            funds.append(int(best_cap[i]))
        else:
            costs.append(Fraction(int(no_channel[i]), sc.unit))
            funds.append(0)
    return PrefixOptima(tuple(costs), tuple(funds))


def _backtrack(layers: np.ndarray, sc: _Scaled, cap: int) -> tuple[int, list[Decision]]:
    t = layers.shape[0] - 1
    fl = int(np.argmin(layers[t]))
    decisions: list[Decision] = []
    for i in range(t, 0, -1):
        x = int(sc.amounts[i - 1])
        ltr = bool(sc.is_ltr[i - 1])
        val = int(layers[i, fl])
        prev = layers[i - 1]
        if val == int(prev[fl]) + int(sc.rej[i - 1]):
            decisions.append(Decision(i, "reject"))
            continue
        if ltr:
            if fl + x <= cap and val == int(prev[fl + x]):
                decisions.append(Decision(i, "accept"))
                fl = fl + x
                continue
            for a in range(0, fl + x):
                if val == int(prev[a]) + sc.crs * (fl + x - a) + sc.cf2s:
                    decisions.append(Decision(i, "rebalance", fl + x - a))
                    fl = a
                    break
            else:
                raise AssertionError("DP backtrack failed")
        else:
            if fl >= x and val == int(prev[fl - x]):
                decisions.append(Decision(i, "accept"))
                fl = fl - x
                continue
            for a in range(fl - x + 1, cap + 1):
                if val == int(prev[a]) + sc.crs * (a - fl + x) + sc.cf2s:
                    decisions.append(Decision(i, "rebalance", a - fl + x))
                    fl = a
                    break
            else:
                raise AssertionError("DP backtrack failed")
    decisions.reverse()
    return fl, decisions


def dp_solve(
    stream: TransactionStream,
    params: CostParams,
    bounds: DpBounds | None = None,
    *,
    max_S: int = DEFAULT_MAX_S,
    max_t: int = DEFAULT_MAX_T,
    backend: str | None = None,
) -> OfflineSolution:
    bounds = bounds or dp_bound(stream, params)
    _check_budget(stream, bounds, max_S, max_t)
    sc = _scale(stream, params)
    best, best_cap, _ = _kernels.dp_forward(
        sc.amounts, sc.is_ltr, sc.rej, sc.crs, sc.cf2s, sc.unit, sc.f1s, bounds.S, backend=backend
    )
    no_channel = int(sc.rej.sum())
    with_channel = int(best[-1])
    if with_channel > no_channel:
        decisions = tuple(Decision(i, "reject") for i in range(1, len(stream) + 1))
        return OfflineSolution(Fraction(no_channel, sc.unit), 0, 0, False, decisions)
    cap = int(best_cap[-1])
    layers = _kernels.dp_single(sc.amounts, sc.is_ltr, sc.rej, sc.crs, sc.cf2s, cap, backend=backend)
    start_left, decisions = _backtrack(layers, sc, cap)
    return OfflineSolution(Fraction(with_channel, sc.unit), start_left, cap - start_left, True, tuple(decisions))


def off_cost(stream: TransactionStream, params: CostParams, **kw) -> Fraction:
    return dp_solve(stream, params, **kw).total_cost


def funds_of(stream: TransactionStream, params: CostParams, **kw) -> int:
    return dp_solve(stream, params, **kw).funds


def replay(solution: OfflineSolution, stream: TransactionStream, params: CostParams) -> CostLedger:
    """Re-run OFF's decisions through the channel model.

    Raises InsufficientBalance if the decisions are infeasible.
    """
    ledger = CostLedger()
    if not solution.opened_channel:
        for d, tx in zip(solution.decisions, stream):
            if d.action != "reject":
                raise AssertionError("no-channel solution must reject everything")
            ledger.record_reject(params, tx.amount)
        return ledger
    state = ChannelState(solution.initial_funds_left, solution.initial_funds_right)
    ledger.record_recharge(params, solution.funds)
    for d, tx in zip(solution.decisions, stream):
        if d.action == "reject":
            ledger.record_reject(params, tx.amount)
            continue
        if d.action == "rebalance":
            ledger.record_rebalance(params, d.amount)
            if tx.direction is Direction.LTR:
                state = ChannelState(state.bal_left + d.amount, state.bal_right - d.amount)
            else:
                state = ChannelState(state.bal_left - d.amount, state.bal_right + d.amount)
        state = apply_accept(state, tx)
        ledger.record_accept()
    return ledger


def brute_force_offline(
    stream: TransactionStream,
    params: CostParams,
    *,
    max_t: int = 6,
    max_S: int = 16,
) -> Fraction:
    """Exhaustive search over OFF's choices, in exact Fractions.

    Tries every initial split with capacity up to one coin above the stream
    volume, and per transaction: reject, accept (if affordable), or move every
    possible integer amount from the receiver to the sender and accept.
    Memoised on (index, balances), so it is a forward search over the real
    channel dynamics and shares no code with the DP.
    """
    txs: Sequence[Transaction] = tuple(stream)
    if len(txs) > max_t:
        raise CapExceeded(f"t={len(txs)} > max_t={max_t}")
    top = stream.total() + 1
    if top > max_S:
        raise CapExceeded(f"search capacity {top} > max_S={max_S}")

    rej = [params.R * tx.amount + params.f2 for tx in txs]
    no_channel = sum(rej, Fraction(0))

    @lru_cache(maxsize=None)
    def go(i: int, left: int, right: int) -> Fraction:
        if i == len(txs):
            return Fraction(0)
        tx = txs[i]
        sender, receiver = (left, right) if tx.direction is Direction.LTR else (right, left)

        def after(s: int, r: int) -> Fraction:
            return go(i + 1, s, r) if tx.direction is Direction.LTR else go(i + 1, r, s)

        best = rej[i] + go(i + 1, left, right)
        if sender >= tx.amount:
            best = min(best, after(sender - tx.amount, receiver + tx.amount))
        for m in range(1, receiver + 1):
            s, r = sender + m, receiver - m
            if s >= tx.amount:
                cost = params.C * (params.R * m + params.f2)
                best = min(best, cost + after(s - tx.amount, r + tx.amount))
        return best

    best = no_channel
    for cap in range(top + 1):
        for left in range(cap + 1):
            best = min(best, params.f1 + cap + go(0, left, cap - left))
    return best
