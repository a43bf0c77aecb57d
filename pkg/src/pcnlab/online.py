"""Online admission/recharge/rebalance policies.

Every policy consumes a :class:`TransactionStream` in order and returns a
:class:`PolicyRun` with its cost ledger and per-transaction trace.  On each
arrival the policy first asks the funds oracle for OFF's funds on the prefix
that includes the new transaction, lets its tracker recharge if needed, and
only then decides on the transaction.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Sequence

from .core import (
    ChannelState,
    CostLedger,
    CostParams,
    Direction,
    Transaction,
    TransactionStream,
    UnsupportedParams,
    apply_accept,
    format_money,
    money,
    quantize,
    require_unidirectional,
)
from .funds import (
    RechargeTracker,
    is_small,
    prefix_funds_bidirectional,
    prefix_funds_unidirectional_reject,
)

# (sqrt(5) - 1) / 2 to 20 decimal places
GOLDEN = Fraction(math.isqrt(5 * 10**40) - 10**20, 2 * 10**20)


def ceil_log2(c: int) -> int:
    return (int(c) - 1).bit_length()


def level_count(c: int) -> int:
    """Number of level buckets; at least one."""
    return max(1, ceil_log2(c))


@dataclass
class TraceStep:
    t: int
    amount: int
    direction: Direction
    decision: str  # "accept" | "reject"
    rebalanced: Fraction | None = None
    recharged_to: Fraction | None = None
    cost_delta: Fraction = Fraction(0)
    shortfall: bool = False  # rebalance source could not supply the full target

    def to_dict(self) -> dict:
        d: dict = {
            "t": self.t,
            "amount": self.amount,
            "direction": self.direction.value,
            "decision": self.decision,
        }
        if self.rebalanced is not None:
            d["rebalanced"] = format_money(self.rebalanced)
        if self.recharged_to is not None:
            d["recharged_to"] = format_money(self.recharged_to)
        d["cost_delta"] = format_money(self.cost_delta)
        if self.shortfall:
            d["shortfall"] = True
        return d


@dataclass
class PolicyRun:
    policy: str
    ledger: CostLedger
    trace: list[TraceStep]
    capacity: Fraction = Fraction(0)  # funds locked by recharging, A(X)

    @property
    def cost(self) -> Fraction:
        return self.ledger.total

    def trace_jsonl(self) -> str:
        return "".join(json.dumps(s.to_dict()) + "\n" for s in self.trace)


def _require_r_zero(params: CostParams, name: str) -> None:
    if params.R != 0:
        raise UnsupportedParams(f"{name} requires R = 0, got R = {params.R}")


def _resolve_funds(stream, params, funds):
    if funds is None:
        return prefix_funds_bidirectional(stream, params)
    funds = [money(a) for a in funds]
    if len(funds) != len(stream):
        raise ValueError("funds must have one entry per transaction")
    return funds


# ---------------------------------------------------------------------------
# one-way streams
# ---------------------------------------------------------------------------


def _topup(state: ChannelState, side: Direction, amount: Fraction) -> ChannelState:
    if side is Direction.LTR:
        return ChannelState(state.bal_left + amount, state.bal_right)
    return ChannelState(state.bal_left, state.bal_right + amount)


def accept_all_policy(stream: TransactionStream, params: CostParams) -> PolicyRun:
    """(1, f1)-recharging; every transaction is accepted."""
    require_unidirectional(stream)
    tracker = RechargeTracker(1, params.f1)
    ledger = CostLedger()
    trace = []
    state = ChannelState()
    volume = 0
    for t, tx in enumerate(stream, start=1):
        volume += tx.amount
        step = TraceStep(t, tx.amount, tx.direction, "accept")
        dec = tracker.step(volume)
        if dec.fired:
            step.cost_delta += ledger.record_recharge(params, dec.recharge_to - state.capacity)
            state = _topup(state, tx.direction, dec.recharge_to - state.capacity)
            step.recharged_to = dec.recharge_to
        state = apply_accept(state, tx)
        ledger.record_accept()
        trace.append(step)
    return PolicyRun("accept-all", ledger, trace, state.capacity)


def reject_aware_delta(params: CostParams) -> Fraction:
    return max(quantize(GOLDEN * params.f1), Fraction(1, 1000))


def reject_aware_policy(stream: TransactionStream, params: CostParams) -> PolicyRun:
    """(1, golden*f1)-recharging; accept small transactions while funds last."""
    require_unidirectional(stream)
    tracker = RechargeTracker(1, reject_aware_delta(params))
    ledger = CostLedger()
    trace = []
    state = ChannelState()
    funds = prefix_funds_unidirectional_reject(stream, params)
    for t, (tx, observed) in enumerate(zip(stream, funds), start=1):
        step = TraceStep(t, tx.amount, tx.direction, "reject")
        dec = tracker.step(observed)
        if dec.fired:
            step.cost_delta += ledger.record_recharge(params, dec.recharge_to - state.capacity)
            state = _topup(state, tx.direction, dec.recharge_to - state.capacity)
            step.recharged_to = dec.recharge_to
        if is_small(params, tx.amount) and state.balance(tx.direction) >= tx.amount:
            state = apply_accept(state, tx)
            ledger.record_accept()
            step.decision = "accept"
        else:
            step.cost_delta += ledger.record_reject(params, tx.amount)
        trace.append(step)
    return PolicyRun("reject-aware", ledger, trace, state.capacity)


# ---------------------------------------------------------------------------
# bucketed main algorithm
# ---------------------------------------------------------------------------


class BucketKind(enum.Enum):
    SMALL = "small"
    LEVEL = "level"
    TOO_BIG = "too_big"


@dataclass(frozen=True)
class BucketClass:
    kind: BucketKind
    level: int = 0  # 1-based, only for LEVEL


def classify_bucket(f_tracker: Fraction, C: int, x: Fraction | int) -> BucketClass:
    """Small if x <= F/C, else level i with F/2^i < x <= F/2^(i-1)."""
    f_tracker, x = money(f_tracker), money(x)
    if f_tracker <= 0 or x <= 0:
        raise ValueError("f_tracker and x must be positive")
    if x * C <= f_tracker:
        return BucketClass(BucketKind.SMALL)
    if x > f_tracker:
        return BucketClass(BucketKind.TOO_BIG)
    for i in range(1, level_count(C) + 1):
        if x * 2**i > f_tracker:
            return BucketClass(BucketKind.LEVEL, i)
    raise AssertionError("unreachable: levels cover (F/2^k, F]")


@dataclass(frozen=True)
class BucketSet:
    b_small: Fraction
    b_levels: tuple[Fraction, ...]  # B_1 .. B_k
    b_overflow: Fraction = Fraction(0)

    @classmethod
    def full(cls, f_tracker: Fraction, k: int) -> "BucketSet":
        return cls(2 * f_tracker, (f_tracker,) * k, Fraction(0))

    @property
    def total(self) -> Fraction:
        return self.b_small + sum(self.b_levels, Fraction(0)) + self.b_overflow

    def with_level(self, i: int, value: Fraction) -> "BucketSet":
        levels = list(self.b_levels)
        levels[i - 1] = value
        return replace(self, b_levels=tuple(levels))


def bucketed_handle_incoming(receiver: BucketSet, amount: Fraction | int, f_tracker: Fraction) -> BucketSet:
    """Waterfall: B_s up to 2F, then B_k .. B_1 up to F, rest to B_o."""
    left = money(amount)
    f_tracker = money(f_tracker)
    small = receiver.b_small
    take = min(left, max(Fraction(0), 2 * f_tracker - small))
    small += take
    left -= take
    levels = list(receiver.b_levels)
    for j in range(len(levels) - 1, -1, -1):
        take = min(left, max(Fraction(0), f_tracker - levels[j]))
        levels[j] += take
        left -= take
    return BucketSet(small, tuple(levels), receiver.b_overflow + left)


def bucketed_refill_from_overflow(side: BucketSet, f_tracker: Fraction) -> BucketSet:
    if side.b_overflow == 0:
        return side
    return bucketed_handle_incoming(replace(side, b_overflow=Fraction(0)), side.b_overflow, f_tracker)


@dataclass(frozen=True)
class BucketedState:
    left: BucketSet
    right: BucketSet
    tracker: RechargeTracker

    @property
    def capacity(self) -> Fraction:
        return self.left.total + self.right.total

    def sides(self, direction: Direction) -> tuple[BucketSet, BucketSet]:
        """(sender, receiver)."""
        return (self.left, self.right) if direction is Direction.LTR else (self.right, self.left)

    def with_sides(self, direction: Direction, sender: BucketSet, receiver: BucketSet) -> "BucketedState":
        if direction is Direction.LTR:
            return replace(self, left=sender, right=receiver)
        return replace(self, left=receiver, right=sender)


class DecisionKind(enum.Enum):
    ACCEPT = "accept"
    REJECT = "reject"
    REBALANCE_ACCEPT = "rebalance_accept"


@dataclass(frozen=True)
class PolicyDecision:
    kind: DecisionKind
    rebalance: Fraction | None = None
    recharge_to: Fraction | None = None
    shortfall: bool = False

    def __post_init__(self):
        if self.kind is DecisionKind.REBALANCE_ACCEPT and not (self.rebalance and self.rebalance > 0):
            raise ValueError("rebalance amount must be positive")

    @property
    def accepted(self) -> bool:
        return self.kind is not DecisionKind.REJECT


REJECT = PolicyDecision(DecisionKind.REJECT)


def new_bucketed_state(params: CostParams) -> BucketedState:
    k = level_count(params.C)
    tracker = RechargeTracker(4 + 2 * k, params.f1)
    empty = BucketSet(Fraction(0), (Fraction(0),) * k)
    return BucketedState(empty, empty, tracker)


def bucketed_on_decide(
    state: BucketedState, tx: Transaction, params: CostParams
) -> tuple[PolicyDecision, BucketedState]:
    f = state.tracker.f_tracker
    if f == 0:
        return REJECT, state
    x = Fraction(tx.amount)
    cls = classify_bucket(f, params.C, x)
    sender, receiver = state.sides(tx.direction)

    if cls.kind is BucketKind.TOO_BIG:
        return REJECT, state

    if cls.kind is BucketKind.LEVEL:
        held = sender.b_levels[cls.level - 1]
        if held < x:
            return REJECT, state
        sender = bucketed_refill_from_overflow(sender.with_level(cls.level, held - x), f)
        receiver = bucketed_handle_incoming(receiver, x, f)
        return PolicyDecision(DecisionKind.ACCEPT), state.with_sides(tx.direction, sender, receiver)

    if sender.b_small >= x:
        sender = bucketed_refill_from_overflow(replace(sender, b_small=sender.b_small - x), f)
        receiver = bucketed_handle_incoming(receiver, x, f)
        return PolicyDecision(DecisionKind.ACCEPT), state.with_sides(tx.direction, sender, receiver)

    # refill B_s so that 2F remain after paying x; source B_o then B_s of the peer
    wanted = x + 2 * f - sender.b_small
    available = receiver.b_overflow + receiver.b_small
    drawn = min(wanted, available)
    if sender.b_small + drawn < x:
        return REJECT, state
    from_overflow = min(drawn, receiver.b_overflow)
    receiver = replace(
        receiver,
        b_overflow=receiver.b_overflow - from_overflow,
        b_small=receiver.b_small - (drawn - from_overflow),
    )
    sender = replace(sender, b_small=sender.b_small + drawn - x)
    sender = bucketed_refill_from_overflow(sender, f)
    receiver = bucketed_handle_incoming(bucketed_refill_from_overflow(receiver, f), x, f)
    decision = PolicyDecision(DecisionKind.REBALANCE_ACCEPT, rebalance=drawn, shortfall=drawn < wanted)
    return decision, state.with_sides(tx.direction, sender, receiver)


def _record(ledger: CostLedger, params: CostParams, step: TraceStep, decision: PolicyDecision, amount: int):
    if decision.kind is DecisionKind.REJECT:
        step.cost_delta += ledger.record_reject(params, amount)
        return
    if decision.kind is DecisionKind.REBALANCE_ACCEPT:
        step.cost_delta += ledger.record_rebalance(params, decision.rebalance)
        step.rebalanced = decision.rebalance
        step.shortfall = decision.shortfall
    ledger.record_accept()
    step.decision = "accept"


def bucketed_policy(
    stream: TransactionStream,
    params: CostParams,
    funds: Sequence[Fraction] | None = None,
) -> PolicyRun:
    """Main bidirectional algorithm ON.

    ``funds`` holds OFF's locked funds per prefix; by default it is computed
    with the exact DP (each entry only depends on its own prefix).
    """
    _require_r_zero(params, "bucketed policy")
    funds = _resolve_funds(stream, params, funds)
    state = new_bucketed_state(params)
    k = level_count(params.C)
    ledger = CostLedger()
    trace = []
    for t, (tx, observed) in enumerate(zip(stream, funds), start=1):
        step = TraceStep(t, tx.amount, tx.direction, "reject")
        dec = state.tracker.step(observed)
        if dec.fired:
            f = state.tracker.f_tracker
            step.cost_delta += ledger.record_recharge(params, dec.recharge_to - state.capacity)
            state = replace(state, left=BucketSet.full(f, k), right=BucketSet.full(f, k))
            assert state.capacity == dec.recharge_to
            step.recharged_to = dec.recharge_to
        decision, state = bucketed_on_decide(state, tx, params)
        _record(ledger, params, step, decision, tx.amount)
        trace.append(step)
    return PolicyRun("on", ledger, trace, state.capacity)


# ---------------------------------------------------------------------------
# heuristics ON-I / ON-II
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HeuristicParams:
    alpha: Fraction = Fraction(2)

    def __post_init__(self):
        object.__setattr__(self, "alpha", money(self.alpha))
        if self.alpha < 1:
            raise ValueError("alpha must be >= 1")


def heuristic_decide(
    state: ChannelState, tx: Transaction, f_tracker: Fraction, params: CostParams
) -> tuple[PolicyDecision, ChannelState]:
    """ON-I/ON-II rule on an unbucketed channel."""
    x = Fraction(tx.amount)
    if f_tracker == 0 or x >= f_tracker:
        return REJECT, state
    have = state.balance(tx.direction)
    if have >= x:
        return PolicyDecision(DecisionKind.ACCEPT), apply_accept(state, tx)
    if x * params.C > f_tracker:
        return REJECT, state
    other = state.balance(tx.direction.reverse)
    moved = min(other, 2 * f_tracker - have)
    if moved <= 0 or have + moved < x:
        return REJECT, state
    if tx.direction is Direction.LTR:
        shifted = ChannelState(state.bal_left + moved, state.bal_right - moved)
    else:
        shifted = ChannelState(state.bal_left - moved, state.bal_right + moved)
    decision = PolicyDecision(DecisionKind.REBALANCE_ACCEPT, rebalance=moved, shortfall=moved < 2 * f_tracker - have)
    return decision, apply_accept(shifted, tx)


def on_ii_policy(
    stream: TransactionStream,
    params: CostParams,
    h: HeuristicParams = HeuristicParams(),
    funds: Sequence[Fraction] | None = None,
    name: str = "on-ii",
) -> PolicyRun:
    """Recharges only when OFF's funds exceed alpha * F_tracker."""
    _require_r_zero(params, name)
    funds = _resolve_funds(stream, params, funds)
    tracker = RechargeTracker(level_count(params.C), params.f1, threshold=h.alpha)
    state = ChannelState()
    ledger = CostLedger()
    trace = []
    for t, (tx, observed) in enumerate(zip(stream, funds), start=1):
        step = TraceStep(t, tx.amount, tx.direction, "reject")
        dec = tracker.step(observed)
        if dec.fired:
            step.cost_delta += ledger.record_recharge(params, dec.recharge_to - state.capacity)
            half = dec.recharge_to / 2
            state = ChannelState(half, half)
            step.recharged_to = dec.recharge_to
        decision, state = heuristic_decide(state, tx, tracker.f_tracker, params)
        _record(ledger, params, step, decision, tx.amount)
        trace.append(step)
    return PolicyRun(name, ledger, trace, state.capacity)


def on_i_policy(
    stream: TransactionStream,
    params: CostParams,
    funds: Sequence[Fraction] | None = None,
) -> PolicyRun:
    return on_ii_policy(stream, params, HeuristicParams(1), funds=funds, name="on-i")
