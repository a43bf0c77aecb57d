"""Tracking OFF's locked funds and the (gamma, delta)-recharging rule."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

from .core import CostParams, MoneyLike, TransactionStream, money, require_unidirectional
from .offline import PrefixOptima, dp_solve, prefix_optima

FundsOracle = Callable[[TransactionStream], Fraction]


def funds_unidirectional_no_reject(prefix: TransactionStream) -> Fraction:
    """OFF locks the whole volume up front."""
    require_unidirectional(prefix)
    return Fraction(prefix.total())


def is_small(params: CostParams, amount: MoneyLike) -> bool:
    """Small transactions are worth accepting: ``x <= R*x + f2``."""
    amount = money(amount)
    return amount <= params.R * amount + params.f2


def off_unidirectional_reject(prefix: TransactionStream, params: CostParams) -> tuple[Fraction, Fraction]:
    """Closed-form OFF with rejection on a one-way stream: ``(funds, cost)``.

    Big transactions are always rejected.  Small ones are either all accepted
    from a single up-front recharge or all rejected, whichever is cheaper
    (ties open the channel).
    """
    require_unidirectional(prefix)
    small_sum = Fraction(0)
    small_rej = Fraction(0)
    big_rej = Fraction(0)
    for tx in prefix:
        cost = params.R * tx.amount + params.f2
        if is_small(params, tx.amount):
            small_sum += tx.amount
            small_rej += cost
        else:
            big_rej += cost
    if small_sum > 0 and params.f1 + small_sum <= small_rej:
        return small_sum, big_rej + params.f1 + small_sum
    return Fraction(0), big_rej + small_rej


def funds_unidirectional_reject(prefix: TransactionStream, params: CostParams) -> Fraction:
    return off_unidirectional_reject(prefix, params)[0]


def prefix_funds_unidirectional_reject(stream: TransactionStream, params: CostParams) -> list[Fraction]:
    """Same as calling funds_unidirectional_reject on every prefix, in one pass."""
    require_unidirectional(stream)
    out = []
    small_sum = small_rej = Fraction(0)
    for tx in stream:
        if is_small(params, tx.amount):
            small_sum += tx.amount
            small_rej += params.R * tx.amount + params.f2
        opened = small_sum > 0 and params.f1 + small_sum <= small_rej
        out.append(small_sum if opened else Fraction(0))
    return out


def funds_bidirectional(prefix: TransactionStream, params: CostParams, **kw) -> Fraction:
    return Fraction(dp_solve(prefix, params, **kw).funds)


def prefix_funds_bidirectional(stream: TransactionStream, params: CostParams, **kw) -> list[Fraction]:
    """A(X_i) for i = 1..t from one incremental DP sweep."""
    opt: PrefixOptima = prefix_optima(stream, params, **kw)
    return [Fraction(f) for f in opt.funds[1:]]


@dataclass(frozen=True)
class FundsTrace:
    values: tuple[Fraction, ...]

    @property
    def running_max(self) -> Fraction:
        return max(self.values, default=Fraction(0))


def funds_trace(stream: TransactionStream, oracle: FundsOracle) -> FundsTrace:
    return FundsTrace(tuple(oracle(stream[: i + 1]) for i in range(len(stream))))


@dataclass(frozen=True)
class RechargeDecision:
    recharge_to: Fraction | None = None

    @property
    def fired(self) -> bool:
        return self.recharge_to is not None


NO_RECHARGE = RechargeDecision()


@dataclass
class RechargeTracker:
    """Keeps ``gamma * f_tracker`` ahead of OFF's funds.

    ``threshold`` scales the firing condition: the tracker recharges when the
    observed funds exceed ``threshold * f_tracker`` (1 for the plain rule).
    """

    gamma: Fraction
    delta: Fraction
    f_tracker: Fraction = Fraction(0)
    threshold: Fraction = Fraction(1)

    def __post_init__(self):
        self.gamma = money(self.gamma)
        self.delta = money(self.delta)
        self.f_tracker = money(self.f_tracker)
        self.threshold = money(self.threshold)
        if self.gamma <= 0 or self.delta <= 0:
            raise ValueError("gamma and delta must be positive")

    @property
    def target(self) -> Fraction:
        return self.gamma * self.f_tracker

    def step(self, observed_funds: MoneyLike) -> RechargeDecision:
        observed = money(observed_funds)
        if observed < 0:
            raise ValueError("observed funds must be >= 0")
        if observed > self.threshold * self.f_tracker:
            self.f_tracker = observed + self.delta
            return RechargeDecision(self.gamma * self.f_tracker)
        return NO_RECHARGE


def tracker_step(tracker: RechargeTracker, observed_funds: MoneyLike) -> RechargeDecision:
    return tracker.step(observed_funds)


def run_tracker(tracker: RechargeTracker, funds: Sequence[MoneyLike]) -> list[RechargeDecision]:
    return [tracker.step(a) for a in funds]
