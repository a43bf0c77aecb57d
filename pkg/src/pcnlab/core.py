"""Channel model, transactions, cost environment and cost accounting.

All money is held as :class:`fractions.Fraction`.  Transaction amounts are
positive integers (whole coins); fees and policy thresholds may be fractional,
so every comparison against a competitive bound is exact.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import dataclass, fields
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Iterator, Sequence, Union

MoneyLike = Union[int, str, Fraction, float]

# Default resolution used when an irrational quantity has to be put on the
# money grid (1/1000 of a coin).
MONEY_DENOMINATOR = 1000


class PcnError(Exception):
    """Base class for all errors raised by pcnlab."""


class InsufficientBalance(PcnError):
    pass


class ZeroAmount(PcnError):
    pass


class MixedDirections(PcnError):
    pass


class UnsupportedParams(PcnError):
    pass


class StreamFormatError(PcnError):
    pass


def money(value: MoneyLike) -> Fraction:
    """Convert ``value`` to an exact Fraction.

    Floats go through their shortest repr so ``0.5`` and ``"0.5"`` agree.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"money must be finite, got {value!r}")
        return Fraction(repr(value))
    return Fraction(value)


def quantize(value: float | Fraction, denominator: int = MONEY_DENOMINATOR) -> Fraction:
    """Round ``value`` to the nearest multiple of ``1/denominator``."""
    return Fraction(round(Fraction(value) * denominator), denominator)


def format_money(value: Fraction | int) -> str:
    """Exact decimal string when the value terminates, ``p/q`` otherwise."""
    value = Fraction(value)
    den = value.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den != 1:
        return f"{value.numerator}/{value.denominator}"
    places = max(twos, fives)
    if places == 0:
        return str(value.numerator)
    scaled = value * 10**places
    assert scaled.denominator == 1
    sign = "-" if scaled < 0 else ""
    digits = str(abs(scaled.numerator)).rjust(places + 1, "0")
    text = f"{digits[:-places]}.{digits[-places:]}".rstrip("0").rstrip(".")
    return sign + text


def parse_money(text: str) -> Fraction:
    return Fraction(text.strip())


class Direction(enum.Enum):
    LTR = "ltr"
    RTL = "rtl"

    @classmethod
    def parse(cls, text: str) -> "Direction":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise StreamFormatError(f"unknown direction {text!r}") from None

    @property
    def reverse(self) -> "Direction":
        return Direction.RTL if self is Direction.LTR else Direction.LTR


LTR = Direction.LTR
RTL = Direction.RTL


@dataclass(frozen=True)
class Transaction:
    amount: int
    direction: Direction = Direction.LTR

    def __post_init__(self):
        if isinstance(self.amount, bool) or not isinstance(self.amount, int):
            raise TypeError(f"transaction amount must be an int, got {self.amount!r}")
        if self.amount < 1:
            raise ValueError(f"transaction amount must be >= 1, got {self.amount}")


@dataclass(frozen=True)
class TransactionStream(Sequence[Transaction]):
    """Transactions in arrival order.  ``stream[:i]`` is the prefix X_i."""

    transactions: tuple[Transaction, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "transactions", tuple(self.transactions))

    @classmethod
    def of(cls, amounts: Iterable[int], direction: Direction = Direction.LTR) -> "TransactionStream":
        return cls(tuple(Transaction(int(a), direction) for a in amounts))

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, Direction | str]]) -> "TransactionStream":
        out = []
        for amount, d in pairs:
            out.append(Transaction(int(amount), d if isinstance(d, Direction) else Direction.parse(d)))
        return cls(tuple(out))

    def __len__(self) -> int:
        return len(self.transactions)

    def __getitem__(self, item):
        if isinstance(item, slice):
            return TransactionStream(self.transactions[item])
        return self.transactions[item]

    def __iter__(self) -> Iterator[Transaction]:
        return iter(self.transactions)

    def __add__(self, other: "TransactionStream") -> "TransactionStream":
        return TransactionStream(self.transactions + tuple(other))

    @property
    def amounts(self) -> list[int]:
        return [tx.amount for tx in self.transactions]

    def total(self) -> int:
        return sum(tx.amount for tx in self.transactions)

    def is_unidirectional(self) -> bool:
        return len({tx.direction for tx in self.transactions}) <= 1

    # --- CSV -----------------------------------------------------------------

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "amount", "direction"])
        for i, tx in enumerate(self.transactions, start=1):
            w.writerow([i, tx.amount, tx.direction.value])
        return buf.getvalue()

    def write_csv(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8", newline="\n")

    @classmethod
    def from_csv(cls, text: str) -> "TransactionStream":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            raise StreamFormatError("empty stream file (missing header)")
        header = [h.strip() for h in rows[0]]
        if header != ["index", "amount", "direction"]:
            raise StreamFormatError(f"bad header {rows[0]!r}")
        out = []
        for lineno, row in enumerate(rows[1:], start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 3:
                raise StreamFormatError(f"line {lineno}: expected 3 fields, got {len(row)}")
            try:
                amount = int(row[1])
            except ValueError:
                raise StreamFormatError(f"line {lineno}: amount {row[1]!r} is not an integer") from None
            if amount < 1:
                raise StreamFormatError(f"line {lineno}: amount must be >= 1")
            out.append(Transaction(amount, Direction.parse(row[2])))
        return cls(tuple(out))

    @classmethod
    def read_csv(cls, path: str | Path) -> "TransactionStream":
        return cls.from_csv(Path(path).read_text(encoding="utf-8"))


def require_unidirectional(stream: Iterable[Transaction]) -> None:
    if len({tx.direction for tx in stream}) > 1:
        raise MixedDirections("stream contains both directions")


@dataclass(frozen=True)
class CostParams:
    """Fee environment: rejection ``R*x + f2``, recharge ``F + f1``,
    rebalance ``C*(R*x + f2)``."""

    R: Fraction = Fraction(0)
    f1: Fraction = Fraction(3)
    f2: Fraction = Fraction(2)
    C: int = 2

    def __post_init__(self):
        for name in ("R", "f1", "f2"):
            object.__setattr__(self, name, money(getattr(self, name)))
        if isinstance(self.C, bool) or int(self.C) != self.C:
            raise ValueError(f"C must be an integer, got {self.C!r}")
        object.__setattr__(self, "C", int(self.C))
        if self.R < 0:
            raise ValueError("R must be >= 0")
        if self.f1 <= 0 or self.f2 <= 0:
            raise ValueError("f1 and f2 must be > 0")
        if self.C < 1:
            raise ValueError("C must be >= 1")


@dataclass(frozen=True)
class ChannelState:
    bal_left: Fraction = Fraction(0)
    bal_right: Fraction = Fraction(0)

    def __post_init__(self):
        object.__setattr__(self, "bal_left", money(self.bal_left))
        object.__setattr__(self, "bal_right", money(self.bal_right))
        if self.bal_left < 0 or self.bal_right < 0:
            raise ValueError("balances must be nonnegative")

    @property
    def capacity(self) -> Fraction:
        return self.bal_left + self.bal_right

    def balance(self, side: Direction) -> Fraction:
        """Balance of the sender for transactions in direction ``side``."""
        return self.bal_left if side is Direction.LTR else self.bal_right


def apply_accept(state: ChannelState, tx: Transaction) -> ChannelState:
    if state.balance(tx.direction) < tx.amount:
        raise InsufficientBalance(
            f"{tx.direction.value} {tx.amount} exceeds sender balance {state.balance(tx.direction)}"
        )
    if tx.direction is Direction.LTR:
        return ChannelState(state.bal_left - tx.amount, state.bal_right + tx.amount)
    return ChannelState(state.bal_left + tx.amount, state.bal_right - tx.amount)


def rejection_cost(params: CostParams, amount: MoneyLike) -> Fraction:
    amount = money(amount)
    if amount < 0:
        raise ValueError("amount must be >= 0")
    return params.R * amount + params.f2


def rebalance_cost(params: CostParams, amount: MoneyLike) -> Fraction:
    amount = money(amount)
    if amount == 0:
        raise ZeroAmount("refusing to charge a rebalance of nothing")
    if amount < 0:
        raise ValueError("amount must be > 0")
    return params.C * (params.R * amount + params.f2)


def recharge_cost(params: CostParams, fund_amount: MoneyLike) -> Fraction:
    fund_amount = money(fund_amount)
    if fund_amount < 0:
        raise ValueError("fund_amount must be >= 0")
    return fund_amount + params.f1


@dataclass
class CostLedger:
    """Running totals for one policy on one stream.

    Only the ``record_*`` methods should touch the fields; each only ever adds.
    """

    rejection_total: Fraction = Fraction(0)
    recharge_total: Fraction = Fraction(0)
    rebalance_total: Fraction = Fraction(0)
    recharge_count: int = 0
    rebalanced_amount: Fraction = Fraction(0)
    accepted_count: int = 0
    rejected_count: int = 0

    @property
    def total(self) -> Fraction:
        return self.rejection_total + self.recharge_total + self.rebalance_total

    def record_accept(self) -> Fraction:
        self.accepted_count += 1
        return Fraction(0)

    def record_reject(self, params: CostParams, amount: MoneyLike) -> Fraction:
        cost = rejection_cost(params, amount)
        self.rejection_total += cost
        self.rejected_count += 1
        return cost

    def record_rebalance(self, params: CostParams, amount: MoneyLike) -> Fraction:
        cost = rebalance_cost(params, amount)
        self.rebalance_total += cost
        self.rebalanced_amount += money(amount)
        return cost

    def record_recharge(self, params: CostParams, fund_amount: MoneyLike) -> Fraction:
        cost = recharge_cost(params, fund_amount)
        self.recharge_total += cost
        self.recharge_count += 1
        return cost

    def to_dict(self) -> dict[str, str]:
        return {f.name: format_money(getattr(self, f.name)) for f in fields(self)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict[str, str]) -> "CostLedger":
        kw = {}
        for f in fields(cls):
            value = parse_money(data[f.name])
            kw[f.name] = int(value) if f.name.endswith("_count") else value
        return cls(**kw)
