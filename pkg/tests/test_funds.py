from fractions import Fraction

import pytest

from pcnlab.core import CostParams, MixedDirections, TransactionStream
from pcnlab.funds import (
    RechargeTracker,
    funds_bidirectional,
    funds_trace,
    funds_unidirectional_no_reject,
    funds_unidirectional_reject,
    prefix_funds_unidirectional_reject,
    run_tracker,
    tracker_step,
)


def test_no_reject_funds():
    assert funds_unidirectional_no_reject(TransactionStream.of([3, 4])) == 7
    assert funds_unidirectional_no_reject(TransactionStream()) == 0
    assert funds_unidirectional_no_reject(TransactionStream.of([1, 1, 1, 1])) == 4
    with pytest.raises(MixedDirections):
        funds_unidirectional_no_reject(TransactionStream.from_pairs([(1, "ltr"), (1, "rtl")]))


def test_reject_funds_examples():
    p = CostParams(R=0, f2=2, f1=3)
    s = TransactionStream.of([3, 1, 1, 1, 1])
    assert funds_unidirectional_reject(s[:1], p) == 0
    assert funds_unidirectional_reject(s, p) == 4
    assert funds_unidirectional_reject(TransactionStream.of([1, 1, 1]), CostParams(R=0, f2=2, f1=100)) == 0
    # x=5 is small under R=1, f2=1; opened iff f1 <= 1
    assert funds_unidirectional_reject(TransactionStream.of([5]), CostParams(R=1, f2=1, f1=1)) == 5
    assert funds_unidirectional_reject(TransactionStream.of([5]), CostParams(R=1, f2=1, f1=Fraction(11, 10))) == 0


def test_prefix_reject_funds_matches_per_prefix():
    p = CostParams(R=0, f2=2, f1=3)
    s = TransactionStream.of([3, 1, 1, 5, 1, 1, 2])
    assert prefix_funds_unidirectional_reject(s, p) == [funds_unidirectional_reject(s[: i + 1], p) for i in range(len(s))]


def test_bidirectional_funds():
    assert funds_bidirectional(TransactionStream.of([2, 3]), CostParams(R=0, f2=10, f1=1)) == 5
    assert funds_bidirectional(TransactionStream.of([2]), CostParams(R=0, f2=1, f1=3)) == 0
    assert funds_bidirectional(TransactionStream(), CostParams()) == 0


def test_tracker_example_table():
    # gamma=2, delta=10, eps=1
    tr = RechargeTracker(2, 10)
    assert tracker_step(tr, 0).recharge_to is None
    d = tracker_step(tr, 1)
    assert d.recharge_to == 22 and tr.f_tracker == 11
    assert tracker_step(tr, 10).recharge_to is None and tr.f_tracker == 11
    d = tracker_step(tr, 12)
    assert d.recharge_to == 44 and tr.f_tracker == 22


def test_tracker_threshold():
    tr = RechargeTracker(1, 3, f_tracker=10, threshold=2)
    assert not tr.step(15).fired
    assert tr.step(21).recharge_to == 24


def test_tracker_recharge_count_bound():
    funds = [Fraction(i, 2) for i in range(40)]
    tr = RechargeTracker(3, 2)
    fired = [d for d in run_tracker(tr, funds) if d.fired]
    a_t = max(funds)
    assert len(fired) <= -(-a_t // 2)


def test_funds_trace_running_max():
    tr = funds_trace(TransactionStream.of([1, 2, 3]), funds_unidirectional_no_reject)
    assert tr.values == (1, 3, 6)
    assert tr.running_max == 6
