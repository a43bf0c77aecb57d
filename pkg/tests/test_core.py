import json
from fractions import Fraction

import pytest

from pcnlab.core import (
    LTR,
    RTL,
    ChannelState,
    CostLedger,
    CostParams,
    InsufficientBalance,
    StreamFormatError,
    Transaction,
    TransactionStream,
    ZeroAmount,
    apply_accept,
    format_money,
    money,
    rebalance_cost,
    recharge_cost,
    rejection_cost,
)


def test_apply_accept_moves_funds():
    assert apply_accept(ChannelState(5, 5), Transaction(3, LTR)) == ChannelState(2, 8)
    assert apply_accept(ChannelState(0, 7), Transaction(7, RTL)) == ChannelState(7, 0)


def test_apply_accept_insufficient():
    with pytest.raises(InsufficientBalance):
        apply_accept(ChannelState(2, 2), Transaction(3, LTR))


def test_rejection_cost():
    assert rejection_cost(CostParams(R=0, f2=2), 9) == 2
    assert rejection_cost(CostParams(R=Fraction(1, 2), f2=1), 4) == 3
    assert rejection_cost(CostParams(R=0, f2="0.5"), 100) == Fraction(1, 2)


def test_rebalance_cost():
    assert rebalance_cost(CostParams(C=2, R=0, f2=2), 10) == 4
    assert rebalance_cost(CostParams(C=4, R=0, f2=1), 1) == 4
    # f2 must be positive in CostParams; check the C*R*x term with a tiny f2
    p = CostParams(C=3, R=1, f2=Fraction(1, 1000))
    assert rebalance_cost(p, 5) == 15 + Fraction(3, 1000)
    with pytest.raises(ZeroAmount):
        rebalance_cost(p, 0)


def test_recharge_cost():
    assert recharge_cost(CostParams(f1=3), 44) == 47
    assert recharge_cost(CostParams(f1=3), 0) == 3
    assert recharge_cost(CostParams(f1=1000), "0.5") == Fraction(2001, 2)


def test_cost_params_validation():
    with pytest.raises(ValueError):
        CostParams(f1=0)
    with pytest.raises(ValueError):
        CostParams(f2=0)
    with pytest.raises(ValueError):
        CostParams(R=-1)
    with pytest.raises(ValueError):
        CostParams(C=0)
    assert CostParams(f2=0.5).f2 == Fraction(1, 2)


def test_transaction_rejects_bad_amounts():
    with pytest.raises(ValueError):
        Transaction(0)
    with pytest.raises(TypeError):
        Transaction(1.5)


def test_ledger_totals_and_json_round_trip():
    p = CostParams(R=0, f1=3, f2=Fraction(1, 2), C=2)
    led = CostLedger()
    led.record_recharge(p, 10)
    led.record_reject(p, 4)
    led.record_rebalance(p, 3)
    led.record_accept()
    assert led.total == 13 + Fraction(1, 2) + 1
    data = json.loads(led.to_json())
    assert set(data) == {
        "rejection_total", "recharge_total", "rebalance_total", "recharge_count",
        "rebalanced_amount", "accepted_count", "rejected_count",
    }
    assert all(isinstance(v, str) for v in data.values())
    assert CostLedger.from_dict(data) == led


def test_format_money():
    assert format_money(Fraction(1, 2)) == "0.5"
    assert format_money(Fraction(-3, 8)) == "-0.375"
    assert format_money(12) == "12"
    assert format_money(Fraction(1, 3)) == "1/3"
    assert money(0.1) == Fraction(1, 10)


def test_stream_csv_round_trip(tmp_path):
    s = TransactionStream.from_pairs([(3, "ltr"), (1, "rtl")])
    text = s.to_csv()
    assert text == "index,amount,direction\n1,3,ltr\n2,1,rtl\n"
    path = tmp_path / "s.csv"
    s.write_csv(path)
    assert path.read_bytes() == text.encode()
    assert TransactionStream.read_csv(path) == s


@pytest.mark.parametrize(
    "text",
    ["", "a,b,c\n", "index,amount,direction\n1,0,ltr\n", "index,amount,direction\n1,2,up\n",
     "index,amount,direction\n1,x,ltr\n", "index,amount,direction\n1,2\n"],
)
def test_stream_csv_errors(text):
    with pytest.raises(StreamFormatError):
        TransactionStream.from_csv(text)


def test_prefix_slicing_returns_stream():
    s = TransactionStream.of([1, 2, 3])
    assert isinstance(s[:2], TransactionStream)
    assert s[:2].amounts == [1, 2]
    assert s.total() == 6
