"""Property-based checks of the model invariants."""

from fractions import Fraction

from hypothesis import given, settings
from hypothesis import strategies as st

from pcnlab.core import ChannelState, CostParams, TransactionStream, apply_accept
from pcnlab.funds import RechargeTracker, prefix_funds_bidirectional
from pcnlab.offline import brute_force_offline, dp_solve, prefix_optima, replay
from pcnlab.online import (
    BucketSet,
    HeuristicParams,
    bucketed_handle_incoming,
    bucketed_policy,
    level_count,
    on_i_policy,
    on_ii_policy,
)

directions = st.sampled_from(["ltr", "rtl"])
streams = st.lists(st.tuples(st.integers(1, 8), directions), max_size=25).map(TransactionStream.from_pairs)
small_streams = st.lists(st.tuples(st.integers(1, 3), directions), max_size=4).map(TransactionStream.from_pairs)
params_r0 = st.builds(
    CostParams,
    R=st.just(0),
    f1=st.sampled_from([1, 3, Fraction(7, 2)]),
    f2=st.sampled_from([Fraction(1, 2), 1, 2]),
    C=st.integers(1, 9),
)
params_any = st.builds(
    CostParams,
    R=st.sampled_from([0, Fraction(1, 2)]),
    f1=st.sampled_from([1, 3]),
    f2=st.sampled_from([1, 2]),
    C=st.sampled_from([2, 3]),
)


@given(st.integers(0, 50), st.integers(0, 50), st.lists(st.tuples(st.integers(1, 10), directions), max_size=20))
def test_capacity_conservation(a, b, txs):
    state = ChannelState(a, b)
    for amount, d in txs:
        tx = TransactionStream.from_pairs([(amount, d)])[0]
        if state.balance(tx.direction) >= amount:
            state = apply_accept(state, tx)
    assert state.capacity == a + b


@settings(max_examples=60, deadline=None)
@given(small_streams, params_any)
def test_dp_equals_brute_force(s, p):
    assert dp_solve(s, p).total_cost == brute_force_offline(s, p)


@settings(max_examples=60, deadline=None)
@given(streams, params_any)
def test_dp_replay_and_lower_bound(s, p):
    sol = dp_solve(s, p)
    assert replay(sol, s, p).total == sol.total_cost
    opt = prefix_optima(s, p)
    a_t = max(opt.funds)
    if a_t > 0:
        assert sol.total_cost >= a_t + p.f1
    assert all(x <= y for x, y in zip(opt.costs, opt.costs[1:]))


@settings(max_examples=60, deadline=None)
@given(streams, params_r0)
def test_bucketed_invariants(s, p):
    funds = prefix_funds_bidirectional(s, p)
    run = bucketed_policy(s, p, funds)
    gamma = 4 + 2 * level_count(p.C)
    led = run.ledger
    assert led.total == led.rejection_total + led.recharge_total + led.rebalance_total
    # every recharge tops up to gamma * (A + f1); the ledger holds exactly the final capacity
    locked = led.recharge_total - led.recharge_count * p.f1
    assert locked == run.capacity
    for step in run.trace:
        if step.recharged_to is not None:
            assert step.recharged_to == gamma * (funds[step.t - 1] + p.f1)
    off = dp_solve(s, p).total_cost
    if off > 0:
        assert run.cost <= (7 + 2 * level_count(p.C)) * off


@settings(max_examples=60, deadline=None)
@given(streams, params_r0)
def test_on_ii_alpha_one_is_on_i(s, p):
    funds = prefix_funds_bidirectional(s, p)
    assert on_i_policy(s, p, funds).trace == on_ii_policy(s, p, HeuristicParams(1), funds).trace


@given(
    st.integers(0, 40), st.integers(0, 20), st.integers(0, 20), st.integers(0, 5),
    st.integers(1, 60), st.integers(1, 10),
)
def test_handle_incoming_conserves(bs, b1, b2, bo, amount, f):
    recv = BucketSet(Fraction(bs), (Fraction(b1), Fraction(b2)), Fraction(bo))
    out = bucketed_handle_incoming(recv, amount, Fraction(f))
    assert out.total == recv.total + amount
    assert min(out.b_small, out.b_overflow, *out.b_levels) >= 0


@given(st.lists(st.fractions(min_value=0, max_value=100), max_size=30), st.integers(1, 5), st.integers(1, 5))
def test_tracker_dominance(funds, gamma, delta):
    tr = RechargeTracker(gamma, delta)
    prev = Fraction(0)
    fired = 0
    for a in funds:
        fired += tr.step(a).fired
        assert tr.f_tracker >= a
        assert tr.f_tracker >= prev
        prev = tr.f_tracker
    a_t = max(funds, default=Fraction(0))
    assert fired <= -(-a_t // delta)
