import pytest
from hypothesis import given, strategies as st

from auction_attrib.auction import (
    AuctionSpec,
    coalition_revenue,
    effective_bids,
    run_auction,
)

SP = "second-price"
FP = "first-price"

bid_maps = st.dictionaries(
    st.integers(0, 20),
    st.floats(min_value=0, max_value=100, allow_nan=False),
    min_size=1,
    max_size=8,
)


def test_single_bidder_pays_reserve():
    out = run_auction(AuctionSpec(SP, 0.5), {1: 1.0})
    assert (out.winner, out.price) == (1, 0.5)
    assert out.price_setter is None


def test_second_price_rule():
    out = run_auction(AuctionSpec(SP, 0.5), {"a": 1.0, "b": 0.6})
    assert (out.winner, out.price, out.price_setter) == ("a", 0.6, "b")


def test_no_winner_below_reserve():
    out = run_auction(AuctionSpec(SP, 0.5), {"a": 0.4, "b": 0.3})
    assert out.winner is None and out.price == 0 and not out.sold


def test_first_price_pays_bid():
    out = run_auction(AuctionSpec(FP, 1.0), {"a": 3.0, "b": 2.0})
    assert (out.winner, out.price, out.winner_utility) == ("a", 3.0, 0.0)


def test_winner_tie_goes_to_lowest_id():
    out = run_auction(AuctionSpec(SP), {3: 2.0, 1: 2.0, 2: 1.0})
    assert (out.winner, out.price, out.price_setter) == (1, 2.0, 3)


def test_negative_reserve_rejected():
    with pytest.raises(ValueError):
        AuctionSpec(SP, -0.1)


def test_coalition_revenue_examples():
    bids = {1: 6.0, 2: 3.0, 3: 0.0}
    assert coalition_revenue(AuctionSpec(SP), bids, {1, 2}) == 3
    assert coalition_revenue(AuctionSpec(SP), bids, {1}) == 0
    assert coalition_revenue(AuctionSpec(FP), {1: 6.0, 2: 2.0}, {2}) == 2
    assert coalition_revenue(AuctionSpec(FP), bids, set()) == 0
    with pytest.raises(ValueError):
        coalition_revenue(AuctionSpec(SP), bids, {9})


def test_effective_bids():
    assert effective_bids({"a": 1.2, "b": 0.8}, 1) == {"a": 1.2, "b": 0.0}
    assert effective_bids({"a": 1.2, "b": 0.8}, 0) == {"a": 1.2, "b": 0.8}
    assert effective_bids({"a": 0.2, "b": 0.8}, 1) == {"a": 0.0, "b": 0.0}


def test_two_items_one_bidder_each():
    # bidder 1 alone in auction 1 (reserve 0.5), bidder 2 alone in auction 2 (reserve 0.4)
    first = run_auction(AuctionSpec(SP, 0.5), {1: 1.0})
    second = run_auction(AuctionSpec(SP, 0.4), {2: 0.5})
    assert first.price + second.price == pytest.approx(0.9)
    assert (first.winner_utility, second.winner_utility) == pytest.approx((0.5, 0.1))


def test_moving_a_bidder_raises_competition():
    bids_1 = {1: 0.1, 2: 0.1, 3: 0.0}
    bids_2 = {1: 0.5, 2: 0.0, 3: 1.0}
    a = [run_auction(AuctionSpec(SP, 0.1), {i: bids_1[i] for i in (1, 2)}),
         run_auction(AuctionSpec(SP, 0.4), {3: bids_2[3]})]
    b = [run_auction(AuctionSpec(SP, 0.1), {2: bids_1[2]}),
         run_auction(AuctionSpec(SP, 0.4), {i: bids_2[i] for i in (1, 3)})]
    assert a[1].winner == b[1].winner == 3
    assert a[1].winner_utility == pytest.approx(0.6)
    assert b[1].winner_utility == pytest.approx(0.5)
    assert sum(o.price for o in a) == pytest.approx(0.5)
    # item 1 clears at the 0.1 reserve and item 2 at the 0.5 second bid
    assert sum(o.price for o in b) == pytest.approx(0.6)


@given(bid_maps, st.data())
def test_revenue_monotone_in_bids(bids, data):
    spec = AuctionSpec(SP)
    i = data.draw(st.sampled_from(sorted(bids)))
    bump = data.draw(st.floats(min_value=0, max_value=50))
    raised = {**bids, i: bids[i] + bump}
    assert run_auction(spec, raised).price >= run_auction(spec, bids).price


@given(bid_maps, st.floats(min_value=0, max_value=100), st.sampled_from([SP, FP]))
def test_restriction_consistency_and_reserve_floor(bids, reserve, mech):
    spec = AuctionSpec(mech, reserve)
    out = run_auction(spec, bids)
    assert coalition_revenue(spec, bids, bids) == out.price
    if out.sold:
        assert reserve <= out.price <= bids[out.winner]
    else:
        assert out.price == 0
