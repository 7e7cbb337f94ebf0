"""Single-item first- and second-price auctions with a reserve."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping, Optional

from .shapley import Mechanism

BidderId = Hashable


@dataclass(frozen=True)
class AuctionSpec:
    mechanism: Mechanism = Mechanism.SECOND_PRICE
    reserve: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "mechanism", Mechanism.parse(self.mechanism))
        if not self.reserve >= 0:
            raise ValueError(f"reserve must be >= 0, got {self.reserve}")


@dataclass(frozen=True)
class AuctionOutcome:
    """Result of one auction.

    ``price_setter`` is the bidder whose bid fixed a second price, or None when
    the price came from the reserve (or the auction is first price).
    """

    winner: Optional[BidderId]
    price: float
    bids: Mapping[BidderId, float] = field(default_factory=dict)
    price_setter: Optional[BidderId] = None

    @property
    def sold(self) -> bool:
        return self.winner is not None

    @property
    def winner_utility(self) -> float:
        """Bid minus price for the winner (bids stand in for values)."""
        if self.winner is None:
            return 0.0
        return self.bids[self.winner] - self.price


def run_auction(spec: AuctionSpec, bids: Mapping[BidderId, float]) -> AuctionOutcome:
    """Highest bid at or above the reserve wins; ties go to the lowest id."""
    for bidder, bid in bids.items():
        if bid < 0:
            raise ValueError(f"negative bid {bid!r} from bidder {bidder!r}")
    eligible = sorted(
        ((b, i) for i, b in bids.items() if b >= spec.reserve),
        key=lambda bi: (-bi[0], bi[1]),
    )
    if not eligible:
        return AuctionOutcome(None, 0.0, dict(bids))
    top_bid, winner = eligible[0]
    if spec.mechanism is Mechanism.FIRST_PRICE:
        return AuctionOutcome(winner, float(top_bid), dict(bids))
    if len(eligible) == 1:
        return AuctionOutcome(winner, float(spec.reserve), dict(bids))
    second_bid, setter = eligible[1]
    return AuctionOutcome(winner, float(max(second_bid, spec.reserve)), dict(bids), setter)


def coalition_revenue(
    spec: AuctionSpec, bids: Mapping[BidderId, float], coalition: Iterable[BidderId]
) -> float:
    """Revenue v(S) of the auction run among ``coalition`` only."""
    members = set(coalition)
    unknown = members - set(bids)
    if unknown:
        raise ValueError(f"coalition contains unknown bidders {sorted(unknown, key=str)}")
    return run_auction(spec, {i: b for i, b in bids.items() if i in members}).price


def effective_bids(bids: Mapping[BidderId, float], reserve: float) -> dict:
    """Bids below the reserve count as zero."""
    return {i: (b if b >= reserve else 0.0) for i, b in bids.items()}


def revenue_game(spec: AuctionSpec, bids: Mapping[BidderId, float]):
    """Coalition value function over positional players 0..n-1.

    Player k is the k-th bidder of ``bids`` in iteration order.
    """
    ids = list(bids)

    def v(coalition: frozenset) -> float:
        return coalition_revenue(spec, bids, (ids[k] for k in coalition))

    return v
