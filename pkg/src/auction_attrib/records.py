"""Per-auction records and the simulation log built from them."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .auction import AuctionOutcome


@dataclass(frozen=True)
class AuctionRecord:
    """One processed auction. Bidders are column indices of the bid matrix."""

    t: int
    called: tuple
    bids: dict
    reserve: float
    outcome: AuctionOutcome
    attribution: Optional[dict] = None


@dataclass
class SimulationLog:
    n: int
    records: list = field(default_factory=list)
    bidder_ids: Optional[Sequence] = None
    wins: np.ndarray = None
    total_cost: np.ndarray = None
    total_winning_bid: np.ndarray = None

    def __post_init__(self):
        if self.wins is None:
            self.wins = np.zeros(self.n, dtype=int)
            self.total_cost = np.zeros(self.n)
            self.total_winning_bid = np.zeros(self.n)
            records, self.records = self.records, []
            for rec in records:
                self.append(rec)
        if self.bidder_ids is None:
            self.bidder_ids = list(range(self.n))

    def append(self, rec: AuctionRecord) -> None:
        self.records.append(rec)
        out = rec.outcome
        if out.winner is not None:
            self.wins[out.winner] += 1
            self.total_cost[out.winner] += out.price
            self.total_winning_bid[out.winner] += out.bids[out.winner]

    @classmethod
    def from_records(cls, n: int, records, bidder_ids=None) -> "SimulationLog":
        return cls(n=n, records=list(records), bidder_ids=bidder_ids)

    @property
    def T(self) -> int:
        return len(self.records)

    @property
    def pct_called(self) -> float:
        """Mean over auctions of the fraction of bidders called."""
        if not self.records:
            return 0.0
        return float(np.mean([len(r.called) / self.n for r in self.records]))

    @property
    def total_revenue(self) -> float:
        return float(sum(r.outcome.price for r in self.records))

    def avg_cost(self) -> np.ndarray:
        """Average price paid per item won; 0 for bidders who never won."""
        return np.divide(self.total_cost, self.wins, out=np.zeros(self.n), where=self.wins > 0)

    def avg_winning_bid(self) -> np.ndarray:
        return np.divide(
            self.total_winning_bid, self.wins, out=np.zeros(self.n), where=self.wins > 0
        )

    def called_mask(self) -> np.ndarray:
        """T x n boolean matrix of callout decisions."""
        mask = np.zeros((self.T, self.n), dtype=bool)
        for t, rec in enumerate(self.records):
            mask[t, list(rec.called)] = True
        return mask
