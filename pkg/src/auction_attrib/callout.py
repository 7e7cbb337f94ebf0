"""Callout mechanisms: which bidders to invite to each auction.

All score-based heuristics follow the same myopic loop. Scores start at zero,
the callout for auction t is decided from scores after auction t-1, the
auction is run among the called bidders only, and the scores are updated from
what the called bidders revealed. Two baselines are provided: random quota
throttling (RQT) and a Monte Carlo greedy (GRA).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .auction import AuctionSpec, run_auction
from .records import AuctionRecord, SimulationLog
from .rng import make_rng
from .shapley import Mechanism, shapley_attribution


class Heuristic(str, enum.Enum):
    SHA = "sha"
    BAR = "bar"
    WIN = "win"
    SPD = "spd"
    RNK = "rnk"
    BID = "bid"
    RVC = "rvc"


BASELINES = ("rqt", "gra")
MECHANISM_TOKENS = tuple(h.value for h in Heuristic) + BASELINES


@dataclass
class ScoreState:
    """Running per-bidder accumulators for every heuristic."""

    n: int
    rvc_winner_share: float = 0.5
    auctions_seen: int = 0
    participations: np.ndarray = None
    wins: np.ndarray = None
    spend: np.ndarray = None
    bid_total: np.ndarray = None
    rank_sum: np.ndarray = None
    above_reserve: np.ndarray = None
    rvc_sum: np.ndarray = None
    shapley_sum: np.ndarray = None

    def __post_init__(self):
        if not 0.0 <= self.rvc_winner_share <= 1.0:
            raise ValueError("rvc_winner_share must lie in [0, 1]")
        for name in ("participations", "wins", "above_reserve"):
            if getattr(self, name) is None:
                setattr(self, name, np.zeros(self.n, dtype=int))
        for name in ("spend", "bid_total", "rank_sum", "rvc_sum", "shapley_sum"):
            if getattr(self, name) is None:
                setattr(self, name, np.zeros(self.n))

    def _per_participation(self, total: np.ndarray) -> np.ndarray:
        return np.divide(
            total, self.participations, out=np.zeros(self.n), where=self.participations > 0
        )

    def scores(self, kind: "Heuristic | str", sha_average: str = "called") -> np.ndarray:
        """Score vector where larger is always better (RNK is negated)."""
        kind = Heuristic(kind)
        if kind is Heuristic.SHA:
            if sha_average == "all":
                return self.shapley_sum / max(self.auctions_seen, 1)
            if sha_average != "called":
                raise ValueError(f"sha_average must be 'called' or 'all', got {sha_average!r}")
            return self._per_participation(self.shapley_sum)
        if kind is Heuristic.BAR:
            return self.above_reserve.astype(float)
        if kind is Heuristic.WIN:
            return self.wins.astype(float)
        if kind is Heuristic.SPD:
            return self.spend.copy()
        if kind is Heuristic.RNK:
            return -self._per_participation(self.rank_sum)
        if kind is Heuristic.BID:
            return self.bid_total.copy()
        return self.rvc_sum.copy()

    def update(self, record: AuctionRecord) -> "ScoreState":
        called = list(record.called)
        bad = [i for i in called if not 0 <= i < self.n]
        if bad:
            raise ValueError(f"auction record references unknown bidders {bad}")
        self.auctions_seen += 1
        if not called:
            return self
        bids = np.array([record.bids[i] for i in called], dtype=float)
        idx = np.array(called)
        self.participations[idx] += 1
        self.bid_total[idx] += bids
        self.above_reserve[idx] += bids >= record.reserve
        self.rank_sum[idx] += mid_ranks(bids)

        out = record.outcome
        if out.winner is not None:
            self.wins[out.winner] += 1
            self.spend[out.winner] += out.price
            if out.price_setter is None:
                self.rvc_sum[out.winner] += out.price
            else:
                self.rvc_sum[out.winner] += self.rvc_winner_share * out.price
                self.rvc_sum[out.price_setter] += (1.0 - self.rvc_winner_share) * out.price
        if record.attribution is not None:
            for i, phi in record.attribution.items():
                self.shapley_sum[i] += phi
        return self


def mid_ranks(bids: np.ndarray) -> np.ndarray:
    """Rank 1 for the highest bid; tied bids share the average of their ranks."""
    bids = np.asarray(bids, dtype=float)
    order = np.argsort(-bids, kind="stable")
    ranks = np.empty(len(bids))
    sorted_bids = bids[order]
    start = 0
    while start < len(bids):
        stop = start
        while stop + 1 < len(bids) and sorted_bids[stop + 1] == sorted_bids[start]:
            stop += 1
        ranks[order[start : stop + 1]] = (start + stop) / 2 + 1
        start = stop + 1
    return ranks


def update_scores(
    state: ScoreState,
    kind: "Heuristic | str",
    record: AuctionRecord,
    mechanism: "Mechanism | str" = Mechanism.SECOND_PRICE,
) -> ScoreState:
    """Fold one auction into ``state``.

    For ShA the record's attribution is computed on reserve-zeroed bids when
    it is missing.
    """
    if Heuristic(kind) is Heuristic.SHA and record.attribution is None and record.called:
        attribution = shapley_attribution(record.bids, mechanism, record.reserve)
        record = AuctionRecord(
            record.t, record.called, record.bids, record.reserve, record.outcome, attribution
        )
    return state.update(record)


def select_callout(scores: np.ndarray, theta) -> np.ndarray:
    """Indices of bidders whose score is at least ``theta``.

    ``theta`` may be a scalar or a per-bidder vector.
    """
    scores = np.asarray(scores, dtype=float)
    return np.flatnonzero(scores >= np.asarray(theta, dtype=float))


def select_top_fraction(scores: np.ndarray, fraction: float, rng) -> np.ndarray:
    """Call the ceil(fraction * n) best-scoring bidders, ties broken at random."""
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"fraction must lie in [0, 1], got {fraction}")
    scores = np.asarray(scores, dtype=float)
    n = len(scores)
    k = math.ceil(round(fraction * n, 9))
    keys = make_rng(rng).random(n)
    order = np.lexsort((keys, -scores))
    return np.sort(order[:k])


def rqt_select(n: int, p: float, rng=None) -> np.ndarray:
    """Drop each bidder independently with probability ``p``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"drop probability must lie in [0, 1], got {p}")
    keep = make_rng(rng).random(n) < 1.0 - p
    return np.flatnonzero(keep)


@dataclass
class EmpiricalBidModel:
    """Observed bids per bidder; unseen bidders borrow the pooled history."""

    n: int
    history: dict = field(default_factory=dict)

    def observe(self, bidder: int, bid: float) -> None:
        self.history.setdefault(bidder, []).append(float(bid))

    @property
    def empty(self) -> bool:
        return not any(self.history.values())

    def pooled(self) -> np.ndarray:
        return np.array([b for i in sorted(self.history) for b in self.history[i]])

    def sample(self, bidder: int, size: int, rng) -> np.ndarray:
        obs = self.history.get(bidder)
        pool = np.asarray(obs) if obs else self.pooled()
        if len(pool) == 0:
            raise ValueError("cannot sample from an empty bid model")
        return pool[rng.integers(0, len(pool), size)]


def _revenue(top1: np.ndarray, top2: np.ndarray, spec: AuctionSpec) -> np.ndarray:
    sold = top1 >= spec.reserve
    if spec.mechanism is Mechanism.FIRST_PRICE:
        return np.where(sold, top1, 0.0)
    return np.where(sold, np.maximum(top2, spec.reserve), 0.0)


def gra_select(
    model: EmpiricalBidModel,
    K: int,
    epsilon: float,
    rng=None,
    spec: AuctionSpec = AuctionSpec(),
    candidates: Optional[Sequence[int]] = None,
) -> np.ndarray:
    """Greedy callout set of at most ``K`` bidders.

    Each round adds the candidate with the largest Monte Carlo estimate of
    marginal expected revenue, using ceil(1/epsilon) draws from the empirical
    bid model (the same draws are shared by all candidates). Equal marginals
    are broken by higher mean sampled bid, then at random. After the first
    pick the search stops once no candidate adds revenue.
    """
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    if not 0.0 < epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in (0, 1], got {epsilon}")
    if model.empty:
        raise ValueError("GRA needs a nonempty bid model")
    rng = make_rng(rng)
    cands = np.arange(model.n) if candidates is None else np.asarray(candidates)
    m = math.ceil(round(1.0 / epsilon, 9))
    draws = np.column_stack([model.sample(int(i), m, rng) for i in cands])
    tie_keys = rng.random(len(cands))
    mean_bid = draws.mean(axis=0)

    top1 = np.full(m, -np.inf)
    top2 = np.full(m, -np.inf)
    current = 0.0
    available = np.ones(len(cands), dtype=bool)
    chosen = []
    for _ in range(min(K, len(cands))):
        new1 = np.maximum(top1[:, None], draws)
        new2 = np.maximum(top2[:, None], np.minimum(top1[:, None], draws))
        gain = _revenue(new1, new2, spec).mean(axis=0) - current
        order = np.lexsort((tie_keys, -mean_bid, -gain))
        best = next(j for j in order if available[j])
        if chosen and gain[best] <= 0:
            break
        chosen.append(int(cands[best]))
        available[best] = False
        top1, top2 = new1[:, best], new2[:, best]
        current = float(_revenue(top1, top2, spec).mean())
    return np.array(sorted(chosen), dtype=int)


class Policy:
    """A callout rule driven by the running history."""

    def select(self, t: int, state: ScoreState, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def reset(self, n: int) -> None:
        pass

    def observe(self, record: AuctionRecord) -> None:
        pass

    needs_attribution = False


@dataclass
class ThresholdPolicy(Policy):
    """Score thresholding.

    ``mode="absolute"``: call bidders with score >= theta (scalar or vector).
    ``mode="quantile"``: theta is the fraction of bidders to call; the best
    ceil(theta * n) scores are called, ties broken at random.
    """

    kind: Heuristic
    theta: object = 0.0
    mode: str = "absolute"
    sha_average: str = "called"

    def __post_init__(self):
        self.kind = Heuristic(self.kind)
        if self.mode not in ("absolute", "quantile"):
            raise ValueError(f"unknown threshold mode {self.mode!r}")

    @property
    def needs_attribution(self):
        return self.kind is Heuristic.SHA

    def select(self, t, state, rng):
        scores = state.scores(self.kind, self.sha_average)
        if self.mode == "quantile":
            return select_top_fraction(scores, float(self.theta), rng)
        return select_callout(scores, self.theta)


@dataclass
class RandomThrottle(Policy):
    drop_prob: float

    def select(self, t, state, rng):
        return rqt_select(state.n, self.drop_prob, rng)


@dataclass
class GreedyPolicy(Policy):
    K: int
    epsilon: float = 0.05
    spec: AuctionSpec = field(default_factory=AuctionSpec)
    model: EmpiricalBidModel = None

    def reset(self, n):
        self.model = EmpiricalBidModel(n)

    def select(self, t, state, rng):
        if self.model is None:
            self.reset(state.n)
        if self.model.empty:
            # no information yet: every bidder looks the same
            k = min(self.K, state.n)
            return np.sort(rng.permutation(state.n)[:k])
        return gra_select(self.model, self.K, self.epsilon, rng, self.spec)

    def observe(self, record):
        for i in record.called:
            self.model.observe(i, record.bids[i])


@dataclass
class FixedPolicy(Policy):
    """Replays a predetermined callout schedule (one bidder set per auction)."""

    schedule: Sequence

    def select(self, t, state, rng):
        return np.array(sorted(self.schedule[t]), dtype=int)


def make_policy(token: str, value: float, *, theta_mode: str = "quantile", epsilon: float = 0.05,
                spec: AuctionSpec = AuctionSpec(), n: Optional[int] = None,
                sha_average: str = "called") -> Policy:
    """Build a policy from a CLI token and its grid value.

    For heuristics ``value`` is the threshold, for ``rqt`` the drop
    probability, and for ``gra`` the set size K (a fraction of ``n`` when
    ``n`` is given and ``value`` <= 1).
    """
    if token == "rqt":
        return RandomThrottle(float(value))
    if token == "gra":
        K = value
        if n is not None and value <= 1:
            K = math.ceil(round(value * n, 9))
        return GreedyPolicy(int(K), epsilon, spec)
    return ThresholdPolicy(Heuristic(token), value, theta_mode, sha_average)


def run_stream(
    policy: Policy,
    bids: np.ndarray,
    spec: AuctionSpec = AuctionSpec(),
    seed=None,
    reserves: Optional[Sequence[float]] = None,
    bidder_ids: Optional[Sequence] = None,
    rvc_winner_share: float = 0.5,
) -> SimulationLog:
    """Process the auctions of a T x n bid matrix in order under ``policy``.

    ``reserves`` overrides ``spec.reserve`` per auction. Bids of bidders who
    are not called are never seen by the policy.
    """
    bids = np.asarray(bids, dtype=float)
    if bids.ndim != 2 or bids.shape[0] == 0 or bids.shape[1] == 0:
        raise ValueError(f"bid matrix must be T x n with T, n >= 1, got shape {bids.shape}")
    if np.isnan(bids).any():
        raise ValueError("bid matrix has missing entries; fill them first")
    T, n = bids.shape
    rng = make_rng(seed)
    state = ScoreState(n, rvc_winner_share=rvc_winner_share)
    log = SimulationLog(n=n, bidder_ids=list(bidder_ids) if bidder_ids is not None else None)
    policy.reset(n)
    for t in range(T):
        reserve = spec.reserve if reserves is None else float(reserves[t])
        auction = AuctionSpec(spec.mechanism, reserve)
        called = tuple(int(i) for i in policy.select(t, state, rng))
        row = {i: float(bids[t, i]) for i in called}
        outcome = run_auction(auction, row)
        attribution = None
        if policy.needs_attribution and called:
            attribution = shapley_attribution(row, spec.mechanism, reserve)
        record = AuctionRecord(t, called, row, reserve, outcome, attribution)
        log.append(record)
        state.update(record)
        policy.observe(record)
    return log
