"""Bid matrices: synthetic generation and auction-log ingestion.

Synthetic bids are log-normal. For each dataset every bidder draws a median
m ~ Uniform(0, mu] and a log-variance s2 ~ Uniform(0, sigma], and then bids
m * exp(sqrt(s2) * Z) with Z standard normal, i.e. log(bid) ~ N(log m, s2).
"sigma" is therefore the upper bound on the variance of the *underlying
normal*, not of the bids themselves.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .rng import ALGORITHM, make_rng

LONG_HEADER = ["auction_id", "bidder_id", "bid"]


@dataclass(frozen=True)
class SyntheticSpec:
    n: int = 100
    T: int = 100
    mu: float = 1.0
    sigma: float = 1.0
    reserve: float = 1.0
    M: int = 10
    seed: int = 0

    def __post_init__(self):
        for name in ("n", "T", "M"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        for name in ("mu", "sigma"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)!r}")
        if not self.reserve >= 0:
            raise ValueError(f"reserve must be >= 0, got {self.reserve!r}")


@dataclass
class BidMatrix:
    """T x n bids; NaN marks a missing (unobserved) bid."""

    values: np.ndarray
    auction_ids: list = field(default_factory=list)
    bidder_ids: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)
    medians: Optional[np.ndarray] = None
    log_variances: Optional[np.ndarray] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        T, n = self.values.shape
        if not self.auction_ids:
            self.auction_ids = list(range(T))
        if not self.bidder_ids:
            self.bidder_ids = list(range(n))
        if np.any(self.values[~np.isnan(self.values)] < 0):
            raise ValueError("bids must be nonnegative")

    @property
    def shape(self):
        return self.values.shape

    @property
    def missing(self) -> np.ndarray:
        return np.isnan(self.values)


def _uniform_half_open(rng, upper: float, size: int) -> np.ndarray:
    # 1 - U(0,1) lies in (0, 1]
    return upper * (1.0 - rng.random(size))


def gen_dataset(spec: SyntheticSpec, index: int) -> BidMatrix:
    """Dataset ``index`` of ``spec``; depends only on (spec, index)."""
    rng = make_rng(spec.seed, index)
    medians = _uniform_half_open(rng, spec.mu, spec.n)
    log_var = _uniform_half_open(rng, spec.sigma, spec.n)
    z = rng.standard_normal((spec.T, spec.n))
    values = medians * np.exp(np.sqrt(log_var) * z)
    return BidMatrix(
        values,
        provenance={"source": "synthetic", "seed": spec.seed, "dataset": index, "rng": ALGORITHM},
        medians=medians,
        log_variances=log_var,
    )


def gen_synthetic(spec: SyntheticSpec) -> list:
    return [gen_dataset(spec, m) for m in range(spec.M)]


def _sort_ids(ids):
    ids = list(ids)
    try:
        return sorted(ids, key=int)
    except ValueError:
        return sorted(ids)


def load_csv(path) -> BidMatrix:
    """Read a long-format ``auction_id,bidder_id,bid`` log into a dense matrix.

    Auction and bidder ids are sorted (numerically when they all parse as
    integers). Cells without a row are NaN.
    """
    path = Path(path)
    cells = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != LONG_HEADER:
            raise ValueError(f"{path}:1: expected header {','.join(LONG_HEADER)}, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            auction, bidder, raw = (c.strip() for c in row)
            if not auction or not bidder:
                raise ValueError(f"{path}:{lineno}: empty id")
            try:
                bid = float(raw)
            except ValueError:
                raise ValueError(f"{path}:{lineno}: bid {raw!r} is not a number") from None
            if not np.isfinite(bid):
                raise ValueError(f"{path}:{lineno}: bid {raw!r} is not finite")
            if bid < 0:
                raise ValueError(f"{path}:{lineno}: negative bid {bid}")
            key = (auction, bidder)
            if key in cells:
                raise ValueError(f"{path}:{lineno}: duplicate bid for auction {auction}, bidder {bidder}")
            cells[key] = bid
    auctions = _sort_ids({a for a, _ in cells})
    bidders = _sort_ids({b for _, b in cells})
    a_index = {a: k for k, a in enumerate(auctions)}
    b_index = {b: k for k, b in enumerate(bidders)}
    values = np.full((len(auctions), len(bidders)), np.nan)
    for (a, b), bid in cells.items():
        values[a_index[a], b_index[b]] = bid
    return BidMatrix(values, auctions, bidders, {"source": str(path)})


def save_csv(matrix: BidMatrix, path) -> None:
    """Write the observed cells in long format (missing cells are skipped)."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LONG_HEADER)
        for t, a in enumerate(matrix.auction_ids):
            for i, b in enumerate(matrix.bidder_ids):
                x = matrix.values[t, i]
                if not np.isnan(x):
                    w.writerow([a, b, repr(float(x))])


def save_matrix(matrix: BidMatrix, path) -> None:
    """Wide cache format: first row bidder ids, one row of bids per auction."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["auction_id", *matrix.bidder_ids])
        for a, row in zip(matrix.auction_ids, matrix.values):
            w.writerow([a, *("" if np.isnan(x) else repr(float(x)) for x in row)])


def load_matrix(path) -> BidMatrix:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:1] != ["auction_id"]:
        raise ValueError(f"{path}:1: expected a header starting with auction_id")
    bidders = rows[0][1:]
    auctions, values = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(bidders) + 1:
            raise ValueError(f"{path}:{lineno}: expected {len(bidders) + 1} fields, got {len(row)}")
        auctions.append(row[0])
        values.append([float(x) if x else np.nan for x in row[1:]])
    return BidMatrix(np.array(values, dtype=float).reshape(len(auctions), len(bidders)),
                     auctions, bidders, {"source": str(path)})


def fill_missing(matrix: BidMatrix, seed=None) -> BidMatrix:
    """Replace each missing bid with a uniform draw from that bidder's observed bids."""
    values = matrix.values.copy()
    missing = np.isnan(values)
    if not missing.any():
        return BidMatrix(values, list(matrix.auction_ids), list(matrix.bidder_ids),
                         dict(matrix.provenance))
    empty = [matrix.bidder_ids[i] for i in range(values.shape[1]) if missing[:, i].all()]
    if empty:
        raise ValueError(f"bidders with no observed bids cannot be resampled: {empty}")
    rng = make_rng(seed)
    for i in range(values.shape[1]):
        holes = missing[:, i]
        if holes.any():
            observed = values[~holes, i]
            values[holes, i] = observed[rng.integers(0, len(observed), holes.sum())]
    provenance = dict(matrix.provenance, filled_seed=seed)
    return BidMatrix(values, list(matrix.auction_ids), list(matrix.bidder_ids), provenance)


def scale_to_reserve_units(matrix: BidMatrix, reserve: float) -> BidMatrix:
    """Express bids in units of the reserve (downstream runs then use reserve 1)."""
    if not reserve > 0:
        raise ValueError(f"reserve must be > 0 to rescale, got {reserve}")
    provenance = dict(matrix.provenance, scaled_by=reserve)
    return BidMatrix(matrix.values / reserve, list(matrix.auction_ids),
                     list(matrix.bidder_ids), provenance)


def as_matrix(values: Sequence[Sequence[float]]) -> BidMatrix:
    return BidMatrix(np.asarray(values, dtype=float))
