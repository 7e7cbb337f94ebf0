"""Performance metrics for callout mechanisms and threshold sweeps."""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .auction import AuctionSpec
from .callout import make_policy, run_stream
from .records import SimulationLog
from .rng import label, make_rng

SWEEP_HEADER = [
    "mechanism",
    "theta",
    "pct_called",
    "revenue_mean",
    "revenue_ci_low",
    "revenue_ci_high",
    "welfare_mean",
    "welfare_ci_low",
    "welfare_ci_high",
]
CI_METHOD = "normal approximation across datasets: mean +/- 1.96 * sd / sqrt(M)"
METRICS = ("per-auction", "per-bidder")
THREADS_ENV = "AUCTION_ATTRIB_THREADS"


def _check_log(log: SimulationLog) -> None:
    if log.T == 0:
        raise ValueError("simulation log has no auctions")


def _denominator(log: SimulationLog, denominator: str) -> int:
    if denominator == "all":
        return log.n
    if denominator == "participants":
        called = {i for rec in log.records for i in rec.called}
        return max(len(called), 1)
    raise ValueError(f"denominator must be 'all' or 'participants', got {denominator!r}")


def immediate_revenue(log: SimulationLog, denominator: str = "all") -> float:
    """Mean over bidders of the average price they paid per item won."""
    _check_log(log)
    return float(log.avg_cost().sum() / _denominator(log, denominator))


def social_welfare(log: SimulationLog, denominator: str = "all") -> float:
    """Mean over bidders of (average winning bid - average price paid)."""
    _check_log(log)
    residual = log.avg_winning_bid() - log.avg_cost()
    return float(residual.sum() / _denominator(log, denominator))


def auction_revenue(log: SimulationLog) -> float:
    """Exchange revenue per auction (sum of prices over T)."""
    _check_log(log)
    return log.total_revenue / log.T


def auction_welfare(log: SimulationLog) -> float:
    """Bid-minus-price surplus per auction."""
    _check_log(log)
    return float((log.total_winning_bid - log.total_cost).sum() / log.T)


def outside_option(baseline: SimulationLog, denominator: str = "all") -> float:
    """Outside-option utility: the welfare estimator applied to a pre-period log."""
    if baseline is None or baseline.T == 0:
        raise ValueError("outside option needs a nonempty pre-period log")
    return social_welfare(baseline, denominator)


@dataclass(frozen=True)
class EquilibriumResult:
    chosen: Optional[str]
    holds: bool
    ratio: float
    best_revenue_mechanism: Optional[str] = None

    @property
    def participating(self) -> bool:
        return self.chosen is not None


def equilibrium_condition(
    c_values: Mapping[str, float], u_values: Mapping[str, float], u: float, delta: float
) -> EquilibriumResult:
    """Pick e* = argmax c^e among mechanisms with u^e >= u and test
    max_e c^e / c^{e*} - 1 <= delta.

    Returns a result with ``chosen=None`` when no mechanism keeps the bidder.
    """
    if not 0.0 <= delta <= 1.0:
        raise ValueError(f"delta must lie in [0, 1], got {delta}")
    if set(c_values) != set(u_values):
        raise ValueError("c_values and u_values must cover the same mechanisms")
    if not c_values:
        raise ValueError("no mechanisms given")
    best = max(c_values, key=lambda e: (c_values[e], _neg_key(e)))
    keep = [e for e in c_values if u_values[e] >= u]
    if not keep:
        return EquilibriumResult(None, False, math.nan, best)
    chosen = max(keep, key=lambda e: (c_values[e], _neg_key(e)))
    top, c_star = c_values[best], c_values[chosen]
    if c_star > 0:
        ratio = top / c_star - 1.0
    else:
        ratio = 0.0 if top == c_star else math.inf
    return EquilibriumResult(chosen, ratio <= delta, ratio, best)


def _neg_key(e):
    # ties on revenue go to the first name in sorted order
    return [-ord(ch) for ch in str(e)]


def long_term_payoff(c: float, u_e: float, u: float, delta: float) -> float:
    """Exchange payoff over both stages: c(1+delta) if the bidder stays, else c."""
    if not 0.0 <= delta <= 1.0:
        raise ValueError(f"delta must lie in [0, 1], got {delta}")
    return c * (1.0 + delta) if u_e >= u else c


@dataclass
class MetricPoint:
    theta: float
    pct_called: float
    revenue: float
    welfare: float
    revenue_ci: Optional[tuple] = None
    welfare_ci: Optional[tuple] = None
    pct_values: list = field(default_factory=list)
    revenue_values: list = field(default_factory=list)
    welfare_values: list = field(default_factory=list)
    alt_revenue_values: list = field(default_factory=list)
    alt_welfare_values: list = field(default_factory=list)

    @property
    def alt_revenue(self) -> float:
        """Mean revenue under the metric not selected for this sweep."""
        return float(np.mean(self.alt_revenue_values))

    @property
    def alt_welfare(self) -> float:
        return float(np.mean(self.alt_welfare_values))


@dataclass
class SweepResult:
    mechanism: str
    points: list

    @property
    def score_integral(self) -> float:
        return float(np.mean([p.revenue for p in self.points]))

    def revenue_at(self, pct: float) -> float:
        """Revenue linearly interpolated at a called fraction."""
        x = [p.pct_called for p in self.points]
        y = [p.revenue for p in self.points]
        return float(np.interp(pct, x, y))


@dataclass(frozen=True)
class MechanismConfig:
    """One mechanism and its grid.

    Grid values are thresholds for heuristics (fractions to call when
    ``theta_mode="quantile"``), drop probabilities for ``rqt`` and set sizes
    for ``gra`` (fractions of n when <= 1).

    ``metric="per-auction"`` reports exchange revenue and bidder surplus per
    auction; ``metric="per-bidder"`` reports the per-bidder averages of
    :func:`immediate_revenue` and :func:`social_welfare`.
    """

    token: str
    grid: tuple
    theta_mode: str = "quantile"
    epsilon: float = 0.05
    sha_average: str = "called"
    rvc_winner_share: float = 0.5
    welfare_denominator: str = "all"
    metric: str = "per-auction"

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}, got {self.metric!r}")
        if not self.grid:
            raise ValueError(f"empty grid for mechanism {self.token}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")


def mean_ci(values: Sequence[float]) -> tuple:
    """(mean, (low, high)); the interval is None for fewer than two values."""
    values = np.asarray(values, dtype=float)
    mean = float(values.mean())
    if len(values) < 2:
        return mean, None
    half = 1.96 * float(values.std(ddof=1)) / math.sqrt(len(values))
    return mean, (mean - half, mean + half)


def _run_cell(args):
    config, value, grid_idx, data_idx, bids, spec, seed = args
    policy = make_policy(
        config.token, value, theta_mode=config.theta_mode, epsilon=config.epsilon,
        spec=spec, n=bids.shape[1], sha_average=config.sha_average,
    )
    rng = make_rng(seed, label(config.token), grid_idx, data_idx)
    log = run_stream(policy, bids, spec, rng,
                     rvc_winner_share=config.rvc_winner_share)
    per_auction = (auction_revenue(log), auction_welfare(log))
    per_bidder = (
        immediate_revenue(log, config.welfare_denominator),
        social_welfare(log, config.welfare_denominator),
    )
    if config.metric == "per-auction":
        return (log.pct_called, *per_auction, *per_bidder)
    return (log.pct_called, *per_bidder, *per_auction)


def worker_count(requested: Optional[int] = None) -> int:
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_cells(tasks: list, workers: int) -> list:
    """Evaluate cells, in parallel when ``workers`` > 1; results keep task order."""
    if workers <= 1 or len(tasks) <= 1:
        return [_run_cell(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(_run_cell, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def sweep(
    config: MechanismConfig,
    datasets: Sequence[np.ndarray],
    spec: AuctionSpec = AuctionSpec(),
    seed: int = 0,
    workers: Optional[int] = None,
) -> SweepResult:
    """Run every (grid value, dataset) cell and aggregate across datasets."""
    return sweep_many([config], datasets, spec, seed, workers)[0]


def sweep_many(
    configs: Sequence[MechanismConfig],
    datasets: Sequence[np.ndarray],
    spec: AuctionSpec = AuctionSpec(),
    seed: int = 0,
    workers: Optional[int] = None,
) -> list:
    """Sweep several mechanisms with one shared worker pool."""
    if not datasets:
        raise ValueError("sweep needs at least one dataset")
    datasets = [np.asarray(getattr(d, "values", d), dtype=float) for d in datasets]
    tasks, index = [], []
    for c_idx, config in enumerate(configs):
        for g_idx, value in enumerate(config.grid):
            for d_idx, bids in enumerate(datasets):
                tasks.append((config, value, g_idx, d_idx, bids, spec, seed))
                index.append((c_idx, g_idx))
    results = run_cells(tasks, worker_count(workers))
    cells = {}
    for key, res in zip(index, results):
        cells.setdefault(key, []).append(res)
    out = []
    for c_idx, config in enumerate(configs):
        points = []
        for g_idx, value in enumerate(config.grid):
            pct, rev, wel, alt_rev, alt_wel = map(list, zip(*cells[(c_idx, g_idx)]))
            rev_mean, rev_ci = mean_ci(rev)
            wel_mean, wel_ci = mean_ci(wel)
            points.append(MetricPoint(
                theta=float(value), pct_called=float(np.mean(pct)),
                revenue=rev_mean, welfare=wel_mean, revenue_ci=rev_ci, welfare_ci=wel_ci,
                pct_values=pct, revenue_values=rev, welfare_values=wel,
                alt_revenue_values=alt_rev, alt_welfare_values=alt_wel,
            ))
        points.sort(key=lambda p: p.pct_called)
        out.append(SweepResult(config.token, points))
    return out


def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


def write_sweep_csv(result: SweepResult, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        for p in result.points:
            rlo, rhi = p.revenue_ci or (None, None)
            wlo, whi = p.welfare_ci or (None, None)
            w.writerow([result.mechanism, _fmt(p.theta), _fmt(p.pct_called), _fmt(p.revenue),
                        _fmt(rlo), _fmt(rhi), _fmt(p.welfare), _fmt(wlo), _fmt(whi)])


def read_sweep_csv(path) -> list:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != SWEEP_HEADER:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        return list(reader)


def ranking(results: Sequence[SweepResult]) -> list:
    """(mechanism, score integral) pairs, best first."""
    return sorted(((r.mechanism, r.score_integral) for r in results), key=lambda x: (-x[1], x[0]))
