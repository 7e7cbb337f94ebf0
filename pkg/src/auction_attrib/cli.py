"""Command-line front end.

Exit codes: 0 success (including a "no participating equilibrium" finding),
1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import platform
import re
import shutil
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .auction import AuctionSpec, effective_bids, revenue_game, run_auction
from .callout import MECHANISM_TOKENS, ThresholdPolicy, run_stream
from .data import (
    SyntheticSpec,
    fill_missing,
    gen_synthetic,
    load_csv,
    save_matrix,
    scale_to_reserve_units,
)
from .evaluation import (
    CI_METHOD,
    METRICS,
    MechanismConfig,
    auction_welfare,
    equilibrium_condition,
    outside_option,
    ranking,
    read_sweep_csv,
    sweep_many,
    worker_count,
    write_sweep_csv,
)
from .rng import ALGORITHM, label
from .shapley import (
    Mechanism,
    attribute,
    brute_force_shapley,
    build_matrix,
    build_modified_matrix,
    order_bids,
)
from .svg import render_curves

ORACLE_LIMIT = 12
DEFAULT_FRACTIONS = tuple(round(0.1 * k, 1) for k in range(1, 11))


class UsageError(Exception):
    pass


class RuntimeFailure(Exception):
    pass


def parse_float_list(text: str) -> list:
    out = []
    for tok in re.split(r"[,\s]+", text.strip()):
        if not tok:
            continue
        try:
            out.append(float(tok))
        except ValueError:
            raise UsageError(f"not a number: {tok!r}") from None
    if not out:
        raise UsageError("empty grid")
    return out


def parse_bids(tokens) -> dict:
    """Accept ``6,3,0`` / ``6 3 0`` (ids 1..n) or ``a=6,b=3``."""
    parts = [p for tok in tokens for p in re.split(r"[,\s]+", tok) if p]
    if not parts:
        raise UsageError("no bids given")
    bids = {}
    for k, part in enumerate(parts, start=1):
        key, sep, raw = part.partition("=")
        if not sep:
            key, raw = k, part
        try:
            value = float(raw)
        except ValueError:
            raise UsageError(f"bid {raw!r} is not a number") from None
        if key in bids:
            raise UsageError(f"duplicate bidder {key!r}")
        bids[key] = value
    return bids


def parse_mechanisms(text: str) -> list:
    tokens = [t.strip().lower() for t in text.split(",") if t.strip()]
    if tokens == ["all"]:
        return list(MECHANISM_TOKENS)
    unknown = [t for t in tokens if t not in MECHANISM_TOKENS]
    if unknown or not tokens:
        raise UsageError(
            f"unknown mechanism token(s) {unknown}; choose from {','.join(MECHANISM_TOKENS)} or all"
        )
    return list(dict.fromkeys(tokens))


def load_profile(path) -> list:
    """Rows p_1..p_n as decimal strings, parsed exactly by ProbabilityProfile."""
    with open(path, newline="", encoding="utf-8") as fh:
        return [[x.strip() for x in row] for row in csv.reader(fh) if row]


def _fmt(x: float) -> str:
    return f"{x:.10g}"


def cmd_attribute(args, out=None) -> int:
    out = out or sys.stdout
    bids = parse_bids(args.bids)
    mechanism = Mechanism.parse(args.mechanism)
    if any(b < 0 for b in bids.values()):
        raise UsageError("bids must be nonnegative")
    if args.oracle and args.profile:
        raise UsageError("--oracle checks the Shapley matrix; it cannot be combined with --profile")
    eff = effective_bids(bids, args.reserve)
    ob = order_bids(eff)
    if args.profile:
        try:
            matrix = build_modified_matrix(load_profile(args.profile), mechanism)
        except (OSError, ValueError) as exc:
            raise RuntimeFailure(f"invalid profile: {exc}") from exc
        if matrix.n != ob.n:
            raise RuntimeFailure(f"profile is for {matrix.n} bidders but {ob.n} bids were given")
    elif mechanism is Mechanism.SECOND_PRICE and ob.n < 2:
        matrix = None
    else:
        matrix = build_matrix(ob.n, mechanism)
    phi = attribute(matrix, ob) if matrix is not None else {i: 0.0 for i in ob.perm}
    outcome = run_auction(AuctionSpec(mechanism, args.reserve), bids)

    print(f"mechanism: {mechanism.value}  reserve: {_fmt(args.reserve)}"
          + ("  (modified profile)" if args.profile else ""), file=out)
    print(f"{'bidder':>10} {'bid':>14} {'attribution':>14}", file=out)
    for i in ob.perm:
        print(f"{str(i):>10} {_fmt(bids[i]):>14} {_fmt(phi[i]):>14}", file=out)
    total = sum(phi.values())
    print(f"sum of attributions: {_fmt(total)}", file=out)
    print(f"auction revenue:     {_fmt(outcome.price)}", file=out)

    if args.oracle:
        if ob.n > ORACLE_LIMIT:
            raise UsageError(f"--oracle enumerates 2^n coalitions; n must be <= {ORACLE_LIMIT}")
        positional = {k: ob.values[k] for k in range(ob.n)}
        game = revenue_game(AuctionSpec(mechanism, 0.0), positional)
        brute = brute_force_shapley(game, ob.n)
        print("attribution matrix:", file=out)
        if matrix is not None:
            for row in matrix.entries:
                print("  " + " ".join(f"{x:>10.6f}" for x in row), file=out)
        print(f"{'bidder':>10} {'matrix':>14} {'brute force':>14}", file=out)
        for k, i in enumerate(ob.perm):
            print(f"{str(i):>10} {_fmt(phi[i]):>14} {_fmt(brute[k]):>14}", file=out)
        dev = max(abs(phi[i] - brute[k]) for k, i in enumerate(ob.perm))
        print(f"max deviation: {dev:.3e}", file=out)
    return 0


def _grid_for(token, args):
    if token == "rqt":
        if args.p_grid:
            return tuple(parse_float_list(args.p_grid))
        return tuple(round(1.0 - f, 10) for f in DEFAULT_FRACTIONS)
    if token == "gra":
        if args.K:
            return tuple(int(k) for k in parse_float_list(args.K))
        return DEFAULT_FRACTIONS
    if args.theta_grid:
        return tuple(parse_float_list(args.theta_grid))
    if args.theta_mode == "absolute":
        raise UsageError("--theta-mode absolute needs an explicit --theta-grid")
    return DEFAULT_FRACTIONS


def _datasets(args):
    synthetic_flags = [args.n, args.T, args.mu, args.sigma]
    if args.input:
        if any(x is not None for x in synthetic_flags):
            raise UsageError("give either --input or synthetic parameters (--n/--T/--mu/--sigma), not both")
        try:
            raw = load_csv(args.input)
        except (OSError, ValueError) as exc:
            raise RuntimeFailure(str(exc)) from exc
        scaled = scale_to_reserve_units(raw, args.r) if args.r != 1 else raw
        M = 1 if args.M is None else args.M
        data = [fill_missing(scaled, np.random.SeedSequence(args.seed, spawn_key=(label("fill"), m)))
                for m in range(M)]
        return data, 1.0, {"source": str(args.input), "scaled_by_reserve": args.r, "M": M}
    def given(value, default):
        return default if value is None else value

    spec = SyntheticSpec(
        n=given(args.n, 100), T=given(args.T, 100), mu=given(args.mu, 1.0),
        sigma=given(args.sigma, 1.0), reserve=args.r, M=given(args.M, 10), seed=args.seed,
    )
    return gen_synthetic(spec), args.r, {
        "source": "synthetic", "n": spec.n, "T": spec.T, "mu": spec.mu, "sigma": spec.sigma,
        "M": spec.M, "reserve": spec.reserve,
        "bid_model": "log(bid) ~ Normal(log(median), v); median ~ U(0, mu], v ~ U(0, sigma]",
    }


def _write_outputs(tmp: Path, results, baseline, meta, svg: bool):
    for res in results:
        write_sweep_csv(res, tmp / f"sweep_{res.mechanism}.csv")
    with (tmp / "ranking.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "mechanism", "score_integral"])
        for k, (mech, score) in enumerate(ranking(results), start=1):
            w.writerow([k, mech, repr(score)])
    with (tmp / "curves.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mechanism", "theta", "pct_called", "revenue", "welfare",
                    "alt_revenue", "alt_welfare"])
        for res in results:
            for p in res.points:
                w.writerow([res.mechanism, repr(p.theta), repr(p.pct_called), repr(p.revenue),
                            repr(p.welfare), repr(p.alt_revenue), repr(p.alt_welfare)])
    (tmp / "baseline.json").write_text(json.dumps(baseline, indent=2, sort_keys=True) + "\n")
    (tmp / "metadata.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    if svg:
        (tmp / "curves.svg").write_text(render_curves(results))


def cmd_sweep(args, out=None) -> int:
    out = out or sys.stdout
    tokens = parse_mechanisms(args.mechanisms)
    if args.epsilon <= 0 or args.epsilon > 1:
        raise UsageError("--epsilon must lie in (0, 1]")
    if args.theta_mode == "quantile" and args.theta_grid:
        bad = [x for x in parse_float_list(args.theta_grid) if not 0 <= x <= 1]
        if bad:
            raise UsageError(f"quantile thresholds must lie in [0, 1], got {bad}")
    grids = {t: _grid_for(t, args) for t in tokens}
    try:
        datasets, reserve, data_meta = _datasets(args)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    try:
        spec = AuctionSpec(Mechanism.SECOND_PRICE, reserve)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    configs = [
        MechanismConfig(t, grids[t], theta_mode=args.theta_mode, epsilon=args.epsilon,
                        metric=args.metric)
        for t in tokens
    ]
    results = sweep_many(configs, datasets, spec, seed=args.seed)

    full = ThresholdPolicy("bid", -math.inf, "absolute")
    u_values = []
    for d in datasets:
        log = run_stream(full, d.values, spec, seed=0)
        u_values.append(auction_welfare(log) if args.metric == "per-auction" else outside_option(log))
    baseline = {"u": float(np.mean(u_values)), "values": u_values, "metric": args.metric,
                "period": "full participation on the sweep datasets"}
    meta = {
        "command": "sweep",
        "package_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "seed": args.seed,
        "mechanisms": tokens,
        "grids": {t: list(g) for t, g in grids.items()},
        "theta_mode": args.theta_mode,
        "epsilon": args.epsilon,
        "metric": args.metric,
        "auction": {"mechanism": spec.mechanism.value, "reserve": spec.reserve},
        "data": data_meta,
        "rng": ALGORITHM,
        "ci_method": CI_METHOD,
        "workers": worker_count(),
    }

    dest = Path(args.out)
    try:
        dest.mkdir(parents=True, exist_ok=True)
        tmp = Path(tempfile.mkdtemp(prefix=".partial-", dir=dest))
    except OSError as exc:
        raise RuntimeFailure(f"cannot create output directory {dest}: {exc}") from exc
    try:
        _write_outputs(tmp, results, baseline, meta, args.svg)
        for f in sorted(tmp.iterdir()):
            f.replace(dest / f.name)
    except OSError as exc:
        raise RuntimeFailure(f"writing outputs failed: {exc}") from exc
    finally:
        shutil.rmtree(tmp, ignore_errors=True)

    print(f"wrote {len(results)} sweep file(s) to {dest}", file=out)
    print(f"{'rank':>4} {'mechanism':>10} {'score integral':>16}", file=out)
    for k, (mech, score) in enumerate(ranking(results), start=1):
        print(f"{k:>4} {mech:>10} {score:>16.6g}", file=out)
    return 0


def _equilibrium_inputs(args):
    path = Path(args.input)
    if path.is_file():
        doc = json.loads(path.read_text())
        try:
            c, u_e = doc["c"], doc["u_e"]
        except KeyError as exc:
            raise RuntimeFailure(f"{path}: missing key {exc}") from exc
        u = args.u if args.u is not None else doc.get("u")
        return {str(k): float(v) for k, v in c.items()}, {str(k): float(v) for k, v in u_e.items()}, u
    if not path.is_dir():
        raise RuntimeFailure(f"{path} is neither a sweep directory nor a JSON file")
    c, u_e = {}, {}
    for f in sorted(path.glob("sweep_*.csv")):
        for row in read_sweep_csv(f):
            key = f"{row['mechanism']}@{row['theta']}"
            c[key] = float(row["revenue_mean"])
            u_e[key] = float(row["welfare_mean"])
    if not c:
        raise RuntimeFailure(f"no sweep_*.csv files in {path}")
    u = args.u
    if u is None and (path / "baseline.json").exists():
        u = json.loads((path / "baseline.json").read_text())["u"]
    return c, u_e, u


def cmd_equilibrium(args, out=None) -> int:
    out = out or sys.stdout
    if not 0 <= args.delta <= 1:
        raise UsageError("--delta must lie in [0, 1]")
    c, u_e, u = _equilibrium_inputs(args)
    if u is None:
        raise UsageError("no outside option: pass --u or a sweep directory with baseline.json")
    res = equilibrium_condition(c, u_e, float(u), args.delta)
    print(f"outside option u: {_fmt(float(u))}", file=out)
    print(f"delta: {_fmt(args.delta)}", file=out)
    print(f"revenue-maximizing mechanism: {res.best_revenue_mechanism}", file=out)
    if not res.participating:
        print("no participating equilibrium: every mechanism leaves the bidder below u", file=out)
        return 0
    print(f"e*: {res.chosen}", file=out)
    print(f"max c / c* - 1: {_fmt(res.ratio)}", file=out)
    print(f"equilibrium condition holds: {str(res.holds).lower()}", file=out)
    return 0


def cmd_generate(args, out=None) -> int:
    out = out or sys.stdout
    spec = SyntheticSpec(n=args.n, T=args.T, mu=args.mu, sigma=args.sigma,
                         reserve=args.r, M=args.M, seed=args.seed)
    dest = Path(args.out)
    dest.mkdir(parents=True, exist_ok=True)
    for m, matrix in enumerate(gen_synthetic(spec)):
        save_matrix(matrix, dest / f"bids_{m:03d}.csv")
    print(f"wrote {spec.M} bid matrices to {dest}", file=out)
    return 0


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="auction-attrib",
        description="Shapley revenue attribution and callout mechanism evaluation.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("attribute", help="attribute one auction's revenue to its bidders")
    p.add_argument("bids", nargs="+", help="bids as '6,3,0' or 'a=6,b=3'")
    p.add_argument("--mechanism", default="second-price", choices=[m.value for m in Mechanism])
    p.add_argument("--reserve", type=float, default=0.0)
    p.add_argument("--profile", help="CSV with one row per p_k (modified Shapley)")
    p.add_argument("--oracle", action="store_true",
                   help=f"compare with exact enumeration (n <= {ORACLE_LIMIT})")
    p.set_defaults(func=cmd_attribute)

    p = sub.add_parser("sweep", help="threshold sweep of callout mechanisms")
    p.add_argument("--mechanisms", required=True,
                   help=f"comma list from {','.join(MECHANISM_TOKENS)}, or all")
    p.add_argument("--n", type=_positive_int)
    p.add_argument("--T", type=_positive_int)
    p.add_argument("--mu", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--r", type=float, default=1.0, help="reserve price")
    p.add_argument("--M", type=_positive_int, help="number of datasets")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--theta-grid", help="thresholds; fractions to call in quantile mode")
    p.add_argument("--theta-mode", choices=["quantile", "absolute"], default="quantile")
    p.add_argument("--p-grid", help="RQT drop probabilities")
    p.add_argument("--K", help="GRA set sizes (default: fractions of n from the theta grid)")
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--metric", choices=METRICS, default="per-auction")
    p.add_argument("--input", help="auction log CSV (auction_id,bidder_id,bid)")
    p.add_argument("--out", default="out")
    p.add_argument("--svg", action="store_true", help="also write curves.svg")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("equilibrium", help="check the two-stage participation equilibrium")
    p.add_argument("--input", required=True, help="sweep output directory or JSON {c, u_e, u}")
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--u", type=float, help="outside option (overrides baseline.json)")
    p.set_defaults(func=cmd_equilibrium)

    p = sub.add_parser("generate", help="write synthetic bid matrices")
    p.add_argument("--n", type=_positive_int, default=100)
    p.add_argument("--T", type=_positive_int, default=100)
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--r", type=float, default=1.0)
    p.add_argument("--M", type=_positive_int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="data")
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return 2
    except (RuntimeFailure, ValueError, OSError) as exc:
        print(f"{parser.prog}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
