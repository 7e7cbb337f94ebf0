"""Revenue attribution for first- and second-price auctions.

The attribution of an auction is a linear operator applied to the ordered bid
vector. Writing the ordered bids as a sum of "top-k indicator" vectors e_k
(ones in the first k positions) with nonnegative coefficients, every operator
in this module is fixed by what it does to each e_k:

* first price:  A_f e_k = e_k / k              (k = 1..n)
* second price: A_s e_1 = 0, A_s e_k = e_k / k (k = 2..n)
* modified:     A e_k = p_k for a user supplied probability profile.

An exact subset-enumeration Shapley routine is included as ground truth.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from typing import Callable, Hashable, Mapping

import numpy as np

BidderId = Hashable

DEFAULT_ENUMERATION_LIMIT = 20
PROFILE_TOL = 1e-12


class Mechanism(str, enum.Enum):
    FIRST_PRICE = "first-price"
    SECOND_PRICE = "second-price"

    @classmethod
    def parse(cls, value: "str | Mechanism") -> "Mechanism":
        if isinstance(value, Mechanism):
            return value
        try:
            return cls(value)
        except ValueError:
            raise ValueError(
                f"unsupported auction mechanism {value!r}; revenue is only linear in the "
                f"top-k basis for {[m.value for m in cls]}"
            ) from None


@dataclass(frozen=True)
class OrderedBids:
    """Bids sorted in descending order with the position -> bidder map.

    ``perm[k]`` is the bidder holding the (k+1)-th largest bid.
    """

    values: np.ndarray
    perm: tuple

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "perm", tuple(self.perm))
        if values.ndim != 1 or len(values) != len(self.perm):
            raise ValueError("values and perm must be 1-d and of equal length")
        if np.any(values < 0):
            raise ValueError("ordered bids must be nonnegative")
        if np.any(np.diff(values) > 0):
            raise ValueError("ordered bids must be in descending order")
        if len(set(self.perm)) != len(self.perm):
            raise ValueError("perm must not repeat bidder ids")

    @property
    def n(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class BasisDecomposition:
    """Coefficients of the ordered bid vector on the top-k indicators.

    Coefficients are kept as exact rationals so that recomposition gives back
    the original floats bit for bit.
    """

    coeffs: tuple

    @property
    def n(self) -> int:
        return len(self.coeffs)

    def as_array(self) -> np.ndarray:
        return np.array([float(c) for c in self.coeffs])


def _exact(x) -> Fraction:
    if isinstance(x, (Fraction, int, str)):
        return Fraction(x)
    return Fraction(float(x))


@dataclass(frozen=True)
class ProbabilityProfile:
    """Rows p_1..p_n; row k (1-based) is supported on the first k positions.

    Entries may be given as floats, ints, Fractions or decimal strings. They
    are kept as exact rationals so that column differences are rounded once.
    """

    vectors: np.ndarray
    exact: tuple = None

    def __post_init__(self):
        rows = self.vectors.tolist() if isinstance(self.vectors, np.ndarray) else self.vectors
        try:
            exact = tuple(tuple(_exact(x) for x in row) for row in rows)
        except (TypeError, ValueError) as exc:
            raise ValueError(f"profile entries must be numbers: {exc}") from None
        n = len(exact)
        if n == 0 or any(len(row) != n for row in exact):
            raise ValueError("profile must be a nonempty square array")
        for k, row in enumerate(exact):
            if any(x != 0 for x in row[k + 1 :]):
                raise ValueError(f"p_{k + 1} has mass beyond position {k + 1}")
            if any(x < 0 for x in row):
                raise ValueError(f"p_{k + 1} has a negative entry")
            total = sum(row)
            # p_1 = 0 is the null first column of second-price profiles
            if k == 0 and total == 0:
                continue
            if abs(float(total) - 1.0) > PROFILE_TOL:
                raise ValueError(f"p_{k + 1} sums to {float(total):.12g}, expected 1")
        p = np.array([[float(x) for x in row] for row in exact])
        p.setflags(write=False)
        object.__setattr__(self, "vectors", p)
        object.__setattr__(self, "exact", exact)

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @classmethod
    def symmetric(cls, n: int, mechanism: "Mechanism | str" = Mechanism.FIRST_PRICE):
        """The profile p_k = e_k / k that recovers the Shapley matrices."""
        mechanism = Mechanism.parse(mechanism)
        p = [[Fraction(1, k) if j < k else Fraction(0) for j in range(n)] for k in range(1, n + 1)]
        if mechanism is Mechanism.SECOND_PRICE:
            p[0] = [Fraction(0)] * n
        return cls(p)


@dataclass(frozen=True)
class AttributionMatrix:
    """An attribution operator.

    ``images`` holds A e_k as row k-1. Attribution is computed from the
    images and the bid differences, so tied bids contribute a zero
    coefficient and equal positions get bit-identical attributions.
    """

    n: int
    entries: np.ndarray
    kind: str
    images: np.ndarray = None
    # set when A e_k spreads a single weight w_k over the top k positions
    shares: np.ndarray = None

    def __post_init__(self):
        entries = np.array(self.entries, dtype=float)
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)
        images = np.cumsum(entries, axis=1).T if self.images is None else self.images
        images = np.array(images, dtype=float)
        images.setflags(write=False)
        object.__setattr__(self, "images", images)

    def __matmul__(self, other):
        return self.entries @ other


def order_bids(raw: Mapping[BidderId, float]) -> OrderedBids:
    """Sort bids descending; equal bids are ordered by ascending bidder id."""
    for bidder, bid in raw.items():
        if bid < 0:
            raise ValueError(f"negative bid {bid!r} from bidder {bidder!r}")
    items = sorted(raw.items(), key=lambda kv: (-kv[1], kv[0]))
    return OrderedBids(
        values=np.array([float(b) for _, b in items]),
        perm=tuple(bidder for bidder, _ in items),
    )


def decompose(b: OrderedBids) -> BasisDecomposition:
    exact = [Fraction(float(x)) for x in b.values]
    coeffs = [exact[k] - exact[k + 1] for k in range(len(exact) - 1)]
    coeffs.extend(exact[-1:])
    return BasisDecomposition(tuple(coeffs))


def recompose(d: BasisDecomposition) -> np.ndarray:
    out = []
    acc = Fraction(0)
    for c in reversed(d.coeffs):
        acc += c
        out.append(float(acc))
    return np.array(out[::-1])


def basis_vector(k: int, n: int) -> np.ndarray:
    """e_k: ones in the first k positions."""
    e = np.zeros(n)
    e[:k] = 1.0
    return e


def _shapley_shares(n: int, mechanism: Mechanism) -> np.ndarray:
    shares = 1.0 / np.arange(1, n + 1)
    if mechanism is Mechanism.SECOND_PRICE:
        shares[0] = 0.0
    return shares


def _shapley_matrix(n: int, entries: np.ndarray, mechanism: Mechanism) -> AttributionMatrix:
    shares = _shapley_shares(n, mechanism)
    images = np.tril(np.repeat(shares[:, None], n, axis=1))
    return AttributionMatrix(n, entries, mechanism.value, images, shares)


@lru_cache(maxsize=256)
def _first_price_entries(n: int) -> np.ndarray:
    a = np.zeros((n, n))
    for j in range(1, n + 1):
        a[j - 1, j - 1] = 1.0 / j
        if j >= 2:
            a[: j - 1, j - 1] = -1.0 / (j * (j - 1))
    a.setflags(write=False)
    return a


def build_first_price_matrix(n: int) -> AttributionMatrix:
    if n < 1:
        raise ValueError("first-price attribution needs at least one bidder")
    return _shapley_matrix(n, _first_price_entries(n), Mechanism.FIRST_PRICE)


@lru_cache(maxsize=256)
def _second_price_entries(n: int) -> np.ndarray:
    a = np.array(_first_price_entries(n))
    a[:, 0] = 0.0
    a[0, 1] = 0.5
    a[1, 1] = 0.5
    a.setflags(write=False)
    return a


def build_second_price_matrix(n: int) -> AttributionMatrix:
    if n < 2:
        raise ValueError("second-price attribution needs at least two bidders")
    return _shapley_matrix(n, _second_price_entries(n), Mechanism.SECOND_PRICE)


def build_matrix(n: int, mechanism: "Mechanism | str") -> AttributionMatrix:
    mechanism = Mechanism.parse(mechanism)
    if mechanism is Mechanism.FIRST_PRICE:
        return build_first_price_matrix(n)
    return build_second_price_matrix(n)


def build_modified_matrix(
    profile: "ProbabilityProfile | np.ndarray", mechanism: "Mechanism | str"
) -> AttributionMatrix:
    """Column k is p_k - p_{k-1}, so that the matrix maps e_k to p_k."""
    mechanism = Mechanism.parse(mechanism)
    if not isinstance(profile, ProbabilityProfile):
        profile = ProbabilityProfile(profile)
    p = profile.vectors
    first_sum = p[0].sum()
    if mechanism is Mechanism.SECOND_PRICE and first_sum != 0:
        raise ValueError("second-price profiles must have p_1 = 0 (a lone bidder earns nothing)")
    if mechanism is Mechanism.FIRST_PRICE and first_sum == 0:
        raise ValueError("p_1 sums to 0, expected 1 for a first-price profile")
    n = profile.n
    exact = profile.exact
    entries = np.empty((n, n))
    entries[:, 0] = p[0]
    for k in range(1, n):
        entries[:, k] = [float(a - b) for a, b in zip(exact[k], exact[k - 1])]
    return AttributionMatrix(n, entries, f"modified-{mechanism.value}", p)


def attribute(m: AttributionMatrix, b: OrderedBids) -> dict:
    """Attribute auction revenue to bidders: phi = m @ ordered_bids.

    The product is evaluated as sum_k c_k (m e_k) with c_k the gaps between
    consecutive ordered bids.
    """
    if m.n != b.n:
        raise ValueError(f"matrix is {m.n}x{m.n} but there are {b.n} bids")
    values = b.values
    coeffs = np.append(values[:-1] - values[1:], values[-1:])
    if m.shares is not None:
        # phi_i = sum_{k >= i} c_k w_k, accumulated sequentially so that a
        # tied position adds an exact zero to its neighbour's value
        phi = np.cumsum((coeffs * m.shares)[::-1])[::-1]
    else:
        phi = m.images.T @ coeffs
    return dict(zip(b.perm, phi.tolist()))


def shapley_attribution(
    bids: Mapping[BidderId, float],
    mechanism: "Mechanism | str" = Mechanism.SECOND_PRICE,
    reserve: float = 0.0,
) -> dict:
    """Shapley attribution of one auction.

    Bids below the reserve are treated as zero. A second-price auction with a
    single bidder attributes nothing.
    """
    mechanism = Mechanism.parse(mechanism)
    eff = {i: (b if b >= reserve else 0.0) for i, b in bids.items()}
    if not eff:
        return {}
    if mechanism is Mechanism.SECOND_PRICE and len(eff) < 2:
        return {i: 0.0 for i in eff}
    ob = order_bids(eff)
    return attribute(build_matrix(ob.n, mechanism), ob)


def shapley_weight(size: int, n: int) -> float:
    """|S|!(n-|S|-1)!/n!, built as a product of ratios to stay finite."""
    w = 1.0 / n
    for s in range(size):
        w *= (s + 1) / (n - 1 - s)
    return w


def _check_limit(n: int, limit: int) -> None:
    if n > limit:
        raise ValueError(f"exact enumeration over 2^{n} coalitions exceeds the limit n <= {limit}")


def brute_force_shapley(
    v: Callable[[frozenset], float], n: int, limit: int = DEFAULT_ENUMERATION_LIMIT
) -> np.ndarray:
    """Exact Shapley values of players 0..n-1 by enumerating all coalitions."""
    _check_limit(n, limit)
    if n == 0:
        return np.zeros(0)
    size = 1 << n
    values = np.empty(size)
    for mask in range(size):
        values[mask] = v(frozenset(i for i in range(n) if mask >> i & 1))
    masks = np.arange(size)
    popcount = np.zeros(size, dtype=int)
    for i in range(n):
        popcount += (masks >> i) & 1
    weights = np.array([shapley_weight(s, n) for s in range(n)])
    out = np.empty(n)
    for i in range(n):
        without = masks[((masks >> i) & 1) == 0]
        out[i] = np.sum(weights[popcount[without]] * (values[without | (1 << i)] - values[without]))
    return out


def shapley_distribution(n: int, i: int) -> dict:
    """Subset weights over N minus {i} under which weighted_shapley is Shapley."""
    others = [j for j in range(n) if j != i]
    return {
        frozenset(S): shapley_weight(s, n)
        for s in range(n)
        for S in combinations(others, s)
    }


def weighted_shapley(
    v: Callable[[frozenset], float],
    pr: Mapping[frozenset, float],
    i: int,
    n: int,
    limit: int = DEFAULT_ENUMERATION_LIMIT,
    tol: float = 1e-9,
) -> float:
    """Expected marginal contribution of ``i`` when the other participants are
    a random coalition drawn from ``pr``."""
    _check_limit(n, limit)
    total = 0.0
    for S, w in pr.items():
        if w < 0:
            raise ValueError(f"negative weight {w} on coalition {sorted(S)}")
        if i in S:
            raise ValueError(f"coalition {sorted(S)} already contains player {i}")
        if any(j < 0 or j >= n for j in S):
            raise ValueError(f"coalition {sorted(S)} has players outside 0..{n - 1}")
        total += w
    if abs(total - 1.0) > tol:
        raise ValueError(f"coalition weights sum to {total:.12g}, not 1")
    return float(sum(w * (v(S | {i}) - v(S)) for S, w in pr.items() if w))


def unit_revenue(k: int, mechanism: "Mechanism | str") -> int:
    """Revenue v(e_k) of the auction whose top k bids are 1 and the rest 0."""
    mechanism = Mechanism.parse(mechanism)
    if mechanism is Mechanism.SECOND_PRICE:
        return 1 if k >= 2 else 0
    return 1 if k >= 1 else 0


def linearity_check(mechanism: "Mechanism | str", bids: OrderedBids) -> tuple:
    """Check v(b) = sum_k c_k v(e_k) in exact arithmetic.

    Returns ``(holds, revenue, basis_sum)``.
    """
    mechanism = Mechanism.parse(mechanism)
    exact = [Fraction(float(x)) for x in bids.values]
    if mechanism is Mechanism.FIRST_PRICE:
        lhs = exact[0] if exact else Fraction(0)
    else:
        lhs = exact[1] if len(exact) >= 2 else Fraction(0)
    coeffs = decompose(bids).coeffs
    rhs = sum((c * unit_revenue(k, mechanism) for k, c in enumerate(coeffs, start=1)), Fraction(0))
    return lhs == rhs, float(lhs), float(rhs)


def attribution_table(raw: Mapping[BidderId, float], m: AttributionMatrix) -> list:
    """Rows (bidder, bid, attribution) in ordered position."""
    ob = order_bids(raw)
    phi = attribute(m, ob)
    return [(i, raw[i], phi[i]) for i in ob.perm]

