"""Shapley revenue attribution for auctions and callout mechanism evaluation."""

from .auction import AuctionOutcome, AuctionSpec, coalition_revenue, effective_bids, run_auction
from .shapley import (
    AttributionMatrix,
    BasisDecomposition,
    Mechanism,
    OrderedBids,
    ProbabilityProfile,
    attribute,
    brute_force_shapley,
    build_first_price_matrix,
    build_modified_matrix,
    build_second_price_matrix,
    decompose,
    linearity_check,
    order_bids,
    recompose,
    shapley_attribution,
    weighted_shapley,
)

__version__ = "0.1.0"

__all__ = [
    "AttributionMatrix",
    "AuctionOutcome",
    "AuctionSpec",
    "BasisDecomposition",
    "Mechanism",
    "OrderedBids",
    "ProbabilityProfile",
    "attribute",
    "brute_force_shapley",
    "build_first_price_matrix",
    "build_modified_matrix",
    "build_second_price_matrix",
    "coalition_revenue",
    "decompose",
    "effective_bids",
    "linearity_check",
    "order_bids",
    "recompose",
    "run_auction",
    "shapley_attribution",
    "weighted_shapley",
]
