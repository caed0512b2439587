"""Exact shill-proofness checks for single-item auctions with discrete types.

The modules build on one another:

``dist``      atom grids, marginals, joint priors and the sparse constructor
``valfn``     interdependent value functions
``mech``      direct mechanisms, optimal transfers and their validators
``auctions``  menu rules for Dutch, English, screening and single-action formats
``engine``    weak/strong shill-proofness solvers and credibility
``suite``     named reproduction scenarios
``cli``       the ``shillproof`` command
"""

from .auctions import (
    Auction,
    dutch,
    dutch_last_action,
    english,
    first_price_sealed,
    hybrid,
    is_semi_dutch,
    screening,
    second_price_sealed,
    single_action,
)
from .dist import AtomGrid, JointDist, MarginalDist, construct_sparse, correlated_joint, optimal_reserve_index
from .engine import credibility_check, strong_sp_all, validate_menu, weak_sp_all, weak_sp_check
from .mech import expected_revenue, make_mechanism, validate
from .valfn import ValueFunction

__version__ = "0.1.0"

__all__ = [
    "AtomGrid",
    "Auction",
    "JointDist",
    "MarginalDist",
    "ValueFunction",
    "construct_sparse",
    "correlated_joint",
    "credibility_check",
    "dutch",
    "dutch_last_action",
    "english",
    "expected_revenue",
    "first_price_sealed",
    "hybrid",
    "is_semi_dutch",
    "make_mechanism",
    "optimal_reserve_index",
    "screening",
    "second_price_sealed",
    "single_action",
    "strong_sp_all",
    "validate",
    "validate_menu",
    "weak_sp_all",
    "weak_sp_check",
]
