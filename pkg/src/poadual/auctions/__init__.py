"""Bayesian auctions: model, equilibria, certificates and learning dynamics."""

from .bne import (
    BNEReport,
    best_response_iteration,
    check_bne,
    expected_revenue,
    expected_welfare,
    find_pure_bne,
    pure_bne_exhaustive,
    require_bne,
)
from .certify import (
    bayesian_config_lp,
    check_auction_smooth,
    check_strategy_embedding,
    deviation_family,
    embed_strategy,
    feldman_fu_duals,
    feldman_fu_lp,
    smooth_auction_duals,
    witness_actions,
)
from .learning import LearningTrace, envy_rate, no_envy_theorem_check, no_envy_trace
from .model import (
    BayesianAuction,
    CombinatorialValuationAuction,
    StrategyMap,
    Valuation,
    simultaneous_outcome,
    truthful_bid,
    truthful_strategy,
)
