import itertools
import json
import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _support import raw_expected_welfare, single_item
from poadual.auctions.bne import check_bne, expected_welfare, find_pure_bne, pure_bne_exhaustive, require_bne
from poadual.auctions.certify import (
    bayesian_config_lp,
    check_auction_smooth,
    check_strategy_embedding,
    deviation_family,
    feldman_fu_duals,
    smooth_auction_duals,
)
from poadual.auctions.learning import envy_rate, no_envy_theorem_check, no_envy_trace
from poadual.auctions.model import (
    CombinatorialValuationAuction,
    StrategyMap,
    Valuation,
    simultaneous_outcome,
    truthful_strategy,
)
from poadual.errors import InvalidInstance, InvalidProfile, NotAnEquilibrium, SmoothnessViolation, WitnessSearchFailed
from poadual.instances import load
from poadual.lp import solve

HALF = [F(k, 2) for k in range(5)]


def two_type_second_price():
    return load("instances/second_price.json").model


# --------------------------------------------------------------------------
# Model
# --------------------------------------------------------------------------


def test_valuation_rules():
    with pytest.raises(InvalidInstance):
        Valuation.from_mapping(2, {(): 0, (0,): 2, (1,): 1, (0, 1): 1})
    assert Valuation.unit_demand([1, 2]).is_unit_demand()
    assert Valuation.additive([1, 2]).is_subadditive()
    assert not Valuation.from_mapping(2, {(): 0, (0,): 1, (1,): 1, (0, 1): 3}).is_subadditive()


def test_prior_must_sum_to_one():
    with pytest.raises(InvalidInstance):
        single_item([[1, 2]], [[F(1, 2), F(1, 3)]], [0, 1])


def test_grid_needs_zero():
    with pytest.raises(InvalidInstance):
        single_item([[1]], [[1]], [1, 2])


def test_single_bidder_welfare():
    ca = single_item([[1]], [[1]], [0, 1])
    assert expected_welfare(ca, truthful_strategy(ca)) == 1


def test_higher_value_wins():
    ca = single_item([[1], [2]], [[1], [1]], [0, 1, 2])
    assert expected_welfare(ca, truthful_strategy(ca)) == 2


def test_reserve_never_allocates():
    ca = single_item([[1], [1]], [[1], [1]], [0, 1], reserve=2)
    assert expected_welfare(ca, truthful_strategy(ca)) == 0


def test_second_price_payment():
    ca = single_item([[3], [3]], [[1], [1]], [0, 1, 3])
    bundles, payments, _ = simultaneous_outcome(ca, [[3], [1]])
    assert bundles[0] == frozenset({0}) and payments == (1, 0)


def test_zero_bids_tie_to_first_player():
    ca = single_item([[1], [1]], [[1], [1]], [0, 1])
    bundles, payments, _ = simultaneous_outcome(ca, [[0], [0]])
    assert bundles[0] == frozenset({0}) and payments[0] == 0


def test_first_price_payment():
    ca = single_item([[3], [3]], [[1], [1]], [0, 1, 3], mechanism="first-price")
    _, payments, _ = simultaneous_outcome(ca, [[3], [1]])
    assert payments == (3, 0)


def test_overbidding_rejected():
    ca = single_item([[1], [1]], [[1], [1]], [0, 1, 2])
    with pytest.raises(InvalidProfile):
        simultaneous_outcome(ca, [[2], [0]])


def test_no_overbidding_actions_on_bundles():
    v = Valuation.unit_demand([1, 1])
    ca = CombinatorialValuationAuction(2, [[v]], [[1]], [0, 1])
    assert set(ca.actions(0, 0)) == {(0, 0), (0, 1), (1, 0)}


def test_welfare_agrees_with_raw_enumeration():
    ca = two_type_second_price()
    sigma = truthful_strategy(ca)
    choice = [[d[0][0] for d in per] for per in sigma.maps]
    assert expected_welfare(ca, sigma) == raw_expected_welfare(ca, choice)


def test_strategy_map_must_be_a_distribution():
    ca = single_item([[1]], [[1]], [0, 1])
    with pytest.raises(InvalidProfile):
        StrategyMap.mixed([[{(F(1),): F(1, 2)}]]).validate(ca)


# --------------------------------------------------------------------------
# Equilibria
# --------------------------------------------------------------------------


def test_truthful_second_price_is_bne():
    ca = two_type_second_price()
    rep = check_bne(ca, truthful_strategy(ca))
    assert rep.is_equilibrium and rep.gain == 0


def test_dominated_action_reports_gain():
    ca = single_item([[2], [1]], [[1], [1]], [0, 1, 2])
    sigma = StrategyMap.pure([[(F(0),)], [(F(1),)]])
    rep = check_bne(ca, sigma)
    assert rep.gain > 0 and rep.where[0] == 0
    with pytest.raises(NotAnEquilibrium):
        require_bne(ca, sigma)


def test_found_bne_is_verified():
    ca = single_item([[1, 2], [1, 2]], [[F(1, 2), F(1, 2)], [F(1, 2), F(1, 2)]], HALF, mechanism="first-price")
    sigma, how = find_pure_bne(ca)
    assert sigma is not None and check_bne(ca, sigma).is_equilibrium


def naive_pure_bne(ca):
    slots = [(i, t) for i in range(ca.n) for t in ca.types(i)]
    out = []
    for combo in itertools.product(*(ca.actions(i, t) for i, t in slots)):
        choice = [[None] * len(ca.priors[i]) for i in range(ca.n)]
        for (i, t), a in zip(slots, combo):
            choice[i][t] = a
        if check_bne(ca, StrategyMap.pure(choice)).is_equilibrium:
            out.append(StrategyMap.pure(choice))
    return out


@settings(max_examples=20, deadline=None)
@given(st.lists(st.lists(st.integers(0, 2), min_size=1, max_size=2), min_size=2, max_size=2),
       st.sampled_from(["first-price", "second-price"]))
def test_exhaustive_search_matches_naive_enumeration(values, mechanism):
    priors = [[F(1, len(v))] * len(v) for v in values]
    ca = single_item([[F(x) for x in v] for v in values], priors, [0, F(1, 2), 1, 2], mechanism=mechanism)
    assert pure_bne_exhaustive(ca, first_only=False) == naive_pure_bne(ca)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(0, 2), min_size=2, max_size=2), st.lists(st.integers(0, 2), min_size=2, max_size=2))
def test_truthful_is_dominant_in_second_price(a, b):
    ca = single_item([[F(x) for x in a], [F(x) for x in b]], [[F(1, 2), F(1, 2)]] * 2, [0, 1, 2])
    assert check_bne(ca, truthful_strategy(ca)).is_equilibrium


# --------------------------------------------------------------------------
# Interim LP and smooth-auction certificates
# --------------------------------------------------------------------------


def test_interim_lp_deterministic_types():
    ca = single_item([[1], [3]], [[1], [1]], [0, 1, 3])
    assert solve(bayesian_config_lp(ca).lp).objective == 3


def test_interim_lp_is_expected_max_value():
    ca = single_item([[1, 2], [0, 3]], [[F(1, 2), F(1, 2)], [F(1, 4), F(3, 4)]], [0, 1, 2, 3])
    expected = sum(
        ca.priors[0][s] * ca.priors[1][t] * max(ca.valuations[0][s]({0}), ca.valuations[1][t]({0}))
        for s in range(2) for t in range(2)
    )
    assert solve(bayesian_config_lp(ca).lp).objective == expected


def test_strategy_embedding():
    ca = two_type_second_price()
    sigma = truthful_strategy(ca)
    bp = bayesian_config_lp(ca)
    assert check_strategy_embedding(bp, sigma) == expected_welfare(ca, sigma)


def test_second_price_smooth_certificate():
    ca = two_type_second_price()
    sigma = truthful_strategy(ca)
    cert = smooth_auction_duals(ca, sigma, 1, 1)
    assert cert.feasible and cert.certified_ratio == F(1, 2)
    assert cert.details["welfare"] >= F(1, 2) * cert.lp_optimum


def test_single_player_degenerate_pair():
    ca = single_item([[1]], [[1]], [0, 1])
    cert = smooth_auction_duals(ca, truthful_strategy(ca), 1, 0)
    assert cert.feasible and cert.certified_ratio == 1


def test_second_price_is_one_one_smooth():
    assert check_auction_smooth(two_type_second_price(), 1, 1).verified


def test_zero_lambda_is_flagged():
    cert = check_auction_smooth(two_type_second_price(), 0, 0)
    assert cert.verified and any("degenerate" in f for f in cert.flags)


def test_first_price_half_bids_are_weakly_smooth():
    ca = single_item([[1, 2], [1, 2]], [[F(1, 2), F(1, 2)], [F(1, 2), F(1, 2)]], HALF, mechanism="first-price")
    cert = check_auction_smooth(ca, F(1, 2), 1, "ST13", deviation_family(ca, "half"))
    assert cert.verified and cert.ratio == F(1, 2)


def test_weak_variant_needs_mu_at_least_one():
    with pytest.raises(ValueError):
        check_auction_smooth(two_type_second_price(), 1, F(1, 2), "ST13")


def test_mismatched_smoothness_certificate_rejected():
    ca = two_type_second_price()
    weak = check_auction_smooth(ca, 1, 1, "ST13")
    with pytest.raises(SmoothnessViolation):
        smooth_auction_duals(ca, truthful_strategy(ca), 1, 1, "R15", smoothness=weak)


def test_smooth_certificate_requires_bne():
    ca = single_item([[2], [1]], [[1], [1]], [0, 1, 2])
    with pytest.raises(NotAnEquilibrium):
        smooth_auction_duals(ca, StrategyMap.pure([[(F(0),)], [(F(1),)]]), 1, 1)


# --------------------------------------------------------------------------
# Simultaneous item bidding duals
# --------------------------------------------------------------------------


def test_single_player_item_bidding_duals():
    ca = single_item([[1]], [[1]], [0, 1])
    cert = feldman_fu_duals(ca, truthful_strategy(ca))
    a = cert.assignment
    assert cert.feasible
    assert a["alpha[0,0]"] == 2 and a["gamma[0,0,0]"] == 0 and a["beta[0]"] == 0


def test_identical_bidders_on_half_grid():
    ca = single_item([[1], [1]], [[1], [1]], [0, F(1, 2), 1])
    sigma, _ = find_pure_bne(ca)
    cert = feldman_fu_duals(ca, sigma)
    assert cert.feasible
    assert cert.details["welfare"] >= F(1, 4) * cert.details["expected_optimum"]


def test_additive_two_items():
    v = [Valuation.additive([1, 1]), Valuation.additive([F(1, 2), 1])]
    ca = CombinatorialValuationAuction(2, [[v[0]], [v[1]]], [[1], [1]], [0, F(1, 2), 1])
    sigma, _ = find_pure_bne(ca)
    assert feldman_fu_duals(ca, sigma).feasible


def test_first_price_half_grid_certificate():
    ca = load("instances/first_price_uniform.json").model
    sigma, _ = find_pure_bne(ca)
    cert = feldman_fu_duals(ca, sigma)
    assert cert.feasible and cert.certified_ratio == F(1, 2)
    assert cert.details["welfare"] >= F(1, 2) * cert.details["expected_optimum"]


def test_coarse_first_price_grid_has_no_witness():
    ca = single_item([[0], [1]], [[1], [1]], [0, 1, 2], mechanism="first-price")
    sigma, _ = find_pure_bne(ca)
    assert expected_welfare(ca, sigma) == 0
    with pytest.raises(WitnessSearchFailed) as info:
        feldman_fu_duals(ca, sigma)
    assert info.value.triple == (1, 0, (0,))


def test_value_equal_to_grid_step_has_no_witness():
    ca = single_item([[F(1, 2)], [F(1, 2), F(1, 2)]], [[1], [F(1, 2), F(1, 2)]], HALF, mechanism="first-price")
    sigma, _ = find_pure_bne(ca)
    with pytest.raises(WitnessSearchFailed):
        feldman_fu_duals(ca, sigma)


def test_non_subadditive_rejected():
    v = Valuation.from_mapping(2, {(): 0, (0,): 0, (1,): 0, (0, 1): 2})
    ca = CombinatorialValuationAuction(2, [[v]], [[1]], [0, 1, 2])
    with pytest.raises(InvalidInstance):
        feldman_fu_duals(ca, truthful_strategy(ca))


def test_item_bidding_on_random_small_auctions():
    rng = random.Random(2)
    checked = 0
    for _ in range(15):
        mech = rng.choice(["first-price", "second-price"])
        # integer values keep half of every value on the grid
        values = [[F(rng.randint(0, 2)) for _ in range(rng.randint(1, 2))] for _ in range(2)]
        priors = [[F(1, len(v))] * len(v) for v in values]
        ca = single_item(values, priors, HALF, mechanism=mech)
        sigma, _ = find_pure_bne(ca)
        if sigma is None:
            continue
        cert = feldman_fu_duals(ca, sigma)
        fraction = F(1, 2) if mech == "first-price" else F(1, 4)
        assert cert.feasible
        assert cert.details["welfare"] >= fraction * cert.details["expected_optimum"]
        checked += 1
    assert checked > 0


# --------------------------------------------------------------------------
# Learning
# --------------------------------------------------------------------------


def test_single_learner_wins_everything():
    ca = CombinatorialValuationAuction(2, [[Valuation.additive([1, 2])]], [[1]], [0, 1, 2])
    trace = no_envy_trace(ca, 30, seed=1)
    trace.validate()
    assert all(s.welfare == 3 for s in trace.steps)
    assert all(x == 0 for row in trace.steps[0].thresholds for x in row)
    assert envy_rate(trace) == [0]


def test_envy_falls_with_horizon():
    ca = load("instances/learning.json").model
    short, long = envy_rate(no_envy_trace(ca, 100, seed=0)), envy_rate(no_envy_trace(ca, 1000, seed=0))
    assert all(b <= a for a, b in zip(short, long))


def test_scripted_opponent_keeps_trace_consistent():
    ca = load("instances/learning.json").model
    trace = no_envy_trace(ca, 50, seed=3, learners=["hedge", [(F(2),), (F(0),)]])
    trace.validate()
    assert no_envy_theorem_check(trace).holds


def test_always_zero_bidder_has_full_envy():
    # the first player wins every zero-zero tie, so the envious player goes second
    ca = single_item([[0], [1]], [[1], [1]], [0, 1])
    trace = no_envy_trace(ca, 10, learners=[[(F(0),)], [(F(0),)]])
    assert envy_rate(trace)[1] == 1


def test_trace_lines_are_json():
    ca = load("instances/learning.json").model
    lines = no_envy_trace(ca, 5, seed=0).to_lines()
    assert len(lines) == 5 and json.loads(lines[0])["step"] == 0


def test_same_seed_same_trace():
    ca = load("instances/learning.json").model
    assert no_envy_trace(ca, 40, seed=9).to_lines() == no_envy_trace(ca, 40, seed=9).to_lines()


def test_learning_needs_second_price():
    ca = single_item([[1]], [[1]], [0, 1], mechanism="first-price")
    with pytest.raises(InvalidInstance):
        no_envy_trace(ca, 5)
