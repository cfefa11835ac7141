import random
from fractions import Fraction as F

import pytest

from _support import g1, pigou, raw_optimum, random_affine_game, two_links_one_player, two_links_two_players
from poadual.certificates import (
    atomic_duals,
    augmentation_certificate,
    certified_poa_bound,
    nonatomic_duals,
    score,
    smooth_dual_assignment,
    smooth_duals,
    splittable_duals,
)
from poadual.configlp import profile_lp
from poadual.congestion import AtomicGame, NonAtomicGame, SplittableGame
from poadual.costs import LINEAR, constant
from poadual.equilibria import JointDistribution, marginal_equilibria, pure_nash_all, wardrop_equilibrium, worst_cce
from poadual.errors import InfeasibleCertificate, NotAnEquilibrium, SmoothnessViolation
from poadual.lp import dual_of, feasibility_residuals
from poadual.smoothness import check_dual_smooth, check_game_smooth, robust_poa_search

FIVE_THIRDS, ONE_THIRD = F(5, 3), F(1, 3)


def test_profile_certificate_for_worst_cce():
    sigma = worst_cce(g1()).witness
    cert = smooth_duals(g1(), sigma, FIVE_THIRDS, ONE_THIRD)
    assert cert.feasible
    assert cert.dual_objective == F(2, 5) * 3 == F(6, 5)
    assert cert.dual_objective <= cert.lp_optimum == 2
    assert cert.certified_ratio == F(5, 2)
    assert certified_poa_bound(cert, 3) == F(5, 2)


def test_profile_certificate_is_feasible_in_the_explicit_dual():
    g = g1()
    sigma = worst_cce(g).witness
    assignment = smooth_dual_assignment(g, sigma, FIVE_THIRDS, ONE_THIRD)
    assert feasibility_residuals(dual_of(profile_lp(g).lp), assignment).feasible


def test_point_mass_on_nash_with_smooth_pair():
    g = g1()
    for r in pure_nash_all(g):
        assert smooth_duals(g, JointDistribution.point(r.witness), FIVE_THIRDS, ONE_THIRD).feasible


def test_non_smooth_pair_names_the_violated_configuration():
    g = g1()
    cert = smooth_duals(g, worst_cce(g).witness, 1, 0)
    assert not cert.feasible
    assert cert.residuals.worst.startswith("z[")
    assert cert.certified_ratio is None
    with pytest.raises(InfeasibleCertificate):
        certified_poa_bound(cert, 3)


def test_searched_pair_is_reported():
    cert = smooth_duals(g1(), worst_cce(g1()).witness)
    assert cert.feasible and cert.params["searched"]
    assert check_game_smooth(g1(), cert.params["lambda"], cert.params["mu"]).verified


def test_resource_certificate_for_worst_cce():
    sigma = worst_cce(g1()).witness
    cert = atomic_duals(g1(), sigma, FIVE_THIRDS, ONE_THIRD)
    assert cert.feasible and cert.certified_ratio == F(5, 2)
    assert cert.dual_objective == F(6, 5)


def test_resource_certificate_constant_costs():
    g = AtomicGame.unweighted({"e": constant(2)}, [[{"e"}], [{"e"}]])
    cert = atomic_duals(g, worst_cce(g).witness, 1, 0)
    assert cert.feasible and cert.certified_ratio == 1


def test_resource_certificate_weighted_searched():
    g = AtomicGame({"a": LINEAR, "b": LINEAR}, [(2, [{"a"}, {"b"}]), (1, [{"a"}, {"b"}])])
    cert = atomic_duals(g, worst_cce(g).witness)
    assert cert.feasible
    assert worst_cce(g).cost <= cert.certified_ratio * raw_optimum(g)


def test_certificate_requires_a_cce():
    with pytest.raises(NotAnEquilibrium):
        smooth_duals(g1(), JointDistribution.point((0, 0)), FIVE_THIRDS, ONE_THIRD)


def test_parameter_ranges():
    sigma = worst_cce(g1()).witness
    with pytest.raises(ValueError):
        smooth_duals(g1(), sigma, 0, 0)
    with pytest.raises(ValueError):
        smooth_duals(g1(), sigma, 2, 1)


def test_nonatomic_certificate_on_pigou():
    g = pigou(F(1, 4))
    cert = nonatomic_duals(g, wardrop_equilibrium(g))
    assert cert.feasible
    assert F(5, 4) <= cert.certified_ratio <= F(4, 3)
    assert cert.details["pigou_excess"] == 0


def test_nonatomic_constant_costs_ratio_one():
    g = NonAtomicGame({"a": constant(1), "b": constant(1)}, F(1, 2), [(2, [{"a"}, {"b"}])])
    assert nonatomic_duals(g, wardrop_equilibrium(g)).certified_ratio == 1


def test_nonatomic_identical_links_ratio_one():
    g = NonAtomicGame({"a": LINEAR, "b": LINEAR}, F(1, 2), [(2, [{"a"}, {"b"}])])
    cert = nonatomic_duals(g, wardrop_equilibrium(g))
    assert cert.certified_ratio == 1


def test_nonatomic_rejects_non_wardrop_flow():
    g = pigou(F(1, 4))
    with pytest.raises(NotAnEquilibrium):
        nonatomic_duals(g, ((F(0), F(1)),))


def test_augmentation_on_pigou():
    g = pigou(F(1, 2))
    eq = wardrop_equilibrium(g)
    cert = augmentation_certificate(g, 1, eq)
    assert cert.feasible
    assert cert.details["augmented_opt"] == F(7, 4)
    assert eq.cost == 1 <= cert.details["augmented_opt"]
    assert cert.dual_objective >= eq.cost


def test_augmentation_needs_positive_r():
    g = pigou(F(1, 2))
    with pytest.raises(ValueError):
        augmentation_certificate(g, 0, wardrop_equilibrium(g))


def test_augmentation_constant_costs():
    g = NonAtomicGame({"a": constant(1)}, F(1, 2), [(2, [{"a"}])])
    eq = wardrop_equilibrium(g)
    cert = augmentation_certificate(g, 1, eq)
    assert eq.cost <= cert.details["augmented_opt"]


def test_splittable_single_player():
    g = two_links_one_player()
    grid = [F(k, 2) for k in range(3)]
    pair = robust_poa_search(LINEAR, "dual-smooth", n=1, grid=grid)
    assert check_dual_smooth(LINEAR, pair.lam, pair.mu, 1, grid).verified
    cert = splittable_duals(g, ((F(1, 2), F(1, 2)),), pair.lam, pair.mu)
    assert cert.feasible and cert.details["identity_holds"]


def test_splittable_constant_costs():
    g = SplittableGame({"a": constant(1), "b": constant(1)}, F(1, 2), [(1, [{"a"}, {"b"}])])
    cert = splittable_duals(g, ((F(1, 2), F(1, 2)),), 1, 0)
    assert cert.feasible and cert.certified_ratio == 1


def test_splittable_refuses_non_dual_smooth_pair():
    with pytest.raises(SmoothnessViolation) as info:
        splittable_duals(two_links_one_player(), ((F(1, 2), F(1, 2)),), F(1, 2), 0)
    assert info.value.witness is not None


def test_splittable_two_players_at_marginal_equilibrium():
    g = two_links_two_players()
    worst = max(marginal_equilibria(g), key=lambda r: r.cost)
    cert = splittable_duals(g, worst.witness)
    assert cert.feasible and cert.certified_ratio is not None
    opt, _ = g.optimum()
    assert worst.cost <= cert.certified_ratio * opt


def test_one_zero_recipe_on_optimal_equilibrium():
    g = AtomicGame.unweighted({"a": constant(1), "b": constant(2)}, [[{"a"}, {"b"}]])
    sigma = JointDistribution.point((0,))
    cert = smooth_duals(g, sigma, 1, 0)
    assert cert.feasible and certified_poa_bound(cert, 1) == 1


def test_score_reports_weak_duality_optimum():
    g = g1()
    cert = smooth_duals(g, worst_cce(g).witness, FIVE_THIRDS, ONE_THIRD)
    residuals, objective, optimum = score(cert.target, cert.assignment)
    assert residuals.feasible and objective <= optimum


def test_identity_and_sandwich_on_random_games():
    rng = random.Random(5)
    for _ in range(20):
        g = random_affine_game(rng)
        cce = worst_cce(g)
        opt = raw_optimum(g)
        for build in (smooth_duals, atomic_duals):
            cert = build(g, cce.witness)
            lam, mu = cert.params["lambda"], cert.params["mu"]
            assert cert.feasible
            assert cert.dual_objective == (1 - mu) / lam * cce.cost
            assert cert.dual_objective <= cert.lp_optimum <= opt <= cce.cost
            assert certified_poa_bound(cert, cce.cost) == lam / (1 - mu)
