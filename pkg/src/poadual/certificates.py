"""Dual certificates: explicit dual assignments built from an equilibrium.

Each recipe turns an equilibrium into values for the dual variables of a
configuration LP, checks them against every dual constraint exactly, and turns
the dual objective into an efficiency bound through weak duality.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Mapping

from ._rational import as_rational
from .configlp import BuiltProgram, augmented_lp, nonatomic_lp, profile_lp, resource_lp, splittable_lp
from .congestion import AtomicGame, NonAtomicGame, SplittableGame
from .equilibria import (
    EquilibriumReport,
    JointDistribution,
    cce_slack,
    check_wardrop,
    splittable_equilibrium_check,
)
from .errors import InfeasibleCertificate, MissingVariable, NotAnEquilibrium, SmoothnessViolation
from .lp import ResidualReport, dual_of, feasibility_residuals, solve
from .smoothness import check_dual_smooth, pigou_bound, pigou_ratio, robust_poa_search

ZERO = Fraction(0)
ONE = Fraction(1)


@dataclass(frozen=True)
class DualCertificate:
    target: BuiltProgram
    assignment: dict[str, Fraction]
    residuals: ResidualReport
    dual_objective: Fraction
    certified_ratio: Fraction | None
    recipe: str
    params: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)
    lp_optimum: Fraction | None = None

    @property
    def feasible(self) -> bool:
        return self.residuals.feasible


def score(bp: BuiltProgram, assignment: Mapping[str, Fraction], check_weak_duality: bool = True):
    """Residuals and objective of ``assignment`` in the dual of ``bp``.

    When the assignment is feasible, weak duality against the solved primal is
    asserted, and the primal optimum is returned alongside.
    """
    dual = dual_of(bp.lp)
    missing = set(dual.variable_names) - set(assignment)
    if missing:
        raise MissingVariable(sorted(missing)[0])
    residuals = feasibility_residuals(dual, assignment)
    objective = dual.objective_value(assignment)
    optimum = None
    if check_weak_duality and residuals.feasible:
        result = solve(bp.lp)
        if result.status != "optimal":
            raise AssertionError(f"primal LP is {result.status}")
        optimum = result.objective
        if bp.lp.sense == "minimize" and objective > optimum:
            raise AssertionError("weak duality violated: dual objective above the primal optimum")
        if bp.lp.sense == "maximize" and objective < optimum:
            raise AssertionError("weak duality violated: dual objective below the primal optimum")
    return residuals, objective, optimum


def _check_params(lam, mu) -> tuple[Fraction, Fraction]:
    lam, mu = as_rational(lam), as_rational(mu)
    if lam <= 0:
        raise ValueError("lambda must be positive")
    if mu < 0 or mu >= 1:
        raise ValueError("mu must lie in [0, 1)")
    return lam, mu


def _require_cce(g, sigma: JointDistribution) -> None:
    gain, where = cce_slack(g, sigma)
    if gain > 0:
        raise NotAnEquilibrium(f"distribution is not a CCE: player {where[0]} gains {gain} by deviating", gain)


# --------------------------------------------------------------------------
# Atomic games
# --------------------------------------------------------------------------


def smooth_dual_assignment(g: AtomicGame, sigma: JointDistribution, lam, mu) -> dict[str, Fraction]:
    """alpha_i = E[C_i]/lam, beta = -mu E[C]/lam, gamma_ij = E[C_i(s_ij, s_-i)]/lam."""
    out = {"beta": -mu * sigma.expectation(g.total_cost) / lam}
    for i, p in enumerate(g.players):
        out[f"alpha[{i}]"] = sigma.expectation(lambda s: g.player_cost(i, s)) / lam
        for j in range(len(p.strategies)):
            out[f"gamma[{i},{j}]"] = sigma.expectation(lambda s: g.player_cost(i, g.deviate(s, i, j))) / lam
    return out


def atomic_dual_assignment(g: AtomicGame, sigma: JointDistribution, lam, mu) -> dict[str, Fraction]:
    out = {}
    for i in range(g.n):
        out[f"alpha[{i}]"] = sigma.expectation(lambda s: g.player_cost(i, s)) / lam
    for e in g.resources:
        cost = g.costs[e]

        def on_e(s):
            load = g.loads(s)[e]
            return load * cost.eval(load)

        out[f"beta[{e}]"] = -mu * sigma.expectation(on_e) / lam
        for i, p in enumerate(g.players):
            w = p.weight

            def alone(s):
                load = g.loads(s)[e]
                others = load - (w if e in g.strategy(i, s[i]) else ZERO)
                return w * cost.eval(others + w)

            out[f"gamma[{i},{e}]"] = sigma.expectation(alone) / lam
    return out


def _atomic_certificate(g, sigma, lam, mu, bp, assignment, recipe, searched) -> DualCertificate:
    residuals, objective, optimum = score(bp, assignment)
    eq_cost = sigma.expectation(g.total_cost)
    ratio = None
    if residuals.feasible:
        if objective != (1 - mu) / lam * eq_cost:
            raise AssertionError("dual objective identity failed")
        ratio = lam / (1 - mu)
    params = {"lambda": lam, "mu": mu, "searched": searched}
    return DualCertificate(bp, assignment, residuals, objective, ratio, recipe, params,
                           {"equilibrium_cost": eq_cost}, optimum)


def smooth_duals(g: AtomicGame, sigma: JointDistribution, lam=None, mu=None) -> DualCertificate:
    """Certificate for the profile configuration LP from a CCE and a smoothness pair."""
    _require_cce(g, sigma)
    searched = lam is None or mu is None
    if searched:
        found = robust_poa_search(g, "game")
        if not found.verified:
            raise SmoothnessViolation("no smoothness pair on the lattice")
        lam, mu = found.lam, found.mu
    lam, mu = _check_params(lam, mu)
    bp = profile_lp(g)
    recipe = f"smooth[lambda={lam},mu={mu}]"
    return _atomic_certificate(g, sigma, lam, mu, bp, smooth_dual_assignment(g, sigma, lam, mu), recipe, searched)


def atomic_duals(g: AtomicGame, sigma: JointDistribution, lam=None, mu=None) -> DualCertificate:
    """Certificate for the resource configuration LP of a weighted atomic game."""
    _require_cce(g, sigma)
    searched = lam is None or mu is None
    if searched:
        grid = sorted({ZERO} | {p.weight for p in g.players})
        found = robust_poa_search([g.costs[e] for e in g.resources], "resource", n=g.n, grid=grid, caps=g.caps)
        if not found.verified:
            raise SmoothnessViolation("no resource-smoothness pair on the lattice")
        lam, mu = found.lam, found.mu
    lam, mu = _check_params(lam, mu)
    bp = resource_lp(g)
    recipe = f"atomic[lambda={lam},mu={mu}]"
    return _atomic_certificate(g, sigma, lam, mu, bp, atomic_dual_assignment(g, sigma, lam, mu), recipe, searched)


# --------------------------------------------------------------------------
# Non-atomic games
# --------------------------------------------------------------------------


def _flow_of(g: NonAtomicGame, eq):
    if isinstance(eq, EquilibriumReport):
        return eq.witness
    return eq


def _nonatomic_assignment(g: NonAtomicGame, flow, bp: BuiltProgram):
    """alpha_i = cheapest strategy cost, gamma_ike = a_k l_e(f_e), beta_e by exact minimisation."""
    load = g.loads(flow)
    eps = g.epsilon
    out: dict[str, Fraction] = {}
    spread = {}
    for i, grp in enumerate(g.groups):
        costs = [sum((g.costs[e].eval(load[e]) for e in s), ZERO) for s in grp.strategies]
        out[f"alpha[{i}]"] = min(costs)
        used = [costs[j] for j, a in enumerate(flow[i]) if a > 0]
        spread[i] = max(used) - min(used)
    for row in bp.lp.constraints:
        if row.name.startswith("gamma["):
            i, k, e = row.name[len("gamma["):-1].split(",", 2)
            out[row.name] = int(k) * eps * g.costs[e].eval(load[e])
    minimisers = {}
    for e in g.resources:
        best = None
        for T in bp.configurations[e]:
            w = sum((k * eps for _, k in T), ZERO)
            val = w * g.costs[e].eval(w) - w * g.costs[e].eval(load[e])
            if best is None or val < best[0]:
                best = (val, w)
        out[f"beta[{e}]"] = best[0]
        minimisers[e] = best[1]
    return out, minimisers, spread


def _nonatomic_ratio(g: NonAtomicGame, flow, minimisers) -> Fraction:
    load = g.loads(flow)
    worst = ONE
    for e in g.resources:
        ratio = pigou_ratio(g.costs[e], load[e], minimisers[e])
        if ratio is not None and load[e] > 0:
            worst = max(worst, ratio)
    return worst


def _require_wardrop(g: NonAtomicGame, flow) -> EquilibriumReport:
    rep = check_wardrop(g, flow)
    if rep.deviation_slack > rep.details["delta"]:
        raise NotAnEquilibrium(
            f"flow violates the Wardrop condition by {rep.deviation_slack} (> delta {rep.details['delta']})",
            rep.deviation_slack,
        )
    return rep


def nonatomic_duals(g: NonAtomicGame, eq) -> DualCertificate:
    flow = _flow_of(g, eq)
    rep = _require_wardrop(g, flow)
    bp = nonatomic_lp(g)
    assignment, minimisers, spread = _nonatomic_assignment(g, flow, bp)
    residuals, objective, optimum = score(bp, assignment)
    if not residuals.feasible:
        raise AssertionError(f"non-atomic certificate infeasible at {residuals.worst}")
    ratio = _nonatomic_ratio(g, flow, minimisers)
    eps = g.epsilon
    top = max((sum(grp.units for grp in g.groups)) * eps, max(minimisers.values()))
    grid = [k * eps for k in range(int(top / eps) + 1)]
    bound = pigou_bound([g.costs[e] for e in g.resources], grid).value
    if ratio > bound:
        raise AssertionError("certified ratio exceeds the grid Pigou bound")
    details = {
        "equilibrium_cost": rep.cost,
        "wardrop_slack": rep.deviation_slack,
        "delta": rep.details["delta"],
        "support_cost_spread": spread,
        "minimising_loads": minimisers,
        "grid_pigou_bound": bound,
        "pigou_excess": max(ZERO, ratio - bound),
    }
    return DualCertificate(bp, assignment, residuals, objective, ratio, "nonatomic", {}, details, optimum)


def augmentation_certificate(g: NonAtomicGame, r, eq) -> DualCertificate:
    """Non-atomic recipe scored on the LP with demands scaled by ``1 + r``."""
    r = as_rational(r)
    if r <= 0:
        raise ValueError("augmentation needs r > 0")
    flow = _flow_of(g, eq)
    rep = _require_wardrop(g, flow)
    bp = augmented_lp(g, r)
    assignment, minimisers, spread = _nonatomic_assignment(g, flow, bp)
    residuals, objective, optimum = score(bp, assignment)
    if not residuals.feasible:
        raise AssertionError(f"augmentation certificate infeasible at {residuals.worst}")
    if objective < r * rep.cost:
        raise AssertionError("dual objective is below r times the equilibrium cost")
    bigger_opt, _ = g.scaled(1 + r).optimum()
    if rep.cost > bigger_opt / r:
        raise AssertionError("equilibrium cost exceeds OPT((1+r)w)/r")
    details = {
        "equilibrium_cost": rep.cost,
        "augmented_opt": bigger_opt,
        "r": r,
        "delta": rep.details["delta"],
        "minimising_loads": minimisers,
    }
    return DualCertificate(bp, assignment, residuals, objective, None, f"augmentation[r={r}]", {"r": r}, details,
                           optimum)


# --------------------------------------------------------------------------
# Splittable games
# --------------------------------------------------------------------------


def _split_sigma(g: SplittableGame, sigma) -> JointDistribution:
    if isinstance(sigma, JointDistribution):
        return sigma
    if isinstance(sigma, EquilibriumReport):
        sigma = sigma.witness
        if isinstance(sigma, JointDistribution):
            return sigma
    g.validate(sigma)
    return JointDistribution.point(tuple(tuple(as_rational(a) for a in row) for row in sigma))


def splittable_dual_assignment(g: SplittableGame, sigma: JointDistribution, lam, mu, bp: BuiltProgram):
    eps = g.epsilon
    out: dict[str, Fraction] = {}
    for i, grp in enumerate(g.groups):
        options = [
            sigma.expectation(lambda u: sum((g.marginal_costs(u)[i][e] for e in s), ZERO)) for s in grp.strategies
        ]
        out[f"alpha[{i}]"] = min(options) / lam
    for e in g.resources:
        cost = g.costs[e]

        def beta_term(u):
            total = g.loads(u)[e]
            mine = [pl[e] for pl in g.player_loads(u)]
            return mu * total * cost.eval(total) + sum((x * x for x in mine), ZERO) * cost.derivative(total)

        out[f"beta[{e}]"] = -sigma.expectation(beta_term) / lam
    for row in bp.lp.constraints:
        if row.name.startswith("gamma["):
            i, k, e = row.name[len("gamma["):-1].split(",", 2)
            i, a = int(i), int(k) * eps
            out[row.name] = sigma.expectation(lambda u: a * g.marginal_costs(u)[i][e]) / lam
    return out


def splittable_duals(g: SplittableGame, sigma, lam=None, mu=None) -> DualCertificate:
    sigma = _split_sigma(g, sigma)
    point_equilibrium = False
    if len(sigma.positive()) == 1:
        point_equilibrium = splittable_equilibrium_check(g, sigma.positive()[0]).deviation_slack <= 0
    if not point_equilibrium:
        _require_cce(g, sigma)
    grid = [k * g.epsilon for k in range(g.max_units + 1)]
    costs = [g.costs[e] for e in g.resources]
    searched = lam is None or mu is None
    if searched:
        found = robust_poa_search(costs, "dual-smooth", n=g.n, grid=grid, caps=g.caps)
        if not found.verified:
            raise SmoothnessViolation("no dual-smooth pair on the lattice")
        lam, mu = found.lam, found.mu
    lam, mu = _check_params(lam, mu)
    for e in g.resources:
        cert = check_dual_smooth(g.costs[e], lam, mu, g.n, grid, g.caps)
        if not cert.verified:
            raise SmoothnessViolation(f"cost on {e} is not ({lam},{mu})-dual-smooth", cert.witness)
    bp = splittable_lp(g)
    assignment = splittable_dual_assignment(g, sigma, lam, mu, bp)
    residuals, objective, optimum = score(bp, assignment)
    eq_cost = sigma.expectation(g.social_cost)
    identity = objective == (1 - mu) / lam * eq_cost
    if point_equilibrium and not identity:
        raise AssertionError("dual objective identity failed at a marginal-cost equilibrium")
    # Without the objective identity the dual value no longer ties back to the equilibrium cost.
    ratio = lam / (1 - mu) if residuals.feasible and identity else None
    details = {"equilibrium_cost": eq_cost, "identity_holds": identity, "point_equilibrium": point_equilibrium}
    params = {"lambda": lam, "mu": mu, "searched": searched}
    return DualCertificate(bp, assignment, residuals, objective, ratio, f"splittable[lambda={lam},mu={mu}]", params,
                           details, optimum)


# --------------------------------------------------------------------------


def certified_poa_bound(cert: DualCertificate, eq_cost) -> Fraction:
    """``eq_cost / dual objective``; equals lam/(1-mu) for the smooth and atomic recipes."""
    if not cert.feasible:
        raise InfeasibleCertificate(f"certificate violates {cert.residuals.worst}")
    eq_cost = as_rational(eq_cost)
    identity_recipe = cert.recipe.startswith(("smooth[", "atomic["))
    if cert.dual_objective <= 0:
        if eq_cost == 0:
            # 0/0: the smooth recipes still certify lambda/(1-mu) through the identity
            if identity_recipe and cert.details.get("equilibrium_cost") == 0:
                return cert.params["lambda"] / (1 - cert.params["mu"])
            return ONE
        raise InfeasibleCertificate("dual objective is not positive; no bound follows")
    bound = eq_cost / cert.dual_objective
    if identity_recipe and eq_cost == cert.details.get("equilibrium_cost"):
        expected = cert.params["lambda"] / (1 - cert.params["mu"])
        if bound != expected:
            raise AssertionError("certified bound differs from lambda/(1-mu)")
    return bound
