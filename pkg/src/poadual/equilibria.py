"""Equilibria of congestion games at desk scale.

Pure Nash equilibria are enumerated, the worst coarse correlated equilibrium is
an exact LP over all profiles, and Wardrop flows come from minimising a
discrete potential over the amount grid.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Iterable, Sequence

from ._rational import as_rational
from .congestion import AtomicGame, NonAtomicGame, SplittableGame, _compositions
from .errors import InvalidProfile, NotAnEquilibrium, PoaError
from .lp import LPBuilder, solve

ZERO = Fraction(0)
ONE = Fraction(1)


def profile_key(profile) -> str:
    """Stable text name for a profile, used in LP variable names."""
    if isinstance(profile, tuple) and profile and isinstance(profile[0], tuple):
        return ";".join(":".join(str(k) for k in row) for row in profile)
    return ",".join(str(j) for j in profile)


@dataclass(frozen=True)
class JointDistribution:
    support: tuple[tuple[Any, Fraction], ...]

    def __post_init__(self):
        seen = set()
        total = ZERO
        for profile, p in self.support:
            if p < 0:
                raise InvalidProfile("negative probability")
            if profile in seen:
                raise InvalidProfile("repeated profile in support")
            seen.add(profile)
            total += p
        if total != 1:
            raise InvalidProfile(f"probabilities sum to {total}, not 1")

    @classmethod
    def of(cls, items: Iterable[tuple[Any, object]]) -> "JointDistribution":
        return cls(tuple((profile, as_rational(p)) for profile, p in items))

    @classmethod
    def point(cls, profile) -> "JointDistribution":
        return cls(((profile, ONE),))

    def expectation(self, fn: Callable[[Any], Fraction]) -> Fraction:
        return sum((p * fn(s) for s, p in self.support if p), ZERO)

    def positive(self) -> list:
        return [s for s, p in self.support if p > 0]


@dataclass(frozen=True)
class EquilibriumReport:
    notion: str
    witness: Any
    cost: Fraction
    deviation_slack: Fraction
    details: dict = field(default_factory=dict)

    @property
    def is_equilibrium(self) -> bool:
        tolerance = self.details.get("delta", ZERO)
        return self.deviation_slack <= tolerance


class _CostGame:
    """Finite cost-minimisation game view: action lists and per-player costs."""

    def __init__(self, n, actions, cost, total):
        self.n = n
        self.actions = actions
        self.cost = cost
        self.total = total

    def profiles(self):
        return itertools.product(*self.actions)


def cost_game(g) -> _CostGame:
    if isinstance(g, AtomicGame):
        g.caps.check("profiles", g.num_profiles())
        actions = [list(range(len(p.strategies))) for p in g.players]
        return _CostGame(g.n, actions, g.player_cost, g.total_cost)
    if isinstance(g, SplittableGame):
        g.caps.check("profiles", g.num_profiles())
        eps = g.epsilon
        actions = [
            [tuple(k * eps for k in split) for split in _compositions(grp.units, len(grp.strategies))]
            for grp in g.groups
        ]
        return _CostGame(g.n, actions, g.player_cost, g.social_cost)
    raise TypeError(f"no finite-game view for {type(g).__name__}")


def _action_key(a) -> str:
    return ":".join(str(k) for k in a) if isinstance(a, tuple) else str(a)


def _deviate(s, i, a):
    return s[:i] + (a,) + s[i + 1 :]


def cce_slack(g, sigma: JointDistribution) -> tuple[Fraction, tuple[int, Any] | None]:
    """Largest expected gain of a fixed unilateral deviation under ``sigma``.

    Returns ``(gain, (player, action))``; ``sigma`` is a CCE iff gain <= 0.
    Ties are broken by the first pair in player/action order.
    """
    view = cost_game(g)
    worst = None
    for i in range(view.n):
        current = sigma.expectation(lambda s: view.cost(i, s))
        for a in view.actions[i]:
            dev = sigma.expectation(lambda s: view.cost(i, _deviate(s, i, a)))
            gain = current - dev
            if worst is None or gain > worst[0]:
                worst = (gain, (i, a))
    return worst


def check_cce(g, sigma: JointDistribution) -> EquilibriumReport:
    gain, where = cce_slack(g, sigma)
    view = cost_game(g)
    cost = sigma.expectation(view.total)
    return EquilibriumReport("coarse-correlated", sigma, cost, gain, {"worst_deviation": where})


def pure_nash_all(g) -> list[EquilibriumReport]:
    """Every pure profile where no unilateral deviation lowers the deviator's cost."""
    view = cost_game(g)
    out = []
    for s in view.profiles():
        worst = None
        for i in range(view.n):
            here = view.cost(i, s)
            for a in view.actions[i]:
                gain = here - view.cost(i, _deviate(s, i, a))
                if worst is None or gain > worst:
                    worst = gain
        if worst <= 0:
            out.append(EquilibriumReport("pure", s, view.total(s), worst))
    return out


def worst_cce(g) -> EquilibriumReport:
    """Coarse correlated equilibrium of maximum expected total cost (exact LP)."""
    view = cost_game(g)
    profiles = list(view.profiles())
    lp = LPBuilder("maximize", "worst-cce")
    names = {}
    for s in profiles:
        names[s] = lp.variable(f"q[{profile_key(s)}]")
        lp.objective(names[s], view.total(s))
    lp.constraint("mass", {names[s]: 1 for s in profiles}, "=", 1)
    for i in range(view.n):
        here = {s: view.cost(i, s) for s in profiles}
        for a in view.actions[i]:
            row = {names[s]: here[s] - view.cost(i, _deviate(s, i, a)) for s in profiles}
            lp.constraint(f"cce[{i},{_action_key(a)}]", row, "<=", 0)
    result = solve(lp.build())
    if result.status != "optimal":
        raise PoaError(f"worst-CCE LP is {result.status}")
    sigma = JointDistribution(tuple((s, result.primal[names[s]]) for s in profiles if result.primal[names[s]] > 0))
    report = check_cce(g, sigma)
    if report.deviation_slack > 0:
        raise AssertionError("LP returned a distribution that is not a CCE")
    if report.cost != result.objective:
        raise AssertionError("CCE cost does not match the LP objective")
    return report


def optimum(g) -> tuple[Fraction, Any]:
    return g.optimum()


# --------------------------------------------------------------------------
# Non-atomic: Wardrop flows on the grid
# --------------------------------------------------------------------------


def potential(g: NonAtomicGame, f) -> Fraction:
    """``sum_e sum_{k=1}^{f_e/eps} eps * cost_e(k * eps)``."""
    eps = g.epsilon
    total = ZERO
    for e, load in g.loads(f).items():
        steps = load / eps
        if steps.denominator != 1:
            raise InvalidProfile("load off the grid")
        total += sum((eps * g.costs[e].eval(k * eps) for k in range(1, int(steps) + 1)), ZERO)
    return total


def grid_tolerance(g: NonAtomicGame, f) -> Fraction:
    """delta: largest cost increase on any strategy when one more epsilon joins it."""
    load = g.loads(f)
    eps = g.epsilon
    worst = ZERO
    for grp in g.groups:
        for s in grp.strategies:
            inc = sum((g.costs[e].eval(load[e] + eps) - g.costs[e].eval(load[e]) for e in s), ZERO)
            worst = max(worst, inc)
    return worst


def wardrop_slack(g: NonAtomicGame, f) -> Fraction:
    """max over types and (used strategy s, any s') of C_s - C_s'."""
    load = g.loads(f)
    worst = None
    for i, grp in enumerate(g.groups):
        costs = [sum((g.costs[e].eval(load[e]) for e in s), ZERO) for s in grp.strategies]
        for j, a in enumerate(f[i]):
            if a > 0:
                gap = costs[j] - min(costs)
                worst = gap if worst is None else max(worst, gap)
    return worst


def check_wardrop(g: NonAtomicGame, f) -> EquilibriumReport:
    slack = wardrop_slack(g, f)
    delta = grid_tolerance(g, f)
    return EquilibriumReport("wardrop", f, g.social_cost(f), slack, {"delta": delta, "potential": potential(g, f)})


def wardrop_equilibrium(g: NonAtomicGame) -> EquilibriumReport:
    """Potential minimiser on the grid; ties go to smaller slack, then lexicographic order."""
    best = None
    for f in g.profiles():
        key = (potential(g, f), wardrop_slack(g, f))
        if best is None or key < best[0]:
            best = (key, f)
    report = check_wardrop(g, best[1])
    if report.deviation_slack > report.details["delta"]:
        raise AssertionError("potential minimiser violates the Wardrop condition beyond delta")
    return report


# --------------------------------------------------------------------------
# Splittable
# --------------------------------------------------------------------------


def splittable_equilibrium_check(g: SplittableGame, u) -> EquilibriumReport:
    """Marginal-cost test: used strategies must have minimal marginal cost."""
    marg = g.marginal_costs(u)
    worst = None
    where = None
    for i, grp in enumerate(g.groups):
        mc = [sum((marg[i][e] for e in s), ZERO) for s in grp.strategies]
        for j, a in enumerate(u[i]):
            if a > 0:
                for k in range(len(mc)):
                    gap = mc[j] - mc[k]
                    if worst is None or gap > worst:
                        worst, where = gap, (i, j, k)
    return EquilibriumReport("splittable", u, g.social_cost(u), worst, {"worst_pair": where})


def marginal_equilibria(g: SplittableGame) -> list[EquilibriumReport]:
    """All grid split profiles passing the marginal-cost test."""
    out = []
    for u in g.profiles():
        rep = splittable_equilibrium_check(g, u)
        if rep.deviation_slack <= 0:
            out.append(rep)
    return out


# --------------------------------------------------------------------------


def empirical_poa(g, notion: str) -> Fraction:
    """Worst equilibrium cost under ``notion`` divided by the exhaustive optimum."""
    opt, _ = g.optimum()
    if notion == "pure":
        eqs = pure_nash_all(g)
        if not eqs:
            raise NotAnEquilibrium("no pure Nash equilibrium")
        worst = max(r.cost for r in eqs)
    elif notion == "coarse-correlated":
        worst = worst_cce(g).cost
    elif notion == "wardrop":
        if not isinstance(g, NonAtomicGame):
            raise TypeError("wardrop applies to non-atomic games")
        worst = wardrop_equilibrium(g).cost
    elif notion == "splittable":
        eqs = marginal_equilibria(g)
        if not eqs:
            raise NotAnEquilibrium("no split profile passes the marginal-cost test")
        worst = max(r.cost for r in eqs)
    else:
        raise ValueError(f"unknown notion {notion!r}")
    if opt == 0:
        return ONE if worst == 0 else None
    return worst / opt


def nonatomic_cost_spread(g: NonAtomicGame, reports: Sequence[EquilibriumReport]) -> Fraction:
    """Spread of costs among given equilibria (measured, never asserted)."""
    costs = [r.cost for r in reports]
    return max(costs) - min(costs) if costs else ZERO
