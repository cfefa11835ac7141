"""Expected welfare, Bayes-Nash checks and pure BNE search."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

from ..errors import NotAnEquilibrium
from .model import BayesianAuction, StrategyMap

ZERO = Fraction(0)
ONE = Fraction(1)


def _work(auc: BayesianAuction, sigma: StrategyMap) -> int:
    per_player = [sum(len(d) for d in sigma.maps[i]) for i in range(auc.n)]
    return math.prod(per_player)


def expected_welfare(auc: BayesianAuction, sigma: StrategyMap) -> Fraction:
    sigma.validate(auc)
    auc.caps.check("bayes_strategy_maps", _work(auc, sigma))
    total = ZERO
    for v, pv in auc.type_profiles():
        for a, pa in sigma.action_profiles(v):
            total += pv * pa * auc.welfare(a, v)
    return total


def expected_revenue(auc: BayesianAuction, sigma: StrategyMap) -> Fraction:
    total = ZERO
    for v, pv in auc.type_profiles():
        for a, pa in sigma.action_profiles(v):
            total += pv * pa * auc.revenue(a)
    return total


def others_actions(auc: BayesianAuction, sigma: StrategyMap, i: int) -> list[tuple[tuple, Fraction]]:
    """Distribution of the other players' actions, types drawn from their priors.

    Each entry is a full-length profile with a ``None`` placeholder at ``i``.
    """
    per = []
    for k in range(auc.n):
        if k == i:
            per.append(((None, ONE),))
            continue
        mass: dict[Any, Fraction] = {}
        for t, ft in enumerate(auc.priors[k]):
            for a, p in sigma.dist(k, t):
                if ft * p:
                    mass[a] = mass.get(a, ZERO) + ft * p
        per.append(tuple(mass.items()))
    out = []
    for combo in itertools.product(*per):
        p = math.prod((q for _, q in combo), start=ONE)
        out.append((tuple(a for a, _ in combo), p))
    return out


def _put(profile: tuple, i: int, a) -> tuple:
    return profile[:i] + (a,) + profile[i + 1:]


def interim_utility(auc: BayesianAuction, i: int, t: int, action, others) -> Fraction:
    return sum((p * auc.utility(i, t, _put(prof, i, action)) for prof, p in others), ZERO)


@dataclass(frozen=True)
class BNEReport:
    gain: Fraction
    where: tuple | None
    interim: dict = field(default_factory=dict)

    @property
    def is_equilibrium(self) -> bool:
        return self.gain <= 0


def check_bne(auc: BayesianAuction, sigma: StrategyMap) -> BNEReport:
    """Largest interim gain of any type of any player from any fixed deviation.

    ``where`` is ``(player, type, deviation)`` of the first maximiser;
    ``interim[i, t]`` holds the equilibrium interim utility.
    """
    sigma.validate(auc)
    auc.caps.check("bayes_strategy_maps", _work(auc, sigma))
    worst, where = None, None
    interim = {}
    for i in range(auc.n):
        others = others_actions(auc, sigma, i)
        for t in auc.types(i):
            current = sum((p * interim_utility(auc, i, t, a, others) for a, p in sigma.dist(i, t)), ZERO)
            interim[i, t] = current
            for dev in auc.actions(i, t):
                gain = interim_utility(auc, i, t, dev, others) - current
                if worst is None or gain > worst:
                    worst, where = gain, (i, t, dev)
    return BNEReport(worst, where, interim)


def require_bne(auc: BayesianAuction, sigma: StrategyMap) -> BNEReport:
    rep = check_bne(auc, sigma)
    if not rep.is_equilibrium:
        raise NotAnEquilibrium(f"not a Bayes-Nash equilibrium: deviation {rep.where} gains {rep.gain}", rep.gain)
    return rep


def _best_response(auc, choice, i, t, others):
    """Current action if it is a best response, else the first maximiser in action order."""
    current = choice[i][t]
    values = {a: interim_utility(auc, i, t, a, others) for a in auc.actions(i, t)}
    best = max(values.values())
    if values[current] == best:
        return current
    return next(a for a in auc.actions(i, t) if values[a] == best)


def _others_pure(auc, choice, i):
    return others_actions(auc, StrategyMap.pure(choice), i)


def best_response_iteration(auc: BayesianAuction, start=None, max_rounds: int = 1000):
    """Round-robin pure best responses until a fixed point or a repeated state.

    Returns ``(strategy map or None, rounds, stop reason)``.
    """
    if start is None:
        start = [[auc.actions(i, t)[0] for t in auc.types(i)] for i in range(auc.n)]
    choice = [list(c) for c in start]
    seen = set()
    for rounds in range(1, max_rounds + 1):
        state = tuple(tuple(c) for c in choice)
        if state in seen:
            return None, rounds, "cycle"
        seen.add(state)
        changed = False
        for i in range(auc.n):
            others = _others_pure(auc, choice, i)
            for t in auc.types(i):
                br = _best_response(auc, choice, i, t, others)
                if br != choice[i][t]:
                    choice[i][t] = br
                    changed = True
        if not changed:
            sigma = StrategyMap.pure(choice)
            require_bne(auc, sigma)
            return sigma, rounds, "converged"
    return None, max_rounds, "round-limit"


def count_pure_maps(auc: BayesianAuction) -> int:
    return math.prod(len(auc.actions(i, t)) for i in range(auc.n) for t in auc.types(i))


def pure_bne_exhaustive(auc: BayesianAuction, first_only: bool = True) -> list[StrategyMap]:
    """Every pure strategy map, in lexicographic order, that is a BNE."""
    auc.caps.check("bayes_strategy_maps", count_pure_maps(auc))
    slots = [(i, t) for i in range(auc.n) for t in auc.types(i)]
    # best-response sets of player i depend only on the others' choices
    optimal: dict[tuple, tuple] = {}

    def best_sets(i, choice):
        key = (i, tuple(tuple(c) for k, c in enumerate(choice) if k != i))
        if key not in optimal:
            others = _others_pure(auc, choice, i)
            sets = []
            for t in auc.types(i):
                values = {a: interim_utility(auc, i, t, a, others) for a in auc.actions(i, t)}
                best = max(values.values())
                sets.append(frozenset(a for a, u in values.items() if u == best))
            optimal[key] = tuple(sets)
        return optimal[key]

    found = []
    for combo in itertools.product(*(auc.actions(i, t) for i, t in slots)):
        choice = [[None] * len(auc.priors[i]) for i in range(auc.n)]
        for (i, t), a in zip(slots, combo):
            choice[i][t] = a
        if all(choice[i][t] in best_sets(i, choice)[t] for i in range(auc.n) for t in auc.types(i)):
            sigma = StrategyMap.pure(choice)
            require_bne(auc, sigma)
            found.append(sigma)
            if first_only:
                break
    return found


def find_pure_bne(auc: BayesianAuction, start=None) -> tuple[StrategyMap | None, str]:
    """Best-response iteration first, exhaustive search as the fallback."""
    sigma, _, reason = best_response_iteration(auc, start)
    if sigma is not None:
        return sigma, "best-response"
    found = pure_bne_exhaustive(auc)
    if found:
        return found[0], f"exhaustive (best response: {reason})"
    return None, f"none (best response: {reason})"
