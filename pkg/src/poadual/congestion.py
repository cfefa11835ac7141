"""Congestion games: atomic weighted, non-atomic on an amount grid, and splittable.

Profiles are plain tuples so they hash and sort:

* atomic ``Profile``: ``profile[i]`` is the index of player ``i``'s strategy;
* ``FlowProfile`` / ``SplitProfile``: ``flow[i][j]`` is the amount type/player
  ``i`` puts on its strategy ``j``.

Loads are recomputed from the profile on every call.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Mapping, Sequence

from ._rational import as_rational
from .caps import DEFAULT_CAPS, Caps
from .costs import CostFunction, check_splittable_cost
from .errors import InvalidInstance, InvalidProfile

ZERO = Fraction(0)

Strategy = frozenset
Profile = tuple
FlowProfile = tuple
SplitProfile = tuple


def _strategies(raw, resources) -> tuple[frozenset, ...]:
    out = []
    for s in raw:
        fs = frozenset(s)
        if not fs <= set(resources):
            raise InvalidInstance(f"strategy {sorted(fs)} uses undeclared resources")
        if fs in out:
            raise InvalidInstance(f"duplicate strategy {sorted(fs)}")
        out.append(fs)
    if not out:
        raise InvalidInstance("every player needs at least one strategy")
    return tuple(out)


def _costs(costs: Mapping[str, CostFunction]) -> dict[str, CostFunction]:
    if not costs:
        raise InvalidInstance("no resources")
    return {e: costs[e] for e in sorted(costs)}


@dataclass(frozen=True)
class AtomicPlayer:
    weight: Fraction
    strategies: tuple[frozenset, ...]


class AtomicGame:
    """Weighted atomic congestion game; every player picks one resource subset."""

    kind = "atomic"

    def __init__(self, costs: Mapping[str, CostFunction], players: Sequence, caps: Caps = DEFAULT_CAPS):
        self.costs = _costs(costs)
        self.resources = tuple(self.costs)
        built = []
        for p in players:
            if isinstance(p, AtomicPlayer):
                weight, strategies = p.weight, p.strategies
            else:
                weight, strategies = p
            weight = as_rational(weight)
            if weight <= 0:
                raise InvalidInstance("player weights must be positive")
            built.append(AtomicPlayer(weight, _strategies(strategies, self.resources)))
        if not built:
            raise InvalidInstance("no players")
        self.players = tuple(built)
        self.caps = caps
        caps.check("players", len(self.players))
        caps.check("resources", len(self.resources))
        for p in self.players:
            caps.check("strategies", len(p.strategies))

    @classmethod
    def unweighted(cls, costs, strategy_sets, caps: Caps = DEFAULT_CAPS) -> "AtomicGame":
        return cls(costs, [(1, s) for s in strategy_sets], caps)

    @property
    def n(self) -> int:
        return len(self.players)

    def num_profiles(self) -> int:
        return math.prod(len(p.strategies) for p in self.players)

    def profiles(self) -> Iterator[Profile]:
        """All profiles in lexicographic order of strategy indices."""
        self.caps.check("profiles", self.num_profiles())
        return itertools.product(*(range(len(p.strategies)) for p in self.players))

    def validate(self, s: Profile) -> None:
        if len(s) != self.n:
            raise InvalidProfile(f"profile has {len(s)} entries for {self.n} players")
        for i, j in enumerate(s):
            if not (isinstance(j, int) and 0 <= j < len(self.players[i].strategies)):
                raise InvalidProfile(f"player {i} has no strategy {j!r}")

    def strategy(self, i: int, j: int) -> frozenset:
        return self.players[i].strategies[j]

    def loads(self, s: Profile) -> dict[str, Fraction]:
        self.validate(s)
        load = {e: ZERO for e in self.resources}
        for i, j in enumerate(s):
            for e in self.players[i].strategies[j]:
                load[e] += self.players[i].weight
        return load

    def player_cost(self, i: int, s: Profile) -> Fraction:
        load = self.loads(s)
        w = self.players[i].weight
        return w * sum((self.costs[e].eval(load[e]) for e in self.strategy(i, s[i])), ZERO)

    def total_cost(self, s: Profile) -> Fraction:
        by_players = sum((self.player_cost(i, s) for i in range(self.n)), ZERO)
        load = self.loads(s)
        by_resources = sum((load[e] * self.costs[e].eval(load[e]) for e in self.resources), ZERO)
        if by_players != by_resources:
            raise AssertionError("cost accounting mismatch")
        return by_resources

    def deviate(self, s: Profile, i: int, j: int) -> Profile:
        return s[:i] + (j,) + s[i + 1 :]

    def optimum(self) -> tuple[Fraction, Profile]:
        """Exhaustive minimum total cost, lexicographically first minimiser."""
        best = None
        for s in self.profiles():
            c = self.total_cost(s)
            if best is None or c < best[0]:
                best = (c, s)
        return best


def atomic_player_cost(g: AtomicGame, i: int, s: Profile) -> Fraction:
    return g.player_cost(i, s)


def atomic_total_cost(g: AtomicGame, s: Profile) -> Fraction:
    return g.total_cost(s)


@dataclass(frozen=True)
class PlayerType:
    units: int  # total amount in multiples of the granularity
    strategies: tuple[frozenset, ...]


def _compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    """Ordered ways to write ``total`` as ``parts`` non-negative integers (lexicographic)."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def count_compositions(total: int, parts: int) -> int:
    return math.comb(total + parts - 1, parts - 1)


class _GridGame:
    """Shared machinery for the two games whose players split an amount on a grid."""

    kind = "grid"

    def __init__(self, costs, epsilon, groups: Sequence[PlayerType], caps: Caps):
        self.costs = _costs(costs)
        self.resources = tuple(self.costs)
        self.epsilon = as_rational(epsilon)
        if self.epsilon <= 0:
            raise InvalidInstance("granularity must be positive")
        if not groups:
            raise InvalidInstance("no players")
        self.groups = tuple(groups)
        self.caps = caps
        caps.check("players", len(self.groups))
        caps.check("resources", len(self.resources))
        for grp in self.groups:
            caps.check("strategies", len(grp.strategies))
            if grp.units <= 0:
                raise InvalidInstance("total amounts must be positive multiples of the granularity")

    @property
    def n(self) -> int:
        return len(self.groups)

    def demand(self, i: int) -> Fraction:
        return self.groups[i].units * self.epsilon

    @property
    def max_units(self) -> int:
        return max(g.units for g in self.groups)

    def amount(self, k: int) -> Fraction:
        return k * self.epsilon

    def num_profiles(self) -> int:
        return math.prod(count_compositions(g.units, len(g.strategies)) for g in self.groups)

    def unit_profiles(self) -> Iterator[tuple[tuple[int, ...], ...]]:
        self.caps.check("grid_points", self.num_profiles())
        return itertools.product(*(_compositions(g.units, len(g.strategies)) for g in self.groups))

    def profiles(self) -> Iterator[tuple]:
        """Every valid profile, amounts as rationals, lexicographic in the unit counts."""
        eps = self.epsilon
        for units in self.unit_profiles():
            yield tuple(tuple(k * eps for k in row) for row in units)

    def units_of(self, f) -> tuple[tuple[int, ...], ...]:
        self.validate(f)
        return tuple(tuple(int(a / self.epsilon) for a in row) for row in f)

    def validate(self, f) -> None:
        if len(f) != self.n:
            raise InvalidProfile(f"profile has {len(f)} rows for {self.n} players")
        for i, row in enumerate(f):
            grp = self.groups[i]
            if len(row) != len(grp.strategies):
                raise InvalidProfile(f"row {i} has {len(row)} amounts for {len(grp.strategies)} strategies")
            for a in row:
                a = as_rational(a)
                if a < 0:
                    raise InvalidProfile("negative amount")
                if (a / self.epsilon).denominator != 1:
                    raise InvalidProfile(f"amount {a} is not a multiple of {self.epsilon}")
            if sum((as_rational(a) for a in row), ZERO) != self.demand(i):
                raise InvalidProfile(f"row {i} does not sum to {self.demand(i)}")

    def player_loads(self, f) -> list[dict[str, Fraction]]:
        """``out[i][e]``: amount player/type ``i`` puts on resource ``e``."""
        self.validate(f)
        out = []
        for i, row in enumerate(f):
            load = {e: ZERO for e in self.resources}
            for j, a in enumerate(row):
                for e in self.groups[i].strategies[j]:
                    load[e] += as_rational(a)
            out.append(load)
        return out

    def loads(self, f) -> dict[str, Fraction]:
        total = {e: ZERO for e in self.resources}
        for load in self.player_loads(f):
            for e, a in load.items():
                total[e] += a
        return total

    def strategy_cost(self, f, i: int, j: int) -> Fraction:
        load = self.loads(f)
        return sum((self.costs[e].eval(load[e]) for e in self.groups[i].strategies[j]), ZERO)

    def social_cost(self, f) -> Fraction:
        load = self.loads(f)
        by_resources = sum((load[e] * self.costs[e].eval(load[e]) for e in self.resources), ZERO)
        by_strategies = ZERO
        for i, row in enumerate(f):
            for j, a in enumerate(row):
                if a:
                    by_strategies += as_rational(a) * sum(
                        (self.costs[e].eval(load[e]) for e in self.groups[i].strategies[j]), ZERO
                    )
        if by_resources != by_strategies:
            raise AssertionError("cost accounting mismatch")
        return by_resources

    def optimum(self) -> tuple[Fraction, tuple]:
        best = None
        for f in self.profiles():
            c = self.social_cost(f)
            if best is None or c < best[0]:
                best = (c, f)
        return best


class NonAtomicGame(_GridGame):
    """Non-atomic game: type ``i`` routes ``units * epsilon`` in multiples of ``epsilon``."""

    kind = "nonatomic"

    def __init__(self, costs: Mapping[str, CostFunction], epsilon, types: Sequence, caps: Caps = DEFAULT_CAPS):
        costs = _costs(costs)
        groups = []
        for t in types:
            if isinstance(t, PlayerType):
                groups.append(PlayerType(t.units, _strategies(t.strategies, costs)))
            else:
                units, strategies = t
                if not isinstance(units, int) or isinstance(units, bool):
                    raise InvalidInstance("m_i must be an integer")
                groups.append(PlayerType(units, _strategies(strategies, costs)))
        super().__init__(costs, epsilon, groups, caps)

    @property
    def types(self) -> tuple[PlayerType, ...]:
        return self.groups

    def scaled(self, factor) -> "NonAtomicGame":
        """Same game with every demand multiplied by ``factor`` (must stay on the grid)."""
        factor = as_rational(factor)
        types = []
        for t in self.groups:
            units = t.units * factor
            if units.denominator != 1:
                raise InvalidInstance(f"demand {units * self.epsilon} is not on the {self.epsilon}-grid")
            types.append(PlayerType(int(units), t.strategies))
        return NonAtomicGame(self.costs, self.epsilon, types, self.caps)


class SplittableGame(_GridGame):
    """Splittable game: player ``i`` splits weight ``w_i`` (a multiple of epsilon)."""

    kind = "splittable"

    def __init__(self, costs: Mapping[str, CostFunction], epsilon, players: Sequence, caps: Caps = DEFAULT_CAPS):
        costs = _costs(costs)
        eps = as_rational(epsilon)
        if eps <= 0:
            raise InvalidInstance("granularity must be positive")
        groups = []
        self.weights = []
        for weight, strategies in players:
            weight = as_rational(weight)
            units = weight / eps
            if weight <= 0 or units.denominator != 1:
                raise InvalidInstance(f"weight {weight} is not a positive multiple of {eps}")
            groups.append(PlayerType(int(units), _strategies(strategies, costs)))
            self.weights.append(weight)
        super().__init__(costs, eps, groups, caps)
        total = sum((g.units for g in groups), 0)
        grid = [k * eps for k in range(total + 1)]
        for e in self.resources:
            check_splittable_cost(self.costs[e], grid)

    def player_cost(self, i: int, u) -> Fraction:
        mine = self.player_loads(u)[i]
        total = self.loads(u)
        return sum((mine[e] * self.costs[e].eval(total[e]) for e in self.resources), ZERO)

    def marginal_costs(self, u) -> list[dict[str, Fraction]]:
        """``out[i][e] = cost_e(u_e) + u^i_e * cost_e'(u_e)``."""
        per = self.player_loads(u)
        total = self.loads(u)
        out = []
        for mine in per:
            out.append(
                {e: self.costs[e].eval(total[e]) + mine[e] * self.costs[e].derivative(total[e]) for e in self.resources}
            )
        return out


def nonatomic_social_cost(g: NonAtomicGame, f: FlowProfile) -> Fraction:
    return g.social_cost(f)


def splittable_player_cost(g: SplittableGame, i: int, u: SplitProfile) -> Fraction:
    return g.player_cost(i, u)


def splittable_total_cost(g: SplittableGame, u: SplitProfile) -> Fraction:
    total = sum((g.player_cost(i, u) for i in range(g.n)), ZERO)
    if total != g.social_cost(u):
        raise AssertionError("cost accounting mismatch")
    return total
