"""Discrete Bayesian auctions with independent private types.

:class:`BayesianAuction` fixes the interface the equilibrium and certificate
code relies on. :class:`CombinatorialValuationAuction` is the concrete model used
throughout: ``m`` items sold simultaneously by first- or second-price rules,
players bidding on a rational grid and never overbidding.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Iterator, Mapping, Sequence

from .._rational import as_rational
from ..caps import DEFAULT_CAPS, Caps
from ..errors import InvalidInstance, InvalidProfile

ZERO = Fraction(0)
ONE = Fraction(1)

Bundle = frozenset


def all_bundles(m: int) -> list[frozenset]:
    """Every subset of ``range(m)``, ordered by size then lexicographically."""
    return [frozenset(c) for size in range(m + 1) for c in itertools.combinations(range(m), size)]


def bundle_key(S) -> str:
    return ",".join(str(j) for j in sorted(S))


@dataclass(frozen=True)
class Valuation:
    """Monotone set function on ``range(m)`` given as a full table."""

    m: int
    table: tuple[tuple[frozenset, Fraction], ...]

    @classmethod
    def from_mapping(cls, m: int, values: Mapping) -> "Valuation":
        table = {}
        for key, value in values.items():
            S = frozenset(key)
            if not all(isinstance(j, int) and 0 <= j < m for j in S):
                raise InvalidInstance(f"bundle {sorted(S)} names an unknown item")
            table[S] = as_rational(value)
        table.setdefault(frozenset(), ZERO)
        for S in all_bundles(m):
            if S not in table:
                raise InvalidInstance(f"valuation misses bundle {sorted(S)}")
        v = cls(m, tuple((S, table[S]) for S in all_bundles(m)))
        v.validate()
        return v

    @classmethod
    def additive(cls, item_values: Sequence) -> "Valuation":
        vals = [as_rational(x) for x in item_values]
        return cls.from_mapping(len(vals), {S: sum((vals[j] for j in S), ZERO) for S in all_bundles(len(vals))})

    @classmethod
    def unit_demand(cls, item_values: Sequence) -> "Valuation":
        vals = [as_rational(x) for x in item_values]
        return cls.from_mapping(len(vals), {S: max((vals[j] for j in S), default=ZERO) for S in all_bundles(len(vals))})

    def __call__(self, S) -> Fraction:
        return dict(self.table)[frozenset(S)]

    def validate(self) -> None:
        t = dict(self.table)
        if t[frozenset()] != 0:
            raise InvalidInstance("value of the empty bundle must be 0")
        for S in t:
            if t[S] < 0:
                raise InvalidInstance("values must be non-negative")
            for j in range(self.m):
                if t[S | {j}] < t[S]:
                    raise InvalidInstance(f"valuation is not monotone at {sorted(S)} + {j}")

    def is_subadditive(self) -> bool:
        t = dict(self.table)
        return all(t[S | T] <= t[S] + t[T] for S in t for T in t)

    def is_unit_demand(self) -> bool:
        t = dict(self.table)
        return all(t[S] == max((t[frozenset({j})] for j in S), default=ZERO) for S in t)

    def to_dict(self) -> dict:
        return {bundle_key(S): str(v) for S, v in self.table}


class BayesianAuction:
    """Interface: independent discrete types, finite actions, quasi-linear utilities.

    Subclasses provide ``actions(i, t)``, ``outcome(profile)`` returning
    ``(bundles, payments)``, and ``value(i, t, bundle)``.
    """

    n: int
    priors: tuple[tuple[Fraction, ...], ...]
    caps: Caps

    def types(self, i: int) -> range:
        return range(len(self.priors[i]))

    def type_profiles(self) -> Iterator[tuple[tuple[int, ...], Fraction]]:
        """``(type profile, probability)`` for every profile with positive probability."""
        for v in itertools.product(*(self.types(i) for i in range(self.n))):
            p = math.prod((self.priors[i][t] for i, t in enumerate(v)), start=ONE)
            if p > 0:
                yield v, p

    def prob_others(self, i: int, v: tuple[int, ...]) -> Fraction:
        return math.prod((self.priors[k][t] for k, t in enumerate(v) if k != i), start=ONE)

    def actions(self, i: int, t: int) -> tuple:
        raise NotImplementedError

    def outcome(self, profile: tuple):
        raise NotImplementedError

    def value(self, i: int, t: int, bundle) -> Fraction:
        raise NotImplementedError

    def utility(self, i: int, t: int, profile: tuple) -> Fraction:
        bundles, payments = self.outcome(profile)
        return self.value(i, t, bundles[i]) - payments[i]

    def welfare(self, profile: tuple, v: tuple[int, ...]) -> Fraction:
        bundles, payments = self.outcome(profile)
        sw = sum((self.value(i, v[i], bundles[i]) for i in range(self.n)), ZERO)
        by_parts = sum((self.utility(i, v[i], profile) for i in range(self.n)), ZERO) + sum(payments, ZERO)
        if sw != by_parts:
            raise AssertionError("welfare identity failed")
        return sw

    def revenue(self, profile: tuple) -> Fraction:
        return sum(self.outcome(profile)[1], ZERO)

    def action_profiles(self, v: tuple[int, ...]) -> Iterator[tuple]:
        return itertools.product(*(self.actions(i, v[i]) for i in range(self.n)))

    def optimal_welfare(self, v: tuple[int, ...]) -> Fraction:
        raise NotImplementedError

    def expected_optimum(self) -> Fraction:
        return sum((p * self.optimal_welfare(v) for v, p in self.type_profiles()), ZERO)


class CombinatorialValuationAuction(BayesianAuction):
    """Simultaneous first- or second-price item auctions on a bid grid.

    ``valuations[i][t]`` is player ``i``'s valuation under type ``t``;
    ``priors[i][t]`` its probability. Each item goes to the highest bidder,
    ties to the lowest player index; with a positive ``reserve`` an item whose
    top bid is below it stays unsold and a winner pays at least the reserve. Actions are the bid vectors on the grid
    that never overbid: ``sum_{j in S} b_j <= overbid * v(S)`` for every ``S``.
    """

    def __init__(self, m: int, valuations: Sequence[Sequence[Valuation]], priors: Sequence[Sequence],
                 bid_grid: Sequence, mechanism: str = "second-price", overbid=1, reserve=0,
                 caps: Caps = DEFAULT_CAPS):
        if mechanism not in ("first-price", "second-price"):
            raise InvalidInstance(f"unknown mechanism {mechanism!r}")
        if m < 1:
            raise InvalidInstance("need at least one item")
        caps.check("strategies", m)  # item count shares the small-dimension cap
        self.m = m
        self.mechanism = mechanism
        self.overbid = as_rational(overbid)
        if self.overbid < 1:
            raise InvalidInstance("overbidding multiplier must be at least 1")
        self.reserve = as_rational(reserve)
        if self.reserve < 0:
            raise InvalidInstance("reserve price must be non-negative")
        self.caps = caps
        self.n = len(valuations)
        if self.n < 1 or len(priors) != self.n:
            raise InvalidInstance("need one prior per player")
        caps.check("players", self.n)
        self.valuations = tuple(tuple(vs) for vs in valuations)
        for vs in self.valuations:
            for val in vs:
                if val.m != m:
                    raise InvalidInstance("valuation defined on the wrong number of items")
        self.priors = tuple(tuple(as_rational(p) for p in ps) for ps in priors)
        for i, ps in enumerate(self.priors):
            if len(ps) != len(self.valuations[i]) or not ps:
                raise InvalidInstance(f"player {i}: prior and type list differ in length")
            if any(p < 0 for p in ps) or sum(ps, ZERO) != 1:
                raise InvalidInstance(f"player {i}: prior must be non-negative and sum to 1")
        self.bid_grid = tuple(sorted({as_rational(b) for b in bid_grid}))
        if not self.bid_grid or self.bid_grid[0] != 0:
            raise InvalidInstance("bid grid must contain 0 and only non-negative bids")
        self._bundles = all_bundles(m)
        self._outcomes: dict = {}
        self._actions = {}
        for i in range(self.n):
            for t in range(len(self.valuations[i])):
                acts = tuple(b for b in itertools.product(self.bid_grid, repeat=m) if self._allowed(i, t, b))
                self._actions[i, t] = acts

    def _allowed(self, i: int, t: int, bids) -> bool:
        val = self.valuations[i][t]
        return all(sum((bids[j] for j in S), ZERO) <= self.overbid * val(S) for S in self._bundles)

    def actions(self, i: int, t: int) -> tuple:
        return self._actions[i, t]

    def value(self, i: int, t: int, bundle) -> Fraction:
        return self.valuations[i][t](bundle)

    def thresholds(self, profile: tuple) -> list[list[Fraction]]:
        """``theta[i][j]``: the highest bid on item ``j`` among players other than ``i``."""
        return [[max((profile[k][j] for k in range(self.n) if k != i), default=ZERO) for j in range(self.m)]
                for i in range(self.n)]

    def outcome(self, profile: tuple):
        if len(profile) != self.n:
            raise InvalidProfile("bid profile has the wrong length")
        # deterministic in the bids, so memoise; bounded by the action-profile count
        cached = self._outcomes.get(profile)
        if cached is None:
            cached = self._outcomes[profile] = self._compute_outcome(profile)
        return cached

    def _compute_outcome(self, profile: tuple):
        won = [set() for _ in range(self.n)]
        pay = [ZERO] * self.n
        for j in range(self.m):
            bids = [profile[i][j] for i in range(self.n)]
            top = max(bids)
            if top < self.reserve:
                continue
            winner = bids.index(top)
            won[winner].add(j)
            if self.mechanism == "first-price":
                pay[winner] += top
            else:
                second = max((bids[k] for k in range(self.n) if k != winner), default=ZERO)
                pay[winner] += max(second, self.reserve)
        return tuple(frozenset(s) for s in won), tuple(pay)

    def check_bids(self, types: tuple[int, ...], profile: tuple) -> None:
        for i, b in enumerate(profile):
            if len(b) != self.m or any(x not in self.bid_grid for x in b):
                raise InvalidProfile(f"player {i} bids off the grid")
            if not self._allowed(i, types[i], b):
                raise InvalidProfile(f"player {i} overbids")

    def optimal_welfare(self, v: tuple[int, ...]) -> Fraction:
        best = ZERO
        for owners in itertools.product(range(self.n + 1), repeat=self.m):
            bundles = [frozenset(j for j in range(self.m) if owners[j] == i) for i in range(self.n)]
            best = max(best, sum((self.value(i, v[i], bundles[i]) for i in range(self.n)), ZERO))
        return best

    def is_subadditive(self) -> bool:
        return all(val.is_subadditive() for vs in self.valuations for val in vs)


def simultaneous_outcome(ca: CombinatorialValuationAuction, bids: Sequence, types: tuple[int, ...] | None = None):
    """Allocation, payments and welfare of one bid profile.

    With ``types`` given, bids are checked against the no-overbidding rule for
    those types and welfare is the value of the allocation.
    """
    bids = tuple(tuple(as_rational(x) for x in b) for b in bids)
    if types is None:
        types = tuple(0 for _ in range(ca.n))
    ca.check_bids(types, bids)
    bundles, payments = ca.outcome(bids)
    return bundles, payments, ca.welfare(bids, types)


# --------------------------------------------------------------------------
# Strategy maps
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class StrategyMap:
    """``maps[i][t]`` is a tuple of ``(action, probability)`` pairs."""

    maps: tuple[tuple[tuple[tuple[Any, Fraction], ...], ...], ...]

    @classmethod
    def pure(cls, choice: Sequence[Sequence]) -> "StrategyMap":
        return cls(tuple(tuple(((a, ONE),) for a in per_type) for per_type in choice))

    @classmethod
    def mixed(cls, dists: Sequence[Sequence[Mapping]]) -> "StrategyMap":
        return cls(tuple(tuple(tuple((a, as_rational(p)) for a, p in d.items()) for d in per_type)
                         for per_type in dists))

    def dist(self, i: int, t: int) -> tuple[tuple[Any, Fraction], ...]:
        return self.maps[i][t]

    def validate(self, auc: BayesianAuction) -> None:
        if len(self.maps) != auc.n:
            raise InvalidProfile("strategy map has the wrong number of players")
        for i in range(auc.n):
            if len(self.maps[i]) != len(auc.priors[i]):
                raise InvalidProfile(f"player {i}: one distribution per type required")
            for t, d in enumerate(self.maps[i]):
                allowed = set(auc.actions(i, t))
                if sum((p for _, p in d), ZERO) != 1 or any(p < 0 for _, p in d):
                    raise InvalidProfile(f"player {i}, type {t}: not a probability distribution")
                for a, p in d:
                    if p and a not in allowed:
                        raise InvalidProfile(f"player {i}, type {t}: action {a} not available")

    def is_pure(self) -> bool:
        return all(len(d) == 1 for per in self.maps for d in per)

    def action_profiles(self, v: tuple[int, ...]) -> Iterator[tuple[tuple, Fraction]]:
        """Joint action distribution for type profile ``v``."""
        for combo in itertools.product(*(self.maps[i][v[i]] for i in range(len(v)))):
            p = math.prod((q for _, q in combo), start=ONE)
            if p:
                yield tuple(a for a, _ in combo), p


def truthful_bid(ca: CombinatorialValuationAuction, i: int, t: int, scale=ONE):
    """Greedy per-item bid near ``scale * v({j})``, rounded down to a valid grid action."""
    val = ca.valuations[i][t]
    bids = [ZERO] * ca.m
    allowed = set(ca.actions(i, t))
    for j in range(ca.m):
        target = scale * val({j})
        for b in reversed(ca.bid_grid):
            trial = bids[:j] + [b] + bids[j + 1:]
            if b <= target and tuple(trial) in allowed:
                bids[j] = b
                break
    return tuple(bids)


def truthful_strategy(ca: CombinatorialValuationAuction, scale=ONE) -> StrategyMap:
    return StrategyMap.pure([[truthful_bid(ca, i, t, scale) for t in range(len(ca.priors[i]))] for i in range(ca.n)])
