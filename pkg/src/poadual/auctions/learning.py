"""Repeated second-price item bidding with online learners, and measured envy.

Learners see full-information feedback: after each round they learn the
utility every one of their bid vectors would have earned against the others'
realised bids. Bids, thresholds and utilities stay exact rationals; only the
learner's internal weights are floating point.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .._rational import as_rational, fmt
from ..errors import InvalidInstance
from .model import CombinatorialValuationAuction, all_bundles

ZERO = Fraction(0)


@dataclass(frozen=True)
class Step:
    bids: tuple
    thresholds: tuple
    utilities: tuple
    welfare: Fraction


@dataclass
class LearningTrace:
    auction: CombinatorialValuationAuction
    types: tuple[int, ...]
    steps: list[Step] = field(default_factory=list)
    seed: int | None = None
    learners: tuple[str, ...] = ()

    @property
    def horizon(self) -> int:
        return len(self.steps)

    def average_welfare(self) -> Fraction:
        return sum((s.welfare for s in self.steps), ZERO) / self.horizon

    def average_utility(self, i: int) -> Fraction:
        return sum((s.utilities[i] for s in self.steps), ZERO) / self.horizon

    def average_thresholds(self, i: int) -> list[Fraction]:
        m = self.auction.m
        return [sum((s.thresholds[i][j] for s in self.steps), ZERO) / self.horizon for j in range(m)]

    def validate(self) -> None:
        """Thresholds, utilities and welfare must follow from the recorded bids."""
        ca = self.auction
        for s in self.steps:
            if tuple(map(tuple, ca.thresholds(s.bids))) != s.thresholds:
                raise AssertionError("recorded thresholds disagree with the bids")
            bundles, _ = ca.outcome(s.bids)
            if tuple(ca.utility(i, self.types[i], s.bids) for i in range(ca.n)) != s.utilities:
                raise AssertionError("recorded utilities disagree with the bids")
            value = sum((ca.value(i, self.types[i], bundles[i]) for i in range(ca.n)), ZERO)
            if value != s.welfare:
                raise AssertionError("recorded welfare differs from the allocation value")

    def to_lines(self) -> list[str]:
        """One JSON record per step, rationals as strings."""
        out = []
        for t, s in enumerate(self.steps):
            out.append(json.dumps({
                "step": t,
                "bids": [[fmt(x) for x in b] for b in s.bids],
                "thresholds": [[fmt(x) for x in row] for row in s.thresholds],
                "utilities": [fmt(u) for u in s.utilities],
                "welfare": fmt(s.welfare),
            }, sort_keys=True))
        return out


class Hedge:
    """Multiplicative weights over a finite action list with rewards in [0, scale]."""

    def __init__(self, actions: Sequence, horizon: int, scale: Fraction, rng: np.random.Generator):
        self.actions = list(actions)
        self.rng = rng
        k = len(self.actions)
        self.eta = math.sqrt(8 * math.log(k) / horizon) if k > 1 else 0.0
        self.scale = float(scale) if scale > 0 else 1.0
        self.log_weights = np.zeros(k)

    def choose(self):
        w = np.exp(self.log_weights - self.log_weights.max())
        idx = self.rng.choice(len(self.actions), p=w / w.sum())
        return self.actions[idx]

    def update(self, rewards: Sequence[Fraction]) -> None:
        self.log_weights += self.eta * np.array([float(r) for r in rewards]) / self.scale


class Scripted:
    """Replays a fixed list of bid vectors cyclically."""

    def __init__(self, script: Sequence):
        if not script:
            raise InvalidInstance("scripted learner needs at least one bid vector")
        self.script = [tuple(as_rational(x) for x in b) for b in script]
        self.t = 0

    def choose(self):
        b = self.script[self.t % len(self.script)]
        self.t += 1
        return b

    def update(self, rewards) -> None:
        pass


def no_envy_trace(ca: CombinatorialValuationAuction, horizon: int, seed: int = 0, learners=None,
                  types: tuple[int, ...] | None = None) -> LearningTrace:
    """Run ``horizon`` rounds of simultaneous second-price bidding.

    ``learners[i]`` is ``"hedge"`` or a list of bid vectors to replay. Each
    player keeps the fixed type ``types[i]`` (default: type 0).
    """
    if ca.mechanism != "second-price":
        raise InvalidInstance("no-envy dynamics are defined here for second-price auctions only")
    if ca.reserve != 0:
        raise InvalidInstance("no-envy dynamics assume no reserve price")
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    types = tuple(types) if types is not None else tuple(0 for _ in range(ca.n))
    if learners is None:
        learners = ["hedge"] * ca.n
    rng = np.random.default_rng(seed)
    agents = []
    for i, spec in enumerate(learners):
        if spec == "hedge":
            top = ca.value(i, types[i], frozenset(range(ca.m)))
            agents.append(Hedge(ca.actions(i, types[i]), horizon, top, rng))
        else:
            agents.append(Scripted(spec))
    trace = LearningTrace(ca, types, seed=seed,
                          learners=tuple(s if s == "hedge" else "scripted" for s in learners))
    for _ in range(horizon):
        bids = tuple(agent.choose() for agent in agents)
        ca.check_bids(types, bids)
        bundles, payments = ca.outcome(bids)
        utilities = tuple(ca.utility(i, types[i], bids) for i in range(ca.n))
        welfare = ca.welfare(bids, types)
        thresholds = tuple(tuple(row) for row in ca.thresholds(bids))
        trace.steps.append(Step(bids, thresholds, utilities, welfare))
        for i, agent in enumerate(agents):
            if isinstance(agent, Hedge):
                rewards = [ca.utility(i, types[i], bids[:i] + (a,) + bids[i + 1:]) for a in agent.actions]
                agent.update(rewards)
    return trace


def envy_rate(trace: LearningTrace, r=1) -> list[Fraction]:
    """Per player: ``max(0, max_S [v(S)/r - sum_{j in S} avg theta_j] - avg utility)``."""
    r = as_rational(r)
    if r <= 0:
        raise ValueError("r must be positive")
    ca = trace.auction
    ca.caps.check("strategies", ca.m)
    out = []
    for i in range(ca.n):
        theta = trace.average_thresholds(i)
        bench = max(ca.value(i, trace.types[i], S) / r - sum((theta[j] for j in S), ZERO) for S in all_bundles(ca.m))
        out.append(max(ZERO, bench - trace.average_utility(i)))
    return out


@dataclass(frozen=True)
class NoEnvyCheck:
    average_welfare: Fraction
    optimum: Fraction
    envy: tuple[Fraction, ...]
    bound: Fraction

    @property
    def holds(self) -> bool:
        return self.average_welfare >= self.bound


def no_envy_theorem_check(trace: LearningTrace, r=1) -> NoEnvyCheck:
    """Average welfare against ``Opt / (2r) - sum_i eps_i`` with measured envy rates."""
    r = as_rational(r)
    eps = envy_rate(trace, r)
    opt = trace.auction.optimal_welfare(trace.types)
    bound = opt / (2 * r) - sum(eps, ZERO)
    return NoEnvyCheck(trace.average_welfare(), opt, tuple(eps), bound)
