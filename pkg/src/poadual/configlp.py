"""Configuration linear programs for congestion games.

Each builder returns a :class:`BuiltProgram`: the LP plus an index from LP
variable names to what they mean. Constraint names double as the names of the
dual variables, so a certificate is just an assignment to ``alpha[...]``,
``beta[...]`` and ``gamma[...]``.

Row families:

* ``alpha[i]``: player ``i`` picks a strategy (or routes its whole demand);
* ``beta`` / ``beta[e]``: exactly one configuration is selected;
* ``gamma[...]``: the coupling between choice and configuration variables.
"""

from __future__ import annotations

import itertools
import json
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

from ._rational import as_rational
from .congestion import AtomicGame, NonAtomicGame, SplittableGame, _compositions, _GridGame
from .equilibria import profile_key
from .errors import InvalidInstance
from .lp import LinearProgram, LPBuilder, feasibility_residuals
from .lpio import dumps as dump_lp

ZERO = Fraction(0)


@dataclass(frozen=True)
class BuiltProgram:
    lp: LinearProgram
    index: dict[str, Any]
    formulation: str
    game: Any = None
    configurations: dict = field(default_factory=dict)  # resource -> tuple of configurations (grid/resource kinds)

    @property
    def kind(self) -> str:
        return self.formulation


def _tuple_name(items) -> str:
    return ",".join(str(x) for x in items)


def _multiset_name(T) -> str:
    return ",".join(f"{i}:{k}" for i, k in T)


# --------------------------------------------------------------------------
# Atomic games
# --------------------------------------------------------------------------


def profile_lp(g: AtomicGame) -> BuiltProgram:
    """One z-variable per pure profile; minimise expected total cost."""
    profiles = list(g.profiles())
    g.caps.check("configurations", len(profiles))
    lp = LPBuilder("minimize", "profile-lp")
    index: dict[str, Any] = {}
    for i, p in enumerate(g.players):
        for j in range(len(p.strategies)):
            name = lp.variable(f"x[{i},{j}]")
            index[name] = ("x", i, j)
    znames = {}
    for s in profiles:
        name = lp.variable(f"z[{profile_key(s)}]")
        znames[s] = name
        index[name] = ("z", s)
        lp.objective(name, g.total_cost(s))
    for i, p in enumerate(g.players):
        lp.constraint(f"alpha[{i}]", {f"x[{i},{j}]": 1 for j in range(len(p.strategies))}, ">=", 1)
    lp.constraint("beta", {znames[s]: 1 for s in profiles}, "=", 1)
    for i, p in enumerate(g.players):
        for j in range(len(p.strategies)):
            row = {znames[s]: 1 for s in profiles if s[i] == j}
            row[f"x[{i},{j}]"] = -1
            lp.constraint(f"gamma[{i},{j}]", row, "=", 0)
    return BuiltProgram(lp.build(), index, "profile", g)


def resource_lp(g: AtomicGame) -> BuiltProgram:
    """One z-variable per (resource, subset of players on it)."""
    n = g.n
    subsets = [T for size in range(n + 1) for T in itertools.combinations(range(n), size)]
    g.caps.check("configurations", len(subsets) * len(g.resources))
    lp = LPBuilder("minimize", "resource-lp")
    index: dict[str, Any] = {}
    for i, p in enumerate(g.players):
        for j in range(len(p.strategies)):
            name = lp.variable(f"x[{i},{j}]")
            index[name] = ("x", i, j)
    configs = {}
    for e in g.resources:
        configs[e] = tuple(subsets)
        for T in subsets:
            name = lp.variable(f"z[{e};{_tuple_name(T)}]")
            index[name] = ("z", e, T)
            w = sum((g.players[i].weight for i in T), ZERO)
            lp.objective(name, w * g.costs[e].eval(w))
    for i, p in enumerate(g.players):
        lp.constraint(f"alpha[{i}]", {f"x[{i},{j}]": 1 for j in range(len(p.strategies))}, ">=", 1)
    for e in g.resources:
        lp.constraint(f"beta[{e}]", {f"z[{e};{_tuple_name(T)}]": 1 for T in subsets}, "=", 1)
    for i, p in enumerate(g.players):
        for e in g.resources:
            row: dict[str, object] = {f"z[{e};{_tuple_name(T)}]": 1 for T in subsets if i in T}
            for j, s in enumerate(p.strategies):
                if e in s:
                    row[f"x[{i},{j}]"] = -1
            lp.constraint(f"gamma[{i},{e}]", row, "=", 0)
    return BuiltProgram(lp.build(), index, "resource", g, configs)


# --------------------------------------------------------------------------
# Grid games (non-atomic and splittable)
# --------------------------------------------------------------------------


def achievable_configurations(g: _GridGame) -> dict[str, tuple[tuple[tuple[int, int], ...], ...]]:
    """Per resource, the sorted multisets of ``(player, amount index)`` some valid profile produces.

    Amount index 0 is never recorded: a zero amount puts nothing on a resource.
    """
    per_player: list[dict[str, set]] = []
    for grp in g.groups:
        seen = {e: set() for e in g.resources}
        for split in _compositions(grp.units, len(grp.strategies)):
            for e in g.resources:
                ks = tuple(sorted(k for j, k in enumerate(split) if k and e in grp.strategies[j]))
                seen[e].add(ks)
        per_player.append(seen)
    out = {}
    total = 0
    for e in g.resources:
        options = [sorted(per_player[i][e]) for i in range(g.n)]
        configs = set()
        for combo in itertools.product(*options):
            configs.add(tuple((i, k) for i, ks in enumerate(combo) for k in ks))
        out[e] = tuple(sorted(configs))
        total += len(configs)
    g.caps.check("configurations", total)
    return out


def _grid_lp(g: _GridGame, formulation: str, name: str) -> BuiltProgram:
    eps = g.epsilon
    configs = achievable_configurations(g)
    lp = LPBuilder("minimize", name)
    index: dict[str, Any] = {}
    for i, grp in enumerate(g.groups):
        for j in range(len(grp.strategies)):
            for k in range(1, grp.units + 1):
                v = lp.variable(f"x[{i},{j},{k}]")
                index[v] = ("x", i, j, k)
    for e in g.resources:
        for T in configs[e]:
            v = lp.variable(f"z[{e};{_multiset_name(T)}]")
            index[v] = ("z", e, T)
            w = sum((k * eps for _, k in T), ZERO)
            lp.objective(v, w * g.costs[e].eval(w))
    for i, grp in enumerate(g.groups):
        row = {
            f"x[{i},{j},{k}]": k * eps
            for j in range(len(grp.strategies))
            for k in range(1, grp.units + 1)
        }
        lp.constraint(f"alpha[{i}]", row, ">=", g.demand(i))
    for e in g.resources:
        lp.constraint(f"beta[{e}]", {f"z[{e};{_multiset_name(T)}]": 1 for T in configs[e]}, "=", 1)
    for i, grp in enumerate(g.groups):
        for k in range(1, grp.units + 1):
            for e in g.resources:
                row: dict[str, object] = {}
                for T in configs[e]:
                    mult = Counter(T)[(i, k)]
                    if mult:
                        row[f"z[{e};{_multiset_name(T)}]"] = mult
                for j, s in enumerate(grp.strategies):
                    if e in s:
                        row[f"x[{i},{j},{k}]"] = -1
                lp.constraint(f"gamma[{i},{k},{e}]", row, "=", 0)
    return BuiltProgram(lp.build(), index, formulation, g, configs)


def nonatomic_lp(g: NonAtomicGame) -> BuiltProgram:
    return _grid_lp(g, "nonatomic", "nonatomic-lp")


def splittable_lp(g: SplittableGame) -> BuiltProgram:
    return _grid_lp(g, "splittable", "splittable-lp")


def augmented_lp(g: NonAtomicGame, r) -> BuiltProgram:
    """Configuration LP at demand ``(1 + r) * w_i``; amounts and configurations follow the larger demand."""
    r = as_rational(r)
    if r < 0:
        raise InvalidInstance("augmentation factor must be non-negative")
    bigger = g.scaled(1 + r)
    return _grid_lp(bigger, "augmented", f"augmented-lp[r={r}]")


# --------------------------------------------------------------------------
# Integer embeddings and structural audit
# --------------------------------------------------------------------------


def embed(bp: BuiltProgram, outcome) -> dict[str, Fraction]:
    """0/1 assignment of ``bp``'s LP corresponding to a pure profile or flow."""
    g = bp.game
    values = {v: ZERO for v in bp.lp.variable_names}
    one = Fraction(1)
    if bp.formulation == "profile":
        for i, j in enumerate(outcome):
            values[f"x[{i},{j}]"] = one
        values[f"z[{profile_key(outcome)}]"] = one
    elif bp.formulation == "resource":
        for i, j in enumerate(outcome):
            values[f"x[{i},{j}]"] = one
        for e in g.resources:
            T = tuple(i for i, j in enumerate(outcome) if e in g.strategy(i, j))
            values[f"z[{e};{_tuple_name(T)}]"] = one
    else:
        units = g.units_of(outcome)
        for i, row in enumerate(units):
            for j, k in enumerate(row):
                if k:
                    values[f"x[{i},{j},{k}]"] = one
        for e in g.resources:
            T = tuple(
                sorted((i, k) for i, row in enumerate(units) for j, k in enumerate(row) if k and e in g.groups[i].strategies[j])
            )
            values[f"z[{e};{_multiset_name(T)}]"] = one
    return values


def validate_shape(bp: BuiltProgram) -> None:
    """Assert the LP consists of exactly the three row families of its formulation."""
    lp = bp.lp
    zvars = {v for v, meaning in bp.index.items() if meaning[0] == "z"}
    xvars = {v for v, meaning in bp.index.items() if meaning[0] == "x"}
    if zvars | xvars != set(lp.variable_names):
        raise AssertionError("index does not cover exactly the LP variables")
    for v in lp.variables:
        if v.lower != 0 or v.upper is not None:
            raise AssertionError(f"variable {v.name} is not a plain non-negative variable")
    partition_hits = Counter()
    for con in lp.constraints:
        row = con.row
        if con.name.startswith("alpha["):
            if con.relation != ">=" or not set(row) <= xvars or any(c <= 0 for c in row.values()):
                raise AssertionError(f"{con.name} is not a choice row")
        elif con.name.startswith("beta"):
            if con.relation != "=" or con.rhs != 1 or not set(row) <= zvars or any(c != 1 for c in row.values()):
                raise AssertionError(f"{con.name} is not a partition row")
            partition_hits.update(row)
        elif con.name.startswith("gamma["):
            if con.relation != "=" or con.rhs != 0:
                raise AssertionError(f"{con.name} is not a coupling row")
            for var, c in row.items():
                if (var in zvars and c <= 0) or (var in xvars and c != -1):
                    raise AssertionError(f"{con.name} has a malformed coefficient on {var}")
        else:
            raise AssertionError(f"unexpected row {con.name}")
    for z in zvars:
        if partition_hits[z] != 1:
            raise AssertionError(f"{z} appears in {partition_hits[z]} partition rows")


def check_embedding(bp: BuiltProgram, outcome, cost: Fraction) -> None:
    """The 0/1 image of ``outcome`` must be feasible with objective equal to ``cost``."""
    values = embed(bp, outcome)
    rep = feasibility_residuals(bp.lp, values)
    if not rep.feasible:
        raise AssertionError(f"embedded outcome violates {rep.worst}")
    if bp.lp.objective_value(values) != cost:
        raise AssertionError("embedded objective differs from the outcome cost")


def _jsonable(x):
    if isinstance(x, tuple):
        return [_jsonable(y) for y in x]
    return x


def dumps_with_index(bp: BuiltProgram) -> tuple[str, str]:
    """LP text plus a JSON sidecar mapping each variable name to its semantic tuple."""
    index = {name: _jsonable(meaning) for name, meaning in bp.index.items()}
    sidecar = json.dumps({"formulation": bp.formulation, "index": index}, sort_keys=True, indent=1) + "\n"
    return dump_lp(bp.lp), sidecar
