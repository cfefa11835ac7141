"""JSON instance files for games and auctions.

Congestion games::

    {"kind": "atomic",
     "resources": {"e1": {"kind": "polynomial", "coefficients": ["0", "1"]}, ...},
     "players": [{"weight": "1", "strategies": [["e1"], ["e2"]]}, ...]}

``nonatomic`` instances give ``"epsilon"`` and ``"types"`` with a ``"demand"``
each; ``splittable`` instances give ``"epsilon"`` and players with weights.

Auctions::

    {"kind": "auction", "items": 1, "mechanism": "second-price",
     "bid_grid": ["0", "1/2", "1"], "overbid": "1", "reserve": "0",
     "players": [{"types": [{"prior": "1", "valuation": {"": "0", "0": "1"}}]}]}

Valuation keys are comma-separated item indices (``""`` is the empty bundle);
``"additive": [...]`` or ``"unit_demand": [...]`` may replace the full table.
All numbers are exact: integers or strings like ``"3/4"``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Any

from ._rational import as_rational
from .auctions.model import CombinatorialValuationAuction, Valuation
from .caps import DEFAULT_CAPS, Caps
from .congestion import AtomicGame, NonAtomicGame, SplittableGame
from .costs import cost_from_dict
from .errors import InvalidInstance, ParseError

KINDS = ("atomic", "nonatomic", "splittable", "auction")


@dataclass(frozen=True)
class Instance:
    kind: str
    model: Any
    name: str
    digest: str


def _need(data: dict, key: str, where: str = "instance"):
    if key not in data:
        raise InvalidInstance(f"{where} is missing {key!r}")
    return data[key]


def _costs(data: dict) -> dict:
    raw = _need(data, "resources")
    if not isinstance(raw, dict):
        raise InvalidInstance("resources must map names to cost functions")
    return {name: cost_from_dict(spec) for name, spec in raw.items()}


def _valuation(m: int, spec: dict) -> Valuation:
    if "additive" in spec:
        return Valuation.additive(spec["additive"])
    if "unit_demand" in spec:
        return Valuation.unit_demand(spec["unit_demand"])
    table = _need(spec, "valuation", "type")
    parsed = {}
    for key, value in table.items():
        items = tuple(int(x) for x in key.split(",")) if key.strip() else ()
        parsed[items] = value
    return Valuation.from_mapping(m, parsed)


def model_from_dict(data: dict, caps: Caps = DEFAULT_CAPS, epsilon=None) -> Any:
    """Build the game or auction described by ``data``; ``epsilon`` overrides the file's grid."""
    kind = _need(data, "kind")
    if kind not in KINDS:
        raise InvalidInstance(f"unknown instance kind {kind!r}")
    if kind == "atomic":
        players = [(p.get("weight", 1), p["strategies"]) for p in _need(data, "players")]
        return AtomicGame(_costs(data), players, caps)
    if kind in ("nonatomic", "splittable"):
        eps = as_rational(epsilon if epsilon is not None else _need(data, "epsilon"))
        if eps <= 0:
            raise InvalidInstance("epsilon must be positive")
        if kind == "nonatomic":
            types = []
            for t in _need(data, "types"):
                units = as_rational(_need(t, "demand", "type")) / eps
                if units.denominator != 1:
                    raise InvalidInstance(f"demand {t['demand']} is not a multiple of epsilon {eps}")
                types.append((int(units), t["strategies"]))
            return NonAtomicGame(_costs(data), eps, types, caps)
        players = [(_need(p, "weight", "player"), p["strategies"]) for p in _need(data, "players")]
        return SplittableGame(_costs(data), eps, players, caps)
    m = _need(data, "items")
    if not isinstance(m, int) or isinstance(m, bool):
        raise InvalidInstance("items must be an integer")
    valuations, priors = [], []
    for p in _need(data, "players"):
        types = _need(p, "types", "player")
        valuations.append([_valuation(m, t) for t in types])
        priors.append([_need(t, "prior", "type") for t in types])
    return CombinatorialValuationAuction(
        m, valuations, priors, _need(data, "bid_grid"),
        mechanism=data.get("mechanism", "second-price"),
        overbid=data.get("overbid", 1), reserve=data.get("reserve", 0), caps=caps,
    )


def model_to_dict(model: Any, name: str = "") -> dict:
    """Canonical dictionary of a model; loading it back gives an identical model."""
    out: dict[str, Any] = {"name": name} if name else {}
    if isinstance(model, CombinatorialValuationAuction):
        out.update({
            "kind": "auction",
            "items": model.m,
            "mechanism": model.mechanism,
            "bid_grid": [str(b) for b in model.bid_grid],
            "overbid": str(model.overbid),
            "reserve": str(model.reserve),
            "players": [
                {"types": [{"prior": str(model.priors[i][t]), "valuation": model.valuations[i][t].to_dict()}
                           for t in model.types(i)]}
                for i in range(model.n)
            ],
        })
        return out
    costs = {e: model.costs[e].to_dict() for e in model.resources}
    if isinstance(model, AtomicGame):
        out.update({
            "kind": "atomic",
            "resources": costs,
            "players": [{"weight": str(p.weight), "strategies": [sorted(s) for s in p.strategies]} for p in model.players],
        })
    elif isinstance(model, NonAtomicGame):
        out.update({
            "kind": "nonatomic",
            "epsilon": str(model.epsilon),
            "resources": costs,
            "types": [{"demand": str(model.demand(i)), "strategies": [sorted(s) for s in t.strategies]}
                      for i, t in enumerate(model.types)],
        })
    elif isinstance(model, SplittableGame):
        out.update({
            "kind": "splittable",
            "epsilon": str(model.epsilon),
            "resources": costs,
            "players": [{"weight": str(model.demand(i)), "strategies": [sorted(s) for s in g.strategies]}
                        for i, g in enumerate(model.groups)],
        })
    else:
        raise TypeError(f"cannot serialise {type(model).__name__}")
    return out


def canonical_json(data: Any) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def digest(data: dict) -> str:
    return hashlib.sha256(canonical_json(data).encode()).hexdigest()


def loads(text: str, caps: Caps = DEFAULT_CAPS, epsilon=None) -> Instance:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from None
    if not isinstance(data, dict):
        raise ParseError("instance must be a JSON object", 1, 1)
    try:
        model = model_from_dict(data, caps, epsilon)
    except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
        if isinstance(exc, InvalidInstance):
            raise
        raise InvalidInstance(f"malformed instance: {exc}") from None
    return Instance(data["kind"], model, data.get("name", ""), digest(data))


def load(path: str, caps: Caps = DEFAULT_CAPS, epsilon=None) -> Instance:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read(), caps, epsilon)


def dumps(model: Any, name: str = "") -> str:
    return json.dumps(model_to_dict(model, name), sort_keys=True, indent=2) + "\n"


def same_model(a: Any, b: Any) -> bool:
    return canonical_json(model_to_dict(a)) == canonical_json(model_to_dict(b))
