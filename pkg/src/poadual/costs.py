"""Latency functions evaluated exactly on rationals."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from ._rational import as_rational
from .errors import InvalidInstance

ZERO = Fraction(0)


class CostFunction:
    """Non-decreasing latency ``load -> cost`` with an optional derivative."""

    kind = "abstract"

    def __call__(self, load) -> Fraction:
        return self.eval(as_rational(load))

    def eval(self, load: Fraction) -> Fraction:
        raise NotImplementedError

    @property
    def has_derivative(self) -> bool:
        return False

    def derivative(self, load: Fraction) -> Fraction:
        raise InvalidInstance(f"{self.kind} cost function has no derivative")

    def to_dict(self) -> dict:
        raise NotImplementedError

    def is_constant(self) -> bool:
        return False


@dataclass(frozen=True, eq=True)
class Polynomial(CostFunction):
    """``sum_k coefficients[k] * x**k`` with non-negative rational coefficients."""

    coefficients: tuple[Fraction, ...]
    kind = "polynomial"

    def __init__(self, coefficients: Iterable):
        coefs = [as_rational(c) for c in coefficients]
        while len(coefs) > 1 and coefs[-1] == 0:
            coefs.pop()
        if not coefs:
            coefs = [ZERO]
        if any(c < 0 for c in coefs):
            raise InvalidInstance("polynomial costs need non-negative coefficients")
        object.__setattr__(self, "coefficients", tuple(coefs))

    def eval(self, load: Fraction) -> Fraction:
        if load < 0:
            raise ValueError("negative load")
        acc = ZERO
        for c in reversed(self.coefficients):
            acc = acc * load + c
        return acc

    @property
    def has_derivative(self) -> bool:
        return True

    def derivative(self, load: Fraction) -> Fraction:
        acc = ZERO
        for k in range(len(self.coefficients) - 1, 0, -1):
            acc = acc * load + k * self.coefficients[k]
        return acc

    def is_constant(self) -> bool:
        return len(self.coefficients) == 1

    def to_dict(self) -> dict:
        return {"kind": "polynomial", "coefficients": [str(c) for c in self.coefficients]}

    def __repr__(self) -> str:
        return f"Polynomial({[str(c) for c in self.coefficients]})"


@dataclass(frozen=True, eq=True)
class PiecewiseLinear(CostFunction):
    """Linear interpolation through ``(load, cost)`` breakpoints starting at load 0.

    Loads beyond the last breakpoint are an error: the breakpoint list has to
    cover every load the instance can reach.
    """

    breakpoints: tuple[tuple[Fraction, Fraction], ...]
    kind = "piecewise"

    def __init__(self, breakpoints: Sequence[Sequence]):
        pts = tuple((as_rational(x), as_rational(y)) for x, y in breakpoints)
        if not pts or pts[0][0] != 0:
            raise InvalidInstance("piecewise cost must start at load 0")
        for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
            if x1 <= x0:
                raise InvalidInstance("breakpoint loads must be strictly increasing")
            if y1 < y0:
                raise InvalidInstance("piecewise cost must be non-decreasing")
        if pts[0][1] < 0:
            raise InvalidInstance("cost at load 0 must be non-negative")
        object.__setattr__(self, "breakpoints", pts)

    def eval(self, load: Fraction) -> Fraction:
        pts = self.breakpoints
        if load < 0 or load > pts[-1][0]:
            raise InvalidInstance(f"load {load} outside the breakpoint range [0, {pts[-1][0]}]")
        for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
            if load <= x1:
                return y0 + (y1 - y0) * (load - x0) / (x1 - x0)
        return pts[-1][1]

    def is_constant(self) -> bool:
        return all(y == self.breakpoints[0][1] for _, y in self.breakpoints)

    def to_dict(self) -> dict:
        return {"kind": "piecewise", "breakpoints": [[str(x), str(y)] for x, y in self.breakpoints]}

    def __repr__(self) -> str:
        return f"PiecewiseLinear({[(str(x), str(y)) for x, y in self.breakpoints]})"


def cost_from_dict(data: dict) -> CostFunction:
    kind = data.get("kind")
    if kind == "polynomial":
        return Polynomial(data["coefficients"])
    if kind == "piecewise":
        return PiecewiseLinear(data["breakpoints"])
    raise InvalidInstance(f"unknown cost kind {kind!r}")


def check_splittable_cost(cost: CostFunction, grid: Sequence[Fraction]) -> None:
    """Reject costs that are unusable in a splittable game on ``grid``.

    Requires a derivative and ``x * cost(x)`` convex on the sorted grid.
    """
    if not cost.has_derivative:
        raise InvalidInstance("splittable games need differentiable costs")
    pts = sorted(set(grid))
    vals = [x * cost.eval(x) for x in pts]
    for k in range(1, len(pts) - 1):
        left = (vals[k] - vals[k - 1]) / (pts[k] - pts[k - 1])
        right = (vals[k + 1] - vals[k]) / (pts[k + 1] - pts[k])
        if right < left:
            raise InvalidInstance(f"x*cost(x) is not convex around load {pts[k]}")


LINEAR = Polynomial([0, 1])
QUADRATIC = Polynomial([0, 0, 1])


def constant(c) -> Polynomial:
    return Polynomial([c])
