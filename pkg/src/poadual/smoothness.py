"""Smoothness conditions, checked exhaustively on finite grids.

Every check reduces to a finite list of points ``(L, V, U)`` that must satisfy
``L <= lam * V + mu * U``. The parameter search works on that list directly,
then re-verifies the winning pair through the ordinary check.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Iterator, Sequence

from ._rational import as_rational
from .caps import DEFAULT_CAPS, Caps
from .congestion import AtomicGame
from .costs import CostFunction
from .errors import InvalidInstance

ZERO = Fraction(0)
ONE = Fraction(1)

LATTICE_DENOMINATOR = 60
LAMBDA_MAX = Fraction(4)


@dataclass(frozen=True)
class SmoothnessCertificate:
    kind: str
    lam: Fraction | None
    mu: Fraction | None
    verified: bool
    domain: dict
    witness: Any = None
    deviations: Any = None
    flags: tuple[str, ...] = ()

    @property
    def ratio(self) -> Fraction | None:
        """Implied bound: lam/(1-mu) for cost games, lam/(1+mu) or lam/mu for auctions."""
        if self.lam is None:
            return None
        if self.kind == "auction-R15":
            return self.lam / (1 + self.mu)
        if self.kind == "auction-ST13":
            return self.lam / self.mu if self.mu else None
        return self.lam / (1 - self.mu)


def _params(lam, mu) -> tuple[Fraction, Fraction]:
    lam, mu = as_rational(lam), as_rational(mu)
    if lam < 0 or mu < 0:
        raise ValueError("smoothness parameters must be non-negative")
    return lam, mu


def _first_violation(points: Iterable[tuple[Fraction, Fraction, Fraction, Any]], lam, mu):
    count = 0
    for L, V, U, where in points:
        count += 1
        if L > lam * V + mu * U:
            return where, count
    return None, count


# --------------------------------------------------------------------------
# Point generators
# --------------------------------------------------------------------------


def game_points(g: AtomicGame) -> Iterator[tuple[Fraction, Fraction, Fraction, Any]]:
    profiles = list(g.profiles())
    total = {s: g.total_cost(s) for s in profiles}
    for s in profiles:
        for star in profiles:
            lhs = sum((g.player_cost(i, g.deviate(s, i, star[i])) for i in range(g.n)), ZERO)
            yield lhs, total[star], total[s], {"s": s, "s_star": star}


def _grid(grid) -> tuple[Fraction, ...]:
    pts = tuple(sorted({as_rational(x) for x in grid}))
    if not pts or pts[0] < 0:
        raise InvalidInstance("grid must be a non-empty set of non-negative amounts")
    return pts


def resource_points(cost: CostFunction, n: int, grid, form: str = "weighted", caps: Caps = DEFAULT_CAPS):
    """Points for resource-smoothness over ``grid^n x grid^n``.

    ``weighted`` (default): ``sum_i b_i * l(a - a_i + b_i) <= lam * b * l(b) + mu * a * l(a)``,
    the inequality the atomic dual constraints actually need.
    ``displayed``: ``sum_i l(a_1 + ... + a_i + b_i) <= lam * l(sum b) + mu * l(sum a)``.
    """
    pts = _grid(grid)
    caps.check("grid_points", len(pts) ** (2 * n))
    if form == "weighted":
        for a in itertools.product(pts, repeat=n):
            A = sum(a, ZERO)
            UA = A * cost.eval(A)
            for b in itertools.product(pts, repeat=n):
                B = sum(b, ZERO)
                lhs = sum((b[i] * cost.eval(A - a[i] + b[i]) for i in range(n) if b[i]), ZERO)
                yield lhs, B * cost.eval(B), UA, {"a": a, "b": b}
    elif form == "displayed":
        for a in itertools.product(pts, repeat=n):
            prefix = list(itertools.accumulate(a))
            A = prefix[-1]
            UA = cost.eval(A)
            for b in itertools.product(pts, repeat=n):
                lhs = sum((cost.eval(prefix[i] + b[i]) for i in range(n)), ZERO)
                yield lhs, cost.eval(sum(b, ZERO)), UA, {"a": a, "b": b}
    else:
        raise ValueError(f"unknown resource-smoothness form {form!r}")


def dual_smooth_points(cost: CostFunction, n: int, grid, caps: Caps = DEFAULT_CAPS):
    if not cost.has_derivative:
        raise InvalidInstance("dual-smoothness needs a differentiable cost")
    pts = _grid(grid)
    caps.check("grid_points", len(pts) ** (2 * n))
    for u in itertools.product(pts, repeat=n):
        U = sum(u, ZERO)
        lu, du = cost.eval(U), cost.derivative(U)
        for v in itertools.product(pts, repeat=n):
            V = sum(v, ZERO)
            lhs = V * lu + sum((u[i] * (v[i] - u[i]) for i in range(n)), ZERO) * du
            yield lhs, V * cost.eval(V), U * lu, {"u": u, "v": v}


# --------------------------------------------------------------------------
# Checks
# --------------------------------------------------------------------------


def check_game_smooth(g: AtomicGame, lam, mu) -> SmoothnessCertificate:
    lam, mu = _params(lam, mu)
    if mu >= 1:
        raise ValueError("game smoothness needs mu < 1")
    witness, count = _first_violation(game_points(g), lam, mu)
    domain = {"enumeration": "all ordered profile pairs", "pairs": count}
    return SmoothnessCertificate("game", lam, mu, witness is None, domain, witness)


def check_resource_smooth(
    cost: CostFunction, lam, mu, n: int, grid, form: str = "weighted", caps: Caps = DEFAULT_CAPS
) -> SmoothnessCertificate:
    lam, mu = _params(lam, mu)
    pts = _grid(grid)
    witness, count = _first_violation(resource_points(cost, n, pts, form, caps), lam, mu)
    domain = {
        "form": form,
        "n": n,
        "grid": [str(x) for x in pts],
        "points": count,
        "orderings": "all (every sequence in grid^n is enumerated)",
    }
    return SmoothnessCertificate("resource", lam, mu, witness is None, domain, witness)


def check_dual_smooth(cost: CostFunction, lam, mu, n: int, grid, caps: Caps = DEFAULT_CAPS) -> SmoothnessCertificate:
    lam, mu = _params(lam, mu)
    pts = _grid(grid)
    witness, count = _first_violation(dual_smooth_points(cost, n, pts, caps), lam, mu)
    domain = {"n": n, "grid": [str(x) for x in pts], "points": count}
    return SmoothnessCertificate("dual-smooth", lam, mu, witness is None, domain, witness)


# --------------------------------------------------------------------------
# Lattice search
# --------------------------------------------------------------------------


def lattice(q: int = LATTICE_DENOMINATOR, lam_max: Fraction = LAMBDA_MAX):
    """Parameter lattice: lam in {p/q} within [0, lam_max], mu in {p/q} within [0, 1)."""
    mus = [Fraction(p, q) for p in range(q)]
    lams = [Fraction(p, q) for p in range(int(lam_max * q) + 1)]
    return lams, mus


def best_on_lattice(points: Sequence[tuple[Fraction, Fraction, Fraction]], q: int = LATTICE_DENOMINATOR,
                    lam_max: Fraction = LAMBDA_MAX) -> tuple[Fraction, Fraction] | None:
    """Lattice pair minimising lam/(1-mu) subject to every point; first in mu order on ties."""
    positive = [(L, V, U) for L, V, U in points if V > 0]
    flat = [(L, U) for L, V, U in points if V == 0]
    best = None
    for p in range(q):
        mu = Fraction(p, q)
        if any(L > mu * U for L, U in flat):
            continue
        need = max(((L - mu * U) / V for L, V, U in positive), default=ZERO)
        need = max(need, ZERO)
        lam = Fraction(math.ceil(need * q), q)
        if lam > lam_max:
            continue
        ratio = lam / (1 - mu)
        if best is None or ratio < best[0]:
            best = (ratio, lam, mu)
    return None if best is None else (best[1], best[2])


def robust_poa_search(target, kind: str, n: int | None = None, grid=None, form: str = "weighted",
                      q: int = LATTICE_DENOMINATOR, lam_max: Fraction = LAMBDA_MAX,
                      caps: Caps = DEFAULT_CAPS) -> SmoothnessCertificate:
    """Minimise lam/(1-mu) over the lattice subject to the ``kind`` check passing.

    ``target`` is an :class:`AtomicGame` for ``kind="game"``; otherwise a cost
    function or a list of them, checked with ``n`` players on ``grid``. Sizes
    ``n`` may also be a list, in which case every size must pass.
    """
    lam_max = as_rational(lam_max)
    if kind == "game":
        points = [(L, V, U) for L, V, U, _ in game_points(target)]

        def recheck(lam, mu):
            return check_game_smooth(target, lam, mu)

    elif kind in ("resource", "dual-smooth"):
        costs = list(target) if isinstance(target, (list, tuple)) else [target]
        sizes = list(n) if isinstance(n, (list, tuple, range)) else [n]
        gen = resource_points if kind == "resource" else dual_smooth_points
        points = []
        for cost in costs:
            for size in sizes:
                if kind == "resource":
                    points.extend((L, V, U) for L, V, U, _ in gen(cost, size, grid, form, caps))
                else:
                    points.extend((L, V, U) for L, V, U, _ in gen(cost, size, grid, caps))

        def recheck(lam, mu):
            for cost in costs:
                for size in sizes:
                    if kind == "resource":
                        cert = check_resource_smooth(cost, lam, mu, size, grid, form, caps)
                    else:
                        cert = check_dual_smooth(cost, lam, mu, size, grid, caps)
                    if not cert.verified:
                        return cert
            return cert

    else:
        raise ValueError(f"unknown smoothness kind {kind!r}")

    points = list(dict.fromkeys(points))
    found = best_on_lattice(points, q, lam_max)
    domain = {"lattice": f"p/{q}", "lambda_range": ["0", str(lam_max)], "mu_range": "[0, 1)"}
    if found is None:
        return SmoothnessCertificate(kind, None, None, False, domain, None, flags=("none-found",))
    cert = recheck(*found)
    if not cert.verified:
        raise AssertionError("lattice optimum failed re-verification")
    return SmoothnessCertificate(kind, found[0], found[1], True, {**cert.domain, **domain})


# --------------------------------------------------------------------------
# Pigou bound
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PigouResult:
    value: Fraction
    u: Fraction | None
    v: Fraction | None
    empty: bool = False


def pigou_ratio(cost: CostFunction, u: Fraction, v: Fraction) -> Fraction | None:
    """``u l(u) / (v l(v) + (u - v) l(u))``, or None when the denominator is not positive."""
    lu = cost.eval(u)
    den = v * cost.eval(v) + (u - v) * lu
    if den <= 0:
        return None
    return u * lu / den


def pigou_bound(cost: CostFunction | Sequence[CostFunction], grid) -> PigouResult:
    """Max of the Pigou ratio over grid pairs (u, v); u = 0 contributes 0."""
    costs = list(cost) if isinstance(cost, (list, tuple)) else [cost]
    pts = _grid(grid)
    best = None
    for c in costs:
        for u in pts:
            for v in pts:
                ratio = pigou_ratio(c, u, v)
                if ratio is None:
                    continue
                if best is None or ratio > best.value:
                    best = PigouResult(ratio, u, v)
    if best is None:
        return PigouResult(ONE, None, None, True)
    return best
