"""Interim configuration LPs and dual certificates for auctions.

``bayesian_config_lp`` has one ``x`` per (player, type, action) and one ``z``
per (type profile, action profile); ``feldman_fu_lp`` is the smaller interim
relaxation over items and bundles used for simultaneous item auctions. Row
names are dual variable names, as in the congestion LPs.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from typing import Any, Callable, Mapping

from .._rational import as_rational
from ..certificates import DualCertificate, score
from ..configlp import BuiltProgram
from ..errors import InvalidInstance, SmoothnessViolation, WitnessSearchFailed
from ..lp import LPBuilder, feasibility_residuals
from ..smoothness import SmoothnessCertificate
from .bne import expected_revenue, expected_welfare, interim_utility, others_actions, require_bne
from .model import (
    BayesianAuction,
    CombinatorialValuationAuction,
    StrategyMap,
    all_bundles,
    bundle_key,
    truthful_bid,
)

ZERO = Fraction(0)
ONE = Fraction(1)
HALF = Fraction(1, 2)


def action_key(a) -> str:
    if isinstance(a, tuple):
        return ":".join(action_key(x) for x in a)
    return str(a)


def profile_name(profile) -> str:
    return "|".join(action_key(a) for a in profile)


def types_name(v) -> str:
    return ".".join(str(t) for t in v)


# --------------------------------------------------------------------------
# Interim configuration LP
# --------------------------------------------------------------------------


def bayesian_config_lp(auc: BayesianAuction) -> BuiltProgram:
    """Maximise expected welfare over interim action marginals and per-profile configurations."""
    profiles = list(auc.type_profiles())
    count = sum(len(list(auc.action_profiles(v))) for v, _ in profiles)
    auc.caps.check("configurations", count)
    lp = LPBuilder("maximize", "bayesian-config-lp")
    index: dict[str, Any] = {}
    for i in range(auc.n):
        for t in auc.types(i):
            for a in auc.actions(i, t):
                name = lp.variable(f"x[{i},{t},{action_key(a)}]")
                index[name] = ("x", i, t, a)
    zs: dict[tuple, list] = {}
    for v, _ in profiles:
        zs[v] = []
        for A in auc.action_profiles(v):
            name = lp.variable(f"z[{types_name(v)};{profile_name(A)}]")
            index[name] = ("z", v, A)
            zs[v].append((A, name))
            lp.objective(name, auc.welfare(A, v))
    for i in range(auc.n):
        for t in auc.types(i):
            row = {f"x[{i},{t},{action_key(a)}]": 1 for a in auc.actions(i, t)}
            lp.constraint(f"alpha[{i},{t}]", row, "<=", auc.priors[i][t])
    for v, pv in profiles:
        lp.constraint(f"beta[{types_name(v)}]", {name: 1 for _, name in zs[v]}, "<=", pv)
    for v, _ in profiles:
        for i in range(auc.n):
            f_others = auc.prob_others(i, v)
            for a in auc.actions(i, v[i]):
                row: dict[str, object] = {name: 1 for A, name in zs[v] if A[i] == a}
                row[f"x[{i},{v[i]},{action_key(a)}]"] = -f_others
                lp.constraint(f"gamma[{i},{action_key(a)},{types_name(v)}]", row, "<=", 0)
    return BuiltProgram(lp.build(), index, "bayesian", auc)


def embed_strategy(bp: BuiltProgram, sigma: StrategyMap) -> dict[str, Fraction]:
    """``x_{i,a}(t) = f_i(t) sigma_i(a | t)`` and ``z_A(v) = f(v) sigma(A | v)``."""
    auc = bp.game
    values = {name: ZERO for name in bp.lp.variable_names}
    for i in range(auc.n):
        for t in auc.types(i):
            for a, p in sigma.dist(i, t):
                values[f"x[{i},{t},{action_key(a)}]"] += auc.priors[i][t] * p
    for v, pv in auc.type_profiles():
        for A, pa in sigma.action_profiles(v):
            values[f"z[{types_name(v)};{profile_name(A)}]"] += pv * pa
    return values


def check_strategy_embedding(bp: BuiltProgram, sigma: StrategyMap) -> Fraction:
    values = embed_strategy(bp, sigma)
    rep = feasibility_residuals(bp.lp, values)
    if not rep.feasible:
        raise AssertionError(f"embedded strategy violates {rep.worst}")
    objective = bp.lp.objective_value(values)
    if objective != expected_welfare(bp.game, sigma):
        raise AssertionError("embedded objective differs from expected welfare")
    return objective


# --------------------------------------------------------------------------
# Smooth auctions
# --------------------------------------------------------------------------

VARIANTS = ("R15", "ST13")
DeviationMap = Callable[[int, tuple], tuple]


def deviation_family(ca: CombinatorialValuationAuction, name: str) -> DeviationMap:
    """Point-mass deviations depending on the deviator's own type only."""
    scale = {"truthful": ONE, "half": HALF, "zero": ZERO}.get(name)
    if scale is None:
        raise ValueError(f"unknown deviation family {name!r}")
    table = {(i, t): truthful_bid(ca, i, t, scale) for i in range(ca.n) for t in ca.types(i)}

    def deviation(i, v):
        return ((table[i, v[i]], ONE),)

    deviation.family = name
    return deviation


def _deviation_table(auc: BayesianAuction, deviation: DeviationMap) -> dict:
    out = {}
    for v, _ in auc.type_profiles():
        for i in range(auc.n):
            d = tuple((a, as_rational(p)) for a, p in deviation(i, v))
            if sum((p for _, p in d), ZERO) != 1 or any(p < 0 for _, p in d):
                raise InvalidInstance("deviation distribution is not a probability distribution")
            allowed = set(auc.actions(i, v[i]))
            if any(a not in allowed for a, p in d if p):
                raise InvalidInstance("deviation uses an unavailable action")
            out[i, v] = d
    return out


def _check_variant(variant: str, mu: Fraction) -> None:
    if variant not in VARIANTS:
        raise ValueError(f"unknown smoothness variant {variant!r}")
    if variant == "ST13" and mu < 1:
        raise ValueError("the revenue-based variant needs mu >= 1")


def check_auction_smooth(auc: BayesianAuction, lam, mu, variant: str = "R15",
                         deviation: DeviationMap | None = None) -> SmoothnessCertificate:
    """Exhaustively verify ``sum_i E[u_i(a*_i, a_-i; v_i)] >= lam E[SW(a*; v)] - mu X(a)``.

    ``X`` is welfare for R15 and revenue for ST13. Every positive-probability
    type profile and every action profile is checked. Without ``deviation``
    the truthful, half and zero families are tried in that order.
    """
    lam, mu = as_rational(lam), as_rational(mu)
    if lam < 0 or mu < 0:
        raise ValueError("smoothness parameters must be non-negative")
    _check_variant(variant, mu)
    kind = f"auction-{variant}"
    flags = ("degenerate: lambda = 0",) if lam == 0 else ()
    if deviation is None:
        if not isinstance(auc, CombinatorialValuationAuction):
            raise ValueError("a deviation map is required for this auction class")
        cert = None
        for fam in ("truthful", "half", "zero"):
            cert = check_auction_smooth(auc, lam, mu, variant, deviation_family(auc, fam))
            if cert.verified:
                return cert
        return cert
    table = _deviation_table(auc, deviation)
    checked = 0
    witness = None
    for v, _ in auc.type_profiles():
        star_sw = ZERO
        for combo in itertools.product(*(table[i, v] for i in range(auc.n))):
            p = ONE
            for _, q in combo:
                p *= q
            star_sw += p * auc.welfare(tuple(a for a, _ in combo), v)
        for a in auc.action_profiles(v):
            checked += 1
            lhs = ZERO
            for i in range(auc.n):
                for dev, p in table[i, v]:
                    lhs += p * auc.utility(i, v[i], a[:i] + (dev,) + a[i + 1:])
            other = auc.welfare(a, v) if variant == "R15" else auc.revenue(a)
            if lhs < lam * star_sw - mu * other:
                witness = {"types": v, "profile": a}
                break
        if witness is not None:
            break
    deviations = {f"{i};{types_name(v)}": {action_key(a): str(p) for a, p in d} for (i, v), d in table.items()}
    domain = {"type_profiles": "all with positive probability", "checked_profiles": checked,
              "family": getattr(deviation, "family", "supplied")}
    return SmoothnessCertificate(kind, lam, mu, witness is None, domain, witness, deviations, flags)


def _smoothness_for(auc, lam, mu, variant, smoothness):
    if smoothness is None:
        smoothness = check_auction_smooth(auc, lam, mu, variant)
    if smoothness.kind != f"auction-{variant}" or smoothness.lam != lam or smoothness.mu != mu:
        raise SmoothnessViolation("smoothness certificate does not match the requested variant and parameters", None)
    if not smoothness.verified:
        raise SmoothnessViolation(f"auction is not ({lam}, {mu})-smooth for {variant}", smoothness.witness)
    return smoothness


def smooth_auction_assignment(auc: BayesianAuction, sigma: StrategyMap, lam, mu, variant: str):
    """alpha = interim utility / lam; beta = (mu/lam) E[X]; gamma = E[u_i(a, b_-i)] / lam.

    ``X`` is welfare (R15) or revenue (ST13) of the equilibrium bids at type
    profile ``v``; gamma is evaluated against the others' bids at ``v``.
    """
    assignment: dict[str, Fraction] = {}
    for i in range(auc.n):
        others = others_actions(auc, sigma, i)
        for t in auc.types(i):
            eq = sum((p * interim_utility(auc, i, t, a, others) for a, p in sigma.dist(i, t)), ZERO)
            assignment[f"alpha[{i},{t}]"] = eq / lam
    for v, pv in auc.type_profiles():
        acts = list(sigma.action_profiles(v))
        if variant == "R15":
            x = sum((p * auc.welfare(A, v) for A, p in acts), ZERO)
        else:
            x = sum((p * auc.revenue(A) for A, p in acts), ZERO)
        assignment[f"beta[{types_name(v)}]"] = mu / lam * x
        for i in range(auc.n):
            for a in auc.actions(i, v[i]):
                u = sum((p * auc.utility(i, v[i], A[:i] + (a,) + A[i + 1:]) for A, p in acts), ZERO)
                assignment[f"gamma[{i},{action_key(a)},{types_name(v)}]"] = u / lam
    return assignment


def smooth_auction_duals(auc: BayesianAuction, sigma: StrategyMap, lam, mu, variant: str = "R15",
                         smoothness: SmoothnessCertificate | None = None) -> DualCertificate:
    lam, mu = as_rational(lam), as_rational(mu)
    if lam <= 0:
        raise ValueError("lambda must be positive")
    _check_variant(variant, mu)
    require_bne(auc, sigma)
    smoothness = _smoothness_for(auc, lam, mu, variant, smoothness)
    bp = bayesian_config_lp(auc)
    assignment = smooth_auction_assignment(auc, sigma, lam, mu, variant)
    residuals, objective, optimum = score(bp, assignment)
    fraction = lam / (1 + mu) if variant == "R15" else lam / mu
    welfare = expected_welfare(auc, sigma)
    details = {"welfare": welfare, "revenue": expected_revenue(auc, sigma), "smoothness": smoothness,
               "welfare_vs_lp": None if optimum is None else welfare >= fraction * optimum}
    return DualCertificate(bp, assignment, residuals, objective, fraction, f"smooth-auction-{variant}",
                           {"lambda": lam, "mu": mu, "variant": variant}, details, optimum)


# --------------------------------------------------------------------------
# Simultaneous item auctions
# --------------------------------------------------------------------------


def feldman_fu_lp(ca: CombinatorialValuationAuction) -> BuiltProgram:
    """Interim relaxation: bundle choices per (player, type), item marginals weighted by the prior."""
    m = ca.m
    bundles = all_bundles(m)
    ca.caps.check("configurations", sum(len(ca.priors[i]) for i in range(ca.n)) * len(bundles))
    lp = LPBuilder("maximize", "feldman-fu-lp")
    index: dict[str, Any] = {}
    for i in range(ca.n):
        for t in ca.types(i):
            for j in range(m):
                name = lp.variable(f"x[{i},{t},{j}]")
                index[name] = ("x", i, t, j)
            for S in bundles:
                name = lp.variable(f"z[{i},{t};{bundle_key(S)}]")
                index[name] = ("z", i, t, S)
                lp.objective(name, ca.priors[i][t] * ca.value(i, t, S))
    for j in range(m):
        row = {f"x[{i},{t},{j}]": ca.priors[i][t] for i in range(ca.n) for t in ca.types(i)}
        lp.constraint(f"beta[{j}]", row, "<=", 1)
    for i in range(ca.n):
        for t in ca.types(i):
            lp.constraint(f"alpha[{i},{t}]", {f"z[{i},{t};{bundle_key(S)}]": 1 for S in bundles}, "<=", 1)
    for i in range(ca.n):
        for t in ca.types(i):
            for j in range(m):
                row: dict[str, object] = {f"z[{i},{t};{bundle_key(S)}]": 1 for S in bundles if j in S}
                row[f"x[{i},{t},{j}]"] = -1
                lp.constraint(f"gamma[{i},{t},{j}]", row, "=", 0)
    return BuiltProgram(lp.build(), index, "feldman-fu", ca)


def expected_thresholds(ca: CombinatorialValuationAuction, sigma: StrategyMap, i: int, others=None) -> list[Fraction]:
    """``E[max_{k != i} b_kj]`` per item under the other players' prior-weighted bids."""
    if others is None:
        others = others_actions(ca, sigma, i)
    out = []
    for j in range(ca.m):
        out.append(sum((p * max((prof[k][j] for k in range(ca.n) if k != i), default=ZERO)
                        for prof, p in others), ZERO))
    return out


def witness_actions(ca: CombinatorialValuationAuction, sigma: StrategyMap) -> dict:
    """Per ``(i, t, S)``, a grid bid ``b`` with ``E[u_i(b, b_-i)] + sum_{j in S} E[theta_ij] >= v(S)/2``.

    Raises :class:`WitnessSearchFailed` naming the first triple without one.
    """
    found = {}
    for i in range(ca.n):
        others = others_actions(ca, sigma, i)
        theta = expected_thresholds(ca, sigma, i, others)
        for t in ca.types(i):
            utilities = [(interim_utility(ca, i, t, b, others), b) for b in ca.actions(i, t)]
            for S in all_bundles(ca.m):
                need = ca.value(i, t, S) / 2 - sum((theta[j] for j in S), ZERO)
                hit = next((b for u, b in utilities if u >= need), None)
                if hit is None:
                    raise WitnessSearchFailed(f"no grid witness for player {i}, type {t}, bundle {sorted(S)}",
                                              (i, t, tuple(sorted(S))))
                found[i, t, S] = hit
    return found


def feldman_fu_assignment(ca: CombinatorialValuationAuction, sigma: StrategyMap) -> dict[str, Fraction]:
    assignment: dict[str, Fraction] = {}
    best = [ZERO] * ca.m
    for i in range(ca.n):
        others = others_actions(ca, sigma, i)
        theta = expected_thresholds(ca, sigma, i, others)
        for j in range(ca.m):
            best[j] = max(best[j], 2 * theta[j])
        for t in ca.types(i):
            f = ca.priors[i][t]
            eq = sum((p * interim_utility(ca, i, t, a, others) for a, p in sigma.dist(i, t)), ZERO)
            assignment[f"alpha[{i},{t}]"] = 2 * f * eq
            for j in range(ca.m):
                assignment[f"gamma[{i},{t},{j}]"] = 2 * f * theta[j]
    for j in range(ca.m):
        assignment[f"beta[{j}]"] = best[j]
    return assignment


def feldman_fu_duals(ca: CombinatorialValuationAuction, sigma: StrategyMap) -> DualCertificate:
    if not ca.is_subadditive():
        raise InvalidInstance("valuations are not sub-additive")
    require_bne(ca, sigma)
    witnesses = witness_actions(ca, sigma)
    bp = feldman_fu_lp(ca)
    assignment = feldman_fu_assignment(ca, sigma)
    residuals, objective, optimum = score(bp, assignment)
    fraction = HALF if ca.mechanism == "first-price" else Fraction(1, 4)
    welfare = expected_welfare(ca, sigma)
    expected_opt = ca.expected_optimum()
    details = {
        "welfare": welfare,
        "expected_optimum": expected_opt,
        "witnesses": len(witnesses),
        "welfare_vs_optimum": welfare >= fraction * expected_opt,
        "dual_vs_welfare": objective <= welfare / fraction,
        "tie_break": "lowest player index",
    }
    if residuals.feasible:
        if optimum < expected_opt:
            raise AssertionError("interim LP optimum below the expected optimum")
        if not details["dual_vs_welfare"]:
            raise AssertionError("dual objective exceeds welfare divided by the certified fraction")
    return DualCertificate(bp, assignment, residuals, objective, fraction, "feldman-fu",
                           {"mechanism": ca.mechanism}, details, optimum)
