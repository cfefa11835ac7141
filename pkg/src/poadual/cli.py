"""Command-line front end.

``poadual ANALYSIS --instance FILE [options]`` loads an instance, runs one
analysis and prints a report. JSON reports are key-sorted with every rational
rendered as ``p/q``, so repeating a request reproduces the output byte for byte.

Exit codes: 0 ok, 2 parse or usage error, 3 cap exceeded, 4 infeasible
certificate, 5 smoothness witness found, 1 any other failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from fractions import Fraction
from typing import Any

from . import __version__
from ._rational import as_rational
from .auctions import (
    CombinatorialValuationAuction,
    check_auction_smooth,
    check_bne,
    expected_welfare,
    feldman_fu_duals,
    find_pure_bne,
    no_envy_theorem_check,
    no_envy_trace,
    smooth_auction_duals,
)
from .caps import DEFAULT_CAPS, Caps
from .certificates import (
    DualCertificate,
    atomic_duals,
    augmentation_certificate,
    certified_poa_bound,
    nonatomic_duals,
    smooth_duals,
    splittable_duals,
)
from .congestion import AtomicGame, NonAtomicGame, SplittableGame
from .equilibria import marginal_equilibria, pure_nash_all, wardrop_equilibrium, worst_cce
from .errors import (
    CapExceeded,
    InfeasibleCertificate,
    InvalidInstance,
    ParseError,
    PoaError,
    SmoothnessViolation,
    WitnessSearchFailed,
)
from .instances import load
from .smoothness import (
    check_dual_smooth,
    check_game_smooth,
    check_resource_smooth,
    pigou_bound,
    robust_poa_search,
)

EXIT_OK, EXIT_ERROR, EXIT_PARSE, EXIT_CAP, EXIT_INFEASIBLE, EXIT_WITNESS = 0, 1, 2, 3, 4, 5

ANALYSES = ("poa", "certify", "smoothness", "pigou", "augment", "auction-certify", "no-envy")

# Parameters each analysis accepts, beyond the common ones.
ALLOWED = {
    "poa": {"epsilon"},
    "certify": {"lam", "mu", "epsilon"},
    "smoothness": {"lam", "mu", "grid", "kind", "variant", "epsilon"},
    "pigou": {"grid", "epsilon"},
    "augment": {"r", "epsilon"},
    "auction-certify": {"lam", "mu", "variant"},
    "no-envy": {"horizon", "seed", "r", "trace_out"},
}
KINDS_FOR = {
    "poa": ("atomic", "nonatomic", "splittable", "auction"),
    "certify": ("atomic", "nonatomic", "splittable"),
    "smoothness": ("atomic", "nonatomic", "splittable", "auction"),
    "pigou": ("atomic", "nonatomic", "splittable"),
    "augment": ("nonatomic",),
    "auction-certify": ("auction",),
    "no-envy": ("auction",),
}
PARAM_FLAGS = {"lam": "--lambda", "mu": "--mu", "r": "--r", "epsilon": "--epsilon", "horizon": "--horizon",
               "seed": "--seed", "grid": "--grid", "kind": "--kind", "variant": "--variant",
               "trace_out": "--trace-out"}

DEFAULT_PIGOU_GRID = "0:1/64:2"


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# Serialisation
# --------------------------------------------------------------------------


def plain(value: Any) -> Any:
    """JSON-ready copy: rationals as strings, sets sorted, tuples as lists."""
    if isinstance(value, bool) or value is None or isinstance(value, (str, int)):
        return value
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, dict):
        return {_key(k): plain(v) for k, v in value.items()}
    if isinstance(value, (frozenset, set)):
        return sorted(plain(v) for v in value)
    if isinstance(value, (list, tuple)):
        return [plain(v) for v in value]
    if dataclasses.is_dataclass(value):
        return {f.name: plain(getattr(value, f.name)) for f in dataclasses.fields(value)}
    return str(value)


def _key(k: Any) -> str:
    if isinstance(k, str):
        return k
    if isinstance(k, (tuple, list)):
        return ",".join(_key(x) for x in k)
    if isinstance(k, frozenset):
        return "{" + ",".join(sorted(_key(x) for x in k)) + "}"
    return str(k)


def ratio(num: Fraction, den: Fraction) -> dict:
    """A ratio together with the rationals it came from."""
    value = None if den == 0 else num / den
    return {"value": value, "numerator": num, "denominator": den}


def certificate_summary(cert: DualCertificate) -> dict:
    out = {
        "recipe": cert.recipe,
        "feasible": cert.feasible,
        "dual_objective": cert.dual_objective,
        "lp_optimum": cert.lp_optimum,
        "certified_ratio": cert.certified_ratio,
        "params": {k: v for k, v in cert.params.items()},
        "details": {k: v for k, v in cert.details.items() if k != "smoothness"},
        "assignment": dict(sorted(cert.assignment.items())),
    }
    if not cert.feasible:
        out["violated_constraint"] = cert.residuals.worst
        out["violation"] = cert.residuals.worst_violation
    return out


def smoothness_summary(cert) -> dict:
    return {
        "kind": cert.kind,
        "lambda": cert.lam,
        "mu": cert.mu,
        "verified": cert.verified,
        "ratio": cert.ratio if cert.verified else None,
        "domain": cert.domain,
        "witness": cert.witness,
        "flags": list(cert.flags),
    }


def emit_json(report: dict) -> str:
    return json.dumps(plain(report), sort_keys=True, indent=2) + "\n"


def _text_lines(value: Any, prefix: str = "") -> list[str]:
    if isinstance(value, dict):
        lines = []
        for k in sorted(value):
            lines.extend(_text_lines(value[k], f"{prefix}.{k}" if prefix else k))
        return lines
    if isinstance(value, list) and any(isinstance(v, (dict, list)) for v in value):
        lines = []
        for n, v in enumerate(value):
            lines.extend(_text_lines(v, f"{prefix}[{n}]"))
        return lines
    return [f"{prefix}: {json.dumps(value) if isinstance(value, list) else value}"]


def emit_text(report: dict) -> str:
    data = plain(report)
    head = [f"analysis {data['analysis']} on {data['instance']['kind']} instance {data['instance']['digest'][:12]}",
            f"status: {data['status']}"]
    cert_lines = []
    for line in _text_lines(data["results"]):
        if "violated_constraint" in line:
            cert_lines.append(f"VIOLATED {line}")
    body = [line for line in _text_lines(data["results"]) if ".assignment." not in line]
    return "\n".join(head + cert_lines + body) + "\n"


# --------------------------------------------------------------------------
# Analyses
# --------------------------------------------------------------------------


def parse_grid(text: str) -> list[Fraction]:
    """``"0,1/2,1"`` lists points; ``"start:step:stop"`` is an inclusive range."""
    try:
        if ":" in text:
            start, step, stop = (as_rational(x) for x in text.split(":"))
            if step <= 0:
                raise UsageError("grid step must be positive")
            count = int((stop - start) / step)
            return [start + k * step for k in range(count + 1)]
        return [as_rational(x) for x in text.split(",") if x.strip()]
    except (ValueError, TypeError, ZeroDivisionError) as exc:
        raise UsageError(f"bad --grid value {text!r}: {exc}") from None


def _atomic_poa(g: AtomicGame) -> dict:
    opt, opt_profile = g.optimum()
    out: dict[str, Any] = {"optimum": opt, "optimal_profile": opt_profile}
    nash = pure_nash_all(g)
    out["pure_nash"] = {"count": len(nash), "costs": sorted(r.cost for r in nash)}
    if nash:
        out["pure_nash"]["empirical_poa"] = ratio(max(r.cost for r in nash), opt)
    cce = worst_cce(g)
    out["worst_cce"] = {"cost": cce.cost, "support": [{"profile": s, "probability": p} for s, p in cce.witness.support],
                        "empirical_poa": ratio(cce.cost, opt)}
    return out


def _nonatomic_poa(g: NonAtomicGame) -> dict:
    opt, opt_flow = g.optimum()
    eq = wardrop_equilibrium(g)
    return {"optimum": opt, "optimal_flow": opt_flow, "epsilon": g.epsilon,
            "wardrop": {"flow": eq.witness, "cost": eq.cost, "slack": eq.deviation_slack, "delta": eq.details["delta"]},
            "empirical_poa": ratio(eq.cost, opt)}


def _splittable_poa(g: SplittableGame) -> dict:
    opt, opt_profile = g.optimum()
    out: dict[str, Any] = {"optimum": opt, "optimal_profile": opt_profile, "epsilon": g.epsilon}
    eqs = marginal_equilibria(g)
    out["marginal_equilibria"] = {"count": len(eqs), "costs": sorted(r.cost for r in eqs)}
    if eqs:
        out["marginal_equilibria"]["empirical_poa"] = ratio(max(r.cost for r in eqs), opt)
    cce = worst_cce(g)
    out["worst_cce"] = {"cost": cce.cost, "empirical_poa": ratio(cce.cost, opt)}
    return out


def _auction_poa(ca: CombinatorialValuationAuction) -> dict:
    opt = ca.expected_optimum()
    sigma, how = find_pure_bne(ca)
    out: dict[str, Any] = {"expected_optimum": opt, "bne_search": how, "tie_break": "lowest player index"}
    if sigma is not None:
        w = expected_welfare(ca, sigma)
        out["bne"] = {"strategy": sigma.maps, "welfare": w, "welfare_fraction": ratio(w, opt)}
    return out


def run_poa(model, params) -> tuple[dict, int]:
    if isinstance(model, AtomicGame):
        return _atomic_poa(model), EXIT_OK
    if isinstance(model, NonAtomicGame):
        return _nonatomic_poa(model), EXIT_OK
    if isinstance(model, SplittableGame):
        return _splittable_poa(model), EXIT_OK
    return _auction_poa(model), EXIT_OK


def run_certify(model, params) -> tuple[dict, int]:
    lam, mu = params.get("lam"), params.get("mu")
    certs = {}
    if isinstance(model, AtomicGame):
        eq = worst_cce(model)
        certs["profile_lp"] = smooth_duals(model, eq.witness, lam, mu)
        certs["resource_lp"] = atomic_duals(model, eq.witness, lam, mu)
        eq_cost = eq.cost
    elif isinstance(model, NonAtomicGame):
        eq = wardrop_equilibrium(model)
        certs["nonatomic_lp"] = nonatomic_duals(model, eq)
        eq_cost = eq.cost
    else:
        eq = worst_cce(model)
        certs["splittable_lp_cce"] = splittable_duals(model, eq.witness, lam, mu)
        marginal = marginal_equilibria(model)
        if marginal:
            worst = max(marginal, key=lambda r: r.cost)
            certs["splittable_lp_marginal"] = splittable_duals(model, worst.witness, lam, mu)
        eq_cost = eq.cost
    results: dict[str, Any] = {"equilibrium_cost": eq_cost, "certificates": {}}
    status = EXIT_OK
    for name, cert in certs.items():
        summary = certificate_summary(cert)
        if cert.feasible:
            try:
                summary["bound"] = certified_poa_bound(cert, cert.details["equilibrium_cost"])
            except InfeasibleCertificate as exc:
                summary["bound"] = None
                summary["bound_note"] = str(exc)
        else:
            status = EXIT_INFEASIBLE
        results["certificates"][name] = summary
    return results, status


def run_smoothness(model, params) -> tuple[dict, int]:
    lam, mu = params.get("lam"), params.get("mu")
    given = lam is not None and mu is not None
    if isinstance(model, CombinatorialValuationAuction):
        variant = params.get("variant") or "R15"
        cert = check_auction_smooth(model, lam if lam is not None else 1, mu if mu is not None else 1, variant)
        return {"smoothness": smoothness_summary(cert), "deviations": cert.deviations}, (
            EXIT_OK if cert.verified else EXIT_WITNESS)
    default_kind = {AtomicGame: "game", NonAtomicGame: "resource", SplittableGame: "dual-smooth"}[type(model)]
    kind = params.get("kind") or default_kind
    costs = [model.costs[e] for e in model.resources]
    if kind == "game":
        if not isinstance(model, AtomicGame):
            raise UsageError("game smoothness needs an atomic instance")
        cert = check_game_smooth(model, lam, mu) if given else robust_poa_search(model, "game")
        certs = [cert]
    else:
        if params.get("grid") is not None:
            grid = params["grid"]
        elif isinstance(model, AtomicGame):
            grid = sorted({Fraction(0)} | {p.weight for p in model.players})
        else:
            grid = [k * model.epsilon for k in range(model.max_units + 1)]
        if given:
            check = check_resource_smooth if kind == "resource" else check_dual_smooth
            certs = [check(c, lam, mu, model.n, grid, caps=model.caps) for c in costs]
        else:
            certs = [robust_poa_search(costs, kind, n=model.n, grid=grid, caps=model.caps)]
    results = {"smoothness": [smoothness_summary(c) for c in certs]}
    ok = all(c.verified for c in certs)
    return results, EXIT_OK if ok else EXIT_WITNESS


def run_pigou(model, params) -> tuple[dict, int]:
    grid = params.get("grid") or parse_grid(DEFAULT_PIGOU_GRID)
    res = pigou_bound([model.costs[e] for e in model.resources], grid)
    return {"pigou_bound": res.value, "at_u": res.u, "at_v": res.v, "empty": res.empty,
            "grid": {"points": len(grid), "min": min(grid), "max": max(grid)}}, EXIT_OK


def run_augment(model, params) -> tuple[dict, int]:
    r = params.get("r") if params.get("r") is not None else Fraction(1)
    eq = wardrop_equilibrium(model)
    cert = augmentation_certificate(model, r, eq)
    return {"r": r, "equilibrium_cost": eq.cost, "augmented_optimum": cert.details["augmented_opt"],
            "certificate": certificate_summary(cert)}, EXIT_OK if cert.feasible else EXIT_INFEASIBLE


def run_auction_certify(model, params) -> tuple[dict, int]:
    sigma, how = find_pure_bne(model)
    if sigma is None:
        raise PoaError(f"no pure Bayes-Nash equilibrium found ({how})")
    bne = check_bne(model, sigma)
    results: dict[str, Any] = {"bne": {"strategy": sigma.maps, "search": how, "worst_gain": bne.gain},
                               "expected_optimum": model.expected_optimum(),
                               "tie_break": "lowest player index"}
    status = EXIT_OK
    lam, mu = params.get("lam"), params.get("mu")
    if lam is not None or mu is not None:
        variant = params.get("variant") or "R15"
        try:
            cert = smooth_auction_duals(model, sigma, lam if lam is not None else 1, mu if mu is not None else 1,
                                        variant)
        except SmoothnessViolation as exc:
            results["smooth"] = {"error": str(exc), "witness": exc.witness}
            status = EXIT_WITNESS
        else:
            results["smooth"] = certificate_summary(cert)
            if not cert.feasible:
                status = EXIT_INFEASIBLE
    if model.is_subadditive():
        cert = feldman_fu_duals(model, sigma)
        results["feldman_fu"] = certificate_summary(cert)
        if not cert.feasible:
            status = EXIT_INFEASIBLE
    return results, status


def run_no_envy(model, params) -> tuple[dict, int]:
    horizon = params.get("horizon") or 1000
    seed = params.get("seed") if params.get("seed") is not None else 0
    r = params.get("r") if params.get("r") is not None else Fraction(1)
    trace = no_envy_trace(model, horizon, seed)
    trace.validate()
    check = no_envy_theorem_check(trace, r)
    if params.get("trace_out"):
        with open(params["trace_out"], "w", encoding="utf-8") as fh:
            fh.write("\n".join(trace.to_lines()) + "\n")
    return {"horizon": horizon, "seed": seed, "r": r, "average_welfare": check.average_welfare,
            "optimum": check.optimum, "envy_rates": check.envy, "theorem_bound": check.bound,
            "theorem_holds": check.holds}, EXIT_OK


RUNNERS = {
    "poa": run_poa,
    "certify": run_certify,
    "smoothness": run_smoothness,
    "pigou": run_pigou,
    "augment": run_augment,
    "auction-certify": run_auction_certify,
    "no-envy": run_no_envy,
}


# --------------------------------------------------------------------------
# Entry point
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="poadual", description="Price-of-anarchy bounds from LP duality certificates.")
    p.add_argument("analysis_pos", nargs="?", choices=ANALYSES, metavar="ANALYSIS",
                   help="one of: " + ", ".join(ANALYSES))
    p.add_argument("--analysis", choices=ANALYSES)
    p.add_argument("--instance", required=True, help="JSON instance file")
    p.add_argument("--lambda", dest="lam")
    p.add_argument("--mu")
    p.add_argument("--r")
    p.add_argument("--epsilon")
    p.add_argument("--horizon", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--grid", help="'a,b,c' or 'start:step:stop'")
    p.add_argument("--kind", choices=("game", "resource", "dual-smooth"))
    p.add_argument("--variant", choices=("R15", "ST13"))
    p.add_argument("--cap-profiles", type=int)
    p.add_argument("--format", choices=("json", "text"), default="json")
    p.add_argument("--out")
    p.add_argument("--trace-out")
    p.add_argument("--timing", action="store_true", help="include wall-clock time (breaks byte-identical output)")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def _params(args) -> dict:
    params: dict[str, Any] = {}
    for name in PARAM_FLAGS:
        value = getattr(args, name)
        if value is None:
            continue
        if name in ("lam", "mu", "r", "epsilon"):
            try:
                value = as_rational(value)
            except (ValueError, TypeError, ZeroDivisionError):
                raise UsageError(f"{PARAM_FLAGS[name]} must be an exact rational, got {value!r}") from None
        elif name == "grid":
            value = parse_grid(value)
        params[name] = value
    return params


def run(argv=None) -> tuple[int, str]:
    """Execute one request; returns ``(exit code, rendered report or message)``."""
    parser = build_parser()
    args = parser.parse_args(argv)
    analysis = args.analysis or args.analysis_pos
    if analysis is None or (args.analysis and args.analysis_pos and args.analysis != args.analysis_pos):
        raise UsageError("give exactly one analysis")
    params = _params(args)
    extra = sorted(set(params) - ALLOWED[analysis])
    if extra:
        raise UsageError(f"{analysis} does not take {', '.join(PARAM_FLAGS[k] for k in extra)}")
    if ("lam" in params) != ("mu" in params) and analysis != "auction-certify":
        raise UsageError("--lambda and --mu go together")
    if params.get("horizon") is not None and params["horizon"] < 1:
        raise UsageError("--horizon must be at least 1")
    caps = DEFAULT_CAPS
    if args.cap_profiles is not None:
        caps = dataclasses.replace(caps, profiles=args.cap_profiles)
    inst = load(args.instance, caps, params.get("epsilon"))
    if inst.kind not in KINDS_FOR[analysis]:
        raise UsageError(f"{analysis} does not apply to {inst.kind} instances")
    started = time.perf_counter()
    results, status = RUNNERS[analysis](inst.model, params)
    report = {
        "analysis": analysis,
        "instance": {"digest": inst.digest, "kind": inst.kind, "name": inst.name},
        "parameters": params,
        "caps": caps.as_dict(),
        "results": results,
        "status": {EXIT_OK: "ok", EXIT_INFEASIBLE: "infeasible-certificate", EXIT_WITNESS: "witness-found"}[status],
        "version": __version__,
    }
    if args.timing:
        report["timing"] = {"seconds": round(time.perf_counter() - started, 6)}
    text = emit_json(report) if args.format == "json" else emit_text(report)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        return status, ""
    return status, text


def main(argv=None) -> int:
    try:
        code, text = run(argv)
    except UsageError as exc:
        print(f"poadual: usage error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ParseError as exc:
        where = f" at line {exc.line}, column {exc.column}" if exc.line is not None else ""
        print(f"poadual: parse error{where}: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (InvalidInstance, FileNotFoundError, IsADirectoryError) as exc:
        print(f"poadual: invalid instance: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except CapExceeded as exc:
        print(f"poadual: cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (InfeasibleCertificate, WitnessSearchFailed) as exc:
        print(f"poadual: certificate failed: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except SmoothnessViolation as exc:
        print(f"poadual: smoothness witness: {exc} {plain(exc.witness)}", file=sys.stderr)
        return EXIT_WITNESS
    except PoaError as exc:
        print(f"poadual: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if text:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
