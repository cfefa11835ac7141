"""Line-oriented text format for linear programs.

::

    lp <name>
    sense minimize
    var x 0 inf
    var y -inf 3/2
    con c1 >= 3 1 x 2/3 y
    obj 1 x 1 y
    end

Blank lines and lines starting with ``#`` are ignored. Names must not contain
whitespace. ``dumps`` followed by ``loads`` reproduces the program exactly.
"""

from __future__ import annotations

from fractions import Fraction

from ._rational import as_rational
from .errors import MalformedLP, ParseError
from .lp import RELATIONS, SENSES, Constraint, LinearProgram, Variable


def _bound(text: str, infinite: str, line: int, column: int) -> Fraction | None:
    if text == infinite:
        return None
    try:
        return as_rational(text)
    except (ValueError, TypeError, ZeroDivisionError) as exc:
        raise ParseError(f"bad bound {text!r}", line, column) from exc


def _terms(tokens: list[str], line: int, column: int) -> tuple[tuple[str, Fraction], ...]:
    if len(tokens) % 2:
        raise ParseError("coefficient/variable pairs expected", line, column)
    out = []
    for k in range(0, len(tokens), 2):
        try:
            coef = as_rational(tokens[k])
        except (ValueError, TypeError, ZeroDivisionError) as exc:
            raise ParseError(f"bad coefficient {tokens[k]!r}", line, column) from exc
        out.append((tokens[k + 1], coef))
    return tuple(out)


def dumps(lp: LinearProgram) -> str:
    lines = [f"lp {lp.name}", f"sense {lp.sense}"]
    for v in lp.variables:
        lo = "-inf" if v.lower is None else str(v.lower)
        hi = "inf" if v.upper is None else str(v.upper)
        lines.append(f"var {v.name} {lo} {hi}")
    for c in lp.constraints:
        body = " ".join(f"{coef} {name}" for name, coef in c.coefficients)
        lines.append(f"con {c.name} {c.relation} {c.rhs} {body}".rstrip())
    body = " ".join(f"{coef} {name}" for name, coef in lp.objective)
    lines.append(f"obj {body}".rstrip())
    lines.append("end")
    return "\n".join(lines) + "\n"


def loads(text: str) -> LinearProgram:
    name = None
    sense = None
    variables: list[Variable] = []
    constraints: list[Constraint] = []
    objective: tuple = ()
    finished = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        column = raw.index(stripped[0]) + 1
        if finished:
            raise ParseError("content after 'end'", lineno, column)
        tokens = stripped.split()
        head = tokens[0]
        if head == "lp":
            if len(tokens) != 2:
                raise ParseError("expected 'lp <name>'", lineno, column)
            name = tokens[1]
        elif head == "sense":
            if len(tokens) != 2 or tokens[1] not in SENSES:
                raise ParseError("expected 'sense minimize|maximize'", lineno, column)
            sense = tokens[1]
        elif head == "var":
            if len(tokens) != 4:
                raise ParseError("expected 'var <name> <lower> <upper>'", lineno, column)
            variables.append(
                Variable(tokens[1], _bound(tokens[2], "-inf", lineno, column), _bound(tokens[3], "inf", lineno, column))
            )
        elif head == "con":
            if len(tokens) < 4 or tokens[2] not in RELATIONS:
                raise ParseError("expected 'con <name> <rel> <rhs> [<coef> <var>]...'", lineno, column)
            rhs = _bound(tokens[3], "", lineno, column)
            constraints.append(Constraint(tokens[1], _terms(tokens[4:], lineno, column), tokens[2], rhs))
        elif head == "obj":
            objective = _terms(tokens[1:], lineno, column)
        elif head == "end":
            finished = True
        else:
            raise ParseError(f"unknown directive {head!r}", lineno, column)
    if name is None or sense is None:
        raise ParseError("missing 'lp' or 'sense' line")
    if not finished:
        raise ParseError("missing 'end'")
    try:
        return LinearProgram(sense, tuple(variables), tuple(constraints), objective, name)
    except MalformedLP as exc:
        raise ParseError(str(exc)) from exc
