"""Exact-rational linear programming.

Every coefficient is a :class:`fractions.Fraction`. The solver is a dense
two-phase tableau simplex with Bland's rule, so it terminates on degenerate
programs and gives the same answer on every run.

Dual conventions (``dual_of`` and the dual assignment returned by ``solve``
agree on them):

* minimisation: a ``>=`` row has a dual variable ``>= 0``, ``<=`` gives ``<= 0``,
  ``=`` gives a free one; a column ``x >= 0`` yields a dual row ``<= c``.
* maximisation: ``<=`` rows give ``>= 0`` duals, ``>=`` rows ``<= 0``;
  a column ``x >= 0`` yields a dual row ``>= c``.

Dual variables carry the names of the primal rows, dual rows carry the names of
the primal variables. Variable bounds other than a sign restriction become
explicit rows named ``<var>:lb`` / ``<var>:ub``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

from ._rational import as_rational
from .errors import MalformedLP, MissingVariable, NumericOverflow

ZERO = Fraction(0)
ONE = Fraction(1)

RELATIONS = ("<=", "=", ">=")
SENSES = ("minimize", "maximize")

# Bit length past which a numerator or denominator counts as runaway growth.
MAX_BITS = 1 << 16


@dataclass(frozen=True)
class Variable:
    name: str
    lower: Fraction | None = ZERO
    upper: Fraction | None = None


@dataclass(frozen=True)
class Constraint:
    name: str
    coefficients: tuple[tuple[str, Fraction], ...]
    relation: str
    rhs: Fraction

    @property
    def row(self) -> dict[str, Fraction]:
        return dict(self.coefficients)


def _row(coefficients: Mapping[str, object] | Iterable[tuple[str, object]]) -> tuple[tuple[str, Fraction], ...]:
    items = coefficients.items() if isinstance(coefficients, Mapping) else coefficients
    merged: dict[str, Fraction] = {}
    for name, value in items:
        merged[name] = merged.get(name, ZERO) + as_rational(value)
    return tuple((name, value) for name, value in merged.items() if value != 0)


@dataclass(frozen=True)
class LinearProgram:
    sense: str
    variables: tuple[Variable, ...]
    constraints: tuple[Constraint, ...]
    objective: tuple[tuple[str, Fraction], ...]
    name: str = "lp"

    def __post_init__(self):
        if self.sense not in SENSES:
            raise MalformedLP(f"unknown sense {self.sense!r}")
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise MalformedLP("duplicate variable name")
        declared = set(names)
        for name in names:
            if not name or any(ch.isspace() for ch in name):
                raise MalformedLP(f"variable name {name!r} must be non-empty without whitespace")
        seen: set[str] = set()
        for con in self.constraints:
            if con.name in seen:
                raise MalformedLP(f"duplicate constraint name {con.name!r}")
            if not con.name or any(ch.isspace() for ch in con.name):
                raise MalformedLP(f"constraint name {con.name!r} must be non-empty without whitespace")
            seen.add(con.name)
            if con.relation not in RELATIONS:
                raise MalformedLP(f"constraint {con.name!r}: unknown relation {con.relation!r}")
            for var, _ in con.coefficients:
                if var not in declared:
                    raise MalformedLP(f"constraint {con.name!r} references undeclared variable {var!r}")
        for var, _ in self.objective:
            if var not in declared:
                raise MalformedLP(f"objective references undeclared variable {var!r}")
        for v in self.variables:
            if v.lower is not None and v.upper is not None and v.lower > v.upper:
                raise MalformedLP(f"variable {v.name!r} has lower bound above upper bound")

    @classmethod
    def build(
        cls,
        sense: str,
        variables: Iterable[Variable | str],
        constraints: Iterable[tuple[str, Mapping[str, object], str, object]],
        objective: Mapping[str, object],
        name: str = "lp",
    ) -> "LinearProgram":
        """Convenience constructor taking plain mappings and ``(name, row, rel, rhs)`` tuples."""
        vs = tuple(Variable(v) if isinstance(v, str) else v for v in variables)
        cs = tuple(Constraint(n, _row(row), rel, as_rational(rhs)) for n, row, rel, rhs in constraints)
        return cls(sense, vs, cs, _row(objective), name)

    @property
    def variable_names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    def objective_value(self, assignment: Mapping[str, Fraction]) -> Fraction:
        return sum((c * assignment[v] for v, c in self.objective), ZERO)

    def constraint(self, name: str) -> Constraint:
        for con in self.constraints:
            if con.name == name:
                return con
        raise KeyError(name)


class LPBuilder:
    """Mutable helper for assembling a :class:`LinearProgram` row by row."""

    def __init__(self, sense: str, name: str = "lp"):
        self.sense = sense
        self.name = name
        self._variables: dict[str, Variable] = {}
        self._constraints: list[Constraint] = []
        self._objective: dict[str, Fraction] = {}

    def variable(self, name: str, lower: object | None = ZERO, upper: object | None = None) -> str:
        if name in self._variables:
            raise MalformedLP(f"duplicate variable name {name!r}")
        lo = None if lower is None else as_rational(lower)
        hi = None if upper is None else as_rational(upper)
        self._variables[name] = Variable(name, lo, hi)
        return name

    def constraint(self, name: str, row: Mapping[str, object], relation: str, rhs: object) -> None:
        self._constraints.append(Constraint(name, _row(row), relation, as_rational(rhs)))

    def objective(self, name: str, coefficient: object) -> None:
        self._objective[name] = self._objective.get(name, ZERO) + as_rational(coefficient)

    def build(self) -> LinearProgram:
        return LinearProgram(
            self.sense,
            tuple(self._variables.values()),
            tuple(self._constraints),
            _row(self._objective),
            self.name,
        )


@dataclass(frozen=True)
class SolveResult:
    status: str  # optimal | infeasible | unbounded
    primal: dict[str, Fraction] = field(default_factory=dict)
    dual: dict[str, Fraction] = field(default_factory=dict)
    objective: Fraction | None = None


@dataclass(frozen=True)
class ResidualReport:
    slack: dict[str, Fraction]
    worst_violation: Fraction
    worst: str | None
    feasible: bool

    def violated(self) -> list[str]:
        return sorted(name for name, s in self.slack.items() if s < 0)


# --------------------------------------------------------------------------
# Normalisation: every variable becomes >= 0, <= 0 or free; other bounds turn
# into rows. Both ``solve`` and ``dual_of`` work on this form.
# --------------------------------------------------------------------------


def _sign_class(v: Variable) -> str:
    if v.lower == 0:
        return "nonneg"
    if v.lower is None and v.upper == 0:
        return "nonpos"
    return "free"


def _normalize(lp: LinearProgram) -> tuple[dict[str, str], list[Constraint]]:
    signs: dict[str, str] = {}
    rows = list(lp.constraints)
    taken = {c.name for c in rows}
    for v in lp.variables:
        cls = _sign_class(v)
        signs[v.name] = cls
        extra = []
        if cls == "nonneg" and v.upper is not None:
            extra.append(Constraint(f"{v.name}:ub", ((v.name, ONE),), "<=", v.upper))
        elif cls == "free":
            if v.lower is not None:
                extra.append(Constraint(f"{v.name}:lb", ((v.name, ONE),), ">=", v.lower))
            if v.upper is not None:
                extra.append(Constraint(f"{v.name}:ub", ((v.name, ONE),), "<=", v.upper))
        for con in extra:
            if con.name in taken:
                raise MalformedLP(f"bound row name {con.name!r} clashes with a constraint")
            taken.add(con.name)
            rows.append(con)
    return signs, rows


def dual_of(lp: LinearProgram) -> LinearProgram:
    """Mechanical LP dual. ``dual_of(dual_of(lp))`` reproduces ``lp`` up to bounds-as-rows."""
    signs, rows = _normalize(lp)
    minimize = lp.sense == "minimize"
    dual_vars = []
    for con in rows:
        if con.relation == "=":
            dual_vars.append(Variable(con.name, None, None))
        elif (con.relation == ">=") == minimize:
            dual_vars.append(Variable(con.name, ZERO, None))
        else:
            dual_vars.append(Variable(con.name, None, ZERO))
    cost = dict(lp.objective)
    columns: dict[str, list[tuple[str, Fraction]]] = {v.name: [] for v in lp.variables}
    for con in rows:
        for var, coef in con.coefficients:
            columns[var].append((con.name, coef))
    dual_rows = []
    for v in lp.variables:
        cls = signs[v.name]
        if cls == "free":
            rel = "="
        elif (cls == "nonneg") == minimize:
            rel = "<="
        else:
            rel = ">="
        dual_rows.append(Constraint(v.name, _row(columns[v.name]), rel, cost.get(v.name, ZERO)))
    objective = _row((con.name, con.rhs) for con in rows)
    return LinearProgram(
        "maximize" if minimize else "minimize",
        tuple(dual_vars),
        tuple(dual_rows),
        objective,
        f"dual({lp.name})",
    )


# --------------------------------------------------------------------------
# Residuals
# --------------------------------------------------------------------------


def feasibility_residuals(lp: LinearProgram, candidate: Mapping[str, object]) -> ResidualReport:
    """Exact slack of every row and bound under ``candidate``.

    Slack is ``rhs - lhs`` for ``<=`` rows, ``lhs - rhs`` for ``>=`` rows and
    ``-|lhs - rhs|`` for equalities, so a row is satisfied iff its slack is
    non-negative. Bounds are reported as ``<var>:lb`` / ``<var>:ub``.
    """
    values: dict[str, Fraction] = {}
    for v in lp.variables:
        if v.name not in candidate:
            raise MissingVariable(v.name)
        values[v.name] = as_rational(candidate[v.name])
    slack: dict[str, Fraction] = {}
    for con in lp.constraints:
        lhs = sum((c * values[var] for var, c in con.coefficients), ZERO)
        if con.relation == "<=":
            slack[con.name] = con.rhs - lhs
        elif con.relation == ">=":
            slack[con.name] = lhs - con.rhs
        else:
            slack[con.name] = -abs(lhs - con.rhs)
    for v in lp.variables:
        if v.lower is not None:
            slack[f"{v.name}:lb"] = values[v.name] - v.lower
        if v.upper is not None:
            slack[f"{v.name}:ub"] = v.upper - values[v.name]
    worst_name = None
    worst = ZERO
    for name in sorted(slack):
        if -slack[name] > worst:
            worst, worst_name = -slack[name], name
    return ResidualReport(slack, worst, worst_name, worst == 0)


# --------------------------------------------------------------------------
# Simplex
# --------------------------------------------------------------------------


def _check_size(x: Fraction) -> None:
    if x.numerator.bit_length() > MAX_BITS or x.denominator.bit_length() > MAX_BITS:
        raise NumericOverflow("rational coefficient exceeded the size limit during pivoting")


class _Tableau:
    """Dense tableau ``rows[r] = [a_r0, ..., a_r(n-1), b_r]`` with basis tracking."""

    def __init__(self, rows: list[list[Fraction]], basis: list[int]):
        self.rows = rows
        self.basis = basis

    def pivot(self, r: int, c: int) -> None:
        rows = self.rows
        prow = rows[r]
        p = prow[c]
        _check_size(p)
        if p != 1:
            prow = [x / p for x in prow]
            rows[r] = prow
        nz = [k for k, x in enumerate(prow) if x]
        for i, row in enumerate(rows):
            if i == r:
                continue
            f = row[c]
            if f:
                for k in nz:
                    row[k] -= f * prow[k]
        self.basis[r] = c

    def run(self, cost: list[Fraction], allowed: int) -> str:
        """Minimise ``cost`` over columns ``< allowed`` using Bland's rule."""
        rows = self.rows
        while True:
            # reduced costs: c_j - c_B B^-1 A_j, with the tableau already holding B^-1 A
            cb = [cost[b] for b in self.basis]
            entering = -1
            for j in range(allowed):
                rc = cost[j]
                for i, row in enumerate(rows):
                    if cb[i] and row[j]:
                        rc -= cb[i] * row[j]
                if rc < 0:
                    entering = j
                    break
            if entering < 0:
                return "optimal"
            leave = -1
            best = None
            for i, row in enumerate(rows):
                a = row[entering]
                if a > 0:
                    ratio = row[-1] / a
                    if best is None or ratio < best or (ratio == best and self.basis[i] < self.basis[leave]):
                        best, leave = ratio, i
            if leave < 0:
                return "unbounded"
            self.pivot(leave, entering)


def _solve_linear_system(matrix: list[list[Fraction]], rhs: list[Fraction]) -> list[Fraction]:
    """Solve ``matrix @ y = rhs`` exactly (matrix square and non-singular)."""
    n = len(matrix)
    aug = [list(matrix[i]) + [rhs[i]] for i in range(n)]
    for col in range(n):
        piv = next(r for r in range(col, n) if aug[r][col] != 0)
        aug[col], aug[piv] = aug[piv], aug[col]
        p = aug[col][col]
        aug[col] = [x / p for x in aug[col]]
        for r in range(n):
            if r != col and aug[r][col]:
                f = aug[r][col]
                aug[r] = [a - f * b for a, b in zip(aug[r], aug[col])]
    return [aug[i][n] for i in range(n)]


def solve(lp: LinearProgram) -> SolveResult:
    """Solve ``lp`` exactly.

    Returns primal values for the declared variables and dual values for every
    row of the normalised program (declared constraints plus bound rows), in the
    sign conventions of :func:`dual_of`.
    """
    signs, rows = _normalize(lp)
    minimize = lp.sense == "minimize"

    # structural columns in lexicographic variable-name order
    columns: list[tuple[str, int]] = []  # (variable, sign multiplier)
    for name in sorted(signs):
        cls = signs[name]
        if cls == "nonneg":
            columns.append((name, 1))
        elif cls == "nonpos":
            columns.append((name, -1))
        else:
            columns.append((name, 1))
            columns.append((name, -1))
    col_of: dict[str, list[tuple[int, int]]] = {}
    for idx, (name, sign) in enumerate(columns):
        col_of.setdefault(name, []).append((idx, sign))
    n_struct = len(columns)
    m = len(rows)

    n_slack = sum(1 for con in rows if con.relation != "=")
    n_cols = n_struct + n_slack + m  # structural, slack, artificial
    art0 = n_struct + n_slack

    A: list[list[Fraction]] = []
    row_flip: list[int] = []
    basis: list[int] = []
    slack_idx = n_struct
    for r, con in enumerate(rows):
        row = [ZERO] * (n_cols + 1)
        for var, coef in con.coefficients:
            for idx, sign in col_of[var]:
                row[idx] += coef * sign
        if con.relation == "<=":
            row[slack_idx] = ONE
            slack_idx += 1
        elif con.relation == ">=":
            row[slack_idx] = -ONE
            slack_idx += 1
        row[-1] = con.rhs
        flip = 1
        if row[-1] < 0:
            row = [-x for x in row]
            flip = -1
        row[art0 + r] = ONE
        A.append(row)
        row_flip.append(flip)
        basis.append(art0 + r)

    original = [list(row) for row in A]
    tab = _Tableau(A, basis)

    # phase 1: drive the artificial columns to zero
    phase1 = [ZERO] * n_cols
    for r in range(m):
        phase1[art0 + r] = ONE
    tab.run(phase1, n_cols)
    infeas = sum((tab.rows[i][-1] for i, b in enumerate(tab.basis) if b >= art0), ZERO)
    if infeas > 0:
        return SolveResult("infeasible")

    # pivot remaining (zero-level) artificials out; drop rows that are redundant
    alive = list(range(m))
    i = 0
    while i < len(tab.rows):
        if tab.basis[i] >= art0:
            row = tab.rows[i]
            j = next((j for j in range(art0) if row[j] != 0), None)
            if j is None:
                del tab.rows[i]
                del tab.basis[i]
                del alive[i]
                continue
            tab.pivot(i, j)
        i += 1

    cost = [ZERO] * n_cols
    obj = dict(lp.objective)
    for idx, (name, sign) in enumerate(columns):
        c = obj.get(name, ZERO) * sign
        cost[idx] = c if minimize else -c
    status = tab.run(cost, art0)
    if status == "unbounded":
        return SolveResult("unbounded")

    x = [ZERO] * n_cols
    for i, b in enumerate(tab.basis):
        x[b] = tab.rows[i][-1]
    primal = {name: ZERO for name in signs}
    for idx, (name, sign) in enumerate(columns):
        primal[name] += sign * x[idx]

    # duals from B^T y = c_B on the surviving rows
    B_cols = tab.basis
    mat = [[original[alive[r]][B_cols[k]] for r in range(len(alive))] for k in range(len(alive))]
    y = _solve_linear_system(mat, [cost[b] for b in B_cols]) if alive else []
    dual = {con.name: ZERO for con in rows}
    for k, r in enumerate(alive):
        val = y[k] * row_flip[r]
        dual[rows[r].name] = val if minimize else -val

    value = lp.objective_value(primal)
    dual_value = sum((con.rhs * dual[con.name] for con in rows), ZERO)
    if value != dual_value:
        raise ArithmeticError(f"strong duality check failed: {value} != {dual_value}")
    return SolveResult("optimal", primal, dual, value)
