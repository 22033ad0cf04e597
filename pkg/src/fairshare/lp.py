"""Dense exact-rational simplex (two phases, Bland's rule) with dual values.

Problems are stated as ``max c.x`` subject to rows ``a.x (<=|>=|==) b`` and
bounds ``lo <= x <= hi`` (``hi`` may be ``None`` for +inf; ``lo`` must be
finite). Finite upper bounds become extra internal rows; their multipliers
show up in the reduced costs rather than in ``duals``.

Sign conventions for an optimal solution of a maximization problem:
``duals[r] >= 0`` on ``<=`` rows, ``<= 0`` on ``>=`` rows, free on ``==``
rows, and ``reduced_costs[j] = c_j - sum_r duals[r] * a_rj`` is ``> 0`` only
for variables at their upper bound and ``< 0`` only at their lower bound.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Sequence

from gmpy2 import mpq

from fairshare.model import as_fraction

__all__ = [
    "Constraint",
    "LinearProgram",
    "LpSolution",
    "Status",
    "check_feasibility",
    "dual_objective",
    "solve",
]

SENSES = ("<=", ">=", "==")


@dataclass(frozen=True)
class Constraint:
    coeffs: tuple[Fraction, ...]
    sense: str
    rhs: Fraction

    def __post_init__(self):
        if self.sense not in SENSES:
            raise ValueError(f"unknown constraint sense {self.sense!r}")
        object.__setattr__(self, "coeffs", tuple(as_fraction(a) for a in self.coeffs))
        object.__setattr__(self, "rhs", as_fraction(self.rhs))


@dataclass
class LinearProgram:
    objective: Sequence[Any]
    constraints: list[Constraint] = field(default_factory=list)
    lower: Sequence[Any] | None = None
    upper: Sequence[Any] | None = None

    def __post_init__(self):
        self.objective = tuple(as_fraction(c) for c in self.objective)
        n = len(self.objective)
        self.lower = tuple(as_fraction(v) for v in (self.lower or [0] * n))
        self.upper = tuple(None if v is None else as_fraction(v) for v in (self.upper or [None] * n))
        if len(self.lower) != n or len(self.upper) != n:
            raise ValueError("bounds must match the number of variables")
        for j, (lo, hi) in enumerate(zip(self.lower, self.upper)):
            if hi is not None and hi < lo:
                raise ValueError(f"variable {j}: lower bound above upper bound")
        self.constraints = list(self.constraints)
        for r, con in enumerate(self.constraints):
            if len(con.coeffs) != n:
                raise ValueError(f"row {r}: expected {n} coefficients, got {len(con.coeffs)}")

    @property
    def num_vars(self) -> int:
        return len(self.objective)

    def add(self, coeffs: Sequence[Any], sense: str, rhs: Any) -> int:
        """Append a row and return its index."""
        if len(coeffs) != self.num_vars:
            raise ValueError(f"expected {self.num_vars} coefficients, got {len(coeffs)}")
        self.constraints.append(Constraint(tuple(coeffs), sense, rhs))
        return len(self.constraints) - 1


class Status(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LpSolution:
    status: Status
    x: tuple[Fraction, ...] = ()
    objective: Fraction | None = None
    duals: tuple[Fraction, ...] = ()
    reduced_costs: tuple[Fraction, ...] = ()
    basis: tuple[int, ...] = ()

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


def dual_objective(lp: LinearProgram, sol: LpSolution) -> Fraction:
    """Objective of the dual solution carried by an optimal ``sol``."""
    total = sum((y * con.rhs for y, con in zip(sol.duals, lp.constraints)), Fraction(0))
    for d, lo, hi in zip(sol.reduced_costs, lp.lower, lp.upper):
        if d > 0:
            if hi is None:
                raise ValueError("positive reduced cost on a variable without upper bound")
            total += d * hi
        elif d < 0:
            total += d * lo
    return total


class _Tableau:
    def __init__(self, rows: list[list], basis: list[int]):
        self.rows = rows
        self.basis = basis
        self.obj: list = []

    def price(self, cost: list) -> None:
        width = len(cost)
        obj = list(cost) + [mpq(0)]
        for r, row in enumerate(self.rows):
            cb = cost[self.basis[r]]
            if cb:
                for k in range(width + 1):
                    if row[k]:
                        obj[k] -= cb * row[k]
        self.obj = obj

    def pivot(self, r: int, col: int) -> None:
        prow = self.rows[r]
        piv = prow[col]
        if piv != 1:
            prow = [v / piv if v else v for v in prow]
            self.rows[r] = prow
        nz = [k for k, v in enumerate(prow) if v]
        for i, row in enumerate(self.rows):
            if i != r:
                f = row[col]
                if f:
                    for k in nz:
                        row[k] -= f * prow[k]
        f = self.obj[col]
        if f:
            obj = self.obj
            for k in nz:
                obj[k] -= f * prow[k]
        self.basis[r] = col

    def run(self, allowed: list[bool]) -> bool:
        """Bland-rule iterations; returns False if the problem is unbounded."""
        rows, obj = self.rows, None
        while True:
            obj = self.obj
            col = next((j for j, ok in enumerate(allowed) if ok and obj[j] > 0), None)
            if col is None:
                return True
            best_r, best_ratio = None, None
            for r, row in enumerate(rows):
                a = row[col]
                if a > 0:
                    ratio = row[-1] / a
                    if (
                        best_ratio is None
                        or ratio < best_ratio
                        or (ratio == best_ratio and self.basis[r] < self.basis[best_r])
                    ):
                        best_r, best_ratio = r, ratio
            if best_r is None:
                return False
            self.pivot(best_r, col)


def _run(lp: LinearProgram, phase1_only: bool) -> LpSolution:
    n = lp.num_vars
    lo = [mpq(v) for v in lp.lower]
    cost = [mpq(c) for c in lp.objective]

    # internal rows: (coeffs, sense, rhs, is_user)
    rows_in: list[tuple[list, str, Any]] = []
    for con in lp.constraints:
        a = [mpq(v) for v in con.coeffs]
        rhs = mpq(con.rhs) - sum((a[j] * lo[j] for j in range(n) if a[j]), mpq(0))
        rows_in.append((a, con.sense, rhs))
    n_user = len(rows_in)
    for j, hi in enumerate(lp.upper):
        if hi is not None:
            a = [mpq(0)] * n
            a[j] = mpq(1)
            rows_in.append((a, "<=", mpq(hi) - lo[j]))

    m = len(rows_in)
    sigma = []
    normalized = []
    for a, sense, rhs in rows_in:
        if rhs < 0:
            a = [-v for v in a]
            rhs = -rhs
            sense = {"<=": ">=", ">=": "<=", "==": "=="}[sense]
            sigma.append(-1)
        else:
            sigma.append(1)
        normalized.append((a, sense, rhs))

    n_slack = sum(1 for _, s, _ in normalized if s != "==")
    n_art = sum(1 for _, s, _ in normalized if s != "<=")
    width = n + n_slack + n_art
    zero = mpq(0)
    rows = []
    basis = []
    id_col = []
    is_art = [False] * width
    s_next, a_next = n, n + n_slack
    for r, (a, sense, rhs) in enumerate(normalized):
        row = a + [zero] * (n_slack + n_art) + [rhs]
        if sense == "<=":
            row[s_next] = mpq(1)
            basis.append(s_next)
            id_col.append(s_next)
            s_next += 1
        else:
            if sense == ">=":
                row[s_next] = mpq(-1)
                s_next += 1
            row[a_next] = mpq(1)
            is_art[a_next] = True
            basis.append(a_next)
            id_col.append(a_next)
            a_next += 1
        rows.append(row)

    tab = _Tableau(rows, basis)
    if n_art:
        tab.price([mpq(-1) if is_art[k] else zero for k in range(width)])
        tab.run([True] * width)
        if tab.obj[-1] != 0:  # obj[-1] = -(phase-one objective) = sum of artificials
            return LpSolution(Status.INFEASIBLE)
        for r in range(m):
            if is_art[tab.basis[r]]:
                row = tab.rows[r]
                col = next((k for k in range(width) if not is_art[k] and row[k]), None)
                if col is not None:
                    tab.pivot(r, col)
    if phase1_only:
        cost = [zero] * n

    full_cost = cost + [zero] * (n_slack + n_art)
    tab.price(full_cost)
    if not tab.run([not f for f in is_art]):
        return LpSolution(Status.UNBOUNDED)

    xs = [zero] * width
    for r, b in enumerate(tab.basis):
        xs[b] = tab.rows[r][-1]
    x = [lo[j] + xs[j] for j in range(n)]
    duals_int = []
    for r in range(m):
        c = id_col[r]
        y = zero
        for i, b in enumerate(tab.basis):
            if full_cost[b]:
                y += full_cost[b] * tab.rows[i][c]
        duals_int.append(sigma[r] * y)
    duals = duals_int[:n_user]
    reduced = []
    for j in range(n):
        d = cost[j]
        for r in range(n_user):
            if duals[r]:
                d -= duals[r] * rows_in[r][0][j]
        reduced.append(d)
    objective = sum((cost[j] * x[j] for j in range(n)), zero)
    return LpSolution(
        Status.OPTIMAL,
        x=tuple(Fraction(v) for v in x),
        objective=Fraction(objective),
        duals=tuple(Fraction(v) for v in duals),
        reduced_costs=tuple(Fraction(v) for v in reduced),
        basis=tuple(b for b in tab.basis),
    )


def solve(lp: LinearProgram) -> LpSolution:
    """Optimal basic solution with exact duals, or an Infeasible/Unbounded status."""
    return _run(lp, phase1_only=False)


def check_feasibility(lp: LinearProgram) -> bool:
    """True iff the constraint set (rows and bounds) has a feasible point."""
    return _run(lp, phase1_only=True).status is Status.OPTIMAL
