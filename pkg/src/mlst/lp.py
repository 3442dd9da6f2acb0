"""Sparse linear programs with bounded variables and their solution."""
from __future__ import annotations

import copy
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping

import highspy
import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from . import simplex

FEAS_TOL = 1e-7
INT_TOL = 1e-6

LE, GE, EQ = "<=", ">=", "="


@dataclass(frozen=True)
class Row:
    coefs: tuple[tuple[int, float], ...]
    sense: str
    rhs: float
    name: str = ""

    @classmethod
    def make(cls, coefs: Mapping[int, float] | Iterable[tuple[int, float]], sense: str, rhs: float, name: str = ""):
        if sense not in (LE, GE, EQ):
            raise ValueError(f"bad relation {sense!r}")
        items = coefs.items() if isinstance(coefs, Mapping) else coefs
        merged: dict[int, float] = {}
        for j, a in items:
            merged[j] = merged.get(j, 0.0) + float(a)
        return cls(tuple(sorted((j, a) for j, a in merged.items() if a != 0.0)), sense, float(rhs), name)

    @cached_property
    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """(column indices, coefficients) as numpy arrays."""
        if not self.coefs:
            return np.zeros(0, dtype=np.int32), np.zeros(0)
        idx, val = zip(*self.coefs)
        return np.asarray(idx, dtype=np.int32), np.asarray(val, dtype=float)

    def activity(self, x) -> float:
        idx, val = self.arrays
        return float(val @ np.asarray(x, dtype=float)[idx])

    def violation(self, x) -> float:
        """Positive amount by which ``x`` violates the row."""
        act = self.activity(x)
        if self.sense == LE:
            return act - self.rhs
        if self.sense == GE:
            return self.rhs - act
        return abs(act - self.rhs)


class LinearProgram:
    """``min c.x`` over rows and per-variable boxes. Single writer."""

    def __init__(self, num_vars: int, objective=None, lower=None, upper=None, names=None):
        self.num_vars = num_vars
        self.objective = np.zeros(num_vars) if objective is None else np.asarray(objective, float).copy()
        self.lower = np.zeros(num_vars) if lower is None else np.asarray(lower, float).copy()
        self.upper = np.ones(num_vars) if upper is None else np.asarray(upper, float).copy()
        for arr in (self.objective, self.lower, self.upper):
            if arr.shape != (num_vars,):
                raise ValueError("dimension mismatch between vectors and variable count")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")
        self.names = list(names) if names is not None else [f"v{j}" for j in range(num_vars)]
        self.rows: list[Row] = []
        self._session: _HighsSession | None = None

    def copy(self) -> "LinearProgram":
        out = copy.copy(self)
        out.objective = self.objective.copy()
        out.lower = self.lower.copy()
        out.upper = self.upper.copy()
        out.rows = list(self.rows)
        out._session = self._session.clone() if self._session is not None else None
        return out

    def add_constraint(self, row: Row) -> "LinearProgram":
        for j, _ in row.coefs:
            if not 0 <= j < self.num_vars:
                raise IndexError(f"row {row.name!r} references variable {j} outside [0, {self.num_vars})")
        self.rows.append(row)
        return self

    def fix_variable(self, index: int, value: float) -> "LinearProgram":
        if not 0 <= index < self.num_vars:
            raise IndexError(f"variable {index} out of range")
        self.lower[index] = value
        self.upper[index] = value
        return self

    @property
    def num_rows(self) -> int:
        return len(self.rows)

    def to_lp_text(self) -> str:
        """CPLEX LP format dump for cross-checking with external solvers."""

        def expr(pairs):
            parts = []
            for j, a in pairs:
                sign = "-" if a < 0 else "+"
                parts.append(f"{sign} {abs(a):.12g} {self.names[j]}")
            s = " ".join(parts) or "0 " + self.names[0]
            return s[2:] if s.startswith("+ ") else s

        out = ["\\ mlst debug dump", "Minimize", " obj: " + expr((j, a) for j, a in enumerate(self.objective) if a), "Subject To"]
        for i, r in enumerate(self.rows):
            op = {"<=": "<=", ">=": ">=", "=": "="}[r.sense]
            out.append(f" {r.name or 'r'}_{i}: {expr(r.coefs)} {op} {r.rhs:.12g}")
        out.append("Bounds")
        for j in range(self.num_vars):
            lo, hi = self.lower[j], self.upper[j]
            if lo == hi:
                out.append(f" {self.names[j]} = {lo:.12g}")
            else:
                out.append(f" {lo:.12g} <= {self.names[j]} <= {hi:.12g}")
        out.append("End")
        return "\n".join(out) + "\n"


@dataclass
class LpSolution:
    status: str
    values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    objective: float = float("nan")

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def _matrix(lp: LinearProgram):
    data, ri, ci = [], [], []
    for i, row in enumerate(lp.rows):
        for j, a in row.coefs:
            ri.append(i)
            ci.append(j)
            data.append(a)
    return sparse.csr_matrix((data, (ri, ci)), shape=(len(lp.rows), lp.num_vars))


class _HighsSession:
    """Persistent HiGHS model mirroring a LinearProgram. Rows appended to
    the program and bound changes are pushed incrementally so that
    re-solves start from the previous basis."""

    def __init__(self, h: highspy.Highs, nrows: int, lower, upper):
        self.h = h
        self.nrows = nrows
        self.lower = lower.copy()
        self.upper = upper.copy()

    @staticmethod
    def _new_highs() -> highspy.Highs:
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("solver", "simplex")
        h.setOptionValue("random_seed", 0)
        return h

    @classmethod
    def build(cls, lp: LinearProgram) -> "_HighsSession":
        h = cls._new_highs()
        n = lp.num_vars
        h.addVars(n, lp.lower, lp.upper)
        h.changeColsCost(n, np.arange(n, dtype=np.int32), lp.objective)
        sess = cls(h, 0, lp.lower, lp.upper)
        sess._add_rows(lp.rows)
        return sess

    def clone(self) -> "_HighsSession":
        h = self._new_highs()
        h.passModel(self.h.getModel())
        basis = self.h.getBasis()
        if basis.valid:
            h.setBasis(basis)
        return _HighsSession(h, self.nrows, self.lower, self.upper)

    def _add_rows(self, rows) -> None:
        if not rows:
            return
        inf = highspy.kHighsInf
        lo = np.array([r.rhs if r.sense != LE else -inf for r in rows])
        hi = np.array([r.rhs if r.sense != GE else inf for r in rows])
        parts = [r.arrays for r in rows]
        sizes = np.array([len(p[0]) for p in parts], dtype=np.int32)
        starts = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int32)
        idx = np.concatenate([p[0] for p in parts]).astype(np.int32)
        val = np.concatenate([p[1] for p in parts])
        self.h.addRows(len(rows), lo, hi, len(idx), starts, idx, val)
        self.nrows += len(rows)

    def sync(self, lp: LinearProgram) -> None:
        if lp.num_rows > self.nrows:
            self._add_rows(lp.rows[self.nrows:])
        changed = np.flatnonzero((lp.lower != self.lower) | (lp.upper != self.upper))
        if changed.size:
            self.h.changeColsBounds(
                changed.size, changed.astype(np.int32), lp.lower[changed], lp.upper[changed]
            )
            self.lower = lp.lower.copy()
            self.upper = lp.upper.copy()

    def run(self, lp: LinearProgram) -> LpSolution:
        self.sync(lp)
        h = self.h
        h.run()
        status = h.getModelStatus()
        ms = highspy.HighsModelStatus
        if status == ms.kOptimal:
            x = np.clip(np.asarray(h.getSolution().col_value), lp.lower, lp.upper)
            return LpSolution("optimal", x, float(lp.objective @ x))
        if status == ms.kInfeasible:
            return LpSolution("infeasible")
        if status in (ms.kUnbounded, ms.kUnboundedOrInfeasible):
            # disambiguate with a cold solve
            return _solve_linprog(lp)
        raise RuntimeError(f"LP backend failure: {h.modelStatusToString(status)}")


def _solve_highs(lp: LinearProgram) -> LpSolution:
    if lp._session is None:
        lp._session = _HighsSession.build(lp)
    return lp._session.run(lp)


def _solve_linprog(lp: LinearProgram) -> LpSolution:
    le = [i for i, r in enumerate(lp.rows) if r.sense != EQ]
    eq = [i for i, r in enumerate(lp.rows) if r.sense == EQ]
    A = _matrix(lp)
    flip = np.array([-1.0 if lp.rows[i].sense == GE else 1.0 for i in le])
    rhs = np.array([r.rhs for r in lp.rows])
    kwargs = {}
    if le:
        kwargs["A_ub"] = sparse.diags(flip) @ A[le]
        kwargs["b_ub"] = flip * rhs[le]
    if eq:
        kwargs["A_eq"] = A[eq]
        kwargs["b_eq"] = rhs[eq]
    res = linprog(
        lp.objective,
        bounds=np.column_stack([lp.lower, lp.upper]),
        method="highs-ds",
        **kwargs,
    )
    if res.status == 0:
        x = np.clip(res.x, lp.lower, lp.upper)
        return LpSolution("optimal", x, float(lp.objective @ x))
    if res.status == 2:
        return LpSolution("infeasible")
    if res.status == 3:
        return LpSolution("unbounded")
    raise RuntimeError(f"LP backend failure: {res.message}")


def _solve_simplex(lp: LinearProgram) -> LpSolution:
    n = lp.num_vars
    ineq = [r for r in lp.rows if r.sense != EQ]
    m = len(lp.rows)
    A = np.zeros((m, n + len(ineq)))
    b = np.zeros(m)
    k = n
    for i, r in enumerate(lp.rows):
        for j, a in r.coefs:
            A[i, j] += a
        b[i] = r.rhs
        if r.sense == LE:
            A[i, k] = 1.0
            k += 1
        elif r.sense == GE:
            A[i, k] = -1.0
            k += 1
    c = np.concatenate([lp.objective, np.zeros(len(ineq))])
    lo = np.concatenate([lp.lower, np.zeros(len(ineq))])
    hi = np.concatenate([lp.upper, np.full(len(ineq), np.inf)])
    res = simplex.solve_bounded(c, A, b, lo, hi)
    if res.status == "optimal":
        x = np.clip(res.x[:n], lp.lower, lp.upper)
        return LpSolution("optimal", x, float(lp.objective @ x))
    if res.status in ("infeasible", "unbounded"):
        return LpSolution(res.status)
    raise RuntimeError("simplex iteration limit reached")


BACKENDS = {"highs": _solve_highs, "linprog": _solve_linprog, "simplex": _solve_simplex}
DEFAULT_BACKEND = "highs"


def solve(lp: LinearProgram, backend: str | None = None) -> LpSolution:
    if np.any(lp.lower > lp.upper + FEAS_TOL):
        return LpSolution("infeasible")
    return BACKENDS[backend or DEFAULT_BACKEND](lp)


def add_constraint(lp: LinearProgram, row: Row) -> LinearProgram:
    return lp.add_constraint(row)


def fix_variable(lp: LinearProgram, index: int, value: float) -> LinearProgram:
    return lp.fix_variable(index, value)


def is_integral(v: float, tol: float = INT_TOL) -> bool:
    return abs(v - round(v)) <= tol
