"""Dense-tableau primal simplex for LPs with bounded variables.

Solves ``min c.x  s.t.  A_eq x = b,  lo <= x <= hi`` where ``hi`` may be
infinite. Nonbasic variables sit at one of their bounds, so box constraints
never become rows. Phase 1 minimises the sum of one artificial per row.
"""
from __future__ import annotations

import numpy as np

FEAS_TOL = 1e-7
OPT_TOL = 1e-9
PIVOT_TOL = 1e-9
BLAND_AFTER = 50  # consecutive degenerate pivots before switching rules


class SimplexResult:
    __slots__ = ("status", "x", "iterations")

    def __init__(self, status: str, x: np.ndarray | None, iterations: int):
        self.status = status
        self.x = x
        self.iterations = iterations


def _run(T, d, x, basis, at_upper, lo, hi, max_iter, it0):
    """Primal simplex iterations on tableau ``T`` (= B^-1 A) with reduced
    costs ``d``. Mutates all arguments. Returns (status, iterations)."""
    m, ncol = T.shape
    is_basic = np.zeros(ncol, dtype=bool)
    is_basic[basis] = True
    movable = (hi - lo) > FEAS_TOL
    degenerate_run = 0
    it = it0
    while it < max_iter:
        # entering candidates: at lower with d<0, at upper with d>0
        cand_lo = (~is_basic) & movable & (~at_upper) & (d < -OPT_TOL)
        cand_hi = (~is_basic) & movable & at_upper & (d > OPT_TOL)
        cand = cand_lo | cand_hi
        if not cand.any():
            return "optimal", it
        if degenerate_run >= BLAND_AFTER:
            j = int(np.flatnonzero(cand)[0])
        else:
            score = np.where(cand, np.abs(d), -1.0)
            j = int(np.argmax(score))  # argmax returns the lowest index on ties
        sigma = 1.0 if cand_lo[j] else -1.0
        col = T[:, j] * sigma  # basic vars change by -theta*col
        theta = hi[j] - lo[j]
        leave = -1
        leave_to_upper = False
        pos = col > PIVOT_TOL
        neg = col < -PIVOT_TOL
        xb = x[basis]
        ratios = np.full(m, np.inf)
        if pos.any():
            ratios[pos] = (xb[pos] - lo[basis][pos]) / col[pos]
        if neg.any():
            ratios[neg] = (hi[basis][neg] - xb[neg]) / (-col[neg])
        ratios = np.maximum(ratios, 0.0)
        if m:
            rmin = ratios.min()
            if rmin < theta - 1e-12:
                ties = np.flatnonzero(ratios <= rmin + 1e-12)
                if degenerate_run >= BLAND_AFTER:
                    r = int(ties[np.argmin(np.asarray(basis)[ties])])
                else:
                    r = int(ties[np.argmax(np.abs(col[ties]))])
                theta = rmin
                leave = r
                leave_to_upper = bool(neg[r])
        if not np.isfinite(theta):
            return "unbounded", it
        it += 1
        degenerate_run = degenerate_run + 1 if theta <= 1e-12 else 0
        x[basis] -= theta * col
        x[j] += sigma * theta
        if leave < 0:
            at_upper[j] = not at_upper[j]
            x[j] = hi[j] if at_upper[j] else lo[j]
            continue
        out = basis[leave]
        x[out] = hi[out] if leave_to_upper else lo[out]
        at_upper[out] = leave_to_upper
        at_upper[j] = False
        piv = T[leave, j]
        T[leave] /= piv
        colj = T[:, j].copy()
        colj[leave] = 0.0
        T -= np.outer(colj, T[leave])
        d -= d[j] * T[leave]
        basis[leave] = j
        is_basic[out] = False
        is_basic[j] = True
    return "iteration_limit", it


def solve_bounded(c, A, b, lo, hi, max_iter: int = 50_000) -> SimplexResult:
    """``A`` dense (m x n) equality matrix; ``lo`` finite; ``hi`` may be inf."""
    c = np.asarray(c, float)
    A = np.asarray(A, float)
    b = np.asarray(b, float)
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    m, n = A.shape
    if np.any(lo > hi + FEAS_TOL):
        return SimplexResult("infeasible", None, 0)

    x = lo.copy()
    resid = b - A @ x
    sign = np.where(resid >= 0, 1.0, -1.0)
    # artificials a_i with coefficient sign_i so that a = |resid| >= 0
    T = np.hstack([A * sign[:, None], np.eye(m)])
    ncol = n + m
    lo_f = np.concatenate([lo, np.zeros(m)])
    hi_f = np.concatenate([hi, np.full(m, np.inf)])
    xf = np.concatenate([x, np.abs(resid)])
    basis = list(range(n, ncol))
    at_upper = np.zeros(ncol, dtype=bool)

    cost1 = np.concatenate([np.zeros(n), np.ones(m)])
    d = cost1 - cost1[basis] @ T
    status, it = _run(T, d, xf, basis, at_upper, lo_f, hi_f, max_iter, 0)
    if status == "iteration_limit":
        return SimplexResult(status, None, it)
    if xf[n:].sum() > FEAS_TOL * max(1.0, np.abs(b).max(initial=0.0)):
        return SimplexResult("infeasible", None, it)

    # pin artificials at zero; drive basic ones out where possible
    hi_f[n:] = 0.0
    xf[n:] = 0.0
    for r in range(m):
        if basis[r] >= n:
            row = T[r, :n]
            nonbasic = np.ones(n, dtype=bool)
            nonbasic[[b_ for b_ in basis if b_ < n]] = False
            cands = np.flatnonzero(nonbasic & (np.abs(row) > 1e-7))
            if cands.size:
                j = int(cands[np.argmax(np.abs(row[cands]))])
                T[r] /= T[r, j]
                colj = T[:, j].copy()
                colj[r] = 0.0
                T -= np.outer(colj, T[r])
                at_upper[j] = False
                basis[r] = j

    cost2 = np.concatenate([c, np.zeros(m)])
    d = cost2 - cost2[basis] @ T
    status, it = _run(T, d, xf, basis, at_upper, lo_f, hi_f, max_iter, it)
    if status != "optimal":
        return SimplexResult(status, None, it)

    # recompute basic values from the original data for accuracy
    Af = np.hstack([A * sign[:, None], np.eye(m)])
    nb = np.ones(ncol, dtype=bool)
    nb[basis] = False
    rhs = b * sign - Af[:, nb] @ xf[nb]
    try:
        xf[basis] = np.linalg.solve(Af[:, basis], rhs)
    except np.linalg.LinAlgError:
        pass
    return SimplexResult("optimal", xf[:n], it)
