"""Bounded-variable two-phase revised simplex, the reference LP backend.

Dense and deliberately simple: Bland's rule everywhere, a fresh basis solve
per iteration, artificials for phase 1. It exists to cross-check the primary
backend on desk-scale problems and to keep the package runnable if no
external solver is trusted; point production solves at the "highs" backend.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import LPError, LPInfeasibleError, LPUnboundedError

INF = math.inf
_RC_TOL = 1e-9
_RATIO_TOL = 1e-10
_FEAS_TOL = 1e-7


def _to_standard_form(lp):
    """Rows become a.x - r = 0 with the range folded into slack bounds."""
    nx, m = lp.n_vars, lp.n_rows
    n = nx + m
    A = np.zeros((m, n))
    for i in range(m):
        idx, val, lo, hi = lp.row(i)
        np.add.at(A[i], idx, val)
        A[i, nx + i] = -1.0
    lb, ub = lp.bounds()
    lo_r = np.array([lp.row(i)[2] for i in range(m)])
    hi_r = np.array([lp.row(i)[3] for i in range(m)])
    l = np.concatenate([lb, lo_r])
    u = np.concatenate([ub, hi_r])
    c = np.concatenate([lp.costs(), np.zeros(m)])
    b = np.zeros(m)
    return A, b, c, l, u, nx


class _Tableau:
    def __init__(self, A, b, c, l, u):
        self.A, self.b, self.c, self.l, self.u = A, b, c, l, u
        self.m, self.n = A.shape
        self.basis: list[int] = []
        # a variable with no lower bound starts (and flips) against its upper
        self.nonbasic_at_upper = (l == -INF) & (u < INF)
        self.is_basic = np.zeros(self.n, dtype=bool)

    def nonbasic_value(self, j):
        if self.is_basic[j]:
            raise AssertionError("basic variable queried as nonbasic")
        if self.nonbasic_at_upper[j]:
            return self.u[j]
        if self.l[j] > -INF:
            return self.l[j]
        return 0.0  # fully free variable rests at zero

    def values(self):
        x = np.array([0.0 if self.is_basic[j] else self.nonbasic_value(j)
                      for j in range(self.n)])
        B = self.A[:, self.basis]
        rhs = self.b - self.A @ x
        xb = np.linalg.solve(B, rhs)
        x[self.basis] = xb
        return x

    def duals(self):
        B = self.A[:, self.basis]
        return np.linalg.solve(B.T, self.c[self.basis])

    def optimize(self, max_iter=20000):
        for _ in range(max_iter):
            x = self.values()
            y = self.duals()
            d = self.c - y @ self.A
            enter, direction = -1, 0.0
            for j in range(self.n):
                if self.is_basic[j] or self.l[j] == self.u[j]:
                    continue
                at_upper = self.nonbasic_at_upper[j]
                free = self.l[j] == -INF and self.u[j] == INF
                if free and abs(d[j]) > _RC_TOL:
                    enter, direction = j, (1.0 if d[j] < 0 else -1.0)
                    break
                if not at_upper and d[j] < -_RC_TOL:
                    enter, direction = j, 1.0
                    break
                if at_upper and d[j] > _RC_TOL:
                    enter, direction = j, -1.0
                    break
            if enter < 0:
                return x
            B = self.A[:, self.basis]
            w = direction * np.linalg.solve(B, self.A[:, enter])
            flip_t = (self.u[enter] - self.l[enter]
                      if self.l[enter] > -INF and self.u[enter] < INF else INF)
            xb = x[self.basis]
            # smallest step that drives a basic variable to one of its bounds;
            # ties broken by smallest variable index (Bland)
            t_best, leave, leave_to = INF, -1, ""
            for k in range(self.m):
                jb = self.basis[k]
                if w[k] > _RATIO_TOL and self.l[jb] > -INF:
                    t, to = (xb[k] - self.l[jb]) / w[k], "lower"
                elif w[k] < -_RATIO_TOL and self.u[jb] < INF:
                    t, to = (self.u[jb] - xb[k]) / (-w[k]), "upper"
                else:
                    continue
                t = max(t, 0.0)
                if (t < t_best - _RATIO_TOL
                        or (abs(t - t_best) <= _RATIO_TOL
                            and (leave < 0 or jb < self.basis[leave]))):
                    t_best, leave, leave_to = t, k, to
            if flip_t <= t_best:
                if flip_t == INF:
                    raise LPUnboundedError("objective unbounded below")
                # bound flip: entering variable runs to its other bound
                self.nonbasic_at_upper[enter] = not self.nonbasic_at_upper[enter]
                continue
            jb = self.basis[leave]
            self.is_basic[jb] = False
            self.nonbasic_at_upper[jb] = leave_to == "upper"
            self.basis[leave] = enter
            self.is_basic[enter] = True
        raise LPError("simplex iteration limit reached")


def solve_bounded_simplex(lp):
    from .lp import LPSolution

    A, b, c, l, u, nx = _to_standard_form(lp)
    m, n = A.shape
    if m == 0:
        # no rows: each variable independently runs to its cheapest bound
        x = np.empty(n)
        for j in range(n):
            if c[j] > 0:
                target = l[j]
            elif c[j] < 0:
                target = u[j]
            else:
                target = l[j] if l[j] > -INF else min(u[j], 0.0)
            if not np.isfinite(target):
                if c[j] != 0.0:
                    raise LPUnboundedError("objective unbounded below")
                target = 0.0
            x[j] = target
        return LPSolution("optimal", float(c @ x) + lp.objective_constant, x[:nx],
                          np.zeros(0))

    # phase 1: artificials with signs matching the starting residual
    start = np.array([l[j] if l[j] > -INF else (u[j] if u[j] < INF else 0.0)
                      for j in range(n)])
    resid = b - A @ start
    sign = np.where(resid >= 0, 1.0, -1.0)
    A1 = np.hstack([A, np.diag(sign)])
    l1 = np.concatenate([l, np.zeros(m)])
    u1 = np.concatenate([u, np.full(m, INF)])
    c1 = np.concatenate([np.zeros(n), np.ones(m)])
    tab = _Tableau(A1, b, c1, l1, u1)
    tab.basis = list(range(n, n + m))
    tab.is_basic[n:] = True
    x1 = tab.optimize()
    if float(c1 @ x1) > _FEAS_TOL:
        raise LPInfeasibleError(f"{lp.name}: no feasible point (phase-1 "
                                f"residual {float(c1 @ x1):.3e})")

    # phase 2: freeze artificials at zero and restore the real objective
    tab.c = np.concatenate([c, np.zeros(m)])
    tab.l[n:] = 0.0
    tab.u[n:] = 0.0
    x2 = tab.optimize()
    y = tab.duals()
    duals = np.zeros(lp.n_rows)
    for i in range(lp.n_rows):
        slack = nx + i
        idx, val, lo, hi = lp.row(i)
        if lo == hi or not tab.is_basic[slack]:
            duals[i] = y[i]
    obj = float(tab.c @ x2) + lp.objective_constant
    return LPSolution("optimal", obj, x2[:nx], duals)
