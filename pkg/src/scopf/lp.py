"""Linear program container, solver backends, and LP-format export.

`LinearProgram` stores rows as ``lo <= a.x <= hi`` with compact index/value
arrays, so a few hundred thousand rows assemble without drama. Equalities set
``lo == hi``; one-sided rows use an infinite end. A two-sided row counts as
one row here and in every statistic reported upstream.

Backends: "highs" (scipy's interface to HiGHS, the default) and "simplex"
(the bundled bounded-variable reference implementation in `scopf.simplex`,
meant for small cross-checks, not production sizes).

Dual convention: ``row_duals[i]`` is the sensitivity of the optimal objective
to raising the binding side of row i by one unit (for an equality, the usual
multiplier). Nodal prices fall out of balance-row duals with no sign fixups.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .errors import LPError, LPInfeasibleError, LPUnboundedError

INF = math.inf


@dataclass
class LPSolution:
    status: str
    objective: float
    x: np.ndarray
    row_duals: np.ndarray
    iterations: int = 0


class LinearProgram:
    """Minimize c.x subject to row ranges and variable bounds."""

    def __init__(self, name: str = "lp"):
        self.name = name
        self.objective_constant = 0.0
        self._lb: list[float] = []
        self._ub: list[float] = []
        self._cost: list[float] = []
        self._var_names: list[str] = []
        self._row_idx: list[np.ndarray] = []
        self._row_val: list[np.ndarray] = []
        self._row_lo: list[float] = []
        self._row_hi: list[float] = []
        self._row_names: list[str] = []

    # -- building -------------------------------------------------------------

    @property
    def n_vars(self) -> int:
        return len(self._cost)

    @property
    def n_rows(self) -> int:
        return len(self._row_lo)

    def add_variable(self, name: str = "", lb: float = 0.0, ub: float = INF,
                     cost: float = 0.0) -> int:
        if lb > ub:
            raise ValueError(f"variable {name or self.n_vars}: lb {lb} > ub {ub}")
        self._lb.append(float(lb))
        self._ub.append(float(ub))
        self._cost.append(float(cost))
        self._var_names.append(name)
        return self.n_vars - 1

    def add_variables(self, count: int, prefix: str = "", lb=0.0, ub=INF,
                      cost=0.0) -> np.ndarray:
        """Add a block of variables; lb/ub/cost may be scalars or arrays."""
        lb = np.broadcast_to(np.asarray(lb, dtype=float), (count,))
        ub = np.broadcast_to(np.asarray(ub, dtype=float), (count,))
        cost = np.broadcast_to(np.asarray(cost, dtype=float), (count,))
        start = self.n_vars
        for k in range(count):
            self.add_variable(f"{prefix}{k}" if prefix else "", lb[k], ub[k], cost[k])
        return np.arange(start, self.n_vars)

    def set_cost(self, var: int, cost: float) -> None:
        self._cost[var] = float(cost)

    def add_cost(self, var: int, delta: float) -> None:
        self._cost[var] += float(delta)

    def set_bounds(self, var: int, lb: float, ub: float) -> None:
        if lb > ub:
            raise ValueError(f"variable {var}: lb {lb} > ub {ub}")
        self._lb[var] = float(lb)
        self._ub[var] = float(ub)

    def add_row(self, idx, val, lo: float, hi: float, name: str = "") -> int:
        """One constraint ``lo <= sum(val[k] * x[idx[k]]) <= hi``."""
        if lo > hi:
            raise ValueError(f"row {name or self.n_rows}: lo {lo} > hi {hi}")
        idx = np.asarray(idx, dtype=np.int64)
        val = np.asarray(val, dtype=float)
        if idx.shape != val.shape or idx.ndim != 1:
            raise ValueError("row index and value arrays must be 1-d and congruent")
        self._row_idx.append(idx)
        self._row_val.append(val)
        self._row_lo.append(float(lo))
        self._row_hi.append(float(hi))
        self._row_names.append(name)
        return self.n_rows - 1

    def row(self, i: int):
        return self._row_idx[i], self._row_val[i], self._row_lo[i], self._row_hi[i]

    def costs(self) -> np.ndarray:
        return np.array(self._cost)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return np.array(self._lb), np.array(self._ub)

    # -- solving ----------------------------------------------------------------

    def solve(self, backend: str = "highs", feasibility_tol: float = 1e-9) -> LPSolution:
        """Solve and return the optimum; raises on infeasible or unbounded.

        The objective in the returned solution includes `objective_constant`.
        """
        if backend == "highs":
            return self._solve_highs(feasibility_tol)
        if backend == "simplex":
            from .simplex import solve_bounded_simplex
            return solve_bounded_simplex(self)
        raise LPError(f"unknown LP backend {backend!r}")

    def _solve_highs(self, tol: float) -> LPSolution:
        n = self.n_vars
        c = np.array(self._cost)
        bounds = list(zip(self._lb, self._ub))
        eq_rows, ub_rows = [], []      # (orig row, sign) for dual reassembly
        for i in range(self.n_rows):
            lo, hi = self._row_lo[i], self._row_hi[i]
            if lo == hi:
                eq_rows.append(i)
            else:
                if hi < INF:
                    ub_rows.append((i, 1.0))
                if lo > -INF:
                    ub_rows.append((i, -1.0))

        def assemble(selected):
            if not selected:
                return None, None
            rows = np.repeat(np.arange(len(selected)),
                             [len(self._row_idx[i]) for i, _ in selected])
            cols = np.concatenate([self._row_idx[i] for i, _ in selected])
            vals = np.concatenate([s * self._row_val[i] for i, s in selected])
            A = sp.coo_matrix((vals, (rows, cols)), shape=(len(selected), n)).tocsr()
            return A, None

        A_eq, _ = assemble([(i, 1.0) for i in eq_rows])
        b_eq = np.array([self._row_lo[i] for i in eq_rows]) if eq_rows else None
        A_ub, _ = assemble(ub_rows)
        # rhs is hi for the s=+1 copy and -lo for the s=-1 copy
        b_ub = (np.array([self._row_hi[i] if s > 0 else -self._row_lo[i]
                          for i, s in ub_rows]) if ub_rows else None)

        res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds,
                      method="highs",
                      options={"primal_feasibility_tolerance": tol,
                               "dual_feasibility_tolerance": tol})
        if res.status == 2:
            raise LPInfeasibleError(f"{self.name}: no feasible point ({res.message})")
        if res.status == 3:
            raise LPUnboundedError(f"{self.name}: objective unbounded below")
        if res.status != 0:
            raise LPError(f"{self.name}: solver failure status {res.status}: {res.message}")

        duals = np.zeros(self.n_rows)
        if eq_rows:
            duals[eq_rows] = res.eqlin.marginals
        if ub_rows:
            for (i, s), marg in zip(ub_rows, res.ineqlin.marginals):
                # marg is dz/d(b_ub); map back through rhs = s*bound
                duals[i] += s * marg
        return LPSolution("optimal", float(res.fun) + self.objective_constant,
                          np.asarray(res.x), duals, int(getattr(res, "nit", 0)))

    # -- export -----------------------------------------------------------------

    def _safe_names(self, raw: list[str], fallback: str) -> list[str]:
        seen = set()
        out = []
        for k, name in enumerate(raw):
            s = re.sub(r"[^A-Za-z0-9_\.\-]", "_", name) if name else f"{fallback}{k}"
            if not s or s[0].isdigit() or s[0] in "eE.":
                s = f"{fallback}{k}_{s}"
            if s in seen:
                s = f"{s}_{k}"
            seen.add(s)
            out.append(s)
        return out

    def to_lp_string(self) -> str:
        """CPLEX LP-format text. Two-sided rows emit a _lo and a _hi line;
        the objective constant is carried as a comment since the format has
        no slot for it."""
        vn = self._safe_names(self._var_names, "x")
        rn = self._safe_names(self._row_names, "c")

        def expr(idx, val):
            parts = []
            for j, v in zip(idx, val):
                sign = "-" if v < 0 else "+"
                parts.append(f"{sign} {abs(v):.12g} {vn[j]}")
            if not parts:
                return "0 " + (vn[0] if vn else "x0")
            return " ".join(parts).lstrip("+ ")

        lines = [f"\\ Problem: {self.name}"]
        if self.objective_constant:
            lines.append(f"\\ objective constant (add to reported optima): "
                         f"{self.objective_constant:.12g}")
        lines.append("Minimize")
        obj_terms = [(j, cv) for j, cv in enumerate(self._cost) if cv != 0.0]
        lines.append(" obj: " + expr([j for j, _ in obj_terms], [v for _, v in obj_terms]))
        lines.append("Subject To")
        for i in range(self.n_rows):
            idx, val, lo, hi = self.row(i)
            e = expr(idx, val)
            if lo == hi:
                lines.append(f" {rn[i]}: {e} = {lo:.12g}")
            else:
                if hi < INF:
                    lines.append(f" {rn[i]}_hi: {e} <= {hi:.12g}")
                if lo > -INF:
                    lines.append(f" {rn[i]}_lo: {e} >= {lo:.12g}")
        lines.append("Bounds")
        for j in range(self.n_vars):
            lo, hi = self._lb[j], self._ub[j]
            if lo == hi:
                lines.append(f" {vn[j]} = {lo:.12g}")
            elif lo == -INF and hi == INF:
                lines.append(f" {vn[j]} free")
            elif hi == INF:
                lines.append(f" {lo:.12g} <= {vn[j]}")
            elif lo == -INF:
                lines.append(f" -inf <= {vn[j]} <= {hi:.12g}")
            else:
                lines.append(f" {lo:.12g} <= {vn[j]} <= {hi:.12g}")
        lines.append("End")
        return "\n".join(lines) + "\n"

    def write_lp(self, path) -> None:
        with open(path, "w") as f:
            f.write(self.to_lp_string())
