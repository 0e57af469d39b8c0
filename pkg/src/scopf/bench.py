"""Timing studies for the single-outage evaluation paths and the solver.

The interesting comparison is rank-one update against refactorization, per
outage, for both the angle solution and the monitored-flow sensitivity row.
"Warm" means the factorization, the base angle solve, and the inverse columns
the update paths need are already cached, which is the state a screening loop
actually runs in; the warm-up pass is excluded from the timings.

No plotting here. Figures belong to the report path.
"""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .cases import nominal_injections
from .contingency import (contingency_list, method1_theta, method2_theta,
                          method3_ptdf_row, method4_ptdf_row)
from .network import Network
from .scopf import ScopfConfig, solve_scopf


@dataclass
class MethodTimingRow:
    branch_id: int
    kind: str
    t_theta_update_s: float
    t_theta_refactor_s: float
    t_row_update_s: float
    t_row_refactor_s: float
    theta_diff_mw: float       # max |flow| gap between the two angle paths
    row_diff: float            # max gap between the two sensitivity rows


@dataclass
class MethodBench:
    n_buses: int
    n_branches: int
    n_outages: int
    warm: bool
    monitored_branch: int
    rows: list = field(default_factory=list)

    def median(self, attr: str) -> float:
        return statistics.median(getattr(r, attr) for r in self.rows)

    def summary(self) -> dict:
        return {
            "n_buses": self.n_buses,
            "n_branches": self.n_branches,
            "n_outages": self.n_outages,
            "warm": self.warm,
            "median_theta_update_s": self.median("t_theta_update_s"),
            "median_theta_refactor_s": self.median("t_theta_refactor_s"),
            "median_row_update_s": self.median("t_row_update_s"),
            "median_row_refactor_s": self.median("t_row_refactor_s"),
            "max_theta_diff_mw": max(r.theta_diff_mw for r in self.rows),
            "max_row_diff": max(r.row_diff for r in self.rows),
        }

    def as_dicts(self) -> list:
        return [{"branch_id": r.branch_id, "kind": r.kind,
                 "t_theta_update_s": r.t_theta_update_s,
                 "t_theta_refactor_s": r.t_theta_refactor_s,
                 "t_row_update_s": r.t_row_update_s,
                 "t_row_refactor_s": r.t_row_refactor_s,
                 "theta_diff_mw": r.theta_diff_mw,
                 "row_diff": r.row_diff} for r in self.rows]


def benchmark_methods(network: Network, injections_mw: np.ndarray | None = None,
                      branch_ids=None, warm: bool = True) -> MethodBench:
    """Time all four evaluation paths over a set of outages.

    The monitored branch for the sensitivity-row paths is the most loaded
    branch at the given injections (the next-loaded one when it is the outage
    itself), which is the row a screening loop would ask for first.
    """
    S = linalg.build_matrices(network)
    if injections_mw is None:
        injections_mw = nominal_injections(network)
    cons = contingency_list(network, branch_ids=branch_ids)
    base = linalg.base_flows(S, injections_mw)
    finite = np.where(np.isfinite([b.limit_normal_mw for b in network.branches]),
                      np.abs(base), -1.0)
    ranking = np.argsort(-finite, kind="stable")
    monitored = int(ranking[0])

    if warm:
        S.theta(injections_mw)
        for c in cons:
            method1_theta(S, c.branch_id, injections_mw, c)
            mon = monitored if monitored != c.branch_id else int(ranking[1])
            method3_ptdf_row(S, c.branch_id, mon, c)

    bench = MethodBench(network.n_buses, network.n_branches, len(cons), warm,
                        monitored)
    for c in cons:
        mon = monitored if monitored != c.branch_id else int(ranking[1])
        t0 = time.perf_counter()
        th1 = method1_theta(S, c.branch_id, injections_mw, c)
        t1 = time.perf_counter()
        th2 = method2_theta(S, c.branch_id, injections_mw, c)
        t2 = time.perf_counter()
        r3 = method3_ptdf_row(S, c.branch_id, mon, c)
        t3 = time.perf_counter()
        r4 = method4_ptdf_row(S, c.branch_id, mon, c)
        t4 = time.perf_counter()
        f1, f2 = S.flows_mw(th1), S.flows_mw(th2)
        f1[c.branch_id] = f2[c.branch_id] = 0.0
        bench.rows.append(MethodTimingRow(
            c.branch_id, c.kind, t1 - t0, t2 - t1, t3 - t2, t4 - t3,
            float(np.max(np.abs(f1 - f2))), float(np.max(np.abs(r3 - r4)))))
    return bench


@dataclass
class SolverBench:
    variant: str
    n_buses: int
    n_branches: int
    objective: float
    iterations: int
    total_cuts: int
    lp_vars: int
    lp_rows: int
    timings: dict

    def as_dict(self) -> dict:
        out = {"variant": self.variant, "n_buses": self.n_buses,
               "n_branches": self.n_branches, "objective": self.objective,
               "iterations": self.iterations, "total_cuts": self.total_cuts,
               "lp_vars": self.lp_vars, "lp_rows": self.lp_rows}
        out.update({f"t_{k}_s": v for k, v in sorted(self.timings.items())})
        return out


def benchmark_solver(network: Network, config: ScopfConfig | None = None) -> SolverBench:
    """Phase breakdown of one iterative solve (build, screen, LP, flow checks)."""
    config = config or ScopfConfig()
    sol = solve_scopf(network, config)
    return SolverBench(config.variant, network.n_buses, network.n_branches,
                       sol.objective, len(sol.iterations), sol.total_cuts,
                       sol.lp_vars, sol.lp_rows, dict(sol.timings))
