"""Security-constrained dispatch with probability-weighted corrective stages.

Three variants share one cost model:

- "base": economic dispatch against normal ratings only.
- "preventive": one dispatch that must satisfy long-term post-contingency
  ratings with no corrective action. Islanding outages are the exception;
  physics forces the survivors to rebalance, so those get corrective blocks.
- "corrective": after each outage the system may redispatch twice, first
  within short-term ramp budgets against short-term ratings, then within
  long-term budgets against long-term ratings, shedding load at its value of
  lost load. Post-contingency costs are weighted by outage probability.

Load is modeled through a served-power variable per demand (pre-contingency
service `u0`, per-stage service bounded by `u0`), so energy not served is
always `u0 - served`. Demands cut off by an islanding outage count their full
nominal load as shed; that number is a constant of the data, which is what
makes an oversized island a structured infeasibility instead of a silently
expensive dispatch.

The iterative path solves a small master LP and lazily adds post-contingency
flow cuts (rows built from rank-one PTDF updates) and stage blocks only where
screening finds violations. `solve_monolithic` builds the whole problem in an
independent angle formulation and exists to cross-check the iterative
objective; it refuses networks above a size guard.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .contingency import (Contingency, contingency_list, contingency_flows,
                          method3_ptdf_row, screen_and_rank, KIND_NONE)
from .errors import ConvergenceError, LPInfeasibleError
from .lp import INF, LinearProgram, LPSolution
from .network import Network

VARIANTS = ("base", "preventive", "corrective")
STAGES = ("short", "long")

_COEF_DROP = 1e-11   # PTDF cut entries below this are noise, not constraints


@dataclass(frozen=True)
class ScopfConfig:
    variant: str = "corrective"
    gamma_fraction: float = 0.02       # stage shed cap as a fraction of total load
    lp_backend: str = "highs"
    max_iterations: int = 80
    flow_tol_rel: float = 1e-6         # violation when |flow| > limit * (1 + this)
    include_islanding: bool = True
    monolithic_bus_limit: int = 200
    feasibility_tol: float = 1e-9

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if not 0.0 <= self.gamma_fraction <= 1.0:
            raise ValueError("gamma_fraction must lie in [0, 1]")

    def gamma_mw(self, network: Network) -> float:
        return self.gamma_fraction * network.total_demand_mw()


@dataclass
class StageOutcome:
    delta_up_mw: np.ndarray
    delta_down_mw: np.ndarray
    served_mw: np.ndarray
    ens_mw: float
    island_ens_mw: float
    redispatch_mw: float


@dataclass
class ContingencyOutcome:
    branch_id: int
    kind: str
    islanded_buses: tuple[int, ...]
    stages: dict


@dataclass
class ScopfSolution:
    case: str
    variant: str
    gamma_fraction: float
    solver: str
    status: str
    objective: float
    base_energy_cost: float
    base_shed_cost: float
    expected_outage_cost: float
    generation_mw: np.ndarray
    generation_segments_mw: list
    served_mw: np.ndarray
    base_flows_mw: np.ndarray
    contingencies: list
    iterations: list
    screen_order: list
    lp_vars: int
    lp_rows: int
    total_cuts: int
    timings: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Shared LP building blocks
# ---------------------------------------------------------------------------

@dataclass
class _StageBlock:
    cont: Contingency
    stage: str
    static: bool
    dplus: np.ndarray | None
    dminus: np.ndarray | None
    served: np.ndarray | None
    island_ens_mw: float
    # flattened (var_ids, owning bus, sign) of every term in this state's
    # injection, for fast PTDF cut assembly
    expr_ids: np.ndarray = None
    expr_bus: np.ndarray = None
    expr_sign: np.ndarray = None


def _add_dispatch_vars(lp: LinearProgram, net: Network):
    seg_ids = []
    for g in net.generators:
        ids = np.array([lp.add_variable(f"p_g{g.id}_s{k}", 0.0, cap, cost)
                        for k, (cap, cost) in enumerate(g.segments)], dtype=np.int64)
        seg_ids.append(ids)
    u0 = np.array([lp.add_variable(f"u0_d{d.id}", 0.0, d.p_demand_mw, -d.voll_per_mwh)
                   for d in net.demands], dtype=np.int64)
    # serving everything is the zero-shed point of the objective
    lp.objective_constant += sum(d.voll_per_mwh * d.p_demand_mw for d in net.demands)
    return seg_ids, u0


def _base_expr(net: Network, seg_ids, u0):
    ids, bus, sign = [], [], []
    for g in net.generators:
        ids.append(seg_ids[g.id])
        bus.append(np.full(len(seg_ids[g.id]), g.bus))
        sign.append(np.ones(len(seg_ids[g.id])))
    for d in net.demands:
        ids.append([u0[d.id]])
        bus.append([d.bus])
        sign.append([-1.0])
    return (np.concatenate(ids).astype(np.int64), np.concatenate(bus).astype(np.int64),
            np.concatenate(sign))


def _add_stage_block(lp: LinearProgram, net: Network, seg_ids, u0,
                     cont: Contingency, stage: str, gamma_mw: float) -> _StageBlock:
    """Corrective variables and rows for one (contingency, stage) state."""
    island = set(cont.islanded_buses)
    pi = cont.probability
    tag = f"k{cont.branch_id}_{stage}"
    ramp = [g.ramp_short_mw if stage == "short" else g.ramp_long_mw
            for g in net.generators]
    dplus = np.array([
        lp.add_variable(f"dp_{tag}_g{g.id}", 0.0,
                        0.0 if g.bus in island else ramp[g.id],
                        pi * g.redispatch_cost_per_mwh)
        for g in net.generators], dtype=np.int64)
    dminus = np.array([
        lp.add_variable(f"dm_{tag}_g{g.id}", 0.0,
                        0.0 if g.bus in island else ramp[g.id],
                        pi * g.redispatch_cost_per_mwh)
        for g in net.generators], dtype=np.int64)
    served = np.array([
        lp.add_variable(f"u_{tag}_d{d.id}", 0.0,
                        0.0 if d.bus in island else d.p_demand_mw,
                        0.0 if d.bus in island else -pi * d.voll_per_mwh)
        for d in net.demands], dtype=np.int64)

    island_ens = 0.0
    for d in net.demands:
        if d.bus in island:
            # nominal load of the island is lost, as data, not as a decision
            island_ens += d.p_demand_mw
            lp.objective_constant += pi * d.voll_per_mwh * d.p_demand_mw
        else:
            lp.add_cost(u0[d.id], pi * d.voll_per_mwh)
            lp.add_row([served[d.id], u0[d.id]], [1.0, -1.0], -INF, 0.0,
                       f"cap_{tag}_d{d.id}")

    for g in net.generators:
        if g.bus in island:
            continue
        idx = np.concatenate([seg_ids[g.id], [dplus[g.id], dminus[g.id]]])
        val = np.concatenate([np.ones(len(seg_ids[g.id])), [1.0, -1.0]])
        lp.add_row(idx, val, 0.0, g.capacity_mw, f"head_{tag}_g{g.id}")

    gamma_rhs = gamma_mw - island_ens
    surv_d = [d.id for d in net.demands if d.bus not in island]
    if surv_d:
        idx = np.concatenate([[u0[d] for d in surv_d], [served[d] for d in surv_d]])
        val = np.concatenate([np.ones(len(surv_d)), -np.ones(len(surv_d))])
        lp.add_row(idx, val, -INF, gamma_rhs, f"gamma_{tag}")
    elif gamma_rhs < 0.0:
        raise LPInfeasibleError(
            f"islanding outage of branch {cont.branch_id} forces {island_ens:.3f} MW of "
            f"shed but the cap is {gamma_mw:.3f} MW",
            diagnosis={"contingency": cont.branch_id,
                       "islanded_buses": list(cont.islanded_buses),
                       "island_load_mw": island_ens, "shed_cap_mw": gamma_mw})

    ids, bus, sign = [], [], []
    bal_idx, bal_val = [], []
    for g in net.generators:
        if g.bus in island:
            continue
        ids += [seg_ids[g.id], [dplus[g.id]], [dminus[g.id]]]
        bus += [np.full(len(seg_ids[g.id]), g.bus), [g.bus], [g.bus]]
        sign += [np.ones(len(seg_ids[g.id])), [1.0], [-1.0]]
        bal_idx.append(np.concatenate([seg_ids[g.id], [dplus[g.id], dminus[g.id]]]))
        bal_val.append(np.concatenate([np.ones(len(seg_ids[g.id])), [1.0, -1.0]]))
    for d in net.demands:
        if d.bus in island:
            continue
        ids.append([served[d.id]])
        bus.append([d.bus])
        sign.append([-1.0])
        bal_idx.append(np.array([served[d.id]]))
        bal_val.append(np.array([-1.0]))

    block = _StageBlock(cont, stage, False, dplus, dminus, served, island_ens)
    if ids:
        block.expr_ids = np.concatenate(ids).astype(np.int64)
        block.expr_bus = np.concatenate(bus).astype(np.int64)
        block.expr_sign = np.concatenate(sign).astype(float)
    else:
        block.expr_ids = np.zeros(0, dtype=np.int64)
        block.expr_bus = np.zeros(0, dtype=np.int64)
        block.expr_sign = np.zeros(0)
    return block, (np.concatenate(bal_idx) if bal_idx else np.zeros(0, dtype=np.int64)), \
        (np.concatenate(bal_val) if bal_val else np.zeros(0))


def _static_block(net: Network, seg_ids, u0, cont: Contingency, stage: str) -> _StageBlock:
    """Preventive state: base injections must already satisfy the limits."""
    ids, bus, sign = _base_expr(net, seg_ids, u0)
    block = _StageBlock(cont, stage, True, None, None, None, 0.0)
    block.expr_ids, block.expr_bus, block.expr_sign = ids, bus, sign
    return block


def _preflight_islands(net: Network, contingencies, gamma_mw: float) -> None:
    for c in contingencies:
        if c.kind == KIND_NONE:
            continue
        island_load = sum(d.p_demand_mw for d in net.demands if d.bus in c.islanded_buses)
        if island_load > gamma_mw + 1e-9:
            raise LPInfeasibleError(
                f"islanding outage of branch {c.branch_id} isolates {island_load:.3f} MW "
                f"of load, above the {gamma_mw:.3f} MW per-state shedding cap",
                diagnosis={"contingency": c.branch_id,
                           "islanded_buses": list(c.islanded_buses),
                           "island_load_mw": island_load, "shed_cap_mw": gamma_mw})


def _stage_list(config: ScopfConfig, cont: Contingency):
    """Which stages exist for a contingency under the configured variant,
    and whether they carry corrective variables."""
    if config.variant == "base":
        return []
    if config.variant == "corrective" or cont.kind != KIND_NONE:
        return [("short", False), ("long", False)]
    return [("long", True)]      # preventive, network stays whole: static check


def _stage_limits(net: Network, stage: str) -> np.ndarray:
    if stage == "short":
        return np.array([b.limit_short_mw for b in net.branches])
    return np.array([b.limit_long_mw for b in net.branches])


# ---------------------------------------------------------------------------
# Iterative cutting-plane solver
# ---------------------------------------------------------------------------

def solve_scopf(network: Network, config: ScopfConfig | None = None) -> ScopfSolution:
    """Solve the configured variant by lazy constraint generation.

    The master LP starts with dispatch, service, and the system balance.
    Islanding contingencies get their stage blocks up front (their costs are
    unavoidable), everything else materializes only when a screening pass at
    the current dispatch finds a rating violated; each violated branch adds
    one two-sided PTDF cut row. Converges when a full pass finds nothing, so
    the answer is feasible by the same arithmetic that verification uses.
    """
    config = config or ScopfConfig()
    t0 = time.perf_counter()
    timings = {"build": 0.0, "screen": 0.0, "lp": 0.0, "flow_checks": 0.0}

    S = linalg.build_matrices(network)
    contingencies = contingency_list(network,
                                     exclude_islanding=not config.include_islanding)
    gamma_mw = config.gamma_mw(network)
    if config.variant != "base":
        _preflight_islands(network, contingencies, gamma_mw)

    lp = LinearProgram(f"{network.name or 'case'}_{config.variant}")
    seg_ids, u0 = _add_dispatch_vars(lp, network)
    base_ids, base_bus, base_sign = _base_expr(network, seg_ids, u0)
    lp.add_row(base_ids, base_sign, 0.0, 0.0, "balance")
    timings["build"] = time.perf_counter() - t0

    normal = np.array([b.limit_normal_mw for b in network.branches])
    by_id = {c.branch_id: c for c in contingencies}

    blocks: dict[tuple[int, str], _StageBlock] = {}
    cut_keys: set = set()
    iterations: list[dict] = []
    total_cuts = 0

    def lp_solve() -> LPSolution:
        t = time.perf_counter()
        out = lp.solve(backend=config.lp_backend, feasibility_tol=config.feasibility_tol)
        timings["lp"] += time.perf_counter() - t
        return out

    def record(sol, cuts, new_blocks):
        iterations.append({"iteration": len(iterations), "objective": sol.objective,
                           "lp_vars": lp.n_vars, "lp_rows": lp.n_rows,
                           "cuts_added": cuts, "blocks_added": new_blocks})

    def base_injections(x: np.ndarray) -> np.ndarray:
        inj = np.zeros(network.n_buses)
        np.add.at(inj, base_bus, base_sign * x[base_ids])
        return inj

    def stage_injections(x: np.ndarray, block: _StageBlock) -> np.ndarray:
        inj = np.zeros(network.n_buses)
        np.add.at(inj, block.expr_bus, block.expr_sign * x[block.expr_ids])
        return inj

    def add_cut(expr, phi, lim, name) -> None:
        coef = phi[expr[1]] * expr[2]
        keepers = np.abs(coef) > _COEF_DROP
        lp.add_row(expr[0][keepers], coef[keepers], -lim, lim, name)

    def materialize(cont: Contingency, stage: str) -> _StageBlock:
        if config.variant == "corrective" or cont.kind != KIND_NONE:
            block, bal_idx, bal_val = _add_stage_block(
                lp, network, seg_ids, u0, cont, stage, gamma_mw)
            lp.add_row(bal_idx, bal_val, 0.0, 0.0,
                       f"bal_k{cont.branch_id}_{stage}")
        else:
            block = _static_block(network, seg_ids, u0, cont, stage)
        blocks[(cont.branch_id, stage)] = block
        return block

    sol = lp_solve()
    record(sol, 0, 0)

    # pre-iteration: rank everything at the first dispatch, then put the
    # unavoidable islanding blocks in and re-solve once
    t = time.perf_counter()
    ranked = screen_and_rank(network, S, base_injections(sol.x), contingencies) \
        if config.variant != "base" else []
    screen_order = [r.contingency.branch_id for r in ranked]
    timings["screen"] = time.perf_counter() - t
    island_blocks = 0
    if config.variant != "base":
        for c in contingencies:
            if c.kind != KIND_NONE:
                for stage, _ in _stage_list(config, c):
                    materialize(c, stage)
                    island_blocks += 1
    if island_blocks:
        sol = lp_solve()
        record(sol, 0, island_blocks)

    limits_of = {s: _stage_limits(network, s) for s in STAGES}
    converged = False
    for _ in range(config.max_iterations):
        x = sol.x
        cuts = new_blocks = 0
        t = time.perf_counter()

        inj0 = base_injections(x)
        f0 = linalg.base_flows(S, inj0)
        for m in np.flatnonzero(np.abs(f0) > normal * (1.0 + config.flow_tol_rel)):
            key = ("base", int(m))
            if key in cut_keys:
                continue
            cut_keys.add(key)
            add_cut((base_ids, base_bus, base_sign), linalg.ptdf_row(S, int(m)),
                    normal[m], f"cut_base_m{m}")
            cuts += 1

        for branch_id in screen_order:
            cont = by_id[branch_id]
            for stage, _ in _stage_list(config, cont):
                block = blocks.get((branch_id, stage))
                if block is None:
                    probe = (base_ids, base_bus, base_sign)
                    inj = inj0
                else:
                    probe = (block.expr_ids, block.expr_bus, block.expr_sign)
                    inj = stage_injections(x, block)
                flows = contingency_flows(S, branch_id, inj, "update", cont).flows_mw
                limits = limits_of[stage]
                bad = np.flatnonzero(np.abs(flows) > limits * (1.0 + config.flow_tol_rel))
                if bad.size == 0:
                    continue
                if block is None:
                    block = materialize(cont, stage)
                    probe = (block.expr_ids, block.expr_bus, block.expr_sign)
                    if not block.static:
                        new_blocks += 1
                for m in bad:
                    key = ((branch_id, stage), int(m))
                    if key in cut_keys:
                        continue
                    cut_keys.add(key)
                    add_cut(probe, method3_ptdf_row(S, branch_id, int(m), cont),
                            limits[m], f"cut_k{branch_id}_{stage}_m{m}")
                    cuts += 1
        timings["flow_checks"] += time.perf_counter() - t
        total_cuts += cuts

        if cuts == 0 and new_blocks == 0:
            converged = True
            break
        sol = lp_solve()
        record(sol, cuts, new_blocks)

    if not converged:
        raise ConvergenceError(
            f"no violation-free pass within {config.max_iterations} iterations "
            f"({total_cuts} cuts added)")

    timings["total"] = time.perf_counter() - t0
    return _extract_solution(network, config, S, sol, seg_ids, u0, blocks,
                             contingencies, iterations, screen_order, lp,
                             "iterative", timings)


# ---------------------------------------------------------------------------
# Monolithic cross-check (independent angle formulation)
# ---------------------------------------------------------------------------

def build_monolithic(network: Network, config: ScopfConfig | None = None):
    """Assemble the full problem with explicit bus angles for every state.

    Returns ``(lp, handles)`` where handles carry the variable ids needed for
    extraction. Guarded by ``config.monolithic_bus_limit``; this formulation
    exists to audit the iterative solver at study scale, not to be one.
    """
    config = config or ScopfConfig()
    if network.n_buses > config.monolithic_bus_limit:
        raise ValueError(
            f"monolithic build refused: {network.n_buses} buses exceeds the "
            f"{config.monolithic_bus_limit}-bus guard (raise monolithic_bus_limit "
            "only if you mean it)")
    contingencies = contingency_list(network,
                                     exclude_islanding=not config.include_islanding)
    gamma_mw = config.gamma_mw(network)
    if config.variant != "base":
        _preflight_islands(network, contingencies, gamma_mw)

    lp = LinearProgram(f"{network.name or 'case'}_{config.variant}_monolithic")
    seg_ids, u0 = _add_dispatch_vars(lp, network)
    B = np.array([network.base_mva / b.reactance_pu for b in network.branches])
    from_b = np.array([b.from_bus for b in network.branches], dtype=np.int64)
    to_b = np.array([b.to_bus for b in network.branches], dtype=np.int64)
    ref = network.reference_bus

    def add_state(tag: str, alive_mask, skip_branch: int | None, limits,
                  inject_terms, state_balance_buses):
        """Angle variables plus nodal balance and flow rows for one state.

        inject_terms: per bus, list of (var_id, coefficient) for the state's
        injection at that bus.
        """
        theta = lp.add_variables(network.n_buses, f"th_{tag}_", -INF, INF, 0.0)
        lp.set_bounds(theta[ref], 0.0, 0.0)
        for b in range(network.n_buses):
            if not alive_mask[b]:
                lp.set_bounds(theta[b], 0.0, 0.0)
        live_branch = []
        for l in range(network.n_branches):
            if l == skip_branch or not (alive_mask[from_b[l]] and alive_mask[to_b[l]]):
                continue
            live_branch.append(l)
            lp.add_row([theta[from_b[l]], theta[to_b[l]]], [B[l], -B[l]],
                       -limits[l], limits[l], f"flow_{tag}_m{l}")
        flow_at = {b: [] for b in range(network.n_buses)}
        for l in live_branch:
            flow_at[from_b[l]].append((l, 1.0))
            flow_at[to_b[l]].append((l, -1.0))
        for b in state_balance_buses:
            idx = [v for v, _ in inject_terms[b]]
            val = [c for _, c in inject_terms[b]]
            for l, s in flow_at[b]:
                idx += [theta[from_b[l]], theta[to_b[l]]]
                val += [-s * B[l], s * B[l]]
            if idx:
                lp.add_row(idx, val, 0.0, 0.0, f"nodal_{tag}_b{b}")
        return theta

    def base_terms():
        terms = {b: [] for b in range(network.n_buses)}
        for g in network.generators:
            for v in seg_ids[g.id]:
                terms[g.bus].append((int(v), 1.0))
        for d in network.demands:
            terms[d.bus].append((int(u0[d.id]), -1.0))
        return terms

    all_alive = np.ones(network.n_buses, dtype=bool)
    normal = np.array([b.limit_normal_mw for b in network.branches])
    theta0 = add_state("base", all_alive, None, normal, base_terms(),
                       range(network.n_buses))

    blocks: dict[tuple[int, str], _StageBlock] = {}
    for cont in contingencies:
        island = set(cont.islanded_buses)
        alive = np.array([b not in island for b in range(network.n_buses)])
        for stage, static in _stage_list(config, cont):
            limits = _stage_limits(network, stage)
            if static:
                block = _static_block(network, seg_ids, u0, cont, stage)
                terms = base_terms()
            else:
                block, _, _ = _add_stage_block(lp, network, seg_ids, u0, cont,
                                               stage, gamma_mw)
                terms = {b: [] for b in range(network.n_buses)}
                for g in network.generators:
                    if g.bus in island:
                        continue
                    for v in seg_ids[g.id]:
                        terms[g.bus].append((int(v), 1.0))
                    terms[g.bus].append((int(block.dplus[g.id]), 1.0))
                    terms[g.bus].append((int(block.dminus[g.id]), -1.0))
                for d in network.demands:
                    if d.bus not in island:
                        terms[d.bus].append((int(block.served[d.id]), -1.0))
            add_state(f"k{cont.branch_id}_{stage}", alive, cont.branch_id, limits,
                      terms, [b for b in range(network.n_buses) if alive[b]])
            blocks[(cont.branch_id, stage)] = block
    return lp, {"seg_ids": seg_ids, "u0": u0, "blocks": blocks,
                "contingencies": contingencies, "theta0": theta0}


def solve_monolithic(network: Network, config: ScopfConfig | None = None) -> ScopfSolution:
    """Solve the all-at-once formulation and extract the same solution shape."""
    config = config or ScopfConfig()
    t0 = time.perf_counter()
    lp, handles = build_monolithic(network, config)
    t_build = time.perf_counter() - t0
    sol = lp.solve(backend=config.lp_backend, feasibility_tol=config.feasibility_tol)
    timings = {"build": t_build, "lp": time.perf_counter() - t0 - t_build,
               "total": time.perf_counter() - t0}
    S = linalg.build_matrices(network)
    return _extract_solution(network, config, S, sol, handles["seg_ids"],
                             handles["u0"], handles["blocks"],
                             handles["contingencies"], [], [], lp,
                             "monolithic", timings)


# ---------------------------------------------------------------------------
# Extraction, serialization, verification
# ---------------------------------------------------------------------------

def _extract_solution(net, config, S, sol, seg_ids, u0, blocks, contingencies,
                      iterations, screen_order, lp, solver, timings) -> ScopfSolution:
    x = sol.x
    segments = [np.maximum(x[ids], 0.0) for ids in seg_ids]
    gen = np.array([s.sum() for s in segments])
    served0 = np.minimum(np.maximum(x[u0], 0.0),
                         np.array([d.p_demand_mw for d in net.demands]))
    inj0 = linalg.bus_injections(net, gen, served0)
    flows0 = linalg.base_flows(S, inj0)

    energy = sum(float(c * v) for g in net.generators
                 for (cap, c), v in zip(g.segments, segments[g.id]))
    base_shed = sum(d.voll_per_mwh * (d.p_demand_mw - served0[d.id])
                    for d in net.demands)

    eoc = 0.0
    outcomes = []
    cons = contingencies if config.variant != "base" else []
    for cont in cons:
        stages = {}
        for stage, _ in _stage_list(config, cont):
            block = blocks.get((cont.branch_id, stage))
            if block is None or block.static:
                dup = np.zeros(len(net.generators))
                ddn = np.zeros(len(net.generators))
                served = served0.copy()
                island_ens = 0.0
            else:
                dup = np.maximum(x[block.dplus], 0.0)
                ddn = np.maximum(x[block.dminus], 0.0)
                served = np.maximum(x[block.served], 0.0)
                island_ens = block.island_ens_mw
            island = set(cont.islanded_buses)
            for d in net.demands:       # islanded service is identically zero
                if d.bus in island:
                    served[d.id] = 0.0
            ens_surv = float(sum(served0[d.id] - served[d.id] for d in net.demands
                                 if d.bus not in island))
            redisp = float(dup.sum() + ddn.sum())
            stages[stage] = StageOutcome(dup, ddn, served,
                                         ens_surv + island_ens, island_ens, redisp)
            eoc += cont.probability * (
                sum(g.redispatch_cost_per_mwh * (dup[g.id] + ddn[g.id])
                    for g in net.generators)
                + sum(d.voll_per_mwh * (served0[d.id] - served[d.id])
                      for d in net.demands if d.bus not in island)
                + sum(d.voll_per_mwh * d.p_demand_mw
                      for d in net.demands if d.bus in island))
        outcomes.append(ContingencyOutcome(cont.branch_id, cont.kind,
                                           cont.islanded_buses, stages))

    return ScopfSolution(
        case=net.name, variant=config.variant, gamma_fraction=config.gamma_fraction,
        solver=solver, status="optimal", objective=float(sol.objective),
        base_energy_cost=float(energy), base_shed_cost=float(base_shed),
        expected_outage_cost=float(eoc), generation_mw=gen,
        generation_segments_mw=[s.tolist() for s in segments],
        served_mw=served0, base_flows_mw=flows0, contingencies=outcomes,
        iterations=iterations, screen_order=list(screen_order),
        lp_vars=lp.n_vars, lp_rows=lp.n_rows,
        total_cuts=sum(r.get("cuts_added", 0) for r in iterations),
        timings=timings)


def solution_to_dict(solution: ScopfSolution) -> dict:
    """JSON-ready dict. Timings are runtime measurements, not results, and are
    deliberately excluded so identical runs serialize identically."""
    out = {
        "format": "scopf-solution",
        "version": 1,
        "case": solution.case,
        "variant": solution.variant,
        "gamma_fraction": solution.gamma_fraction,
        "solver": solution.solver,
        "status": solution.status,
        "objective": solution.objective,
        "base_energy_cost": solution.base_energy_cost,
        "base_shed_cost": solution.base_shed_cost,
        "expected_outage_cost": solution.expected_outage_cost,
        "generation_mw": list(map(float, solution.generation_mw)),
        "generation_segments_mw": solution.generation_segments_mw,
        "served_mw": list(map(float, solution.served_mw)),
        "base_flows_mw": list(map(float, solution.base_flows_mw)),
        "screen_order": solution.screen_order,
        "iterations": solution.iterations,
        "lp_vars": solution.lp_vars,
        "lp_rows": solution.lp_rows,
        "total_cuts": solution.total_cuts,
        "contingencies": [
            {"branch_id": c.branch_id, "kind": c.kind,
             "islanded_buses": list(c.islanded_buses),
             "stages": {
                 name: {"delta_up_mw": list(map(float, st.delta_up_mw)),
                        "delta_down_mw": list(map(float, st.delta_down_mw)),
                        "served_mw": list(map(float, st.served_mw)),
                        "ens_mw": float(st.ens_mw),
                        "island_ens_mw": float(st.island_ens_mw),
                        "redispatch_mw": float(st.redispatch_mw)}
                 for name, st in c.stages.items()}}
            for c in solution.contingencies],
    }
    return out


def to_canonical_json(solution: ScopfSolution) -> str:
    return json.dumps(solution_to_dict(solution), sort_keys=True,
                      separators=(",", ":")) + "\n"


def solution_from_dict(data: dict) -> ScopfSolution:
    if data.get("format") != "scopf-solution":
        raise ValueError("not a scopf-solution document")
    outcomes = []
    for c in data["contingencies"]:
        stages = {
            name: StageOutcome(np.array(st["delta_up_mw"]),
                               np.array(st["delta_down_mw"]),
                               np.array(st["served_mw"]), float(st["ens_mw"]),
                               float(st["island_ens_mw"]), float(st["redispatch_mw"]))
            for name, st in c["stages"].items()}
        outcomes.append(ContingencyOutcome(int(c["branch_id"]), c["kind"],
                                           tuple(c["islanded_buses"]), stages))
    return ScopfSolution(
        case=data["case"], variant=data["variant"],
        gamma_fraction=float(data["gamma_fraction"]), solver=data["solver"],
        status=data["status"], objective=float(data["objective"]),
        base_energy_cost=float(data["base_energy_cost"]),
        base_shed_cost=float(data["base_shed_cost"]),
        expected_outage_cost=float(data["expected_outage_cost"]),
        generation_mw=np.array(data["generation_mw"]),
        generation_segments_mw=data["generation_segments_mw"],
        served_mw=np.array(data["served_mw"]),
        base_flows_mw=np.array(data["base_flows_mw"]),
        contingencies=outcomes, iterations=data["iterations"],
        screen_order=data["screen_order"], lp_vars=int(data["lp_vars"]),
        lp_rows=int(data["lp_rows"]), total_cuts=int(data["total_cuts"]))


@dataclass
class VerificationReport:
    ok: bool
    violations: list
    recomputed_objective: float
    max_flow_excess_mw: float
    max_balance_error_mw: float


def verify_solution(network: Network, solution: ScopfSolution,
                    config: ScopfConfig | None = None,
                    tol_mw: float = 1e-6) -> VerificationReport:
    """Re-audit a solution with the refactorization flow path.

    Every state's flows are recomputed from scratch (method 2), every bound,
    coupling, shedding-cap, and balance condition is rechecked, and the
    objective is rebuilt from first principles. Anything off by more than
    ``tol_mw`` (or 1e-6 relative for the objective) lands in the report.
    """
    config = config or ScopfConfig(variant=solution.variant,
                                   gamma_fraction=solution.gamma_fraction)
    S = linalg.build_matrices(network)
    v: list[dict] = []
    gamma_mw = config.gamma_mw(network)

    def flag(state, kind, element, magnitude):
        v.append({"state": state, "kind": kind, "element": element,
                  "magnitude": float(magnitude)})

    gen = solution.generation_mw
    served0 = solution.served_mw
    for g in network.generators:
        segs = solution.generation_segments_mw[g.id]
        if len(segs) != len(g.segments):
            flag("base", "segment_shape", f"g{g.id}", len(segs))
            continue
        for k, (cap, _) in enumerate(g.segments):
            if segs[k] < -tol_mw or segs[k] > cap + tol_mw:
                flag("base", "segment_bounds", f"g{g.id}s{k}", segs[k])
        if abs(sum(segs) - gen[g.id]) > tol_mw:
            flag("base", "segment_sum", f"g{g.id}", abs(sum(segs) - gen[g.id]))
    for d in network.demands:
        if served0[d.id] < -tol_mw or served0[d.id] > d.p_demand_mw + tol_mw:
            flag("base", "service_bounds", f"d{d.id}", served0[d.id])

    inj0 = linalg.bus_injections(network, gen, served0)
    bal0 = float(inj0.sum())
    max_balance = abs(bal0)
    if abs(bal0) > tol_mw:
        flag("base", "balance", "system", bal0)
    flows0 = linalg.base_flows(S, inj0)
    normal = np.array([b.limit_normal_mw for b in network.branches])
    max_excess = 0.0
    for m in range(network.n_branches):
        excess = abs(flows0[m]) - normal[m]
        max_excess = max(max_excess, excess)
        if excess > tol_mw:
            flag("base", "flow_limit", f"m{m}", excess)

    energy = sum(c * s for g in network.generators
                 for (cap, c), s in zip(g.segments, solution.generation_segments_mw[g.id]))
    base_shed = sum(d.voll_per_mwh * (d.p_demand_mw - served0[d.id])
                    for d in network.demands)
    eoc = 0.0

    outcomes = {c.branch_id: c for c in solution.contingencies}
    cons = contingency_list(network, exclude_islanding=not config.include_islanding) \
        if solution.variant != "base" else []
    for cont in cons:
        out = outcomes.get(cont.branch_id)
        if out is None:
            flag("contingencies", "missing_outcome", f"k{cont.branch_id}", cont.branch_id)
            continue
        if out.kind != cont.kind or tuple(out.islanded_buses) != cont.islanded_buses:
            flag(f"k{cont.branch_id}", "island_classification", "kind", 0.0)
        island = set(cont.islanded_buses)
        for stage, _ in _stage_list(config, cont):
            st = out.stages.get(stage)
            state = f"k{cont.branch_id}_{stage}"
            if st is None:
                flag(state, "missing_stage", stage, 0.0)
                continue
            ramp = np.array([g.ramp_short_mw if stage == "short" else g.ramp_long_mw
                             for g in network.generators])
            for g in network.generators:
                up, dn = st.delta_up_mw[g.id], st.delta_down_mw[g.id]
                if g.bus in island:
                    if abs(up) > tol_mw or abs(dn) > tol_mw:
                        flag(state, "islanded_redispatch", f"g{g.id}", max(abs(up), abs(dn)))
                    continue
                if up < -tol_mw or up > ramp[g.id] + tol_mw:
                    flag(state, "ramp_up", f"g{g.id}", up)
                if dn < -tol_mw or dn > ramp[g.id] + tol_mw:
                    flag(state, "ramp_down", f"g{g.id}", dn)
                total = gen[g.id] + up - dn
                if total < -tol_mw or total > g.capacity_mw + tol_mw:
                    flag(state, "headroom", f"g{g.id}", total)
            ens_surv = 0.0
            for d in network.demands:
                s_val = st.served_mw[d.id]
                if d.bus in island:
                    if abs(s_val) > tol_mw:
                        flag(state, "islanded_service", f"d{d.id}", s_val)
                    continue
                if s_val < -tol_mw or s_val > served0[d.id] + tol_mw:
                    flag(state, "service_coupling", f"d{d.id}", s_val)
                ens_surv += served0[d.id] - s_val
            island_ens = sum(d.p_demand_mw for d in network.demands if d.bus in island)
            if abs(st.island_ens_mw - island_ens) > tol_mw:
                flag(state, "island_ens", "total", st.island_ens_mw - island_ens)
            if abs(st.ens_mw - (ens_surv + island_ens)) > 1e-5:
                flag(state, "ens_accounting", "total", st.ens_mw - (ens_surv + island_ens))
            if ens_surv + island_ens > gamma_mw + tol_mw:
                flag(state, "shed_cap", "gamma", ens_surv + island_ens - gamma_mw)

            gen_k = gen + st.delta_up_mw - st.delta_down_mw
            inj = linalg.bus_injections(network, gen_k, st.served_mw)
            surv_bal = float(sum(inj[b] for b in range(network.n_buses)
                                 if b not in island))
            max_balance = max(max_balance, abs(surv_bal))
            if abs(surv_bal) > tol_mw:
                flag(state, "balance", "survivors", surv_bal)
            flows = contingency_flows(S, cont.branch_id, inj, "refactor", cont).flows_mw
            limits = _stage_limits(network, stage)
            for m in range(network.n_branches):
                if m == cont.branch_id:
                    continue
                excess = abs(flows[m]) - limits[m]
                max_excess = max(max_excess, excess)
                if excess > tol_mw:
                    flag(state, "flow_limit", f"m{m}", excess)
            eoc += cont.probability * (
                sum(g.redispatch_cost_per_mwh *
                    (st.delta_up_mw[g.id] + st.delta_down_mw[g.id])
                    for g in network.generators)
                + sum(d.voll_per_mwh * (served0[d.id] - st.served_mw[d.id])
                      for d in network.demands if d.bus not in island)
                + sum(d.voll_per_mwh * d.p_demand_mw
                      for d in network.demands if d.bus in island))

    recomputed = float(energy + base_shed + eoc)
    scale = max(1.0, abs(recomputed), abs(solution.objective))
    if abs(recomputed - solution.objective) / scale > 1e-6:
        flag("objective", "objective_mismatch", "total",
             recomputed - solution.objective)
    return VerificationReport(ok=not v, violations=v,
                              recomputed_objective=recomputed,
                              max_flow_excess_mw=float(max_excess),
                              max_balance_error_mw=float(max_balance))
