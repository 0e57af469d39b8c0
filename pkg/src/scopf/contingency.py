"""Single-branch outage analysis: islanding classification and four
evaluation methods.

Methods 1 and 3 update the cached base-case factorization with rank-one
identities (angles and PTDF rows respectively); methods 2 and 4 rebuild and
refactorize the post-outage matrix from scratch. The slow pair is the
correctness oracle for the fast pair, and the fast pair's budgets are strict:
method 1 costs at most one new solve (zero when the injection vector is
already cached), method 3 at most four inverse columns.

A single branch outage leaves the network whole ("none") or splits exactly one
group of buses away from the reference ("radial_isolation"). The islanded
group is grounded at angle zero, its internal flows are exactly zero, and its
injections do not reach the surviving system. "multi_split" exists in the
vocabulary for completeness but cannot be produced by removing one branch.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import IslandingError, SingularUpdateError
from .linalg import SystemMatrices
from .network import Network

SINGULAR_TOL = 1e-12

KIND_NONE = "none"
KIND_RADIAL = "radial_isolation"
KIND_MULTI = "multi_split"


@dataclass(frozen=True)
class Contingency:
    branch_id: int
    kind: str
    islanded_buses: tuple[int, ...]
    probability: float


@dataclass(frozen=True)
class ContingencyFlows:
    branch_out: int
    kind: str
    islanded_buses: tuple[int, ...]
    theta: np.ndarray
    flows_mw: np.ndarray


def _reached_without_branch(n_buses: int, from_bus, to_bus, skip_branch: int,
                            start: int) -> np.ndarray:
    """Bool mask of buses reachable from `start` with one branch removed."""
    adj: list[list[int]] = [[] for _ in range(n_buses)]
    for l in range(len(from_bus)):
        if l == skip_branch:
            continue
        a, b = int(from_bus[l]), int(to_bus[l])
        adj[a].append(b)
        adj[b].append(a)
    seen = np.zeros(n_buses, dtype=bool)
    seen[start] = True
    q = deque([start])
    while q:
        u = q.popleft()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                q.append(v)
    return seen


def detect_islanding(source: Network | SystemMatrices, branch_id: int,
                     reference: int | None = None) -> tuple[str, tuple[int, ...]]:
    """Classify the outage of one branch.

    Returns ``(kind, islanded_buses)`` where the islanded set is the group cut
    off from the reference bus, sorted ascending; empty when the network stays
    whole. Assumes the intact network is connected.
    """
    if isinstance(source, Network):
        n = source.n_buses
        from_bus = [b.from_bus for b in source.branches]
        to_bus = [b.to_bus for b in source.branches]
        ref = source.reference_bus if reference is None else reference
    else:
        n = source.n_buses
        from_bus, to_bus = source.from_bus, source.to_bus
        ref = source.reference if reference is None else reference
    if not 0 <= branch_id < len(from_bus):
        raise ValueError(f"branch {branch_id} out of range")
    seen = _reached_without_branch(n, from_bus, to_bus, branch_id, ref)
    if seen.all():
        return KIND_NONE, ()
    return KIND_RADIAL, tuple(int(b) for b in np.flatnonzero(~seen))


def _bridges(n_buses: int, from_bus, to_bus) -> set[int]:
    """Branch ids whose removal disconnects the graph. Iterative lowpoint DFS;
    parallel branches disqualify each other correctly because traversal skips
    only the branch id it arrived on."""
    adj: list[list[tuple[int, int]]] = [[] for _ in range(n_buses)]
    for l in range(len(from_bus)):
        a, b = int(from_bus[l]), int(to_bus[l])
        adj[a].append((b, l))
        adj[b].append((a, l))
    disc = [-1] * n_buses
    low = [0] * n_buses
    out: set[int] = set()
    timer = 0
    for root in range(n_buses):
        if disc[root] != -1:
            continue
        stack = [(root, -1, iter(adj[root]))]
        disc[root] = low[root] = timer
        timer += 1
        while stack:
            u, in_edge, it = stack[-1]
            advanced = False
            for v, l in it:
                if l == in_edge:
                    continue
                if disc[v] == -1:
                    disc[v] = low[v] = timer
                    timer += 1
                    stack.append((v, l, iter(adj[v])))
                    advanced = True
                    break
                low[u] = min(low[u], disc[v])
            if not advanced:
                stack.pop()
                if stack:
                    parent = stack[-1][0]
                    low[parent] = min(low[parent], low[u])
                    if low[u] > disc[parent]:
                        out.add(in_edge)
        # restart the parent's iterator state is preserved by the explicit stack
    return out


def contingency_list(network: Network, *, branch_ids=None,
                     exclude_islanding: bool = False) -> list[Contingency]:
    """All single-branch contingencies, classified, ordered by branch id.

    Bridge detection runs once for the whole network; only actual bridges pay
    for a component search.
    """
    from_bus = [b.from_bus for b in network.branches]
    to_bus = [b.to_bus for b in network.branches]
    ref = network.reference_bus
    bridge_ids = _bridges(network.n_buses, from_bus, to_bus)
    ids = range(network.n_branches) if branch_ids is None else sorted(branch_ids)
    out = []
    for l in ids:
        if l in bridge_ids:
            seen = _reached_without_branch(network.n_buses, from_bus, to_bus, l, ref)
            kind, islanded = KIND_RADIAL, tuple(int(b) for b in np.flatnonzero(~seen))
        else:
            kind, islanded = KIND_NONE, ()
        if exclude_islanding and kind != KIND_NONE:
            continue
        out.append(Contingency(l, kind, islanded, network.branches[l].outage_probability))
    return out


# ---------------------------------------------------------------------------
# Method 1: angles by rank-one update of the cached factorization
# ---------------------------------------------------------------------------

def _whole_network_update(S: SystemMatrices, branch: int, theta_ref: np.ndarray) -> np.ndarray:
    i, j = int(S.from_bus[branch]), int(S.to_bus[branch])
    d = S.inverse_column(i) - S.inverse_column(j)
    denom = S.reactance_pu[branch] - (d[i] - d[j])
    if abs(denom) < SINGULAR_TOL:
        raise SingularUpdateError(
            f"outage of branch {branch} makes the update singular; the branch is a bridge "
            "and must go through the islanding path")
    return theta_ref + d * ((theta_ref[i] - theta_ref[j]) / denom)


def _island_update_coeffs(S: SystemMatrices, branch: int,
                          islanded: tuple[int, ...]) -> tuple[int, np.ndarray, float]:
    """Shared scalars for the islanding variants of methods 1 and 3.

    Returns ``(i_surv, col_i, gain)`` such that adding
    ``col_i * gain * y[i_surv]`` to a zeroed-island solution y corrects for the
    grounding leg the vanished bridge leaves behind. ``gain`` is 0 when the
    surviving endpoint is the reference (the leg sits outside the reduced
    matrix and there is nothing to correct).
    """
    i, j = int(S.from_bus[branch]), int(S.to_bus[branch])
    island = set(islanded)
    if (i in island) == (j in island):
        raise IslandingError(f"branch {branch} does not straddle the islanded set")
    i_surv, j_isl = (i, j) if j in island else (j, i)
    if i_surv == S.reference:
        return i_surv, np.zeros(S.n_buses), 0.0
    col_i = S.inverse_column(i_surv)
    x_ii = col_i[i_surv]
    x_ij = col_i[j_isl]
    denom = S.reactance_pu[branch] - (x_ii - x_ij)
    if abs(denom) < SINGULAR_TOL or x_ii < SINGULAR_TOL:
        raise SingularUpdateError(
            f"islanding update for branch {branch} hit a singular denominator")
    gain = (x_ii - x_ij) / (x_ii * denom)
    return i_surv, col_i, gain


def method1_theta(S: SystemMatrices, branch: int, injections_mw: np.ndarray,
                  contingency: Contingency | None = None) -> np.ndarray:
    """Post-outage angles from the base factorization, no refactorization.

    Cost: one cached solve for the injection vector (zero if already seen) and
    the update's inverse columns (zero once warm). Islanding outages zero the
    islanded injections, solve on the intact matrix, and strip the grounding
    leg with one more rank-one term; islanded buses land at exactly zero.
    """
    if contingency is None:
        kind, islanded = detect_islanding(S, branch)
    else:
        kind, islanded = contingency.kind, contingency.islanded_buses
    if kind == KIND_NONE:
        return _whole_network_update(S, branch, S.theta(injections_mw))
    if kind != KIND_RADIAL:
        raise IslandingError(f"cannot evaluate kind {kind!r} from a single branch outage")
    p = np.asarray(injections_mw, dtype=float).copy()
    p[list(islanded)] = 0.0
    theta_z = S.theta(p)
    i_surv, col_i, gain = _island_update_coeffs(S, branch, islanded)
    theta = theta_z + col_i * (gain * theta_z[i_surv])
    theta[list(islanded)] = 0.0
    return theta


# ---------------------------------------------------------------------------
# Method 2: angles by full rebuild and refactorization (oracle for method 1)
# ---------------------------------------------------------------------------

def _post_outage_lu(S: SystemMatrices, branch: int, islanded: tuple[int, ...]):
    """Fresh LU of the post-outage matrix on the surviving non-reference buses."""
    alive = np.ones(S.n_buses, dtype=bool)
    if islanded:
        alive[list(islanded)] = False
    keep = np.array([b for b in range(S.n_buses) if alive[b] and b != S.reference],
                    dtype=np.int64)
    pos = np.full(S.n_buses, -1, dtype=np.int64)
    pos[keep] = np.arange(len(keep))
    mask = alive[S.from_bus] & alive[S.to_bus]
    mask[branch] = False
    f = pos[S.from_bus[mask]]
    t = pos[S.to_bus[mask]]
    b = S.susceptance_pu[mask]
    n_red = len(keep)
    rows, cols, vals = [], [], []
    live_f, live_t = f >= 0, t >= 0
    both = live_f & live_t
    rows.append(f[live_f]); cols.append(f[live_f]); vals.append(b[live_f])
    rows.append(t[live_t]); cols.append(t[live_t]); vals.append(b[live_t])
    rows.append(f[both]); cols.append(t[both]); vals.append(-b[both])
    rows.append(t[both]); cols.append(f[both]); vals.append(-b[both])
    H_k = sp.coo_matrix((np.concatenate(vals),
                         (np.concatenate(rows), np.concatenate(cols))),
                        shape=(n_red, n_red)).tocsc()
    return spla.splu(H_k), keep, pos


def method2_theta(S: SystemMatrices, branch: int, injections_mw: np.ndarray,
                  contingency: Contingency | None = None) -> np.ndarray:
    """Post-outage angles the expensive, assumption-free way."""
    if contingency is None:
        kind, islanded = detect_islanding(S, branch)
    else:
        kind, islanded = contingency.kind, contingency.islanded_buses
    lu, keep, _ = _post_outage_lu(S, branch, islanded)
    p = np.asarray(injections_mw, dtype=float)
    theta = np.zeros(S.n_buses)
    if len(keep):
        theta[keep] = lu.solve(p[keep] / S.base_mva)
    return theta


# ---------------------------------------------------------------------------
# Methods 3 and 4: post-outage PTDF rows
# ---------------------------------------------------------------------------

def method3_ptdf_row(S: SystemMatrices, branch_out: int, branch_mon: int,
                     contingency: Contingency | None = None) -> np.ndarray:
    """Post-outage flow sensitivity of one monitored branch, no refactorization.

    Consumes at most four inverse columns (three under islanding), all served
    from the cache once warm. The row for the outaged branch itself, or for a
    branch inside the island, is identically zero.
    """
    if contingency is None:
        kind, islanded = detect_islanding(S, branch_out)
    else:
        kind, islanded = contingency.kind, contingency.islanded_buses
    if branch_mon == branch_out:
        return np.zeros(S.n_buses)
    n, o = int(S.from_bus[branch_mon]), int(S.to_bus[branch_mon])
    b_m = S.susceptance_pu[branch_mon]
    if kind == KIND_NONE:
        i, j = int(S.from_bus[branch_out]), int(S.to_bus[branch_out])
        d = S.inverse_column(i) - S.inverse_column(j)
        denom = S.reactance_pu[branch_out] - (d[i] - d[j])
        if abs(denom) < SINGULAR_TOL:
            raise SingularUpdateError(
                f"outage of branch {branch_out} makes the update singular; it is a bridge "
                "and must go through the islanding path")
        beta = (d[n] - d[o]) / denom
        return b_m * ((S.inverse_column(n) - S.inverse_column(o)) + beta * d)
    if kind != KIND_RADIAL:
        raise IslandingError(f"cannot evaluate kind {kind!r} from a single branch outage")
    island = set(islanded)
    if n in island or o in island:
        return np.zeros(S.n_buses)
    i_surv, col_i, gain = _island_update_coeffs(S, branch_out, islanded)
    base = S.inverse_column(n) - S.inverse_column(o)
    row = b_m * (base + col_i * (gain * base[i_surv]))
    if islanded:
        row[list(islanded)] = 0.0
    return row


def method4_ptdf_row(S: SystemMatrices, branch_out: int, branch_mon: int,
                     contingency: Contingency | None = None) -> np.ndarray:
    """Post-outage PTDF row by refactorization (oracle for method 3)."""
    if contingency is None:
        kind, islanded = detect_islanding(S, branch_out)
    else:
        kind, islanded = contingency.kind, contingency.islanded_buses
    if branch_mon == branch_out:
        return np.zeros(S.n_buses)
    n, o = int(S.from_bus[branch_mon]), int(S.to_bus[branch_mon])
    island = set(islanded)
    if n in island or o in island:
        return np.zeros(S.n_buses)
    lu, keep, pos = _post_outage_lu(S, branch_out, islanded)
    row = np.zeros(S.n_buses)
    if len(keep) == 0:
        return row
    rhs = np.zeros(len(keep))
    if pos[n] >= 0:
        rhs[pos[n]] = 1.0
    if pos[o] >= 0:
        rhs[pos[o]] -= 1.0
    if not rhs.any():
        return row
    row[keep] = lu.solve(rhs)
    return S.susceptance_pu[branch_mon] * row


def contingency_flows(S: SystemMatrices, branch: int, injections_mw: np.ndarray,
                      method: str = "update",
                      contingency: Contingency | None = None) -> ContingencyFlows:
    """All branch flows after one outage, via the fast or the oracle path.

    The outaged branch reports exactly zero flow; branches inside an island
    inherit zero from the zero island angles.
    """
    if contingency is None:
        kind, islanded = detect_islanding(S, branch)
        contingency = Contingency(branch, kind, islanded, 0.0)
    if method == "update":
        theta = method1_theta(S, branch, injections_mw, contingency)
    elif method == "refactor":
        theta = method2_theta(S, branch, injections_mw, contingency)
    else:
        raise ValueError(f"unknown method {method!r}")
    flows = S.flows_mw(theta)
    flows[branch] = 0.0
    return ContingencyFlows(branch, contingency.kind, contingency.islanded_buses,
                            theta, flows)


@dataclass(frozen=True)
class ScreenRecord:
    contingency: Contingency
    max_ratio: float
    worst_branch: int


def screen_and_rank(network: Network, S: SystemMatrices, injections_mw: np.ndarray,
                    contingencies: list[Contingency]) -> list[ScreenRecord]:
    """Rank contingencies by worst post-outage loading against short-term ratings.

    Ratio is |flow| / short rating over surviving finite-rated branches.
    Descending by ratio, ties broken by ascending branch id, so the order is
    reproducible across runs.
    """
    limits = np.array([b.limit_short_mw for b in network.branches])
    finite = np.isfinite(limits)
    records = []
    for c in contingencies:
        res = contingency_flows(S, c.branch_id, injections_mw, "update", c)
        ratio = np.zeros(S.n_branches)
        np.divide(np.abs(res.flows_mw), limits, out=ratio, where=finite)
        ratio[c.branch_id] = 0.0
        worst = int(np.argmax(ratio))
        records.append(ScreenRecord(c, float(ratio[worst]), worst))
    records.sort(key=lambda r: (-r.max_ratio, r.contingency.branch_id))
    return records
