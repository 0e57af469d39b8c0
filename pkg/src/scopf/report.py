"""Files out of a run: delimited tables, rendered figures, a manifest.

Everything here writes to paths the caller chose. Figures render through the
Agg backend so a headless run produces the same artifacts as an interactive
one. Tables are plain delimited text with a header row; the manifest records
what was run, on what input (by content hash), and which files came out.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .network import Network
from .scopf import ScopfConfig, ScopfSolution

MANIFEST_FORMAT = "scopf-run-manifest"


def sha256_path(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_delimited(path, rows: list, fieldnames: list | None = None,
                    delimiter: str = ",") -> None:
    rows = list(rows)
    if fieldnames is None:
        if not rows:
            raise ValueError("cannot infer a header from zero rows")
        fieldnames = list(rows[0].keys())
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fieldnames, delimiter=delimiter)
        w.writeheader()
        for r in rows:
            w.writerow(r)


def solution_tables(network: Network, solution: ScopfSolution) -> dict:
    """The run's tabular views, keyed by file stem."""
    dispatch = [{"generator_id": g.id, "bus": g.bus,
                 "capacity_mw": g.capacity_mw,
                 "dispatch_mw": float(solution.generation_mw[g.id]),
                 "ramp_short_mw": g.ramp_short_mw, "ramp_long_mw": g.ramp_long_mw,
                 "redispatch_cost_per_mwh": g.redispatch_cost_per_mwh}
                for g in network.generators]
    service = [{"demand_id": d.id, "bus": d.bus, "p_demand_mw": d.p_demand_mw,
                "served_mw": float(solution.served_mw[d.id]),
                "shed_mw": d.p_demand_mw - float(solution.served_mw[d.id]),
                "voll_per_mwh": d.voll_per_mwh}
               for d in network.demands]
    flows = [{"branch_id": b.id, "from_bus": b.from_bus, "to_bus": b.to_bus,
              "flow_mw": float(solution.base_flows_mw[b.id]),
              "limit_normal_mw": b.limit_normal_mw,
              "loading_pct": (100.0 * abs(float(solution.base_flows_mw[b.id]))
                              / b.limit_normal_mw
                              if np.isfinite(b.limit_normal_mw) and b.limit_normal_mw > 0
                              else 0.0)}
             for b in network.branches]
    outages = []
    prob = {b.id: b.outage_probability for b in network.branches}
    for c in solution.contingencies:
        for stage, st in sorted(c.stages.items()):
            outages.append({"branch_id": c.branch_id, "kind": c.kind,
                            "stage": stage, "probability": prob[c.branch_id],
                            "ens_mw": st.ens_mw, "island_ens_mw": st.island_ens_mw,
                            "redispatch_mw": st.redispatch_mw})
    iterations = [dict(r) for r in solution.iterations]
    return {"dispatch": dispatch, "service": service, "flows": flows,
            "outages": outages, "iterations": iterations}


def figure_loading(network: Network, solution: ScopfSolution, path) -> None:
    """Pre-contingency loading per branch against the normal rating."""
    limits = np.array([b.limit_normal_mw for b in network.branches])
    flows = np.abs(solution.base_flows_mw)
    with np.errstate(divide="ignore", invalid="ignore"):
        loading = np.where(np.isfinite(limits) & (limits > 0), flows / limits, 0.0)
    fig, ax = plt.subplots(figsize=(max(6, network.n_branches * 0.14), 3.4))
    ax.bar(np.arange(network.n_branches), loading, color="#356a9c", width=0.8)
    ax.axhline(1.0, color="#b33", lw=1.0, ls="--")
    ax.set_xlabel("branch")
    ax.set_ylabel("|flow| / normal rating")
    ax.set_title(f"{solution.case or 'case'}: base-case loading ({solution.variant})")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def figure_convergence(solution: ScopfSolution, path) -> None:
    """Objective trajectory and LP growth over the cutting-plane iterations."""
    its = solution.iterations
    fig, ax = plt.subplots(figsize=(6.0, 3.4))
    if its:
        k = [r["iteration"] for r in its]
        ax.plot(k, [r["objective"] for r in its], "o-", color="#356a9c")
        ax2 = ax.twinx()
        ax2.bar(k, [r["lp_rows"] for r in its], alpha=0.25, color="#888")
        ax2.set_ylabel("LP rows", color="#666")
    ax.set_xlabel("iteration")
    ax.set_ylabel("objective")
    ax.set_title(f"{solution.case or 'case'}: lazy-constraint convergence")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def figure_outage_costs(network: Network, solution: ScopfSolution, path,
                        top: int = 20) -> None:
    """Largest expected post-contingency cost contributions."""
    prob = {b.id: b.outage_probability for b in network.branches}
    voll = np.array([d.voll_per_mwh for d in network.demands])
    rows = []
    for c in solution.contingencies:
        cost = 0.0
        for st in c.stages.values():
            shed = solution.served_mw - st.served_mw
            island = set(c.islanded_buses)
            for d in network.demands:
                if d.bus in island:
                    cost += prob[c.branch_id] * d.voll_per_mwh * d.p_demand_mw
                else:
                    cost += prob[c.branch_id] * voll[d.id] * max(0.0, shed[d.id])
            for g in network.generators:
                cost += prob[c.branch_id] * g.redispatch_cost_per_mwh * (
                    st.delta_up_mw[g.id] + st.delta_down_mw[g.id])
        rows.append((c.branch_id, cost))
    rows.sort(key=lambda t: (-t[1], t[0]))
    rows = rows[:top]
    fig, ax = plt.subplots(figsize=(6.0, 3.4))
    if rows:
        ax.bar(range(len(rows)), [r[1] for r in rows], color="#356a9c")
        ax.set_xticks(range(len(rows)))
        ax.set_xticklabels([str(r[0]) for r in rows], rotation=90, fontsize=7)
    ax.set_xlabel("outaged branch")
    ax.set_ylabel("expected cost")
    ax.set_title(f"{solution.case or 'case'}: outage cost contributions")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def figure_method_times(bench, path) -> None:
    """Per-outage update time against refactorization time, log-log."""
    rows = bench.rows
    fig, ax = plt.subplots(figsize=(4.6, 4.2))
    th_u = [r.t_theta_update_s for r in rows]
    th_r = [r.t_theta_refactor_s for r in rows]
    rw_u = [r.t_row_update_s for r in rows]
    rw_r = [r.t_row_refactor_s for r in rows]
    ax.loglog(th_r, th_u, "o", ms=3.5, alpha=0.6, label="angle solution")
    ax.loglog(rw_r, rw_u, "s", ms=3.5, alpha=0.6, label="sensitivity row")
    lo = min(min(th_u), min(th_r), min(rw_u), min(rw_r))
    hi = max(max(th_u), max(th_r), max(rw_u), max(rw_r))
    ax.loglog([lo, hi], [lo, hi], "k--", lw=0.8, label="equal time")
    ax.set_xlabel("refactorization (s)")
    ax.set_ylabel("rank-one update (s)")
    ax.set_title(f"outage evaluation, {bench.n_buses} buses")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_report(network: Network, solution: ScopfSolution, outdir,
                  config: ScopfConfig | None = None, bench=None,
                  case_path=None) -> dict:
    """Write every table and figure for one run, then the manifest.

    Returns the manifest dict. The manifest carries content hashes of the
    input file (when the case came from one) and of every produced file.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    produced = []

    for stem, rows in solution_tables(network, solution).items():
        if not rows:
            continue
        p = outdir / f"{stem}.csv"
        write_delimited(p, rows)
        produced.append(p)

    p = outdir / "solution.json"
    from .scopf import to_canonical_json
    p.write_text(to_canonical_json(solution))
    produced.append(p)

    figure_loading(network, solution, outdir / "loading.png")
    produced.append(outdir / "loading.png")
    figure_convergence(solution, outdir / "convergence.png")
    produced.append(outdir / "convergence.png")
    if solution.contingencies:
        figure_outage_costs(network, solution, outdir / "outage_costs.png")
        produced.append(outdir / "outage_costs.png")
    if bench is not None:
        write_delimited(outdir / "method_times.csv", bench.as_dicts())
        produced.append(outdir / "method_times.csv")
        figure_method_times(bench, outdir / "method_times.png")
        produced.append(outdir / "method_times.png")

    manifest = {
        "format": MANIFEST_FORMAT,
        "version": 1,
        "case": network.name,
        "n_buses": network.n_buses,
        "n_branches": network.n_branches,
        "variant": solution.variant,
        "solver": solution.solver,
        "objective": solution.objective,
        "config": dataclasses.asdict(config) if config is not None else None,
        "input_sha256": sha256_path(case_path) if case_path else None,
        "timings_s": dict(solution.timings),
        "outputs": {p.name: sha256_path(p) for p in sorted(produced)},
    }
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=1,
                                                     sort_keys=True) + "\n")
    return manifest
