"""Parameter studies over the corrective dispatch model.

Three standard experiments:

- `sample_and_run` draws per-branch outage-probability multipliers and solves
  each perturbed case, exposing the hedging trade: dispatches that spend more
  before the fault shed less after it.
- `voll_sweep` scales the value of lost load and solves all variants, showing
  the corrective objective climb from the unconstrained dispatch toward the
  preventive one as shedding gets expensive.
- `gamma_sweep` relaxes the per-state shedding cap, which can only help.

All randomness comes from one seeded generator, so a study is reproducible
from its (network, seed, n_samples) triple.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .errors import LPInfeasibleError
from .network import Network
from .scopf import VARIANTS, ScopfConfig, ScopfSolution, solve_scopf


def scale_outage_probabilities(network: Network, multipliers) -> Network:
    mult = np.asarray(multipliers, dtype=float)
    if mult.shape == ():
        mult = np.full(network.n_branches, float(mult))
    if mult.shape != (network.n_branches,):
        raise ValueError("need one multiplier per branch")
    branches = tuple(
        dataclasses.replace(b, outage_probability=b.outage_probability * mult[b.id])
        for b in network.branches)
    return dataclasses.replace(network, branches=branches)


def scale_voll(network: Network, multiplier: float) -> Network:
    demands = tuple(dataclasses.replace(d, voll_per_mwh=d.voll_per_mwh * multiplier)
                    for d in network.demands)
    return dataclasses.replace(network, demands=demands)


def _stage_ens_mw(solution: ScopfSolution, stage: str) -> float:
    """Physical MW shed across all outages at one stage, unweighted by
    probability. The hedging indicator: it falls when the dispatch pays more
    up front."""
    return sum(c.stages[stage].ens_mw for c in solution.contingencies
               if stage in c.stages)


@dataclass
class SensitivityStudy:
    seed: int
    n_samples: int
    low: float
    high: float
    samples: list = field(default_factory=list)

    def column(self, key: str) -> np.ndarray:
        return np.array([s[key] for s in self.samples])

    def correlation(self, a: str, b: str) -> float:
        xa, xb = self.column(a), self.column(b)
        if xa.std() == 0.0 or xb.std() == 0.0:
            raise ValueError(f"no variation in {a if xa.std() == 0 else b}; "
                             "correlation is undefined on this case")
        return float(np.corrcoef(xa, xb)[0, 1])


def sample_and_run(network: Network, n_samples: int = 100, seed: int = 0,
                   config: ScopfConfig | None = None, low: float = 0.1,
                   high: float = 10.0) -> SensitivityStudy:
    """Solve the case under log-uniform outage-probability multipliers."""
    if low <= 0 or high <= low:
        raise ValueError("need 0 < low < high")
    config = config or ScopfConfig()
    rng = np.random.default_rng(seed)
    study = SensitivityStudy(seed, n_samples, low, high)
    lo, hi = np.log10(low), np.log10(high)
    for k in range(n_samples):
        mult = 10.0 ** rng.uniform(lo, hi, size=network.n_branches)
        sol = solve_scopf(scale_outage_probabilities(network, mult), config)
        study.samples.append({
            "sample": k,
            "mean_multiplier": float(mult.mean()),
            "objective": sol.objective,
            "base_cost": sol.base_energy_cost + sol.base_shed_cost,
            "expected_outage_cost": sol.expected_outage_cost,
            "ens_short_mw": _stage_ens_mw(sol, "short"),
            "ens_long_mw": _stage_ens_mw(sol, "long"),
        })
    return study


def voll_sweep(network: Network, multipliers, config: ScopfConfig | None = None,
               variants=VARIANTS) -> list:
    """Objective and pre-fault cost of each variant as the value of lost load
    scales. The pre-fault cost is where the hedging shows: the corrective
    dispatch drifts from the unconstrained one toward the preventive one."""
    config = config or ScopfConfig()
    rows = []
    for m in multipliers:
        net_m = scale_voll(network, float(m))
        row = {"voll_multiplier": float(m)}
        for variant in variants:
            cfg = dataclasses.replace(config, variant=variant)
            sol = solve_scopf(net_m, cfg)
            row[f"objective_{variant}"] = sol.objective
            row[f"base_cost_{variant}"] = sol.base_energy_cost + sol.base_shed_cost
        rows.append(row)
    return rows


def gamma_sweep(network: Network, fractions, config: ScopfConfig | None = None) -> list:
    """Objective as the per-state shedding cap relaxes. Caps too tight for an
    unavoidable island show up as infeasible rows, not exceptions."""
    config = config or ScopfConfig()
    rows = []
    for f in fractions:
        cfg = dataclasses.replace(config, gamma_fraction=float(f))
        row = {"gamma_fraction": float(f)}
        try:
            sol = solve_scopf(network, cfg)
            row["status"] = "optimal"
            row["objective"] = sol.objective
        except LPInfeasibleError as exc:
            row["status"] = "infeasible"
            row["objective"] = None
            row["diagnosis"] = exc.diagnosis
        rows.append(row)
    return rows
