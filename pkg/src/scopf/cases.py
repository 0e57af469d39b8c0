"""Built-in study cases and synthetic fixture generation.

`ieee_rts24` is the 24-bus reliability test system with explicit reliability
and cost data (three thermal ratings per branch, per-branch outage
probabilities, piecewise generator curves, two ramp budgets, per-demand value
of lost load). Bus 7 hangs on the single 7-8 circuit, so that outage islands
125 MW of load; it is the canonical islanding fixture.

`synthetic_grid` draws reproducible meshed networks of any size from a seed:
a locality-biased spanning tree plus chords, merit-order-sized thermal
ratings, and small leaf loads so islanding outages stay survivable under
tight shedding caps.
"""

from __future__ import annotations

import numpy as np

from . import linalg
from .errors import CaseParseError
from .network import Branch, Bus, Demand, Generator, Network

# (normal, long-term, short-term) MW ratings per RTS branch class
_RATINGS = {
    "line138": (175.0, 193.0, 208.0),
    "cable": (175.0, 220.0, 250.0),
    "xfmr": (400.0, 510.0, 600.0),
    "line230": (500.0, 600.0, 625.0),
}

# from, to (1-based), reactance (pu), class, outage probability
_RTS_BRANCHES = [
    (1, 2, 0.0139, "cable", 0.00110),
    (1, 3, 0.2112, "line138", 0.00058),
    (1, 5, 0.0845, "line138", 0.00037),
    (2, 4, 0.1267, "line138", 0.00047),
    (2, 6, 0.1920, "line138", 0.00054),
    (3, 9, 0.1190, "line138", 0.00044),
    (3, 24, 0.0839, "xfmr", 0.00175),
    (4, 9, 0.1037, "line138", 0.00041),
    (5, 10, 0.0883, "line138", 0.00038),
    (6, 10, 0.0605, "cable", 0.00095),
    (7, 8, 0.0614, "line138", 0.00045),
    (8, 9, 0.1651, "line138", 0.00051),
    (8, 10, 0.1651, "line138", 0.00051),
    (9, 11, 0.0839, "xfmr", 0.00175),
    (9, 12, 0.0839, "xfmr", 0.00175),
    (10, 11, 0.0839, "xfmr", 0.00175),
    (10, 12, 0.0839, "xfmr", 0.00175),
    (11, 13, 0.0476, "line230", 0.00049),
    (11, 14, 0.0418, "line230", 0.00047),
    (12, 13, 0.0476, "line230", 0.00049),
    (12, 23, 0.0966, "line230", 0.00055),
    (13, 23, 0.0865, "line230", 0.00053),
    (14, 16, 0.0389, "line230", 0.00046),
    (15, 16, 0.0173, "line230", 0.00041),
    (15, 21, 0.0490, "line230", 0.00049),
    (15, 21, 0.0490, "line230", 0.00049),
    (15, 24, 0.0519, "line230", 0.00050),
    (16, 17, 0.0259, "line230", 0.00043),
    (16, 19, 0.0231, "line230", 0.00042),
    (17, 18, 0.0144, "line230", 0.00040),
    (17, 22, 0.1053, "line230", 0.00056),
    (18, 21, 0.0259, "line230", 0.00043),
    (18, 21, 0.0259, "line230", 0.00043),
    (19, 20, 0.0396, "line230", 0.00046),
    (19, 20, 0.0396, "line230", 0.00046),
    (20, 23, 0.0216, "line230", 0.00042),
    (20, 23, 0.0216, "line230", 0.00042),
    (21, 22, 0.0678, "line230", 0.00052),
]

_RTS_LOADS = {
    1: 108.0, 2: 97.0, 3: 180.0, 4: 74.0, 5: 71.0, 6: 136.0, 7: 125.0,
    8: 171.0, 9: 175.0, 10: 195.0, 13: 265.0, 14: 194.0, 15: 317.0,
    16: 100.0, 18: 333.0, 19: 181.0, 20: 128.0,
}

_RTS_VOLL = {
    1: 9000.0, 2: 8500.0, 3: 7000.0, 4: 9500.0, 5: 8800.0, 6: 7600.0,
    7: 11000.0, 8: 8200.0, 9: 7800.0, 10: 8000.0, 13: 12000.0, 14: 9200.0,
    15: 6800.0, 16: 10500.0, 18: 7400.0, 19: 8600.0, 20: 9800.0,
}

# segments (capacity MW, $/MWh), short/long ramp budgets MW, redispatch $/MWh
_UNIT_TYPES = {
    "U12": (((4.8, 51.5), (3.6, 56.0), (3.6, 61.6)), 12.0, 12.0, 70.0),
    "U20": (((8.0, 119.6), (6.0, 130.0), (6.0, 143.0)), 20.0, 20.0, 150.0),
    "U50": (((50.0, 0.5),), 50.0, 50.0, 5.0),
    "U76": (((30.4, 14.7), (22.8, 16.0), (22.8, 17.6)), 30.0, 76.0, 22.0),
    "U100": (((40.0, 39.6), (30.0, 43.0), (30.0, 47.3)), 100.0, 100.0, 55.0),
    "U155": (((62.0, 11.0), (46.5, 12.0), (46.5, 13.2)), 45.0, 155.0, 17.0),
    "U197": (((78.8, 44.2), (59.1, 48.0), (59.1, 52.8)), 45.0, 197.0, 60.0),
    "U350": (((140.0, 10.9), (105.0, 11.8), (105.0, 13.0)), 60.0, 350.0, 16.0),
    "U400": (((160.0, 4.0), (120.0, 4.4), (120.0, 4.8)), 120.0, 400.0, 9.0),
}

_RTS_UNITS = [
    (1, "U20"), (1, "U20"), (1, "U76"), (1, "U76"),
    (2, "U20"), (2, "U20"), (2, "U76"), (2, "U76"),
    (7, "U100"), (7, "U100"), (7, "U100"),
    (13, "U197"), (13, "U197"), (13, "U197"),
    (15, "U12"), (15, "U12"), (15, "U12"), (15, "U12"), (15, "U12"), (15, "U155"),
    (16, "U155"),
    (18, "U400"),
    (21, "U400"),
    (22, "U50"), (22, "U50"), (22, "U50"), (22, "U50"), (22, "U50"), (22, "U50"),
    (23, "U155"), (23, "U155"), (23, "U350"),
]

_RTS_REFERENCE = 13  # 1-based


def ieee_rts24() -> Network:
    """The 24-bus reliability test system with full reliability data attached."""
    buses = tuple(Bus(i, is_reference=(i == _RTS_REFERENCE - 1)) for i in range(24))
    branches = tuple(
        Branch(l, f - 1, t - 1, x, _RATINGS[cls][0], _RATINGS[cls][2], _RATINGS[cls][1], pi)
        for l, (f, t, x, cls, pi) in enumerate(_RTS_BRANCHES))
    generators = tuple(
        Generator(i, bus - 1, _UNIT_TYPES[u][0], _UNIT_TYPES[u][1], _UNIT_TYPES[u][2],
                  _UNIT_TYPES[u][3])
        for i, (bus, u) in enumerate(_RTS_UNITS))
    demands = tuple(
        Demand(i, bus - 1, mw, _RTS_VOLL[bus])
        for i, (bus, mw) in enumerate(sorted(_RTS_LOADS.items())))
    return Network(buses, branches, generators, demands, base_mva=100.0, name="ieee_rts24")


def merit_order_dispatch(network: Network, demand_mw: float | None = None) -> np.ndarray:
    """Per-generator MW from cheapest-first segment filling, ignoring the grid.

    Serves min(total demand, total capacity). Deterministic tie order: cost,
    then generator id, then segment position.
    """
    target = network.total_demand_mw() if demand_mw is None else demand_mw
    target = min(target, network.total_capacity_mw())
    segs = sorted(
        ((cost, g.id, k, cap) for g in network.generators
         for k, (cap, cost) in enumerate(g.segments)),
        key=lambda t: (t[0], t[1], t[2]))
    out = np.zeros(len(network.generators))
    remaining = target
    for _, gid, _, cap in segs:
        if remaining <= 0.0:
            break
        take = min(cap, remaining)
        out[gid] += take
        remaining -= take
    return out


def nominal_injections(network: Network) -> np.ndarray:
    """Bus injections for the merit-order dispatch serving every demand."""
    gen = merit_order_dispatch(network)
    served = np.array([d.p_demand_mw for d in network.demands])
    return linalg.bus_injections(network, gen, served)


def synthetic_grid(n_buses: int, seed: int, *, extra_edge_fraction: float = 0.35,
                   parallel_fraction: float = 0.05, load_bus_fraction: float = 0.55,
                   gen_bus_fraction: float = 0.25, mw_per_bus: float = 8.0,
                   capacity_margin: float = 1.35, rating_slack: float = 1.12,
                   name: str = "") -> Network:
    """Reproducible random meshed network sized so its base case is feasible.

    Construction: a spanning tree with locality-biased attachment, plus
    ``extra_edge_fraction * (n-1)`` chords drawn within a short bus-index
    window (a few become parallel circuits). Ratings are set at
    ``rating_slack`` times the merit-order base flows with a floor, so the
    base case fits but outage redistribution has something to violate. Leaf
    buses carry deliberately small loads so single islands stay under a few
    percent of system load.
    """
    if n_buses < 4:
        raise ValueError("synthetic grids need at least 4 buses")
    rng = np.random.default_rng(seed)
    edges: list[tuple[int, int]] = []
    edge_set = set()
    for k in range(1, n_buses):
        parent = int(rng.integers(max(0, k - 8), k))
        edges.append((parent, k))
        edge_set.add((parent, k))
    n_extra = int(round(extra_edge_fraction * (n_buses - 1)))
    for _ in range(n_extra):
        a = int(rng.integers(0, n_buses))
        off = int(rng.integers(1, 13))
        b = min(a + off, n_buses - 1)
        if a == b:
            continue
        key = (min(a, b), max(a, b))
        if key in edge_set and rng.random() > parallel_fraction:
            continue
        edges.append(key)
        edge_set.add(key)
    m = len(edges)
    reactance = rng.uniform(0.02, 0.12, size=m)

    degree = np.zeros(n_buses, dtype=int)
    for a, b in edges:
        degree[a] += 1
        degree[b] += 1
    leaves = degree == 1

    load_weight = np.zeros(n_buses)
    load_weight[leaves] = rng.uniform(0.15, 0.45, size=int(leaves.sum()))
    interior = ~leaves
    picked = rng.random(n_buses) < load_bus_fraction
    sel = interior & picked
    load_weight[sel] = rng.uniform(0.5, 2.0, size=int(sel.sum()))
    if load_weight.sum() <= 0.0:
        load_weight[0] = 1.0
    load_mw = load_weight * (mw_per_bus * n_buses / load_weight.sum())

    gen_pick = rng.random(n_buses) < gen_bus_fraction
    gen_pick[0] = True
    gen_buses = np.flatnonzero(gen_pick)
    weights = rng.uniform(0.5, 2.0, size=len(gen_buses))
    caps = weights * (capacity_margin * load_mw.sum() / weights.sum())
    marginals = rng.uniform(8.0, 45.0, size=len(gen_buses))
    ramp_frac = rng.uniform(0.15, 0.35, size=len(gen_buses))
    redisp = marginals * rng.uniform(1.2, 2.0, size=len(gen_buses))
    reference = int(gen_buses[int(np.argmax(caps))])

    volls = rng.uniform(4000.0, 12000.0, size=n_buses)
    probs = 10.0 ** rng.uniform(-4.0, -2.5, size=m)
    long_f = rng.uniform(1.05, 1.18, size=m)
    short_f = rng.uniform(1.25, 1.45, size=m)

    buses = tuple(Bus(i, is_reference=(i == reference)) for i in range(n_buses))
    demands = tuple(Demand(k, int(b), float(load_mw[b]), float(round(volls[b], 2)))
                    for k, b in enumerate(np.flatnonzero(load_mw > 0.0)))
    generators = tuple(
        Generator(k, int(b),
                  ((float(round(0.6 * caps[k], 4)), float(round(0.92 * marginals[k], 4))),
                   (float(round(0.4 * caps[k], 4)), float(round(1.08 * marginals[k], 4)))),
                  float(round(ramp_frac[k] * caps[k], 4)),
                  float(round(caps[k], 4)),
                  float(round(redisp[k], 4)))
        for k, b in enumerate(gen_buses))

    # Provisional unlimited ratings, just to get base flows for sizing.
    inf = float("inf")
    provisional = tuple(
        Branch(l, a, b, float(reactance[l]), inf, inf, inf, float(probs[l]))
        for l, (a, b) in enumerate(edges))
    net0 = Network(buses, provisional, generators, demands, name=name)
    S0 = linalg.build_matrices(net0)
    f0 = np.abs(linalg.base_flows(S0, nominal_injections(net0)))
    floor = max(0.25 * float(np.median(f0[f0 > 0])) if (f0 > 0).any() else 1.0, 3.0)
    normal = np.maximum(rating_slack * f0, floor)
    branches = tuple(
        Branch(l, a, b, float(reactance[l]),
               float(round(normal[l], 4)),
               float(round(normal[l] * short_f[l], 4)),
               float(round(normal[l] * long_f[l], 4)),
               float(probs[l]))
        for l, (a, b) in enumerate(edges))
    return Network(buses, branches, generators, demands,
                   name=name or f"synthetic{n_buses}_s{seed}")


def get_case(spec: str) -> Network:
    """Resolve a case argument: a builtin name, ``synthetic:<n>:<seed>``, or a path.

    Path resolution is left to `scopf.network.load_case`; this only handles
    the non-file forms so the CLI and tests share one lookup.
    """
    if spec == "ieee_rts24":
        return ieee_rts24()
    if spec.startswith("synthetic:"):
        parts = spec.split(":")
        if len(parts) != 3:
            raise CaseParseError("synthetic case spec must look like synthetic:<buses>:<seed>")
        try:
            return synthetic_grid(int(parts[1]), int(parts[2]))
        except ValueError as e:
            raise CaseParseError(str(e)) from e
    from .network import load_case
    return load_case(spec)
