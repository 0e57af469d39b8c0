"""Network data model, validation, and case ingestion.

The model is the minimum a DC security-constrained dispatch needs: buses with a
single angle reference, branches with a reactance and three thermal ratings
(normal / short-term / long-term), piecewise-linear generators with two ramp
budgets, and priced demands. Element ids are dense 0..N-1 after ingestion, so
an id doubles as a tuple index everywhere downstream.

Quantities at this boundary are MW and $/MWh; per-unit conversion happens
inside the linear-algebra layer.
"""

from __future__ import annotations

import csv
import json
import math
import re
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

from .errors import CaseParseError

DEFAULT_VOLL = 10_000.0          # $/MWh when no value-of-lost-load data is given
DEFAULT_OUTAGE_PROBABILITY = 1e-4
SHORT_RATE_FACTOR = 1.30         # fallback short-term rating multiplier on normal
LONG_RATE_FACTOR = 1.15          # fallback long-term rating multiplier on normal


@dataclass(frozen=True)
class Bus:
    id: int
    is_reference: bool = False


@dataclass(frozen=True)
class Branch:
    """A transmission element with reactance and three thermal ratings.

    Ratings are MW magnitudes: ``limit_normal_mw`` applies pre-contingency,
    ``limit_short_mw`` for the first ~15 minutes after an outage, and
    ``limit_long_mw`` once the slower redispatch has settled. Physically
    normal <= long <= short.
    """

    id: int
    from_bus: int
    to_bus: int
    reactance_pu: float
    limit_normal_mw: float
    limit_short_mw: float
    limit_long_mw: float
    outage_probability: float = DEFAULT_OUTAGE_PROBABILITY


@dataclass(frozen=True)
class Generator:
    """Piecewise-linear generator: segments are (capacity_mw, cost_per_mwh).

    Segment costs must be nondecreasing so the LP can treat each segment as an
    independent 0..capacity variable. ``ramp_short_mw`` bounds |redispatch| in
    the fast post-contingency stage, ``ramp_long_mw`` in the slow one.
    """

    id: int
    bus: int
    segments: tuple[tuple[float, float], ...]
    ramp_short_mw: float
    ramp_long_mw: float
    redispatch_cost_per_mwh: float = 0.0

    @property
    def capacity_mw(self) -> float:
        return sum(c for c, _ in self.segments)


@dataclass(frozen=True)
class Demand:
    id: int
    bus: int
    p_demand_mw: float
    voll_per_mwh: float = DEFAULT_VOLL


@dataclass(frozen=True)
class Network:
    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    generators: tuple[Generator, ...]
    demands: tuple[Demand, ...]
    base_mva: float = 100.0
    name: str = ""

    @property
    def n_buses(self) -> int:
        return len(self.buses)

    @property
    def n_branches(self) -> int:
        return len(self.branches)

    @property
    def reference_bus(self) -> int:
        for b in self.buses:
            if b.is_reference:
                return b.id
        raise ValueError("network has no reference bus")

    def total_demand_mw(self) -> float:
        return sum(d.p_demand_mw for d in self.demands)

    def total_capacity_mw(self) -> float:
        return sum(g.capacity_mw for g in self.generators)


@dataclass(frozen=True)
class Violation:
    """One validation finding. severity is 'error' or 'warning'."""

    code: str
    message: str
    severity: str = "error"
    element: str = ""
    element_id: int = -1


def connected_components(n_buses: int, edges: list[tuple[int, int]]) -> list[list[int]]:
    """Connected components over bus indices 0..n_buses-1, each sorted ascending.

    Components themselves are ordered by smallest member. Iterative BFS, safe
    for 10k-bus graphs.
    """
    adj: list[list[int]] = [[] for _ in range(n_buses)]
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    seen = [False] * n_buses
    comps = []
    for start in range(n_buses):
        if seen[start]:
            continue
        seen[start] = True
        comp = [start]
        q = deque([start])
        while q:
            u = q.popleft()
            for v in adj[u]:
                if not seen[v]:
                    seen[v] = True
                    comp.append(v)
                    q.append(v)
        comps.append(sorted(comp))
    return comps


def validate(network: Network) -> list[Violation]:
    """Check structural invariants; return all findings, errors before warnings.

    Errors cover: dense ids, exactly one reference bus, endpoint sanity,
    positive reactance, positive ordered ratings (normal <= long <= short),
    outage probability in [0, 1), convex nonempty generator curves, nonnegative
    ramps, nonnegative demand, positive value of lost load, and graph
    connectivity. Warnings cover: total capacity below total demand, a network
    with no branches, and a short-term ramp exceeding the long-term one.

    A network that produces no errors is safe for every downstream module;
    `[]` means no findings of either kind.
    """
    errors: list[Violation] = []
    warnings: list[Violation] = []

    def err(code, msg, element="", element_id=-1):
        errors.append(Violation(code, msg, "error", element, element_id))

    def warn(code, msg, element="", element_id=-1):
        warnings.append(Violation(code, msg, "warning", element, element_id))

    n = len(network.buses)
    for i, b in enumerate(network.buses):
        if b.id != i:
            err("bus_id_not_dense", f"bus at position {i} has id {b.id}", "bus", b.id)
    refs = [b.id for b in network.buses if b.is_reference]
    if not refs:
        err("no_reference_bus", "exactly one bus must be the angle reference")
    elif len(refs) > 1:
        err("multiple_reference_buses", f"reference buses: {refs}")

    for i, br in enumerate(network.branches):
        if br.id != i:
            err("branch_id_not_dense", f"branch at position {i} has id {br.id}", "branch", br.id)
        if not (0 <= br.from_bus < n) or not (0 <= br.to_bus < n):
            err("branch_endpoint_unknown", f"branch {br.id} endpoints ({br.from_bus}, {br.to_bus})",
                "branch", br.id)
            continue
        if br.from_bus == br.to_bus:
            err("branch_self_loop", f"branch {br.id} connects bus {br.from_bus} to itself",
                "branch", br.id)
        if not br.reactance_pu > 0.0:
            err("branch_reactance_nonpositive", f"branch {br.id} reactance {br.reactance_pu}",
                "branch", br.id)
        if not br.limit_normal_mw > 0.0:
            err("branch_rating_nonpositive", f"branch {br.id} normal rating {br.limit_normal_mw}",
                "branch", br.id)
        elif not (br.limit_normal_mw <= br.limit_long_mw <= br.limit_short_mw):
            err("branch_rating_order",
                f"branch {br.id} ratings must satisfy normal <= long <= short, got "
                f"({br.limit_normal_mw}, {br.limit_long_mw}, {br.limit_short_mw})",
                "branch", br.id)
        if not (0.0 <= br.outage_probability < 1.0):
            err("branch_probability_range",
                f"branch {br.id} outage probability {br.outage_probability}", "branch", br.id)

    for i, g in enumerate(network.generators):
        if g.id != i:
            err("generator_id_not_dense", f"generator at position {i} has id {g.id}",
                "generator", g.id)
        if not (0 <= g.bus < n):
            err("generator_bus_unknown", f"generator {g.id} at bus {g.bus}", "generator", g.id)
        if not g.segments:
            err("generator_no_segments", f"generator {g.id} has an empty cost curve",
                "generator", g.id)
        else:
            if any(c < 0.0 for c, _ in g.segments):
                err("generator_segment_capacity_negative",
                    f"generator {g.id} segment capacities {[c for c, _ in g.segments]}",
                    "generator", g.id)
            costs = [m for _, m in g.segments]
            if any(b < a for a, b in zip(costs, costs[1:])):
                err("generator_cost_nonconvex",
                    f"generator {g.id} marginal costs must be nondecreasing, got {costs}",
                    "generator", g.id)
        if g.ramp_short_mw < 0.0 or g.ramp_long_mw < 0.0:
            err("generator_ramp_negative",
                f"generator {g.id} ramps ({g.ramp_short_mw}, {g.ramp_long_mw})",
                "generator", g.id)
        elif g.ramp_short_mw > g.ramp_long_mw:
            warn("generator_ramp_order",
                 f"generator {g.id} short-term ramp {g.ramp_short_mw} exceeds long-term "
                 f"{g.ramp_long_mw}", "generator", g.id)

    for i, d in enumerate(network.demands):
        if d.id != i:
            err("demand_id_not_dense", f"demand at position {i} has id {d.id}", "demand", d.id)
        if not (0 <= d.bus < n):
            err("demand_bus_unknown", f"demand {d.id} at bus {d.bus}", "demand", d.id)
        if d.p_demand_mw < 0.0:
            err("demand_negative", f"demand {d.id} draws {d.p_demand_mw} MW", "demand", d.id)
        if not d.voll_per_mwh > 0.0:
            err("demand_voll_nonpositive",
                f"demand {d.id} value of lost load {d.voll_per_mwh}; shedding it would be free",
                "demand", d.id)

    edges = [(br.from_bus, br.to_bus) for br in network.branches
             if 0 <= br.from_bus < n and 0 <= br.to_bus < n and br.from_bus != br.to_bus]
    if n > 0:
        comps = connected_components(n, edges)
        if len(comps) > 1:
            err("disconnected",
                f"network has {len(comps)} components; smallest is buses {comps[-1][:8]}")
    if not network.branches:
        warn("no_branches", "network has no branches; every bus is its own island")
    if network.total_capacity_mw() < network.total_demand_mw():
        warn("capacity_below_demand",
             f"total capacity {network.total_capacity_mw():.1f} MW is below total demand "
             f"{network.total_demand_mw():.1f} MW; expect load shedding")
    return errors + warnings


def validation_errors(network: Network) -> list[Violation]:
    return [v for v in validate(network) if v.severity == "error"]


# ---------------------------------------------------------------------------
# MATPOWER-subset reader
# ---------------------------------------------------------------------------

_MATRIX_RE = re.compile(r"mpc\.(\w+)\s*=\s*\[(.*?)\];", re.DOTALL)
_SCALAR_RE = re.compile(r"mpc\.(\w+)\s*=\s*([0-9eE+\-.]+)\s*;")


def _strip_comments(text: str) -> str:
    return "\n".join(line.split("%", 1)[0] for line in text.splitlines())


def parse_matpower(text: str) -> dict:
    """Parse the matrix subset of a MATPOWER case file into float tables.

    Only ``mpc.<name> = [ rows ];`` matrices and numeric scalars are read;
    function wrappers, strings, and struct fields other than these are
    ignored. Rows may be separated by newlines or semicolons.
    """
    text = _strip_comments(text)
    tables: dict[str, list[list[float]] | float] = {}
    for m in _SCALAR_RE.finditer(text):
        tables[m.group(1)] = float(m.group(2))
    for m in _MATRIX_RE.finditer(text):
        rows = []
        for raw in re.split(r"[;\n]", m.group(2)):
            raw = raw.strip()
            if not raw:
                continue
            try:
                rows.append([float(tok) for tok in re.split(r"[,\s]+", raw) if tok])
            except ValueError as e:
                raise CaseParseError(f"bad row in mpc.{m.group(1)}: {raw!r}") from e
        tables[m.group(1)] = rows
    return tables


def _quadratic_to_segments(c2: float, c1: float, pmax: float,
                           pieces: int = 3) -> tuple[tuple[float, float], ...]:
    # Convex piecewise approximation: slope of the quadratic at each piece midpoint.
    if c2 < 0.0:
        raise CaseParseError("concave quadratic generator cost is not supported")
    if c2 == 0.0 or pmax <= 0.0:
        return ((max(pmax, 0.0), c1),)
    width = pmax / pieces
    return tuple((width, c1 + 2.0 * c2 * (k + 0.5) * width) for k in range(pieces))


def _gencost_to_segments(row: list[float], pmax: float) -> tuple[tuple[float, float], ...]:
    model, ncost = int(row[0]), int(row[3])
    coeffs = row[4:4 + (2 * ncost if model == 1 else ncost)]
    if model == 2:
        # Polynomial, highest order first. Constant-only curves become one free segment.
        c = [0.0] * 3
        for k, v in enumerate(reversed(coeffs)):
            if k <= 2:
                c[k] = v
            elif v != 0.0:
                raise CaseParseError("generator cost polynomials above degree 2 are not supported")
        return _quadratic_to_segments(c[2], c[1], pmax)
    if model == 1:
        pts = [(coeffs[2 * k], coeffs[2 * k + 1]) for k in range(ncost)]
        segs = []
        for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
            if x1 <= x0:
                raise CaseParseError(f"piecewise cost breakpoints must increase, got {x0} -> {x1}")
            segs.append((x1 - x0, (y1 - y0) / (x1 - x0)))
        slopes = [s for _, s in segs]
        if any(b < a for a, b in zip(slopes, slopes[1:])):
            raise CaseParseError(f"piecewise cost must be convex, slopes {slopes}")
        return tuple(segs)
    raise CaseParseError(f"unsupported gencost model {model}")


def network_from_matpower(text: str, *, voll_default: float = DEFAULT_VOLL,
                          name: str = "") -> Network:
    """Build a Network from MATPOWER-subset text.

    Mapping: RATE_A is the normal rating, RATE_B the long-term and RATE_C the
    short-term post-contingency rating (each falls back to a fixed multiple of
    RATE_A when zero; a zero RATE_A means unlimited). Out-of-service rows and
    generators with Pmax <= 0 are dropped. Every bus with Pd > 0 becomes one
    demand at ``voll_default``. Outage probabilities and ramp budgets are not
    MATPOWER concepts, so they start at package defaults (ramp_short = 10% of
    capacity, ramp_long = full capacity) until a reliability table overrides
    them.
    """
    tables = parse_matpower(text)
    for required in ("bus", "branch", "gen"):
        if required not in tables:
            raise CaseParseError(f"case text is missing mpc.{required}")
    base_mva = float(tables.get("baseMVA", 100.0))

    bus_rows = tables["bus"]
    bus_index: dict[int, int] = {}
    buses: list[Bus] = []
    demands: list[Demand] = []
    refs = 0
    for row in bus_rows:
        ext_id, bus_type, pd = int(row[0]), int(row[1]), float(row[2])
        if ext_id in bus_index:
            raise CaseParseError(f"duplicate bus id {ext_id}")
        idx = len(buses)
        bus_index[ext_id] = idx
        is_ref = bus_type == 3
        refs += is_ref
        buses.append(Bus(idx, is_ref))
        if pd < 0.0:
            raise CaseParseError(f"bus {ext_id} has negative demand {pd}")
        if pd > 0.0:
            demands.append(Demand(len(demands), idx, pd, voll_default))
    if refs != 1:
        raise CaseParseError(f"expected exactly one type-3 (reference) bus, found {refs}")

    branches: list[Branch] = []
    for row in tables["branch"]:
        status = int(row[10]) if len(row) > 10 else 1
        if status == 0:
            continue
        f_ext, t_ext, x = int(row[0]), int(row[1]), float(row[3])
        if f_ext not in bus_index or t_ext not in bus_index:
            raise CaseParseError(f"branch references unknown bus ({f_ext}, {t_ext})")
        rate_a = float(row[5]) if len(row) > 5 else 0.0
        rate_b = float(row[6]) if len(row) > 6 else 0.0
        rate_c = float(row[7]) if len(row) > 7 else 0.0
        normal = rate_a if rate_a > 0.0 else math.inf
        long_ = rate_b if rate_b > 0.0 else normal * LONG_RATE_FACTOR
        short = rate_c if rate_c > 0.0 else normal * SHORT_RATE_FACTOR
        # Clamp odd rating files rather than reject: ratings must nest.
        long_ = max(long_, normal)
        short = max(short, long_)
        branches.append(Branch(len(branches), bus_index[f_ext], bus_index[t_ext], x,
                               normal, short, long_))

    gen_rows = tables["gen"]
    cost_rows = tables.get("gencost")
    if cost_rows is not None and len(cost_rows) != len(gen_rows):
        raise CaseParseError("mpc.gencost must have one row per mpc.gen row")
    generators: list[Generator] = []
    for i, row in enumerate(gen_rows):
        status = int(row[7]) if len(row) > 7 else 1
        pmax = float(row[8]) if len(row) > 8 else 0.0
        if status == 0 or pmax <= 0.0:
            continue            # out of service, or a condenser with no MW headroom
        bus_ext = int(row[0])
        if bus_ext not in bus_index:
            raise CaseParseError(f"generator references unknown bus {bus_ext}")
        if cost_rows is not None:
            segments = _gencost_to_segments(cost_rows[i], pmax)
        else:
            segments = ((pmax, 0.0),)
        generators.append(Generator(len(generators), bus_index[bus_ext], segments,
                                    ramp_short_mw=0.10 * pmax, ramp_long_mw=pmax))

    return Network(tuple(buses), tuple(branches), tuple(generators), tuple(demands),
                   base_mva=base_mva, name=name)


def apply_reliability_csv(network: Network, path: str | Path) -> Network:
    """Overlay per-branch outage data from a CSV onto an existing network.

    Columns: ``branch_id,outage_probability[,limit_short_mw,limit_long_mw]``.
    Branches not listed keep their current values.
    """
    updates: dict[int, dict] = {}
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            try:
                bid = int(row["branch_id"])
            except (KeyError, ValueError) as e:
                raise CaseParseError(f"bad reliability row {row!r}") from e
            if not (0 <= bid < network.n_branches):
                raise CaseParseError(f"reliability row for unknown branch {bid}")
            u: dict = {"outage_probability": float(row["outage_probability"])}
            for col, fieldname in (("limit_short_mw", "limit_short_mw"),
                                   ("limit_long_mw", "limit_long_mw")):
                if row.get(col) not in (None, ""):
                    u[fieldname] = float(row[col])
            updates[bid] = u
    branches = tuple(
        Branch(b.id, b.from_bus, b.to_bus, b.reactance_pu, b.limit_normal_mw,
               updates.get(b.id, {}).get("limit_short_mw", b.limit_short_mw),
               updates.get(b.id, {}).get("limit_long_mw", b.limit_long_mw),
               updates.get(b.id, {}).get("outage_probability", b.outage_probability))
        for b in network.branches)
    return Network(network.buses, branches, network.generators, network.demands,
                   network.base_mva, network.name)


def apply_voll_csv(network: Network, path: str | Path) -> Network:
    """Overlay per-demand value of lost load from ``demand_id,voll_per_mwh`` rows."""
    values: dict[int, float] = {}
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            try:
                values[int(row["demand_id"])] = float(row["voll_per_mwh"])
            except (KeyError, ValueError) as e:
                raise CaseParseError(f"bad voll row {row!r}") from e
    for did in values:
        if not (0 <= did < len(network.demands)):
            raise CaseParseError(f"voll row for unknown demand {did}")
    demands = tuple(Demand(d.id, d.bus, d.p_demand_mw, values.get(d.id, d.voll_per_mwh))
                    for d in network.demands)
    return Network(network.buses, network.branches, network.generators, demands,
                   network.base_mva, network.name)


# ---------------------------------------------------------------------------
# Native JSON format
# ---------------------------------------------------------------------------

FORMAT_TAG = "scopf-network"
FORMAT_VERSION = 1


def network_to_dict(network: Network) -> dict:
    return {
        "format": FORMAT_TAG,
        "version": FORMAT_VERSION,
        "name": network.name,
        "base_mva": network.base_mva,
        "buses": [{"id": b.id, "is_reference": b.is_reference} for b in network.buses],
        "branches": [
            {"id": b.id, "from_bus": b.from_bus, "to_bus": b.to_bus,
             "reactance_pu": b.reactance_pu, "limit_normal_mw": b.limit_normal_mw,
             "limit_short_mw": b.limit_short_mw, "limit_long_mw": b.limit_long_mw,
             "outage_probability": b.outage_probability}
            for b in network.branches],
        "generators": [
            {"id": g.id, "bus": g.bus, "segments": [list(s) for s in g.segments],
             "ramp_short_mw": g.ramp_short_mw, "ramp_long_mw": g.ramp_long_mw,
             "redispatch_cost_per_mwh": g.redispatch_cost_per_mwh}
            for g in network.generators],
        "demands": [
            {"id": d.id, "bus": d.bus, "p_demand_mw": d.p_demand_mw,
             "voll_per_mwh": d.voll_per_mwh}
            for d in network.demands],
    }


def network_from_dict(data: dict) -> Network:
    if data.get("format") != FORMAT_TAG:
        raise CaseParseError(f"not a {FORMAT_TAG} document")
    if data.get("version") != FORMAT_VERSION:
        raise CaseParseError(f"unsupported format version {data.get('version')!r}")
    try:
        buses = tuple(Bus(int(b["id"]), bool(b["is_reference"])) for b in data["buses"])
        branches = tuple(
            Branch(int(b["id"]), int(b["from_bus"]), int(b["to_bus"]),
                   float(b["reactance_pu"]), float(b["limit_normal_mw"]),
                   float(b["limit_short_mw"]), float(b["limit_long_mw"]),
                   float(b["outage_probability"]))
            for b in data["branches"])
        generators = tuple(
            Generator(int(g["id"]), int(g["bus"]),
                      tuple((float(c), float(m)) for c, m in g["segments"]),
                      float(g["ramp_short_mw"]), float(g["ramp_long_mw"]),
                      float(g.get("redispatch_cost_per_mwh", 0.0)))
            for g in data["generators"])
        demands = tuple(
            Demand(int(d["id"]), int(d["bus"]), float(d["p_demand_mw"]),
                   float(d["voll_per_mwh"]))
            for d in data["demands"])
    except (KeyError, TypeError, ValueError) as e:
        raise CaseParseError(f"malformed network document: {e}") from e
    return Network(buses, branches, generators, demands,
                   base_mva=float(data.get("base_mva", 100.0)),
                   name=str(data.get("name", "")))


def save_case(network: Network, path: str | Path) -> None:
    """Write the native JSON form. Floats use repr, so load(save(n)) == n exactly."""
    with open(path, "w") as f:
        json.dump(network_to_dict(network), f, indent=1)
        f.write("\n")


def load_case(path: str | Path, *, fmt: str | None = None,
              reliability_csv: str | Path | None = None,
              voll_csv: str | Path | None = None,
              voll_default: float = DEFAULT_VOLL) -> Network:
    """Load a case from native JSON or MATPOWER-subset text.

    Parameters
    ----------
    path : file to read. Format is inferred from the extension (``.json`` vs
        ``.m``) unless ``fmt`` ("json" or "matpower") is given.
    reliability_csv, voll_csv : optional overlay tables applied after parsing;
        see `apply_reliability_csv` and `apply_voll_csv`.
    voll_default : value of lost load assigned to demands born without one
        (MATPOWER input only).
    """
    path = Path(path)
    if fmt is None:
        fmt = {"json": "json", "m": "matpower"}.get(path.suffix.lstrip(".").lower())
        if fmt is None:
            raise CaseParseError(f"cannot infer format from {path.name!r}; pass fmt=")
    text = path.read_text()
    if fmt == "json":
        try:
            net = network_from_dict(json.loads(text))
        except json.JSONDecodeError as e:
            raise CaseParseError(f"{path.name}: {e}") from e
        if net.name == "":
            net = Network(net.buses, net.branches, net.generators, net.demands,
                          net.base_mva, path.stem)
    elif fmt == "matpower":
        net = network_from_matpower(text, voll_default=voll_default, name=path.stem)
    else:
        raise CaseParseError(f"unknown case format {fmt!r}")
    if reliability_csv is not None:
        net = apply_reliability_csv(net, reliability_csv)
    if voll_csv is not None:
        net = apply_voll_csv(net, voll_csv)
    return net
