"""DC power-flow linear algebra.

Builds the nodal susceptance matrix H = A^T diag(b) A from the branch list,
factorizes the reduced form (reference row and column deleted) once with a
sparse LU, and serves angle solves, flows, inverse columns, and PTDF rows from
that single factorization. Inverse columns and angle solutions are cached so
the rank-one outage updates downstream can run without any new solves once
warm.

Unit convention: injections enter in MW and flows return in MW; angles are
radians on the per-unit system. The reference bus row of every bus-indexed
vector is fixed at zero, including inverse columns and PTDF rows (a PTDF is
the response to injection at a bus withdrawn at the reference, so the
reference entry is identically zero).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .network import Network


@dataclass
class SystemMatrices:
    """Factorized DC model of one network state. Build via `build_matrices`.

    ``solve_count`` increments on every triangular solve against the cached
    factorization; the outage-update methods advertise solve budgets and tests
    hold them to it.
    """

    n_buses: int
    n_branches: int
    reference: int
    base_mva: float
    from_bus: np.ndarray          # (m,) int
    to_bus: np.ndarray            # (m,) int
    susceptance_pu: np.ndarray    # (m,) float, 1/x
    reactance_pu: np.ndarray      # (m,) float
    keep: np.ndarray              # (n-1,) bus ids with reference removed
    pos: np.ndarray               # (n,) bus id -> reduced index, -1 at reference
    H_red: sp.csc_matrix
    _lu: spla.SuperLU = field(repr=False)
    solve_count: int = 0
    _theta_cache: dict = field(default_factory=dict, repr=False)
    _column_cache: dict = field(default_factory=dict, repr=False)

    # -- low level -----------------------------------------------------------

    def solve_reduced(self, rhs: np.ndarray) -> np.ndarray:
        """One solve H_red y = rhs on the reduced index set. Counts."""
        self.solve_count += 1
        return self._lu.solve(rhs)

    def expand(self, reduced: np.ndarray) -> np.ndarray:
        full = np.zeros(self.n_buses)
        full[self.keep] = reduced
        return full

    # -- cached primitives ----------------------------------------------------

    def theta(self, injections_mw: np.ndarray) -> np.ndarray:
        """Bus angles (radians) for the given MW injection vector.

        Results are cached by injection content, so repeated evaluation at the
        same operating point costs no solves.
        """
        p = np.asarray(injections_mw, dtype=float)
        if p.shape != (self.n_buses,):
            raise ValueError(f"expected {self.n_buses} injections, got shape {p.shape}")
        key = p.tobytes()
        hit = self._theta_cache.get(key)
        if hit is not None:
            return hit
        theta = self.expand(self.solve_reduced(p[self.keep] / self.base_mva))
        self._theta_cache[key] = theta
        return theta

    def inverse_column(self, bus: int) -> np.ndarray:
        """Column `bus` of the reduced-H inverse, expanded to full length.

        The reference row and column are zero by construction; the column for
        the reference bus itself is the zero vector.
        """
        if not 0 <= bus < self.n_buses:
            raise ValueError(f"bus {bus} out of range")
        col = self._column_cache.get(bus)
        if col is None:
            if bus == self.reference:
                col = np.zeros(self.n_buses)
            else:
                e = np.zeros(self.n_buses - 1)
                e[self.pos[bus]] = 1.0
                col = self.expand(self.solve_reduced(e))
            self._column_cache[bus] = col
        return col

    def prefetch_columns(self, buses) -> None:
        """Warm the inverse-column cache (the pre-processing step the fast
        outage methods assume when quoted at zero solves)."""
        for b in buses:
            self.inverse_column(int(b))

    # -- flows ----------------------------------------------------------------

    def flows_mw(self, theta: np.ndarray) -> np.ndarray:
        """Branch flows in MW, oriented from_bus -> to_bus."""
        return self.base_mva * self.susceptance_pu * (theta[self.from_bus] - theta[self.to_bus])


def build_matrices(network: Network) -> SystemMatrices:
    """Assemble and factorize the reduced susceptance matrix.

    Raises if the network has no branches or a singular reduced matrix (a
    disconnected network); run validation first for a friendlier report.
    """
    n = network.n_buses
    m = network.n_branches
    ref = network.reference_bus
    from_bus = np.fromiter((b.from_bus for b in network.branches), dtype=np.int64, count=m)
    to_bus = np.fromiter((b.to_bus for b in network.branches), dtype=np.int64, count=m)
    x = np.fromiter((b.reactance_pu for b in network.branches), dtype=float, count=m)
    b_pu = 1.0 / x

    rows = np.concatenate([from_bus, to_bus, from_bus, to_bus])
    cols = np.concatenate([from_bus, to_bus, to_bus, from_bus])
    vals = np.concatenate([b_pu, b_pu, -b_pu, -b_pu])
    H = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsc()

    keep = np.array([i for i in range(n) if i != ref], dtype=np.int64)
    pos = np.full(n, -1, dtype=np.int64)
    pos[keep] = np.arange(n - 1)
    H_red = H[keep][:, keep].tocsc()
    try:
        lu = spla.splu(H_red)
    except RuntimeError as e:
        raise ValueError(f"reduced susceptance matrix is singular: {e}") from e

    return SystemMatrices(
        n_buses=n, n_branches=m, reference=ref, base_mva=network.base_mva,
        from_bus=from_bus, to_bus=to_bus, susceptance_pu=b_pu, reactance_pu=x,
        keep=keep, pos=pos, H_red=H_red, _lu=lu)


def bus_injections(network: Network, generation_mw: np.ndarray,
                   served_mw: np.ndarray) -> np.ndarray:
    """Net MW injection per bus from per-generator output and per-demand service."""
    p = np.zeros(network.n_buses)
    for g, val in zip(network.generators, np.asarray(generation_mw, dtype=float)):
        p[g.bus] += val
    for d, val in zip(network.demands, np.asarray(served_mw, dtype=float)):
        p[d.bus] -= val
    return p


def base_flows(S: SystemMatrices, injections_mw: np.ndarray) -> np.ndarray:
    """Pre-contingency branch flows in MW."""
    return S.flows_mw(S.theta(injections_mw))


def ptdf_row(S: SystemMatrices, branch: int) -> np.ndarray:
    """Sensitivity of one branch flow to bus injections (dimensionless).

    Row entries lie in [-1, 1]: a unit injection withdrawn at the reference
    decomposes into paths, none of which can load a single branch with more
    than the injected amount.
    """
    if not 0 <= branch < S.n_branches:
        raise ValueError(f"branch {branch} out of range")
    i, j = S.from_bus[branch], S.to_bus[branch]
    return S.susceptance_pu[branch] * (S.inverse_column(i) - S.inverse_column(j))


def ptdf_matrix(S: SystemMatrices) -> np.ndarray:
    """Full (m, n) PTDF. Dense; intended for tests and small studies."""
    return np.vstack([ptdf_row(S, l) for l in range(S.n_branches)])
