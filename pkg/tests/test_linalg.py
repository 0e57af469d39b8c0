"""DC network matrices: hand oracle, caching, and flow identities."""

import numpy as np
import pytest

from scopf import linalg
from scopf.cases import nominal_injections, synthetic_grid
from scopf.network import Branch, Bus, Demand, Generator, Network


def triangle():
    """0-1 (x=0.1), 0-2 (x=0.2), 1-2 (x=0.2); reference at bus 0.

    For injections (100, -20, -80) MW the reduced system solves by hand to
    theta = (0, -0.048, -0.104) rad and flows (48, 52, 28) MW exactly.
    """
    return Network(
        buses=(Bus(0, True), Bus(1, False), Bus(2, False)),
        branches=(Branch(0, 0, 1, 0.1, 200.0, 200.0, 200.0, 1e-3),
                  Branch(1, 0, 2, 0.2, 200.0, 200.0, 200.0, 1e-3),
                  Branch(2, 1, 2, 0.2, 200.0, 200.0, 200.0, 1e-3)),
        generators=(Generator(0, 0, ((150.0, 10.0),), 150.0, 150.0),),
        demands=(Demand(0, 1, 20.0), Demand(1, 2, 80.0)),
    )


def test_three_bus_hand_solution():
    S = linalg.build_matrices(triangle())
    inj = np.array([100.0, -20.0, -80.0])
    theta = S.theta(inj)
    assert theta[0] == 0.0
    assert theta[1] == pytest.approx(-0.048, abs=1e-15)
    assert theta[2] == pytest.approx(-0.104, abs=1e-15)
    flows = S.flows_mw(theta)
    assert flows == pytest.approx([48.0, 52.0, 28.0], abs=1e-12)


def test_three_bus_ptdf_row_hand_values():
    S = linalg.build_matrices(triangle())
    # injection at bus 1 (withdrawn at the reference) splits 0.8 / 0.2
    row = linalg.ptdf_row(S, 0)
    assert row == pytest.approx([0.0, -0.8, -0.4], abs=1e-14)
    full = linalg.ptdf_matrix(S)
    assert full[0] == pytest.approx(row, abs=1e-15)


def test_reduced_system_residual_is_tiny():
    rng = np.random.default_rng(7)
    for n in (30, 90):
        net = synthetic_grid(n, seed=int(rng.integers(1000)))
        S = linalg.build_matrices(net)
        inj = nominal_injections(net)
        theta = S.theta(inj)
        resid = S.H_red @ theta[S.keep] - np.delete(inj, S.reference) / net.base_mva
        assert np.max(np.abs(resid)) < 1e-10


def test_ptdf_rows_are_bounded_by_one():
    # any injection routes at most its own magnitude through one branch
    for seed in (1, 2, 3):
        net = synthetic_grid(60, seed=seed)
        S = linalg.build_matrices(net)
        phi = linalg.ptdf_matrix(S)
        assert np.max(np.abs(phi)) <= 1.0 + 1e-9


def test_theta_and_ptdf_paths_agree():
    net = synthetic_grid(45, seed=12)
    S = linalg.build_matrices(net)
    rng = np.random.default_rng(0)
    for _ in range(5):
        inj = rng.normal(0.0, 20.0, net.n_buses)
        inj -= inj.mean()
        via_theta = linalg.base_flows(S, inj)
        via_ptdf = linalg.ptdf_matrix(S) @ inj
        assert np.max(np.abs(via_theta - via_ptdf)) < 1e-7


def test_solves_are_cached_and_counted():
    net = triangle()
    S = linalg.build_matrices(net)
    inj = np.array([100.0, -20.0, -80.0])
    assert S.solve_count == 0
    S.theta(inj)
    assert S.solve_count == 1
    S.theta(inj)                      # byte-identical vector: cache hit
    assert S.solve_count == 1
    S.theta(inj * 2.0)
    assert S.solve_count == 2
    S.inverse_column(1)
    assert S.solve_count == 3
    S.inverse_column(1)
    assert S.solve_count == 3
    assert np.all(S.inverse_column(S.reference) == 0.0)
    assert S.solve_count == 3         # reference column is free


def test_injection_accounting(rts24):
    gen = np.array([g.capacity_mw for g in rts24.generators]) * 0.5
    served = np.array([d.p_demand_mw for d in rts24.demands])
    inj = linalg.bus_injections(rts24, gen, served)
    assert inj.sum() == pytest.approx(gen.sum() - served.sum())
    assert inj[6] == pytest.approx(-125.0 + 0.5 * 300.0)  # bus 7: three U100 units


def test_disconnected_network_is_rejected():
    net = triangle()
    net = Network(net.buses + (Bus(3, False),), net.branches, net.generators,
                  net.demands)
    with pytest.raises(ValueError):
        linalg.build_matrices(net)
