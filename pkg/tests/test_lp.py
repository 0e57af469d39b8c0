"""Range-row LP wrapper: hand duals, backend agreement, export text."""

import numpy as np
import pytest

from scopf.errors import LPError, LPInfeasibleError, LPUnboundedError
from scopf.lp import INF, LinearProgram

BACKENDS = ("highs", "simplex")


def single_var_lp():
    # min 3x s.t. x >= 8; optimum 24 with shadow price 3 on the row
    lp = LinearProgram("single")
    x = lp.add_variable("x", 0.0, INF, 3.0)
    lp.add_row([x], [1.0], 8.0, INF, "floor")
    return lp


def two_var_lp():
    # min -2x + y s.t. x + y = 4, x - y in [-10, 2]; x,y in [0, 10].
    # Optimum x=3, y=1, objective -5. Moving the equality rhs up one unit
    # moves the optimum by -0.5; moving the range hi up moves it by -1.5.
    lp = LinearProgram("pair")
    x = lp.add_variable("x", 0.0, 10.0, -2.0)
    y = lp.add_variable("y", 0.0, 10.0, 1.0)
    lp.add_row([x, y], [1.0, 1.0], 4.0, 4.0, "sum")
    lp.add_row([x, y], [1.0, -1.0], -10.0, 2.0, "spread")
    return lp


@pytest.mark.parametrize("backend", BACKENDS)
def test_single_variable_optimum_and_dual(backend):
    sol = single_var_lp().solve(backend)
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(24.0, abs=1e-9)
    assert sol.x[0] == pytest.approx(8.0, abs=1e-9)
    assert sol.row_duals[0] == pytest.approx(3.0, abs=1e-9)


@pytest.mark.parametrize("backend", BACKENDS)
def test_two_variable_optimum_and_duals(backend):
    sol = two_var_lp().solve(backend)
    assert sol.objective == pytest.approx(-5.0, abs=1e-9)
    assert sol.x == pytest.approx([3.0, 1.0], abs=1e-9)
    assert sol.row_duals[0] == pytest.approx(-0.5, abs=1e-9)
    assert sol.row_duals[1] == pytest.approx(-1.5, abs=1e-9)


@pytest.mark.parametrize("backend", BACKENDS)
def test_objective_constant_is_included(backend):
    lp = single_var_lp()
    lp.objective_constant = 100.0
    assert lp.solve(backend).objective == pytest.approx(124.0, abs=1e-9)


def random_bounded_lp(rng: np.random.Generator) -> LinearProgram:
    """Feasible by construction: row ranges bracket A @ x0 for a known x0."""
    n = int(rng.integers(3, 9))
    m = int(rng.integers(2, 7))
    lp = LinearProgram("rand")
    lb = -rng.uniform(0.0, 5.0, n)
    ub = rng.uniform(0.0, 5.0, n)
    cost = rng.normal(0.0, 2.0, n)
    lp.add_variables(n, "v", lb, ub, cost)
    x0 = rng.uniform(lb, ub)
    for i in range(m):
        nz = rng.choice(n, size=int(rng.integers(1, n + 1)), replace=False)
        val = rng.normal(0.0, 1.0, nz.size)
        mid = float(val @ x0[nz])
        if rng.uniform() < 0.25:
            lo = hi = mid  # occasional equality pinned at the feasible point
        else:
            lo = mid - rng.uniform(0.0, 3.0)
            hi = mid + rng.uniform(0.0, 3.0)
        lp.add_row(nz, val, lo, hi, f"r{i}")
    return lp


def test_backends_agree_on_random_problems():
    rng = np.random.default_rng(7)
    for _ in range(25):
        lp = random_bounded_lp(rng)
        a = lp.solve("highs")
        b = lp.solve("simplex")
        scale = max(1.0, abs(a.objective))
        assert abs(a.objective - b.objective) / scale < 1e-8
        # both optima must honor every row range
        for sol in (a, b):
            for i in range(lp.n_rows):
                idx, val, lo, hi = lp.row(i)
                act = float(val @ sol.x[idx])
                assert lo - 1e-7 <= act <= hi + 1e-7


@pytest.mark.parametrize("backend", BACKENDS)
def test_infeasible_raises(backend):
    lp = LinearProgram("inf")
    x = lp.add_variable("x", 0.0, 1.0, 1.0)
    lp.add_row([x], [1.0], 2.0, INF, "impossible")
    with pytest.raises(LPInfeasibleError):
        lp.solve(backend)


@pytest.mark.parametrize("backend", BACKENDS)
def test_unbounded_raises(backend):
    lp = LinearProgram("unb")
    lp.add_variable("x", 0.0, INF, -1.0)
    with pytest.raises(LPUnboundedError):
        lp.solve(backend)


def test_unknown_backend_raises():
    with pytest.raises(LPError):
        single_var_lp().solve("gurobi")


def test_add_variables_broadcasts_scalars_and_arrays():
    lp = LinearProgram()
    ids = lp.add_variables(3, "g", lb=0.0, ub=[1.0, 2.0, 3.0], cost=5.0)
    assert list(ids) == [0, 1, 2]
    lb, ub = lp.bounds()
    assert list(ub) == [1.0, 2.0, 3.0]
    assert list(lb) == [0.0, 0.0, 0.0]
    assert list(lp.costs()) == [5.0, 5.0, 5.0]


def test_builder_rejects_crossed_bounds():
    lp = LinearProgram()
    with pytest.raises(ValueError):
        lp.add_variable("x", 2.0, 1.0)
    x = lp.add_variable("x", 0.0, 1.0)
    with pytest.raises(ValueError):
        lp.set_bounds(x, 3.0, 2.0)
    with pytest.raises(ValueError):
        lp.add_row([x], [1.0], 5.0, 4.0)


def test_lp_export_round_trips_structure(tmp_path):
    lp = two_var_lp()
    lp.objective_constant = 7.5
    text = lp.to_lp_string()
    assert text.startswith("\\ Problem: pair")
    assert "objective constant" in text and "7.5" in text
    assert "Minimize" in text and "Subject To" in text and "Bounds" in text
    assert " sum: 1 x + 1 y = 4" in text
    assert " spread_hi: 1 x - 1 y <= 2" in text
    assert " spread_lo: 1 x - 1 y >= -10" in text
    assert " 0 <= x <= 10" in text
    assert text.rstrip().endswith("End")
    out = tmp_path / "pair.lp"
    lp.write_lp(out)
    assert out.read_text() == text


def test_lp_export_sanitizes_names():
    # format forbids leading digits and punctuation; both get rewritten
    lp = LinearProgram("weird")
    lp.add_variable("2bad name!", 0.0, 1.0, 1.0)
    lp.add_variable("", 0.0, 1.0, 1.0)
    text = lp.to_lp_string()
    assert "!" not in text
    assert "2bad name" not in text
    assert " 1 x0_2bad_name_" in text
    assert " 1 x1" in text
