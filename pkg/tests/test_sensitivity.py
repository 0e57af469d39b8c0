"""Parameter studies: scaling helpers, sampling structure, sweep shapes."""

import numpy as np
import pytest

from scopf import ScopfConfig
from scopf.sensitivity import (SensitivityStudy, gamma_sweep, sample_and_run,
                               scale_outage_probabilities, scale_voll,
                               voll_sweep)

from test_scopf import island_toy, triangle_toy


def test_probability_scaling_scalar_and_vector():
    net = triangle_toy()
    doubled = scale_outage_probabilities(net, 2.0)
    assert [b.outage_probability for b in doubled.branches] == \
        pytest.approx([2e-3, 2e-2, 2e-3])
    mixed = scale_outage_probabilities(net, [1.0, 0.5, 3.0])
    assert [b.outage_probability for b in mixed.branches] == \
        pytest.approx([1e-3, 5e-3, 3e-3])
    # the source network is untouched
    assert [b.outage_probability for b in net.branches] == \
        pytest.approx([1e-3, 1e-2, 1e-3])
    with pytest.raises(ValueError):
        scale_outage_probabilities(net, [1.0, 2.0])


def test_voll_scaling():
    net = scale_voll(island_toy(), 10.0)
    assert [d.voll_per_mwh for d in net.demands] == [10000.0, 20000.0]


def test_sampling_study_structure():
    study = sample_and_run(triangle_toy(), n_samples=8, seed=4,
                           config=ScopfConfig(variant="corrective",
                                              gamma_fraction=0.5))
    assert study.n_samples == 8 and study.seed == 4
    assert [s["sample"] for s in study.samples] == list(range(8))
    assert all(study.column("mean_multiplier") > 0)
    # the hedge term moves with the draws and carries the whole objective;
    # base cost stays at the unconstrained 900
    eoc = study.column("expected_outage_cost")
    assert eoc.std() > 0 and all(eoc > 0)
    assert study.column("objective") == pytest.approx(900.0 + eoc, abs=1e-6)
    assert study.column("base_cost") == pytest.approx(np.full(8, 900.0), abs=1e-6)
    # same seed reproduces the study exactly
    again = sample_and_run(triangle_toy(), n_samples=8, seed=4,
                           config=ScopfConfig(variant="corrective",
                                              gamma_fraction=0.5))
    assert np.array_equal(study.column("objective"), again.column("objective"))


def test_correlation_requires_variation():
    study = SensitivityStudy(0, 3, 0.1, 10.0,
                             [{"a": 1.0, "b": 2.0}, {"a": 1.0, "b": 3.0},
                              {"a": 1.0, "b": 4.0}])
    with pytest.raises(ValueError, match="no variation in a"):
        study.correlation("a", "b")
    study.samples[1]["a"] = 2.0
    assert -1.0 <= study.correlation("a", "b") <= 1.0


def test_sampling_rejects_bad_range():
    with pytest.raises(ValueError):
        sample_and_run(triangle_toy(), n_samples=1, low=0.0)
    with pytest.raises(ValueError):
        sample_and_run(triangle_toy(), n_samples=1, low=2.0, high=1.0)


def test_voll_sweep_rows():
    rows = voll_sweep(triangle_toy(), [0.5, 1.0, 2.0],
                      ScopfConfig(gamma_fraction=0.5))
    assert [r["voll_multiplier"] for r in rows] == [0.5, 1.0, 2.0]
    for row in rows:
        assert set(row) == {"voll_multiplier",
                            "objective_base", "base_cost_base",
                            "objective_corrective", "base_cost_corrective",
                            "objective_preventive", "base_cost_preventive"}
        assert row["objective_base"] <= row["objective_corrective"] + 1e-7
        assert row["objective_corrective"] <= row["objective_preventive"] + 1e-7
        assert row["base_cost_corrective"] <= row["base_cost_preventive"] + 1e-7
    # nothing sheds on the toy at these prices, so objectives are flat
    assert rows[0]["objective_corrective"] == \
        pytest.approx(rows[-1]["objective_corrective"], abs=1e-6)


def test_gamma_sweep_marks_infeasible_caps():
    rows = gamma_sweep(island_toy(), [0.1, 0.3, 0.5, 1.0],
                       ScopfConfig(variant="corrective"))
    assert [r["status"] for r in rows] == ["infeasible", "infeasible",
                                           "optimal", "optimal"]
    for row in rows[:2]:
        assert row["objective"] is None
        assert row["diagnosis"]["contingency"] == 3
    objs = [r["objective"] for r in rows[2:]]
    # relaxing the cap can only help
    assert objs == sorted(objs, reverse=True)
    assert objs[0] == pytest.approx(2001.8, abs=1e-6)
