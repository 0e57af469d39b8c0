import dataclasses

import pytest

from scopf import ieee_rts24, synthetic_grid


@pytest.fixture(scope="session")
def scale_case():
    """Scaling helper shared across suites: ratings, short ramps, load."""
    def _scale(net, limits=1.0, ramp_short=1.0, load=1.0, name=None):
        branches = tuple(dataclasses.replace(
            b, limit_normal_mw=b.limit_normal_mw * limits,
            limit_long_mw=b.limit_long_mw * limits,
            limit_short_mw=b.limit_short_mw * limits) for b in net.branches)
        generators = tuple(dataclasses.replace(
            g, ramp_short_mw=g.ramp_short_mw * ramp_short) for g in net.generators)
        demands = tuple(dataclasses.replace(
            d, p_demand_mw=d.p_demand_mw * load) for d in net.demands)
        return dataclasses.replace(net, branches=branches, generators=generators,
                                   demands=demands, name=name or net.name)
    return _scale


@pytest.fixture(scope="session")
def rts24():
    return ieee_rts24()


@pytest.fixture(scope="session")
def rts24_meshed(rts24, scale_case):
    """RTS with a parallel circuit across its one bridge (no islanding outages),
    ratings at 75%, and short-term ramps at 2%: every variant can serve all
    load, but tiny fast-ramp budgets make post-contingency shedding the cheap
    fix when interruptions cost little, and pre-fault rescheduling the only
    fix when they cost much."""
    extra = dataclasses.replace(rts24.branches[10], id=len(rts24.branches))
    net = dataclasses.replace(rts24, branches=(*rts24.branches, extra))
    return scale_case(net, limits=0.75, ramp_short=0.02, name="rts24_meshed")


@pytest.fixture(scope="session")
def rts24_stressed(scale_case, rts24):
    """RTS pushed into the corrective-tradeoff regime: tight ratings, small
    short-term ramp budgets, 5% extra load. Post-contingency shedding both
    happens and responds to the outage probabilities."""
    return scale_case(rts24, limits=0.5, ramp_short=0.2, load=1.05,
                      name="rts24_stressed")


@pytest.fixture(scope="session")
def syn50():
    return synthetic_grid(50, seed=3)


@pytest.fixture(scope="session")
def syn60():
    return synthetic_grid(60, seed=5)


@pytest.fixture(scope="session")
def syn80():
    return synthetic_grid(80, seed=11)
