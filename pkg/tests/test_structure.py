import math

import numpy as np
import pytest

from fronttrack.errors import PreconditionError
from fronttrack.functionals import FunctionalConfig
from fronttrack.model import State
from fronttrack.structure import (
    c_star_ceiling,
    count_bound,
    extract_theta_shocks,
    fit_exponent,
    polyline_distance,
    segment_traces,
    trace_limits,
)
from fronttrack.tracker import PiecewiseConstantDatum, RunConfig, riemann_datum, run


@pytest.fixture(scope="module")
def merging_log(burgers):
    datum = PiecewiseConstantDatum((-0.5, 0.0), (State(0.3, 0.0), State(0.1, 0.0), State(-0.1, 0.0)))
    return run(burgers, datum, None, RunConfig(0.01, 0.005, 3.0))


def test_single_shock_is_one_polyline(burgers):
    log = run(burgers, riemann_datum((0.3, 0.0), (-0.2, 0.0)), None, RunConfig(0.01, 0.005, 1.0))
    polys = extract_theta_shocks(log, 0.2)
    assert len(polys) == 1
    p = polys[0]
    assert p.family == 1 and p.t_start == 0.0 and p.t_end == pytest.approx(1.0)
    # splitting steps put a node at every multiple of tau
    tr = trace_limits(log, p, 0.50025)
    assert tr.rh_residual < 1e-14
    assert tr.lax_ok()
    assert p.position(1.0) == pytest.approx(-0.95, abs=1e-8)
    assert extract_theta_shocks(log, 0.7) == []


def test_merging_shocks_join_one_chain(merging_log):
    polys = extract_theta_shocks(merging_log, 0.15)
    assert len(polys) == 2
    strengths = sorted(min(p.strengths) for p in polys)
    assert strengths[0] == pytest.approx(-0.4)
    for p in polys:
        for tr in segment_traces(merging_log, p):
            assert tr.lax_ok()
            assert tr.rh_residual < 1e-12


def test_trace_rejects_node_times(merging_log):
    p = extract_theta_shocks(merging_log, 0.15)[0]
    with pytest.raises(PreconditionError):
        trace_limits(merging_log, p, p.nodes[0][0])


def test_polyline_distance_to_itself(merging_log):
    p = extract_theta_shocks(merging_log, 0.15)[0]
    assert polyline_distance(p, p) == 0.0


def test_count_bound_holds_with_no_interactions(merging_log):
    cfg = FunctionalConfig.from_calibration(C3=1.0, M1=1.0, vbar_sup=0.3)
    rep = count_bound(merging_log, 0.15, cfg, c_star=0.3)
    assert rep.count == 2
    assert rep.bound >= 2 * rep.V / 0.15
    assert rep.passed


def test_c_star_ceiling():
    assert c_star_ceiling(1, 0.1, 0.5, 0.2, 1.0) == math.inf
    assert c_star_ceiling(10, 0.1, 0.5, 0.2, 1.0) == pytest.approx(0.5 / (1e-3 * 6))


def test_fit_exponent():
    x = np.array([0.1, 0.05, 0.025])
    assert fit_exponent(x, 3 * x**1.5) == pytest.approx(1.5)
    assert math.isnan(fit_exponent(x, [1, 0, 1]))
