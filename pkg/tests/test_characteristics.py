import numpy as np
import pytest

from fronttrack.characteristics import (
    backward_characteristic,
    classify_crossings,
    interval_functionals,
    minimal_backward,
    theta_along,
    theta_audit,
)
from fronttrack.functionals import FunctionalConfig


@pytest.fixture(scope="module")
def cfg():
    return FunctionalConfig.from_calibration(C3=1.5, M1=2.6, vbar_sup=0.3)


def live_pieces(path):
    return [p for p in path.pieces if p.t1 > p.t0]


def test_path_spans_from_zero_to_anchor(burgers_shock_log):
    log = burgers_shock_log
    T = log.final.time
    for fam, X in ((1, -0.3), (1, 0.2), (2, 0.4)):
        path = minimal_backward(log, fam, (T, X))
        pieces = live_pieces(path)
        assert pieces[0].t0 == pytest.approx(0.0, abs=1e-12)
        assert pieces[-1].t1 == pytest.approx(T)
        assert pieces[-1].x1 == pytest.approx(X, abs=1e-12)
        for a, b in zip(pieces, pieces[1:]):
            assert a.t1 == pytest.approx(b.t0, abs=1e-12)
            assert a.x1 == pytest.approx(b.x0, abs=1e-12)


def test_free_pieces_move_with_characteristic_speed(burgers_shock_log, burgers):
    log = burgers_shock_log
    path = minimal_backward(log, 2, (log.final.time, 0.45))
    for p in live_pieces(path):
        if p.front_id is None:
            slope = (p.x1 - p.x0) / (p.t1 - p.t0)
            assert slope == pytest.approx(burgers.eigenvalue(2, p.state), abs=1e-9)


def test_minimal_path_lies_left_of_other_backward_paths(quadratic_log):
    log = quadratic_log
    T = log.final.time
    for fam in (1, 2):
        X = float(np.median(log.final.positions()))
        mini = minimal_backward(log, fam, (T, X))
        for seed in range(4):
            other = backward_characteristic(log, fam, (T, X), rng=np.random.default_rng(seed))
            for p in live_pieces(other):
                tm = 0.5 * (p.t0 + p.t1)
                xm = 0.5 * (p.x0 + p.x1)
                q = next(q for q in live_pieces(mini) if q.t0 <= tm <= q.t1)
                xq = q.x0 + (q.x1 - q.x0) * (tm - q.t0) / (q.t1 - q.t0)
                assert xq <= xm + 1e-9


def test_invariant_is_constant_along_burgers_characteristics(burgers_shock_log, cfg):
    log = burgers_shock_log
    path = minimal_backward(log, 2, (log.final.time, -0.4))
    vals = {round(p.state[1], 14) for p in live_pieces(path) if p.front_id is None}
    assert len(vals) == 1


def test_theta_is_non_increasing_without_source(burgers_shock_log, cfg):
    log = burgers_shock_log
    series = interval_functionals(log, cfg)
    assert len(series) == len(log.events) + 1
    for fam, X in ((1, -0.6), (2, 0.3)):
        path = minimal_backward(log, fam, (log.final.time, X))
        audits = theta_audit(path, log, cfg, series)
        assert all(a.passed for a in audits)
        assert len(theta_along(path, log, cfg, series)) == len(audits) + 1


def test_crossing_labels(quadratic_log):
    path = minimal_backward(quadratic_log, 1, (quadratic_log.final.time, 0.3))
    labels = {r.label for r in classify_crossings(path, quadratic_log)}
    allowed = {"transverse_front", "same_family_front", "transverse_interaction", "same_family_interaction",
               "splitting_grid", "splitting_offgrid", "splitting_grid_on_front", "splitting_offgrid_on_front"}
    assert labels <= allowed
    assert any(lab.startswith("splitting") for lab in labels)
