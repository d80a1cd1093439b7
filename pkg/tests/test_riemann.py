import math

import numpy as np
import pytest

from fronttrack.riemann import (
    blended_shock_speed,
    connect,
    cutoff,
    hugoniot_point,
    rarefaction_fan_partition,
    solve_riemann,
    solve_strengths,
    to_coords,
)


def burgers_flux(u):
    return np.array([-u[0] + u[0] ** 2 / 2, u[1] + u[1] ** 2 / 2])


def test_cutoff_plateaus_and_slope():
    assert cutoff(-3.0) == 1.0 and cutoff(-2.0) == 1.0
    assert cutoff(-1.0) == 0.0 and cutoff(0.5) == 0.0
    ys = np.linspace(-2.0, -1.0, 2001)
    vals = cutoff(ys)
    slope = np.diff(vals) / np.diff(ys)
    assert np.all(slope <= 1e-12)
    assert slope.min() >= -2.0 - 1e-6
    assert vals[1000] == pytest.approx(0.5)


def test_cutoff_scalar_and_vector_agree():
    ys = np.linspace(-2.5, -0.5, 17)
    assert np.allclose(cutoff(ys), [cutoff(float(y)) for y in ys])


def test_large_burgers_shock_has_rankine_hugoniot_speed(burgers):
    eps = 1e-3
    fan = solve_riemann(burgers, (0.2, 0.0), (-0.1, 0.0), eps)
    assert len(fan.fronts) == 1
    f = fan.fronts[0]
    assert f.family == 1 and f.strength == pytest.approx(-0.3)
    assert f.speed == pytest.approx(-1 + 0.05, abs=1e-12)


def test_weak_shock_speed_blends_towards_characteristic(burgers):
    eps = 0.01
    vl = np.array([0.05, 0.0])
    # sigma / sqrt(eps) = -2.5 lies on the plateau where the weight is one
    rh = hugoniot_point(burgers, 1, -0.25, vl).speed
    assert rh == pytest.approx(-1 + (0.05 - 0.2) / 2)
    assert blended_shock_speed(burgers, 1, -0.25, vl, eps) == pytest.approx(rh, abs=1e-14)
    tiny = blended_shock_speed(burgers, 1, -0.05, vl, eps)
    assert tiny != pytest.approx(hugoniot_point(burgers, 1, -0.05, vl).speed, abs=1e-6)


def test_fan_partition_on_grid(burgers):
    eps = 0.02
    fronts = rarefaction_fan_partition(burgers, 1, (-0.05, 0.0), (0.07, 0.0), eps)
    # grid values crossed: -0.04, -0.02, 0, 0.02, 0.04, 0.06
    assert len(fronts) == 7
    assert sum(f.strength for f in fronts) == pytest.approx(0.12)
    for a, b in zip(fronts, fronts[1:]):
        assert a.right == b.left
        assert a.speed < b.speed
    # speed is lambda_1 at the lower grid value of each cell
    assert fronts[1].speed == pytest.approx(-1 - 0.04)


def test_chain_connects_end_states(quadratic):
    rng = np.random.default_rng(3)
    for _ in range(30):
        ul = rng.uniform(-0.15, 0.15, 2)
        ur = rng.uniform(-0.15, 0.15, 2)
        fan = solve_riemann(quadratic, ul, ur, 0.01)
        fr = fan.fronts
        assert np.allclose(fr[0].left, ul, atol=0) and np.allclose(fr[-1].right, ur, atol=0)
        for a, b in zip(fr, fr[1:]):
            assert a.right == b.left
            assert a.speed <= b.speed + 1e-12


def test_strength_solver_reproduces_right_state(psystem):
    vl = np.array(to_coords(psystem, (0.05, -0.02)))
    vr = np.array(to_coords(psystem, (-0.04, 0.06)))
    sig = solve_strengths(psystem, vl, vr, 0.005)
    _, v_end = connect(psystem, sig, vl, 0.005)
    assert np.max(np.abs(np.asarray(v_end) - vr)) < 1e-13


def test_identical_states_give_no_fronts(quadratic):
    assert solve_riemann(quadratic, (0.1, 0.1), (0.1, 0.1), 0.01).fronts == ()


def test_single_front_provision(burgers):
    fan = solve_riemann(burgers, (-0.1, 0.0), (0.1, 0.0), 0.01, single_front=(True, False))
    assert len(fan.fronts) == 1
    assert fan.fronts[0].speed == pytest.approx(-1 + 0.1)


def test_shock_satisfies_rankine_hugoniot_exactly_when_large(burgers):
    eps = 1e-4
    ul, ur = np.array([0.0, 0.25]), np.array([0.0, -0.05])
    f = solve_riemann(burgers, ul, ur, eps).fronts[0]
    jump = burgers_flux(ur) - burgers_flux(ul)
    assert np.allclose(f.speed * (ur - ul), jump, atol=1e-12)
