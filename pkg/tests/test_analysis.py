import numpy as np
import pytest

from fronttrack.analysis import (
    TestFunction as Bump,
    decay_audit,
    fit_decay_envelope,
    invariant_region_audit,
    l1_distance,
    patterns_at,
    sup_norm,
    total_variation,
    tv_plus,
    weak_residual,
    windowed_tv,
)
from fronttrack.errors import NotApplicable, PreconditionError
from fronttrack.model import State
from fronttrack.riemann import Front
from fronttrack.tracker import RunConfig, WavePattern, riemann_datum, run


def burgers_pattern():
    s = [State(0.0, 0.0), State(0.1, 0.0), State(0.1, -0.05), State(-0.02, -0.05)]
    fams = (1, 2, 1)
    fronts = tuple(Front(f, x, a, b, (b[f - 1] - a[f - 1]), 0.0, id=k)
                   for k, (f, x, a, b) in enumerate(zip(fams, (-0.5, 0.0, 0.5), s[:-1], s[1:])))
    return WavePattern(0.0, fronts, s[0])


def test_variation_functionals_on_hand_pattern(burgers):
    p = burgers_pattern()
    assert tv_plus(p, 1, (-1, 1)) == pytest.approx(0.1)
    assert tv_plus(p, 1, (0, 1)) == 0.0
    assert tv_plus(p, 2, (-1, 1)) == 0.0
    assert total_variation(burgers, p) == pytest.approx(0.1 + 0.05 + 0.12)
    assert total_variation(burgers, p, (-0.1, 0.6)) == pytest.approx(0.17)
    assert windowed_tv(burgers, p, 0.6) == pytest.approx(0.17)
    assert windowed_tv(burgers, p, 0.1) == pytest.approx(0.12)
    assert sup_norm(burgers, p) == pytest.approx(np.hypot(0.1, 0.05))


def test_l1_distance_of_shifted_step():
    a = WavePattern(0.0, (Front(1, 0.0, State(0.2, 0), State(0, 0), -0.2, 0.0),), State(0.2, 0))
    b = WavePattern(0.0, (Front(1, 0.1, State(0.2, 0), State(0, 0), -0.2, 0.0),), State(0.2, 0))
    assert l1_distance(None, a, b, (-1, 1)) == pytest.approx(0.02)
    assert l1_distance(None, a, a, (-1, 1)) == 0.0


def test_decay_envelope_fit_recovers_coefficients():
    t = np.array([0.5, 1, 2, 4])
    A, B, res = fit_decay_envelope(t, 0.3 / t + 0.1)
    assert A == pytest.approx(0.3) and B == pytest.approx(0.1) and res < 1e-12


def test_test_function_antiderivative():
    tf = Bump(0.5, 0.25, 0.1, 0.3)
    xs = np.linspace(-0.3, 0.5, 401)
    h = 1e-6
    assert np.allclose((tf.Chi(xs + h) - tf.Chi(xs - h)) / (2 * h), tf.chi(xs), atol=1e-8)
    assert tf.Chi(-1.0) == pytest.approx(0.0, abs=1e-15)
    ts = np.linspace(0.26, 0.74, 301)
    assert np.allclose((tf.psi(ts + h) - tf.psi(ts - h)) / (2 * h), tf.dpsi(ts), atol=1e-7)


def test_weak_residual_vanishes_for_exact_shock(burgers):
    log = run(burgers, riemann_datum((0.3, 0.0), (-0.2, 0.0)), None, RunConfig(1e-3, 5e-4, 1.0))
    tests = [Bump(0.5, 0.4, xc, 0.6) for xc in (-1.0, -0.5, 0.0)]
    # exact up to the time quadrature; approximate fans give about 1e-4 here
    assert np.max(np.abs(weak_residual(log, None, tests))) < 1e-8


def test_patterns_at_agrees_with_replay(quadratic_log):
    times = [0.0, 0.05, 0.123, 0.3]
    for t, p in zip(times, patterns_at(quadratic_log, times)):
        q = quadratic_log.pattern_at(t)
        assert l1_distance(None, p, q, (-3, 3)) == pytest.approx(0.0, abs=1e-15)


def test_decay_audit_for_centred_rarefaction(burgers):
    log = run(burgers, riemann_datum((-0.2, 0.0), (0.2, 0.0)), None, RunConfig(0.01, 0.005, 1.0))
    rep = decay_audit(log, (-1.2, -0.6), 1.0, c1=0.5, calM=0.0)
    assert rep.tv_plus[0] > 0
    assert rep.passed
    with pytest.raises(PreconditionError):
        decay_audit(log, (-1.2, -0.6), 0.0, c1=0.5, calM=0.0)


def test_invariant_region_not_applicable_to_burgers(burgers_shock_log):
    with pytest.raises(NotApplicable):
        invariant_region_audit(burgers_shock_log, 0.01, 1.0)


def test_invariant_region_on_quadratic(quadratic_log):
    reps = invariant_region_audit(quadratic_log, 0.1, 2.0)
    assert reps and all(r.passed for r in reps)
