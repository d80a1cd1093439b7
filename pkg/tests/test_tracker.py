import numpy as np
import pytest

from fronttrack.errors import ConfigError, NonTermination, PreconditionError
from fronttrack.model import SourceModel
from fronttrack.tracker import (
    FrontTracker,
    FunctionDatum,
    PiecewiseConstantDatum,
    RunConfig,
    State,
    riemann_datum,
    run,
    sample_datum,
)


def test_run_config_validation(quadratic):
    with pytest.raises(ConfigError):
        RunConfig(0.01, 0.02, 1.0)
    with pytest.raises(ConfigError):
        RunConfig(-0.01, 0.005, 1.0)
    with pytest.raises(ConfigError):
        RunConfig(0.01, 0.0099, 1.0).validate_for(quadratic)
    RunConfig(0.01, 0.005, 1.0).validate_for(quadratic)


def test_datum_validation():
    with pytest.raises(PreconditionError):
        PiecewiseConstantDatum((0.0, 0.0), (State(0, 0), State(1, 0), State(0, 0)))
    with pytest.raises(PreconditionError):
        PiecewiseConstantDatum((0.0,), (State(0, 0),))


def test_sampling_never_increases_variation():
    env = lambda x: np.where(np.abs(x) < 1, (1 - x * x) ** 2, 0.0)
    datum = FunctionDatum(lambda x: np.stack([0.1 * np.sin(7 * x) * env(x), 0.05 * np.cos(3 * x) * env(x)]),
                          (-1.0, 1.0))
    pc = sample_datum(datum, 0.01)
    xs = np.linspace(-1.5, 1.5, 30001)
    fine = datum(xs)
    tv_fine = np.sum(np.abs(np.diff(fine, axis=1)))
    assert pc.total_variation() <= tv_fine + 1e-12


def test_patterns_stay_ordered_and_chained(quadratic_log):
    for t in np.linspace(0, quadratic_log.final.time, 13):
        p = quadratic_log.pattern_at(float(t))
        assert p.is_ordered()
        assert p.chain_residual() == 0.0


def test_far_field_states_are_preserved(burgers_shock_log):
    log = burgers_shock_log
    assert log.final.leftmost_state == log.initial.leftmost_state
    assert log.final.rightmost_state == log.initial.rightmost_state


def test_large_shock_conserves_mass_exactly(burgers):
    ul, ur = (0.3, 0.0), (-0.2, 0.0)
    log = run(burgers, riemann_datum(ul, ur), None, RunConfig(1e-3, 5e-4, 1.0))
    f = lambda u: np.array([-u[0] + u[0] ** 2 / 2, u[1] + u[1] ** 2 / 2])
    expected = log.initial.integral(-5, 5) + 1.0 * (f(np.array(ul)) - f(np.array(ur)))
    assert np.allclose(log.final.integral(-5, 5), expected, atol=1e-12)


def test_mass_balance_is_first_order_in_epsilon(burgers):
    f = lambda u: np.array([-u[0] + u[0] ** 2 / 2, u[1] + u[1] ** 2 / 2])
    ul, ur = np.array([-0.1, 0.2]), np.array([0.15, -0.1])
    errs = []
    for eps in (0.02, 0.01, 0.005):
        log = run(burgers, riemann_datum(ul, ur), None, RunConfig(eps, eps / 2, 1.0))
        expected = log.initial.integral(-5, 5) + f(ul) - f(ur)
        errs.append(np.max(np.abs(log.final.integral(-5, 5) - expected)))
    assert errs[0] < 0.02
    assert errs[2] < errs[0] / 2


def test_constant_state_follows_explicit_euler(burgers):
    src = SourceModel.from_expressions("-0.5*u1", "0.1", "0", "1", 10.0)
    tau = 0.01
    log = run(burgers, PiecewiseConstantDatum((), (State(0.2, 0.0),)), src, RunConfig(0.02, tau, 0.5))
    n = 50
    u = log.final.leftmost_state
    assert u[0] == pytest.approx(0.2 * (1 - 0.5 * tau) ** n, rel=1e-12)
    assert u[1] == pytest.approx(0.1 * tau * n, rel=1e-12)


def test_runs_are_deterministic(quadratic):
    datum = PiecewiseConstantDatum((0.0, 0.1), (State(0.05, 0.0), State(-0.05, 0.05), State(0.0, 0.0)))
    cfg = RunConfig(0.01, 0.005, 0.2, seed=7)
    a = run(quadratic, datum, None, cfg)
    b = run(quadratic, datum, None, cfg)
    assert len(a.events) == len(b.events)
    assert a.final.fronts == b.final.fronts


def test_event_cap_raises_with_partial_log(quadratic):
    datum = PiecewiseConstantDatum((0.0, 0.1), (State(0.05, 0.0), State(-0.05, 0.05), State(0.0, 0.0)))
    with pytest.raises(NonTermination) as info:
        run(quadratic, datum, None, RunConfig(0.01, 0.005, 0.2, event_cap=3))
    assert info.value.log is not None


def test_interaction_events_are_time_ordered(quadratic_log):
    times = [e.time for e in quadratic_log.events]
    assert times == sorted(times)
    kinds = {e.kind for e in quadratic_log.events}
    assert kinds <= {"interaction", "splitting"}


def test_tracker_resolves_initial_jumps(quadratic):
    tr = FrontTracker(quadratic, None, RunConfig(0.01, 0.005, 0.1))
    init = tr.init_approximation(riemann_datum((0.05, 0.02), (-0.03, 0.04), 0.25))
    assert init.time == 0.0
    assert all(f.position == 0.25 for f in init.fronts)
    assert init.leftmost_state == State(0.05, 0.02)
    assert init.rightmost_state == State(-0.03, 0.04)
