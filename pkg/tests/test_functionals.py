import itertools

import numpy as np
import pytest

from fronttrack.experiments import standard_source
from fronttrack.functionals import (
    FunctionalConfig,
    FunctionalMonitor,
    accumulate_muIC,
    approaching_sum,
    compute_Qtilde,
    compute_V,
    interaction_atom,
    interaction_defect,
    is_approaching,
    muIC_total,
    step_perturbation,
)
from fronttrack.model import State
from fronttrack.riemann import Front
from fronttrack.tracker import PiecewiseConstantDatum, RunConfig, WavePattern, run


def make_fronts(spec):
    fronts = []
    for k, (fam, s) in enumerate(spec):
        fronts.append(Front(fam, 0.1 * k, State(0, 0), State(0, 0), s, 0.0, id=k))
    return fronts


def brute_force_approaching(fronts):
    return sum(abs(a.strength * b.strength) for a, b in itertools.combinations(fronts, 2) if is_approaching(a, b))


def test_approaching_sum_matches_pairwise_definition():
    rng = np.random.default_rng(11)
    for _ in range(100):
        n = rng.integers(0, 9)
        spec = [(int(rng.integers(1, 3)), float(rng.uniform(-0.1, 0.1))) for _ in range(n)]
        fronts = make_fronts(spec)
        assert approaching_sum(fronts) == pytest.approx(brute_force_approaching(fronts), abs=1e-15)


def test_approaching_rules():
    a, b = make_fronts([(2, 0.1), (1, 0.1)])
    assert is_approaching(a, b) and not is_approaching(b, a)
    c, d = make_fronts([(1, 0.1), (1, 0.2)])
    assert not is_approaching(c, d)
    e, f = make_fronts([(1, 0.1), (1, -0.2)])
    assert is_approaching(e, f)


def test_transverse_upstream_strength():
    fronts = make_fronts([(2, 0.1), (1, -0.2), (2, -0.05), (1, 0.3)])
    p = WavePattern(0.0, tuple(fronts), State(0, 0))
    assert compute_Qtilde(p, 1, 0.25) == pytest.approx(0.15)
    assert compute_Qtilde(p, 2, 0.15) == pytest.approx(0.3)
    assert compute_Qtilde(p, 2, 0.05) == pytest.approx(0.5)
    assert compute_V(p) == pytest.approx(0.65)


def test_weights_from_calibration():
    cfg = FunctionalConfig.from_calibration(C3=2.0, M1=1.5, vbar_sup=0.1)
    assert cfg.K == pytest.approx(8 * 2 * 1.5 * 0.1)
    assert cfg.R == pytest.approx(8.0)
    assert cfg.A == pytest.approx(4 * 2 * 1.5**2 * 0.01)
    assert cfg.C1 == cfg.C3


def test_interaction_atom_counts_cancellation():
    a, b = make_fronts([(1, 0.1), (1, -0.04)])
    assert interaction_atom(a, b) == pytest.approx(0.004 + 0.08)
    c, d = make_fronts([(2, 0.1), (1, -0.04)])
    assert interaction_atom(c, d) == pytest.approx(0.004)


def test_transverse_interaction_defect_is_cubic(quadratic):
    ratios = []
    for s in (0.04, 0.02, 0.01):
        lhs, prod = interaction_defect(quadratic, (2, -s), (1, -s))
        ratios.append(lhs / prod)
    # lhs / (|s s'| (|s| + |s'|)) does not grow as the strengths shrink
    assert all(b <= a * 1.01 for a, b in zip(ratios, ratios[1:]))
    assert max(ratios) < 1e-2


def test_source_step_perturbation_is_linear_in_tau(quadratic):
    src = standard_source()
    d = [step_perturbation(quadratic, src, 1, -0.04, tau) for tau in (1e-2, 5e-3)]
    assert d[0] / d[1] == pytest.approx(2.0, rel=0.05)


def test_monitor_on_source_free_run(quadratic):
    datum = PiecewiseConstantDatum((0.0, 0.05), (State(0.01, 0.0), State(-0.01, 0.01), State(0.0, 0.0)))
    cfg = FunctionalConfig.from_calibration(C3=1.5, M1=2.6, vbar_sup=0.02)
    mon = FunctionalMonitor(cfg, C1=1.0)
    log = run(quadratic, datum, None, RunConfig(0.005, 0.0025, 0.1), monitors=[mon])
    summary = mon.summary()
    assert summary["upsilon"]["checked"] == sum(e.kind == "interaction" for e in log.events) + \
        sum(e.kind == "splitting" for e in log.events)
    assert mon.failures() == []


def test_monitor_with_source(quadratic):
    datum = PiecewiseConstantDatum((0.0,), (State(0.01, -0.005), State(-0.008, 0.01)))
    cfg = FunctionalConfig.from_calibration(C3=1.5, M1=2.6, vbar_sup=0.02)
    mon = FunctionalMonitor(cfg, C1=1.0)
    run(quadratic, datum, standard_source(), RunConfig(0.005, 0.0025, 0.02), monitors=[mon])
    s = mon.summary()
    assert s["w_telescopes"]["failed"] == 0
    assert s["upsilon"]["failed"] == 0
    assert s["qhat_splitting"]["checked"] > 0


def test_muic_total_is_sum_of_atoms(quadratic_log):
    atoms = accumulate_muIC(quadratic_log)
    assert all(a.mass >= 0 for a in atoms)
    assert muIC_total(quadratic_log) == pytest.approx(sum(a.mass for a in atoms))
