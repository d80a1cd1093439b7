import math

import numpy as np
import pytest

from fronttrack.errors import ConfigError, ModelInvalid, OutOfDomain
from fronttrack.expr import Expression
from fronttrack.model import (
    SourceModel,
    build_model,
    check_envelopes,
    check_genuine_nonlinearity,
    eigen,
    hyperbolicity_gap,
    inverse_riemann_invariants,
    invariant_orthogonality_residual,
    max_speed,
    normal_form_coefficients,
    riemann_invariants,
)
from fronttrack.experiments import standard_source


MODELS = ("burgers", "quadratic", "psystem")


def test_burgers_eigenvalues_are_shifted_states(burgers):
    lam1, lam2, r1, r2 = eigen(burgers, (0.1, -0.2))
    assert lam1 == pytest.approx(-0.9)
    assert lam2 == pytest.approx(0.8)
    assert abs(r1 @ r2) < 1e-12


def test_eigenvectors_are_oriented_for_increasing_speed(quadratic):
    u = np.array([0.05, -0.1])
    _, _, r1, r2 = eigen(quadratic, u)
    for i, r in ((1, r1), (2, r2)):
        assert quadratic.lambda_gradient(u, i) @ r > 0


@pytest.mark.parametrize("name", MODELS)
def test_shipped_models_are_strictly_hyperbolic(name):
    model = build_model(name)
    assert hyperbolicity_gap(model, samples=2000) >= model.c0
    assert check_genuine_nonlinearity(model, samples=100) > 0


@pytest.mark.parametrize("name", MODELS)
def test_invariant_map_round_trip(name):
    model = build_model(name)
    rng = np.random.default_rng(1)
    for _ in range(50):
        rad = 0.9 * model.r * math.sqrt(rng.uniform())
        ang = rng.uniform(0, 2 * math.pi)
        u = np.array([rad * math.cos(ang), rad * math.sin(ang)])
        back = inverse_riemann_invariants(model, riemann_invariants(model, u))
        assert np.allclose(back, u, atol=1e-10)


@pytest.mark.parametrize("name", MODELS)
def test_invariants_are_constant_along_other_family(name):
    model = build_model(name)
    for u in ((0.0, 0.0), (0.1, -0.05), (-0.08, 0.1)):
        assert invariant_orthogonality_residual(model, u) < 1e-6


def test_invariants_vanish_at_origin(quadratic):
    v = riemann_invariants(quadratic, (0.0, 0.0))
    assert abs(v[0]) < 1e-12 and abs(v[1]) < 1e-12


def test_eigen_outside_ball_raises(burgers):
    with pytest.raises(OutOfDomain):
        eigen(burgers, (0.6, 0.0))


def test_unknown_model_name():
    with pytest.raises(ModelInvalid):
        build_model("shallow_water")


def test_normal_form_matches_quadratic_coefficients(quadratic):
    nf = normal_form_coefficients(quadratic)
    ref = quadratic.analytic_normal_form
    assert np.allclose(nf.as_tuple(), ref.as_tuple(), atol=1e-6)


def test_normal_form_of_burgers(burgers):
    nf = normal_form_coefficients(burgers)
    # f1 = -u1 + u1^2/2 and f2 = u2 + u2^2/2 have unit diagonal curvature only
    assert np.allclose(nf.as_tuple(), (1, 0, 0, 0, 0, 1), atol=1e-6)


def test_max_speed_bounds_sampled_speeds(quadratic):
    lam_hat = max_speed(quadratic)
    rng = np.random.default_rng(0)
    for _ in range(200):
        u = rng.uniform(-0.28, 0.28, 2)
        lam1, lam2 = quadratic.eigenvalues(u)
        assert max(abs(lam1), abs(lam2)) <= lam_hat


def test_standard_source_respects_envelopes(quadratic):
    rep = check_envelopes(standard_source(), quadratic, samples=2000)
    assert rep.ok, rep


def test_violated_envelope_is_detected(quadratic):
    src = SourceModel.from_expressions("0.1*u1", "0", "0", "0.01", 1.0)
    assert not check_envelopes(src, quadratic, samples=500).ok


def test_zero_source_flags(quadratic):
    z = SourceModel.zero()
    assert z.is_zero and not z.x_dependent
    assert np.all(z(0.3, 0.1, np.array([0.1, 0.2])) == 0)


def test_expression_evaluates_and_rejects_unknown_names():
    e = Expression("2*x + bump(x) - sin(pi*x)", ("x",))
    assert float(e(x=0.5)) == pytest.approx(1 + 0.75**2 - 1)
    assert float(e(x=2.0)) == pytest.approx(4.0, abs=1e-12)
    with pytest.raises(ConfigError):
        Expression("y + 1", ("x",))
    with pytest.raises(ConfigError):
        Expression("__import__('os')", ("x",))
    with pytest.raises(ConfigError):
        Expression("x < 1", ("x",))
