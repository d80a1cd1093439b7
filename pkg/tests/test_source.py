import numpy as np
import pytest
from scipy import integrate

from fronttrack.errors import PreconditionError, SourceInvalid
from fronttrack.experiments import standard_source
from fronttrack.model import SourceModel
from fronttrack.source import audit_discrete_envelopes, discretize_g, discretize_omega


@pytest.fixture(scope="module")
def xsource():
    return SourceModel.from_expressions("0.1*exp(-t)*cos(5*x)*bump(2*x)*(1+u1)", "-0.05*sin(3*x)*u2",
                                        "0.5*bump(2*x)", "0.1*exp(-t)", 5.0, omega1_support=(-0.5, 0.5))


def test_cell_average_matches_quadrature(xsource):
    ds = discretize_g(xsource, 0.05, 0.02, 1.0)
    u = np.array([0.1, -0.2])
    n, j = 3, 2
    for k in range(2):
        ref, _ = integrate.dblquad(lambda x, t: float(xsource(t, x, u)[k]),
                                   (n - 1) * 0.02, n * 0.02, j * 0.05, (j + 1) * 0.05)
        assert ds.g_cell(n, j, u)[k] == pytest.approx(ref / (0.05 * 0.02), rel=1e-9, abs=1e-14)


def test_vectorized_cells_match_scalar(xsource):
    ds = discretize_g(xsource, 0.05, 0.02, 1.0)
    cells = [-3, 0, 4]
    U = np.array([[0.1, -0.1, 0.0], [0.05, 0.2, -0.3]])
    vec = ds.g_cells(2, cells, U)
    for c, j in enumerate(cells):
        assert np.allclose(vec[:, c], ds.g_cell(2, j, U[:, c]), atol=1e-15)


def test_time_reservoir_is_a_tail_sum():
    src = standard_source()
    ds = discretize_g(src, 0.01, 0.005, 0.1)
    w1, w2 = discretize_omega(ds)
    assert w1 == {}
    assert ds.tail(1) == pytest.approx(0.005 * sum(w2.values()))
    assert ds.tail(ds.n_steps + 1) == 0.0
    exact, _ = integrate.quad(lambda s: 0.02 * np.exp(-s), 0, 0.1)
    assert ds.omega2_norm == pytest.approx(exact, rel=1e-10)
    assert ds.tail_at(0.05) > ds.tail_at(0.05, after_step=True)


def test_space_envelope_norm(xsource):
    ds = discretize_g(xsource, 0.05, 0.02, 1.0)
    exact, _ = integrate.quad(lambda x: 0.5 * (1 - 4 * x * x) ** 2, -0.5, 0.5)
    assert ds.omega1_norm == pytest.approx(exact, rel=1e-8)


def test_discrete_envelopes_hold(quadratic):
    ds = discretize_g(standard_source(), 0.01, 0.005, 0.5)
    assert audit_discrete_envelopes(ds, quadratic, samples=300).ok


def test_bad_grid_parameters():
    with pytest.raises(PreconditionError):
        discretize_g(standard_source(), 0.0, 0.01, 1.0)


def test_non_finite_source_is_rejected():
    src = SourceModel.from_expressions("1/u1", "0", "0", "1", 1.0)
    ds = discretize_g(src, 0.1, 0.05, 1.0)
    with pytest.raises(SourceInvalid):
        ds.g_cell(1, 0, np.array([0.0, 0.0]))
