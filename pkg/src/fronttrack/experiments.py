"""Standard data, sources and experiment families.

These builders are shared by calibration, the command line front-end and
the test suites, so the same experiment always means the same numbers.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from .model import FluxModel, IdentityMap, SourceModel
from .tracker import FunctionDatum, PiecewiseConstantDatum, RunConfig, State, run

# A smooth, time-decaying source on the coupled models.  omega1 vanishes
# because the source does not depend on x.
STANDARD_SOURCE = {
    "g1": "0.01*exp(-t)*sin(u1+u2)",
    "g2": "0.01*exp(-t)*(cos(u2)-1+0.5*u1)",
    "omega1": "0",
    "omega2": "0.02*exp(-t)",
    "T_star": 10.0,
}


def standard_source() -> SourceModel:
    s = STANDARD_SOURCE
    return SourceModel.from_expressions(s["g1"], s["g2"], s["omega1"], s["omega2"], s["T_star"])


def to_states(model: FluxModel, V) -> list:
    """Map invariant pairs (rows of ``V``) to conserved states."""
    J = model.invariants
    return [State(*map(float, J.inverse(np.asarray(v, float)))) for v in V]


def random_small_datum(model: FluxModel, eta: float, n_jumps: int = 4, width: float = 0.02,
                       seed: int = 0) -> PiecewiseConstantDatum:
    """``n_jumps`` jumps uniform in ``[-width, width]``, invariants uniform in the eta-disc."""
    rng = np.random.default_rng(seed)
    xs = np.sort(rng.uniform(-width, width, n_jumps))
    V = []
    for _ in range(n_jumps + 1):
        r = eta * math.sqrt(rng.uniform())
        a = rng.uniform(0.0, 2.0 * math.pi)
        V.append((r * math.cos(a), r * math.sin(a)))
    return PiecewiseConstantDatum(tuple(float(x) for x in xs), tuple(to_states(model, V)))


def oscillatory_datum(model: FluxModel, amplitude: float = 0.2, period: float = 0.5,
                      support: tuple = (-0.5, 4.5), family: int = 1) -> FunctionDatum:
    """A sine train in one invariant on ``support``, zero elsewhere."""
    a, b = support

    def func(x):
        x = np.asarray(x, float)
        w = amplitude * np.sin(2 * np.pi * x / period) * ((x >= a) & (x <= b))
        V = np.zeros((2, x.size))
        V[family - 1] = w
        if isinstance(model.invariants, IdentityMap):
            return V
        return np.array([model.invariants.inverse(V[:, k]) for k in range(x.size)]).T.reshape(2, -1)

    return FunctionDatum(func, (a, b))


def bump_datum(model: FluxModel, eta: float, half_width: float = 0.5) -> FunctionDatum:
    """C^1 compactly supported datum of amplitude ``eta`` in both invariants."""

    def func(x):
        x = np.asarray(x, float)
        s = np.clip(x / half_width, -1.0, 1.0)
        env = np.where(np.abs(s) < 1, (1 - s * s) ** 2, 0.0)
        v1 = eta * env * np.sin(6 * x)
        v2 = eta * env * np.cos(5 * x)
        return np.array([model.invariants.inverse(np.array([p, q])) for p, q in zip(v1, v2)]).T.reshape(2, -1)

    return FunctionDatum(func, (-half_width, half_width))


def merge_crossing_datum(model: FluxModel, strength: float = 0.15, transverse: float = 0.2) -> PiecewiseConstantDatum:
    """Two approaching 1-shocks plus a 2-shock that crosses both.

    Left to right: a 2-shock at -0.5, then 1-shocks at -0.1 and 0.
    """
    V = [(strength, 0.5 * transverse), (strength, -0.5 * transverse),
         (0.0, -0.5 * transverse), (-strength, -0.5 * transverse)]
    return PiecewiseConstantDatum((-0.5, -0.1, 0.0), tuple(to_states(model, V)))


def blended_shock_datum(model: FluxModel, epsilon: float, factor: float = 1.5, family: int = 1,
                        offset: tuple = (0.013, 0.02)) -> PiecewiseConstantDatum:
    """A single shock of strength ``-factor * sqrt(epsilon)``, inside the blending band."""
    s = factor * math.sqrt(epsilon)
    vl = np.array(offset, float)
    vr = vl.copy()
    vl[family - 1] += 0.5 * s
    vr[family - 1] -= 0.5 * s
    return PiecewiseConstantDatum((0.0,), tuple(to_states(model, [vl, vr])))


def smallness_run(model: FluxModel, epsilon: float, seed: int, eta: float = 1e-2, T: float = 0.02,
                  source: Optional[SourceModel] = None, monitors=()):
    """One member of the smallness-regime suite (mixed data, nonzero source)."""
    src = standard_source() if source is None else source
    datum = random_small_datum(model, eta, seed=seed)
    return run(model, datum, src, RunConfig(epsilon, epsilon / 2, T, seed=seed), monitors=monitors)
