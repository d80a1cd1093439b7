"""Discretization of the source term and its envelopes on the splitting grid.

Cells are ``[x_j, x_{j+1})`` with ``x_j = j * eps`` and steps are
``[t_{n-1}, t_n)`` with ``t_n = n * tau``.  The source value used at the
splitting time ``t_n`` is the space-time average of ``g`` over step ``n``
and the cell, with the state held fixed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

from .errors import PreconditionError, SourceInvalid
from .model import FluxModel, SourceModel


class DiscretizedSource:
    """Cell-averaged source ``g_{n,j}(u)`` plus the discrete envelopes.

    Args:
        source: the continuous source model.
        epsilon: spatial cell width.
        tau: splitting step.
        horizon: final time; steps ``n = 1 .. floor(horizon / tau)`` exist.
        support: interval outside of which ``omega1`` vanishes.  Defaults to
            the source's declared support.
        nodes: Gauss-Legendre points per direction.
    """

    def __init__(self, source: SourceModel, epsilon: float, tau: float, horizon: float,
                 support=None, nodes: int = 4):
        if not (epsilon > 0 and tau > 0):
            raise PreconditionError("epsilon and tau must be positive")
        self.source = source
        self.epsilon = float(epsilon)
        self.tau = float(tau)
        self.horizon = float(horizon)
        self.n_steps = int(math.floor(self.horizon / self.tau + 1e-9))
        self.support = support if support is not None else source.omega1_support
        self.nodes, self.weights = np.polynomial.legendre.leggauss(nodes)
        self.weights = self.weights / 2.0
        self._omega1 = lru_cache(maxsize=None)(self._omega1_uncached)
        self._omega2 = lru_cache(maxsize=None)(self._omega2_uncached)
        self.omega2_steps = np.array([self._omega2(n) for n in range(1, self.n_steps + 1)])
        # tail[n-1] = tau * sum_{k >= n} omega_{2,k}
        self._tail = np.concatenate([np.cumsum(self.omega2_steps[::-1])[::-1], [0.0]]) * self.tau

    # -- grids -------------------------------------------------------------
    def cell_index(self, x: float) -> int:
        return int(math.floor(x / self.epsilon))

    def step_time(self, n: int) -> float:
        return n * self.tau

    def _nodes_on(self, a: float, b: float) -> np.ndarray:
        return a + (b - a) * (self.nodes + 1.0) / 2.0

    # -- source values -----------------------------------------------------
    def g_cell(self, n: int, j: int, u) -> np.ndarray:
        """``g_{n,j}(u)``: average of ``g`` over step ``n`` and cell ``j``."""
        u = np.asarray(u, float)
        if self.source.is_zero:
            return np.zeros_like(u)
        ts = self._nodes_on((n - 1) * self.tau, n * self.tau)
        xs = self._nodes_on(j * self.epsilon, (j + 1) * self.epsilon)
        T, X = np.meshgrid(ts, xs, indexing="ij")
        W = np.outer(self.weights, self.weights)
        extra = (1,) * (u.ndim - 1)
        vals = self.source(T.reshape(T.shape + extra), X.reshape(X.shape + extra), u[:, None, None, ...])
        out = np.tensordot(vals, W, axes=([1, 2], [0, 1])) if u.ndim == 1 else np.einsum("kab...,ab->k...", vals, W)
        if not np.all(np.isfinite(out)):
            raise SourceInvalid(f"non-finite source average in step {n}, cell {j}")
        return out

    def g_cells(self, n: int, cells, U) -> np.ndarray:
        """Vectorized ``g_{n,j}(u)`` for a list of cells and states ``U`` (2, N)."""
        U = np.asarray(U, float)
        if self.source.is_zero:
            return np.zeros_like(U)
        cells = np.asarray(cells, float)
        ts = self._nodes_on((n - 1) * self.tau, n * self.tau)
        xs = cells[:, None] * self.epsilon + self.epsilon * (self.nodes[None, :] + 1.0) / 2.0
        vals = self.source(ts[None, :, None], xs[:, None, :], U[:, :, None, None])
        out = np.einsum("knab,a,b->kn", vals, self.weights, self.weights)
        if not np.all(np.isfinite(out)):
            raise SourceInvalid(f"non-finite source average in step {n}")
        return out

    # -- envelopes ---------------------------------------------------------
    def _omega1_uncached(self, j: int) -> float:
        a = j * self.epsilon
        b = a + self.epsilon
        if self.support is not None and (b <= self.support[0] or a >= self.support[1]):
            return 0.0
        val, _ = integrate.quad(lambda y: float(self.source.omega1(np.float64(y))), a, b,
                                epsabs=1e-14, epsrel=1e-12, limit=200)
        return val / self.epsilon

    def _omega2_uncached(self, n: int) -> float:
        a = (n - 1) * self.tau
        b = n * self.tau
        val, _ = integrate.quad(lambda s: float(self.source.omega2(np.float64(s))), a, b,
                                epsabs=1e-14, epsrel=1e-12, limit=200)
        return val / self.tau

    def omega1_cell(self, j: int) -> float:
        return self._omega1(j)

    def omega2_step(self, n: int) -> float:
        if 1 <= n <= self.n_steps:
            return float(self.omega2_steps[n - 1])
        return self._omega2(n)

    def omega1_cells(self) -> dict:
        """Nonzero cell averages of ``omega1`` over the declared support."""
        if self.support is None:
            if not self.source.x_dependent or self.source.is_zero:
                return {}
            raise PreconditionError("omega1 support is needed to enumerate its cells")
        a, b = self.support
        j0 = self.cell_index(a)
        j1 = self.cell_index(b)
        return {j: self._omega1(j) for j in range(j0, j1 + 1) if self._omega1(j) != 0.0}

    @property
    def omega1_norm(self) -> float:
        """``||omega1^nu||_{L1} = sum_j eps * omega_{1,j}``."""
        if self.source.is_zero:
            return 0.0
        return self.epsilon * sum(self.omega1_cells().values())

    @property
    def omega2_norm(self) -> float:
        return float(self._tail[0])

    def tail(self, n: int) -> float:
        """``tau * sum_{k >= n} omega_{2,k}`` over the steps of the run."""
        if n <= 1:
            return float(self._tail[0])
        if n > self.n_steps:
            return 0.0
        return float(self._tail[n - 1])

    def tail_at(self, t: float, after_step: bool = False) -> float:
        """Reservoir ``W(t) = tau * sum_{t_n >= t} omega_{2,n}``.

        At a splitting time ``t = t_n`` the step itself is counted unless
        ``after_step`` is set.
        """
        n = int(math.ceil(t / self.tau - 1e-9))
        if n < 1:
            n = 1
        if after_step and abs(n * self.tau - t) <= 1e-9 * self.tau:
            n += 1
        return self.tail(n)


def discretize_g(source: SourceModel, epsilon: float, tau: float, horizon: float, nodes: int = 4,
                 support=None) -> DiscretizedSource:
    return DiscretizedSource(source, epsilon, tau, horizon, support=support, nodes=nodes)


def discretize_omega(dsource: DiscretizedSource):
    """``(omega1 cell averages, omega2 step averages)``."""
    return dsource.omega1_cells(), {n + 1: float(w) for n, w in enumerate(dsource.omega2_steps)}


@dataclass(frozen=True)
class DiscreteEnvelopeReport:
    samples: int
    value_ratio: float
    oscillation_ratio: float
    product_ratio: float

    @property
    def ok(self) -> bool:
        return self.value_ratio <= 1 + 1e-6 and self.oscillation_ratio <= 1 + 1e-6


def audit_discrete_envelopes(dsource: DiscretizedSource, model: FluxModel, samples: int = 1000,
                             seed: int = 0) -> DiscreteEnvelopeReport:
    """Sample ``(n, j, u)`` and compare cell values with the discrete envelopes.

    Three ratios are reported: the value bound ``|g_{n,j}| <= omega_{2,n}``,
    the oscillation bound between neighbouring cells and the product reading
    ``|g_{n,j}| <= omega_{1,j} omega_{2,n}``.  Only the first two are the
    hard checks.
    """
    rng = np.random.default_rng(seed)
    if dsource.support is not None:
        j_lo = dsource.cell_index(dsource.support[0]) - 2
        j_hi = dsource.cell_index(dsource.support[1]) + 2
    else:
        j_lo, j_hi = -50, 50
    worst_val = worst_osc = worst_prod = 0.0
    for _ in range(samples):
        n = int(rng.integers(1, max(dsource.n_steps, 1) + 1))
        j = int(rng.integers(j_lo, j_hi + 1))
        jp = int(rng.integers(j_lo, j_hi + 1))
        rad = model.r * math.sqrt(rng.uniform())
        ang = rng.uniform(0, 2 * math.pi)
        u = np.array([rad * math.cos(ang), rad * math.sin(ang)])
        w2 = dsource.omega2_step(n)
        g = dsource.g_cell(n, j, u)
        gp = dsource.g_cell(n, jp, u)
        val = float(np.hypot(*g))
        if val > 1e-300:
            worst_val = max(worst_val, val / w2 if w2 > 0 else math.inf)
        lo, hi = sorted((j, jp))
        between = dsource.epsilon * sum(dsource.omega1_cell(k) for k in range(lo, hi + 1))
        diff = float(np.hypot(*(g - gp)))
        if diff > 1e-13:
            worst_osc = max(worst_osc, diff / (w2 * between) if w2 * between > 0 else math.inf)
        w1 = dsource.omega1_cell(j)
        if val > 1e-300:
            worst_prod = max(worst_prod, val / (w1 * w2) if w1 * w2 > 0 else math.inf)
    return DiscreteEnvelopeReport(samples, worst_val, worst_osc, worst_prod)
