"""Flux and source models for 2x2 balance laws ``u_t + f(u)_x = g(t, x, u)``.

Every flux is expressed in the normal form where ``Df(0) = diag(-1, 1)``.
Three concrete systems ship with the package:

* :class:`DecoupledBurgers` -- two independent Burgers equations, used as a
  closed-form oracle throughout the test-suite;
* :class:`QuadraticModel` -- the normal form truncated after its quadratic
  terms, with all six second-order coefficients configurable;
* :class:`PSystem` -- the isentropic p-system ``p(tau) = tau**-gamma / gamma``
  rotated into normal form around ``tau = 1``.

Arrays of states use a leading axis of length two, ``u.shape == (2, ...)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy.interpolate import CubicSpline, RectBivariateSpline

from .errors import ModelInvalid, NumericalInconsistency, OutOfDomain
from .expr import Expression

FD_STEP = 1e-6


class State(NamedTuple):
    """A point in conserved variables."""

    u1: float
    u2: float


class RiemannCoords(NamedTuple):
    """A point in Riemann-invariant coordinates."""

    v1: float
    v2: float


@dataclass(frozen=True)
class NormalForm:
    """Second partial derivatives of the flux at the origin."""

    alpha11: float
    alpha12: float
    alpha22: float
    beta11: float
    beta12: float
    beta22: float

    def as_tuple(self) -> tuple:
        return (self.alpha11, self.alpha12, self.alpha22, self.beta11, self.beta12, self.beta22)


def _eig2(A: np.ndarray):
    """Closed-form eigen-decomposition of (stacks of) real 2x2 matrices.

    Returns ``lam1 < lam2`` and unit eigenvectors (unoriented).
    """
    a, b, c, d = A[0, 0], A[0, 1], A[1, 0], A[1, 1]
    mean = 0.5 * (a + d)
    disc = (0.5 * (a - d)) ** 2 + b * c
    if np.any(~np.isfinite(disc)) or np.any(disc <= 0.0):
        raise ModelInvalid("flux Jacobian has non-real or coincident eigenvalues")
    root = np.sqrt(disc)
    lam1 = mean - root
    lam2 = mean + root
    vecs = []
    for lam in (lam1, lam2):
        p = np.stack([b, lam - a])
        q = np.stack([lam - d, c])
        np_ = np.hypot(p[0], p[1])
        nq = np.hypot(q[0], q[1])
        use_p = np_ >= nq
        vec = np.where(use_p, p, q)
        norm = np.where(use_p, np_, nq)
        vecs.append(vec / norm)
    return lam1, lam2, vecs[0], vecs[1]


class FluxModel:
    """Base class of a strictly hyperbolic, genuinely nonlinear 2x2 flux.

    Subclasses implement :meth:`flux` and :meth:`jacobian` for arrays of
    shape ``(2, ...)``.  The model is immutable once built; derived data
    (eigenvector orientation, Riemann invariants) is computed lazily and
    cached on the instance.

    Attributes:
        name: identifier used in logs and config files.
        r: radius of the validity ball ``B(0, r)``.
        c0: hyperbolicity gap, ``lam1 <= -c0/2 < 0 < c0/2 <= lam2`` on the ball.
    """

    name = "flux"

    def __init__(self, r: float, c0: float):
        if r <= 0 or c0 <= 0:
            raise ModelInvalid("r and c0 must be positive")
        self.r = float(r)
        self.c0 = float(c0)

    # -- to be provided by subclasses -------------------------------------
    def flux(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def jacobian(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @property
    def analytic_normal_form(self) -> Optional[NormalForm]:
        return None

    def params(self) -> dict:
        return {"name": self.name, "r": self.r, "c0": self.c0}

    def cache_key(self) -> tuple:
        return tuple(sorted(self.params().items()))

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v!r}" for k, v in self.params().items() if k != "name")
        return f"{type(self).__name__}({args})"

    # -- spectral data -----------------------------------------------------
    @cached_property
    def _orientation(self) -> np.ndarray:
        """Reference eigenvectors fixing a continuous sign convention.

        Each r_i is oriented so that grad(lam_i) . r_i > 0 at the origin.
        """
        _, _, r1, r2 = _eig2(self.jacobian(np.zeros(2)))
        refs = [np.asarray(r1, float), np.asarray(r2, float)]
        for i in range(2):
            g = self._lambda_gradient_raw(np.zeros(2), i)
            if float(g @ refs[i]) < 0:
                refs[i] = -refs[i]
        return np.stack(refs)

    def _lambda_gradient_raw(self, u: np.ndarray, i: int) -> np.ndarray:
        u = np.asarray(u, float)
        h = FD_STEP
        out = np.zeros(2)
        for k in range(2):
            e = np.zeros(2)
            e[k] = h
            lp = _eig2(self.jacobian(u + e))[i]
            lm = _eig2(self.jacobian(u - e))[i]
            out[k] = (lp - lm) / (2 * h)
        return out

    def eigenvalues(self, u: np.ndarray):
        u = np.asarray(u, float)
        if u.ndim == 1:
            (a, b), (c, d) = self.jacobian(u).tolist()
            mean = 0.5 * (a + d)
            disc = (0.5 * (a - d)) ** 2 + b * c
            if not disc > 0.0:
                raise ModelInvalid("flux Jacobian has non-real or coincident eigenvalues")
            root = math.sqrt(disc)
            return mean - root, mean + root
        lam1, lam2, _, _ = _eig2(self.jacobian(u))
        return lam1, lam2

    def eigen(self, u):
        """Eigenvalues and oriented unit right eigenvectors at ``u``."""
        u = np.asarray(u, float)
        lam1, lam2, r1, r2 = _eig2(self.jacobian(u))
        ref = self._orientation
        out = []
        for vec, rv in ((r1, ref[0]), (r2, ref[1])):
            dot = rv[0] * vec[0] + rv[1] * vec[1]
            out.append(np.where(dot < 0, -vec, vec))
        return lam1, lam2, out[0], out[1]

    def eigenvalue(self, i: int, u) -> float:
        lam = self.eigenvalues(u)
        return float(lam[i - 1])

    def lambda_gradient(self, u, i: int) -> np.ndarray:
        """Central-difference gradient of ``lam_i`` (family ``i`` in {1, 2})."""
        return self._lambda_gradient_raw(np.asarray(u, float), i - 1)

    def eigenvector_derivative(self, u, i: int) -> np.ndarray:
        """Directional derivative ``(Dr_i) r_i`` at ``u``."""
        u = np.asarray(u, float)
        ri = self.eigen(u)[1 + i]
        h = 1e-5
        rp = self.eigen(u + h * ri)[1 + i]
        rm = self.eigen(u - h * ri)[1 + i]
        return (rp - rm) / (2 * h)

    def in_ball(self, u, slack: float = 0.0) -> bool:
        return math.hypot(float(u[0]), float(u[1])) < self.r * (1.0 + slack)

    # -- Riemann invariants ------------------------------------------------
    @cached_property
    def invariants(self) -> "InvariantMap":
        return _cached_numeric_map(self)


class DecoupledBurgers(FluxModel):
    """``f1 = -u1 + u1**2/2``, ``f2 = u2 + u2**2/2``; ``v = u`` exactly."""

    name = "burgers"

    def __init__(self, r: float = 0.5, c0: float = 1.0):
        super().__init__(r, c0)

    def flux(self, u):
        u = np.asarray(u, float)
        return np.stack([-u[0] + 0.5 * u[0] ** 2, u[1] + 0.5 * u[1] ** 2])

    def jacobian(self, u):
        u = np.asarray(u, float)
        z = np.zeros_like(u[0])
        return np.array([[-1.0 + u[0], z], [z, 1.0 + u[1]]])

    @property
    def analytic_normal_form(self):
        return NormalForm(1.0, 0.0, 0.0, 0.0, 0.0, 1.0)

    @cached_property
    def invariants(self):
        return IdentityMap(self)


class QuadraticModel(FluxModel):
    """The normal form with zero cubic remainder.

    ``f1 = -u1 + a11 u1^2/2 + a12 u1 u2 + a22 u2^2/2`` and
    ``f2 =  u2 + b11 u1^2/2 + b12 u1 u2 + b22 u2^2/2``.
    """

    name = "quadratic"

    def __init__(self, alpha=(1.0, 0.0, 1.0), beta=(0.0, 0.0, 1.0), r: float = 0.4, c0: float = 1.0):
        super().__init__(r, c0)
        self.alpha = tuple(float(a) for a in alpha)
        self.beta = tuple(float(b) for b in beta)

    def params(self):
        p = super().params()
        p.update(alpha=self.alpha, beta=self.beta)
        return p

    def flux(self, u):
        u = np.asarray(u, float)
        a11, a12, a22 = self.alpha
        b11, b12, b22 = self.beta
        x, y = u[0], u[1]
        f1 = -x + 0.5 * a11 * x * x + a12 * x * y + 0.5 * a22 * y * y
        f2 = y + 0.5 * b11 * x * x + b12 * x * y + 0.5 * b22 * y * y
        return np.stack([f1, f2])

    def jacobian(self, u):
        u = np.asarray(u, float)
        a11, a12, a22 = self.alpha
        b11, b12, b22 = self.beta
        x, y = u[0], u[1]
        return np.array(
            [
                [-1.0 + a11 * x + a12 * y, a12 * x + a22 * y],
                [b11 * x + b12 * y, 1.0 + b12 * x + b22 * y],
            ]
        )

    @property
    def analytic_normal_form(self):
        return NormalForm(*self.alpha, *self.beta)


class PSystem(FluxModel):
    """Isentropic p-system ``tau_t - w_x = 0``, ``w_t + p(tau)_x = 0``.

    With ``p(tau) = tau**-gamma / gamma`` the sound speed at ``tau = 1`` is
    one.  Writing ``q = (tau - 1, w) = P z`` with ``P`` the orthonormal
    eigenbasis of the Jacobian at ``q = 0`` puts the flux in normal form:
    ``f(z) = P (-w, p(1 + q1) - p(1))``.
    """

    name = "psystem"
    _P = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2.0)

    def __init__(self, gamma: float = 1.4, r: float = 0.3, c0: float = 1.0):
        super().__init__(r, c0)
        self.gamma = float(gamma)

    def params(self):
        p = super().params()
        p["gamma"] = self.gamma
        return p

    def pressure(self, tau):
        return tau ** (-self.gamma) / self.gamma

    def to_physical(self, z):
        z = np.asarray(z, float)
        return np.tensordot(self._P, z, axes=1)

    def flux(self, u):
        q = self.to_physical(u)
        tau = 1.0 + q[0]
        if np.any(tau <= 0):
            raise OutOfDomain("specific volume must stay positive")
        fq = np.stack([-q[1], self.pressure(tau) - self.pressure(1.0)])
        return np.tensordot(self._P, fq, axes=1)

    def jacobian(self, u):
        q = self.to_physical(u)
        tau = 1.0 + q[0]
        if np.any(tau <= 0):
            raise OutOfDomain("specific volume must stay positive")
        dp = -(tau ** (-self.gamma - 1.0))
        z = np.zeros_like(dp)
        Jq = np.array([[z, z - 1.0], [dp, z]])
        P = self._P
        # P Jq P (P is symmetric orthogonal)
        return np.einsum("ij,jk...,kl->il...", P, Jq, P)

    def analytic_riemann_invariants(self, u):
        """Classical invariants ``w -/+ integral sqrt(-p')``, level-set oracle."""
        q = self.to_physical(u)
        tau = 1.0 + q[0]
        k = (1.0 - self.gamma) / 2.0
        phi = (tau**k - 1.0) / k
        # family-1 waves (speed -c) keep w - phi fixed, family-2 keep w + phi fixed
        return np.stack([q[1] + phi, q[1] - phi])


# ---------------------------------------------------------------------------
# Riemann-invariant maps
# ---------------------------------------------------------------------------


class InvariantMap:
    """Interface of the map ``J: u -> v`` and its inverse."""

    def forward(self, u) -> np.ndarray:
        raise NotImplementedError

    def forward_many(self, u) -> np.ndarray:
        """``forward`` applied column-wise to an array of shape (2, N)."""
        u = np.asarray(u, float)
        if u.shape[1] == 0:
            return np.zeros((2, 0))
        return np.stack([self.forward(u[:, k]) for k in range(u.shape[1])], axis=1)

    def jacobian(self, u) -> np.ndarray:
        raise NotImplementedError

    def inverse(self, v) -> np.ndarray:
        raise NotImplementedError


class IdentityMap(InvariantMap):
    def __init__(self, model: FluxModel):
        self.model = model

    def forward(self, u):
        return np.array(u, dtype=float)

    def forward_many(self, u):
        return np.array(u, dtype=float)

    def jacobian(self, u):
        return np.eye(2)

    def inverse(self, v):
        return np.array(v, dtype=float)


def _rk4_field(field: Callable, p: np.ndarray, h) -> np.ndarray:
    k1 = field(p)
    k2 = field(p + 0.5 * h * k1)
    k3 = field(p + 0.5 * h * k2)
    k4 = field(p + h * k3)
    return p + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


class NumericInvariantMap(InvariantMap):
    """Riemann invariants built by integrating eigenvector fields.

    ``v_i`` is the arclength coordinate, along the i-th integral curve
    through the origin, of the point where the j-th integral curve through
    ``u`` meets it (``j != i``).  Values are tabulated on a square grid and
    interpolated with bicubic splines; the inverse is obtained by Newton's
    method on the spline.
    """

    def __init__(self, model: FluxModel, half_width: Optional[float] = None, spacing: float = 0.01):
        self.model = model
        self.half_width = float(half_width if half_width is not None else 1.15 * model.r)
        self.spacing = float(spacing)
        L = self.half_width
        n = int(math.ceil(2 * L / self.spacing)) + 1
        self.grid = np.linspace(-L, L, n)
        values = [self._tabulate(i) for i in (0, 1)]
        self._splines = [RectBivariateSpline(self.grid, self.grid, v, kx=3, ky=3, s=0) for v in values]
        self._table = _BicubicTable(self.grid, self._splines)
        self._J0 = self.jacobian(np.zeros(2))
        self._J0inv = np.linalg.inv(self._J0)
        if abs(np.linalg.det(self._J0)) < 1e-8:
            raise ModelInvalid("Riemann invariant map is singular at the origin")

    def _field(self, i: int):
        model = self.model

        def field(p):
            return model.eigen(p)[2 + i]

        return field

    def _base_curve(self, i: int):
        """Integral curve of r_i through 0 as a graph over u_i."""
        L = 1.3 * self.half_width
        h = self.spacing / 4.0
        field = self._field(i)
        branches = []
        for sign in (1.0, -1.0):
            pts = [np.zeros(2)]
            arcs = [0.0]
            p = np.zeros(2)
            s = 0.0
            while abs(p[i]) < L:
                p = _rk4_field(field, p, sign * h)
                s += sign * h
                pts.append(p.copy())
                arcs.append(s)
                if len(pts) > 100000:
                    raise ModelInvalid("base integral curve does not leave the grid")
            branches.append((np.array(pts), np.array(arcs)))
        pts = np.concatenate([branches[1][0][::-1], branches[0][0][1:]])
        arcs = np.concatenate([branches[1][1][::-1], branches[0][1][1:]])
        key = pts[:, i]
        order = np.argsort(key)
        key, pts, arcs = key[order], pts[order], arcs[order]
        if np.any(np.diff(key) <= 0):
            raise ModelInvalid("integral curve is not a graph over its own coordinate")
        j = 1 - i
        return CubicSpline(key, pts[:, j]), CubicSpline(key, arcs)

    def _tabulate(self, i: int) -> np.ndarray:
        """Values of v_{i+1} on the grid (i is zero-based here)."""
        j = 1 - i
        graph, arc = self._base_curve(i)
        X, Y = np.meshgrid(self.grid, self.grid, indexing="ij")
        P = np.stack([X.ravel(), Y.ravel()])
        field = self._field(j)

        def dist(p):
            # signed offset from the base curve, measured in the j-th coordinate
            return p[j] - graph(p[i])

        h = self.spacing / 2.0
        d0 = dist(P)
        rj = field(P)
        direction = -np.sign(d0) * np.sign(rj[j])
        direction[d0 == 0] = 0.0
        crossing = P.copy()
        active = np.nonzero(direction != 0)[0]
        p = P[:, active].copy()
        dcur = d0[active]
        sgn = direction[active]
        steps = 0
        max_steps = int(4 * 2.6 * self.half_width / h) + 10
        while active.size:
            steps += 1
            if steps > max_steps:
                raise ModelInvalid("integral curves fail to reach the base curve")
            q = _rk4_field(field, p, sgn * h)
            dq = dist(q)
            hit = (np.sign(dq) != np.sign(dcur)) | (dq == 0)
            if np.any(hit):
                idx = np.nonzero(hit)[0]
                a = np.zeros(idx.size)
                b = np.ones(idx.size)
                fa = dcur[idx]
                fb = dq[idx]
                p0 = p[:, idx]
                s0 = sgn[idx]
                theta = b.copy()
                for _ in range(60):
                    theta = np.where(fb != fa, b - fb * (b - a) / (fb - fa), 0.5 * (a + b))
                    theta = np.clip(theta, np.minimum(a, b), np.maximum(a, b))
                    ft = dist(_rk4_field(field, p0, s0 * theta * h))
                    same = np.sign(ft) == np.sign(fa)
                    # Illinois-style regula falsi
                    a = np.where(same, theta, a)
                    fa = np.where(same, ft, fa * 0.5)
                    b = np.where(same, b, theta)
                    fb = np.where(same, fb * 0.5, ft)
                    if np.max(np.abs(ft)) < 1e-15:
                        break
                crossing[:, active[idx]] = _rk4_field(field, p0, s0 * theta * h)
                keep = ~hit
                active = active[keep]
                p = q[:, keep]
                dcur = dq[keep]
                sgn = sgn[keep]
            else:
                p = q
                dcur = dq
        values = arc(crossing[i])
        return values.reshape(X.shape)

    def _check(self, u):
        L = self.half_width
        if abs(u[0]) > L or abs(u[1]) > L:
            raise OutOfDomain(f"state {tuple(u)} outside the tabulated invariant grid")

    def forward(self, u):
        u = np.asarray(u, float)
        self._check(u)
        v1, v2, *_ = self._table.evaluate(float(u[0]), float(u[1]))
        return np.array([v1, v2])

    def forward_many(self, u):
        u = np.asarray(u, float)
        return np.stack([s.ev(u[0], u[1]) for s in self._splines])

    def jacobian(self, u):
        u = np.asarray(u, float)
        self._check(u)
        _, _, a, b, c, d = self._table.evaluate(float(u[0]), float(u[1]))
        return np.array([[a, b], [c, d]])

    def inverse(self, v, guess=None):
        v1, v2 = float(v[0]), float(v[1])
        if guess is None:
            m = self._J0inv
            x = m[0, 0] * v1 + m[0, 1] * v2
            y = m[1, 0] * v1 + m[1, 1] * v2
        else:
            x, y = float(guess[0]), float(guess[1])
        L = self.half_width
        tol = 1e-14 * (1.0 + max(abs(v1), abs(v2)))
        evaluate = self._table.evaluate
        for _ in range(40):
            if abs(x) > L or abs(y) > L:
                raise OutOfDomain(f"invariants {(v1, v2)} have no preimage on the grid")
            f1, f2, a, b, c, d = evaluate(x, y)
            r1 = f1 - v1
            r2 = f2 - v2
            if abs(r1) <= tol and abs(r2) <= tol:
                return np.array([x, y])
            det = a * d - b * c
            if det == 0.0:
                raise ModelInvalid("invariant map not invertible")
            dx = (d * r1 - b * r2) / det
            dy = (a * r2 - c * r1) / det
            x -= dx
            y -= dy
            if abs(dx) < 1e-17 and abs(dy) < 1e-17:
                break
        f1, f2, *_ = evaluate(x, y)
        if max(abs(f1 - v1), abs(f2 - v2)) > 1e-11:
            raise ModelInvalid(f"invariant map inversion failed at {(v1, v2)}")
        return np.array([x, y])


class _BicubicTable:
    """Per-cell power-basis form of two bicubic splines on a shared grid.

    Evaluating a cell polynomial with plain floats is far cheaper than a
    spline library call for single points, which dominates the Riemann
    solver's cost.
    """

    _M = np.array([[1.0, 0, 0, 0], [0, 0, 1.0, 0], [-3.0, 3.0, -2.0, -1.0], [2.0, -2.0, 1.0, 1.0]])

    def __init__(self, grid: np.ndarray, splines):
        self.x0 = float(grid[0])
        self.h = float(grid[1] - grid[0])
        self.n = len(grid) - 1
        h = self.h
        X, Y = np.meshgrid(grid, grid, indexing="ij")
        cells = []
        for spl in splines:
            f = spl.ev(X, Y)
            fx = spl.ev(X, Y, dx=1) * h
            fy = spl.ev(X, Y, dy=1) * h
            fxy = spl.ev(X, Y, dx=1, dy=1) * h * h
            F = np.empty((self.n, self.n, 4, 4))
            F[:, :, 0, 0] = f[:-1, :-1]
            F[:, :, 0, 1] = f[:-1, 1:]
            F[:, :, 1, 0] = f[1:, :-1]
            F[:, :, 1, 1] = f[1:, 1:]
            F[:, :, 0, 2] = fy[:-1, :-1]
            F[:, :, 0, 3] = fy[:-1, 1:]
            F[:, :, 1, 2] = fy[1:, :-1]
            F[:, :, 1, 3] = fy[1:, 1:]
            F[:, :, 2, 0] = fx[:-1, :-1]
            F[:, :, 2, 1] = fx[:-1, 1:]
            F[:, :, 3, 0] = fx[1:, :-1]
            F[:, :, 3, 1] = fx[1:, 1:]
            F[:, :, 2, 2] = fxy[:-1, :-1]
            F[:, :, 2, 3] = fxy[:-1, 1:]
            F[:, :, 3, 2] = fxy[1:, :-1]
            F[:, :, 3, 3] = fxy[1:, 1:]
            A = np.einsum("ik,abkl,jl->abij", self._M, F, self._M)
            cells.append(A.reshape(self.n, self.n, 16))
        both = np.concatenate(cells, axis=2)
        self.coeffs = [[tuple(both[a, b].tolist()) for b in range(self.n)] for a in range(self.n)]

    def evaluate(self, x: float, y: float):
        """Return ``(p1, p2, dp1/dx, dp1/dy, dp2/dx, dp2/dy)``."""
        h = self.h
        sx = (x - self.x0) / h
        sy = (y - self.x0) / h
        ix = int(sx)
        iy = int(sy)
        n = self.n
        ix = 0 if ix < 0 else (n - 1 if ix >= n else ix)
        iy = 0 if iy < 0 else (n - 1 if iy >= n else iy)
        s = sx - ix
        t = sy - iy
        c = self.coeffs[ix][iy]
        out = []
        for k in (0, 16):
            cs = []
            dts = []
            for i in range(4):
                a0, a1, a2, a3 = c[k + 4 * i : k + 4 * i + 4]
                cs.append(a0 + t * (a1 + t * (a2 + t * a3)))
                dts.append(a1 + t * (2.0 * a2 + 3.0 * t * a3))
            c0, c1, c2, c3 = cs
            value = c0 + s * (c1 + s * (c2 + s * c3))
            ds = c1 + s * (2.0 * c2 + 3.0 * s * c3)
            dt = dts[0] + s * (dts[1] + s * (dts[2] + s * dts[3]))
            out.append((value, ds / h, dt / h))
        (p1, p1x, p1y), (p2, p2x, p2y) = out
        return p1, p2, p1x, p1y, p2x, p2y


_MAP_CACHE: dict = {}


def _cached_numeric_map(model: FluxModel) -> NumericInvariantMap:
    key = (type(model).__name__, model.cache_key())
    if key not in _MAP_CACHE:
        _MAP_CACHE[key] = NumericInvariantMap(model)
    return _MAP_CACHE[key]


# ---------------------------------------------------------------------------
# Module-level operations
# ---------------------------------------------------------------------------


def eigen(model: FluxModel, u):
    """Return ``(lam1, lam2, r1, r2)`` at a state inside the validity ball."""
    u = np.asarray(u, float)
    if not model.in_ball(u, slack=1e-12):
        raise OutOfDomain(f"state {tuple(u)} outside B(0, {model.r})")
    lam1, lam2, r1, r2 = model.eigen(u)
    return float(lam1), float(lam2), np.asarray(r1, float), np.asarray(r2, float)


def normal_form_coefficients(model: FluxModel, h: float = 1e-4) -> NormalForm:
    """Second partials of ``f`` at the origin by central differences."""
    f = model.flux
    e1 = np.array([h, 0.0])
    e2 = np.array([0.0, h])
    z = np.zeros(2)
    f0 = f(z)
    d11 = (f(e1) - 2 * f0 + f(-e1)) / h**2
    d22 = (f(e2) - 2 * f0 + f(-e2)) / h**2
    d12 = (f(e1 + e2) - f(e1 - e2) - f(-e1 + e2) + f(-e1 - e2)) / (4 * h**2)
    nf = NormalForm(d11[0], d12[0], d22[0], d11[1], d12[1], d22[1])
    ref = model.analytic_normal_form
    if ref is not None:
        gap = max(abs(a - b) for a, b in zip(nf.as_tuple(), ref.as_tuple()))
        if gap > 1e-6:
            raise NumericalInconsistency(f"normal form differs from analytic coefficients by {gap:.3e}")
    return nf


def sample_ball(r: float, samples: int) -> np.ndarray:
    """Deterministic polar sample of the closed ball, boundary and axes included."""
    n_theta = max(8, 4 * int(math.ceil(math.sqrt(samples) / 2)))
    n_r = max(2, int(math.ceil(samples / n_theta)))
    radii = np.linspace(0.0, r, n_r)
    theta = np.linspace(0.0, 2 * math.pi, n_theta, endpoint=False)
    R, T = np.meshgrid(radii, theta, indexing="ij")
    return np.stack([(R * np.cos(T)).ravel(), (R * np.sin(T)).ravel()])


def hyperbolicity_gap(model: FluxModel, samples: int = 10_000) -> float:
    """Estimate ``2 * min(-lam1, lam2)`` over the validity ball."""
    if samples < 100:
        raise ValueError("at least 100 samples are required")
    pts = sample_ball(model.r, samples)
    lam1, lam2 = model.eigenvalues(pts)
    estimate = 2.0 * float(min(np.min(-lam1), np.min(lam2)))
    if estimate <= 0 or estimate < model.c0 * (1.0 - 1e-12):
        raise ModelInvalid(f"hyperbolicity gap {estimate:.6g} below c0={model.c0}")
    return estimate


def max_speed(model: FluxModel, samples: int = 10_000, safety: float = 1.01) -> float:
    """Sampled sup of ``|lam_i|`` over the ball, times a safety factor."""
    pts = sample_ball(model.r, samples)
    lam1, lam2 = model.eigenvalues(pts)
    return safety * float(max(np.max(np.abs(lam1)), np.max(np.abs(lam2))))


def check_genuine_nonlinearity(model: FluxModel, samples: int = 400) -> float:
    """Smallest ``|grad lam_i . r_i|`` on sampled points; raises if it vanishes."""
    pts = sample_ball(model.r, samples).T
    worst = np.inf
    for p in pts:
        _, _, r1, r2 = model.eigen(p)
        for i, ri in ((1, r1), (2, r2)):
            worst = min(worst, float(model.lambda_gradient(p, i) @ ri))
    if worst <= 0:
        raise ModelInvalid("a characteristic field fails to be genuinely nonlinear")
    return worst


def riemann_invariants(model: FluxModel, u) -> RiemannCoords:
    u = np.asarray(u, float)
    if not model.in_ball(u, slack=1e-9):
        raise OutOfDomain(f"state {tuple(u)} outside B(0, {model.r})")
    v = model.invariants.forward(u)
    return RiemannCoords(float(v[0]), float(v[1]))


def inverse_riemann_invariants(model: FluxModel, v) -> State:
    u = model.invariants.inverse(np.asarray(v, float))
    return State(float(u[0]), float(u[1]))


def invariant_orthogonality_residual(model: FluxModel, u, h: float = 1e-5) -> float:
    """``max_{i != j} |grad v_i . r_j|`` by central differences of the map."""
    u = np.asarray(u, float)
    J = model.invariants
    grads = np.zeros((2, 2))
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        grads[:, k] = (J.forward(u + e) - J.forward(u - e)) / (2 * h)
    _, _, r1, r2 = model.eigen(u)
    return float(max(abs(grads[0] @ r2), abs(grads[1] @ r1)))


def closed_form_defect(model: FluxModel, family: int) -> float:
    """``1/2 <(grad lam_i . r_i)(Dr_i r_i), r_j> / (lam_i - lam_j)`` at 0."""
    z = np.zeros(2)
    lam1, lam2, r1, r2 = model.eigen(z)
    lam = (float(lam1), float(lam2))
    r = (r1, r2)
    i = family - 1
    j = 1 - i
    gnl = float(model.lambda_gradient(z, family) @ r[i])
    drr = model.eigenvector_derivative(z, family)
    return 0.5 * gnl * float(drr @ r[j]) / (lam[i] - lam[j])


def curve_third_order_defect(model: FluxModel, family: int, tol: float = 1e-4) -> float:
    """Transverse third-derivative gap between shock and rarefaction curves.

    Evaluated twice: by a least-squares fit of the curve offset produced by
    :mod:`fronttrack.riemann` and by the closed form in terms of eigen-data.
    Raises :class:`NumericalInconsistency` when the two disagree.
    """
    from .riemann import rarefaction_curve, shock_curve

    i = family - 1
    j = 1 - i
    _, _, r1, r2 = model.eigen(np.zeros(2))
    rj = (r1, r2)[j]
    inv = model.invariants
    sig = np.concatenate([-np.geomspace(0.02, 0.2 * model.r, 12), np.geomspace(0.02, 0.2 * model.r, 12)])
    offs = []
    v0 = np.zeros(2)
    for s in sig:
        us = inv.inverse(np.asarray(shock_curve(model, family, s, v0, allow_positive=True)))
        ur = inv.inverse(np.asarray(rarefaction_curve(model, family, s, v0, check=False)))
        offs.append(float((us - ur) @ rj))
    offs = np.asarray(offs)
    # offset = c3 s^3 + c4 s^4 + c5 s^5 + c6 s^6
    A = np.stack([sig**3, sig**4, sig**5, sig**6], axis=1)
    coef, *_ = np.linalg.lstsq(A, offs, rcond=None)
    fd_value = 6.0 * coef[0]
    closed = closed_form_defect(model, family)
    if abs(fd_value - closed) > tol:
        raise NumericalInconsistency(
            f"curve defect mismatch: finite differences {fd_value:.6g} vs closed form {closed:.6g}"
        )
    return closed


# ---------------------------------------------------------------------------
# Source terms
# ---------------------------------------------------------------------------


class SourceModel:
    """A source ``g(t, x, u)`` with its integrable envelopes.

    ``g`` maps ``(t, x, u1, u2)`` (broadcastable arrays) to a pair of
    arrays.  ``omega1`` is the space envelope, ``omega2`` the time envelope.
    """

    def __init__(
        self,
        g: Callable,
        omega1: Callable,
        omega2: Callable,
        T_star: float,
        x_dependent: bool = True,
        t_dependent: bool = True,
        is_zero: bool = False,
        description: str = "",
        omega1_support: Optional[tuple] = None,
    ):
        self.g = g
        self.omega1 = omega1
        self.omega2 = omega2
        self.T_star = float(T_star)
        self.x_dependent = x_dependent
        self.t_dependent = t_dependent
        self.is_zero = is_zero
        self.description = description
        self.omega1_support = omega1_support

    @classmethod
    def zero(cls, T_star: float = math.inf) -> "SourceModel":
        def g(t, x, u1, u2):
            z = np.zeros(np.broadcast(t, x, u1, u2).shape)
            return z, z.copy()

        def zero_env(s):
            return np.zeros_like(np.asarray(s, float))

        return cls(g, zero_env, zero_env, T_star, x_dependent=False, t_dependent=False,
                   is_zero=True, description="zero", omega1_support=(0.0, 0.0))

    @classmethod
    def from_expressions(cls, g1: str, g2: str, omega1: str, omega2: str, T_star: float,
                         omega1_support: Optional[tuple] = None) -> "SourceModel":
        e1 = Expression(g1, ("t", "x", "u1", "u2"))
        e2 = Expression(g2, ("t", "x", "u1", "u2"))
        w1 = Expression(omega1, ("x",))
        w2 = Expression(omega2, ("t",))

        def g(t, x, u1, u2):
            shape = np.broadcast(t, x, u1, u2).shape
            return (np.broadcast_to(e1(t=t, x=x, u1=u1, u2=u2), shape),
                    np.broadcast_to(e2(t=t, x=x, u1=u1, u2=u2), shape))

        def om1(x):
            return np.broadcast_to(w1(x=x), np.shape(x))

        def om2(t):
            return np.broadcast_to(w2(t=t), np.shape(t))

        zero = all(e.text in ("0", "0.0") for e in (e1, e2))
        return cls(g, om1, om2, T_star,
                   x_dependent=e1.depends_on("x") or e2.depends_on("x"),
                   t_dependent=e1.depends_on("t") or e2.depends_on("t"),
                   is_zero=zero,
                   description=f"g=({g1}, {g2}); omega1={omega1}; omega2={omega2}",
                   omega1_support=omega1_support)

    def __call__(self, t, x, u):
        u = np.asarray(u, float)
        g1, g2 = self.g(t, x, u[0], u[1])
        return np.stack([np.asarray(g1, float), np.asarray(g2, float)])


@dataclass(frozen=True)
class EnvelopeReport:
    samples: int
    value_ratio: float
    oscillation_ratio: float

    @property
    def ok(self) -> bool:
        return self.value_ratio <= 1.0 + 1e-9 and self.oscillation_ratio <= 1.0 + 1e-9


def check_envelopes(source: SourceModel, model: FluxModel, x_range=(-2.0, 2.0), samples: int = 10_000,
                    seed: int = 0) -> EnvelopeReport:
    """Sample ``(t, x, u)`` and measure how tightly the envelopes bound ``g``.

    Ratios above one mean the sampled point violates the envelope.
    """
    rng = np.random.default_rng(seed)
    T = source.T_star if math.isfinite(source.T_star) else 10.0
    t = rng.uniform(0.0, T, samples)
    x = rng.uniform(*x_range, samples)
    rad = model.r * np.sqrt(rng.uniform(0, 1, samples))
    ang = rng.uniform(0, 2 * math.pi, samples)
    u = np.stack([rad * np.cos(ang), rad * np.sin(ang)])
    h = 1e-6
    g0 = source(t, x, u)
    Dg = np.zeros((2, 2, samples))
    for k in range(2):
        e = np.zeros((2, 1))
        e[k] = h
        Dg[:, k] = (source(t, x, u + e) - source(t, x, u - e)) / (2 * h)
    gx = (source(t, x + h, u) - source(t, x - h, u)) / (2 * h)
    opnorm = np.linalg.norm(np.moveaxis(Dg, -1, 0), ord=2, axis=(1, 2))
    w1 = np.asarray(source.omega1(x), float)
    w2 = np.asarray(source.omega2(t), float)
    val = np.hypot(g0[0], g0[1]) + opnorm
    osc = np.hypot(gx[0], gx[1])
    with np.errstate(divide="ignore", invalid="ignore"):
        r1 = np.where(val > 1e-14, val / w2, 0.0)
        r2 = np.where(osc > 1e-9, osc / (w1 * w2), 0.0)
    return EnvelopeReport(samples, float(np.max(r1)), float(np.max(r2)))


SHIPPED_MODELS = {
    "burgers": DecoupledBurgers,
    "quadratic": QuadraticModel,
    "psystem": PSystem,
}


def build_model(name: str, **params) -> FluxModel:
    try:
        cls = SHIPPED_MODELS[name]
    except KeyError:
        raise ModelInvalid(f"unknown model {name!r}; choose from {sorted(SHIPPED_MODELS)}") from None
    return cls(**params)
