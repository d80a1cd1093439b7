"""Wave curves and the approximate Riemann solver.

All curves live in Riemann-invariant coordinates ``v = (v1, v2)``.  A wave
of family ``i`` with strength ``sigma`` moves ``v_i`` by exactly ``sigma``;
``sigma >= 0`` is a rarefaction, ``sigma < 0`` a shock.  Shocks follow the
Hugoniot locus of the model, rarefactions the integral curve (a coordinate
line), and the two are blended through a smooth cutoff in
``sigma / sqrt(eps)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import OutOfDomain, PreconditionError, SolverDiverged
from .model import FluxModel, RiemannCoords, State

DROP_STRENGTH = 3e-13


def _h(s):
    return np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)


def cutoff(y):
    """Smooth step: 1 for ``y <= -2``, 0 for ``y >= -1``, slope in ``[-2, 0]``."""
    if isinstance(y, float):
        s = y + 2.0
        if s <= 0.0:
            return 1.0
        if s >= 1.0:
            return 0.0
        a = math.exp(-1.0 / s)
        b = math.exp(-1.0 / (1.0 - s))
        return b / (a + b)
    y = np.asarray(y, float)
    s = y + 2.0
    a = _h(s)
    b = _h(1.0 - s)
    out = np.where(s <= 0, 1.0, np.where(s >= 1, 0.0, b / np.where(a + b > 0, a + b, 1.0)))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class WaveCurveParams:
    epsilon: float
    cutoff: callable = cutoff

    def __post_init__(self):
        if not self.epsilon > 0:
            raise PreconditionError("epsilon must be positive")

    def weight(self, sigma: float) -> float:
        return float(self.cutoff(float(sigma) / math.sqrt(self.epsilon)))


def _params(eps) -> WaveCurveParams:
    return eps if isinstance(eps, WaveCurveParams) else WaveCurveParams(float(eps))


def _as_state(u) -> State:
    return State(float(u[0]), float(u[1]))


def _as_coords(v) -> RiemannCoords:
    return RiemannCoords(float(v[0]), float(v[1]))


def to_state(model: FluxModel, v) -> State:
    u = model.invariants.inverse(np.asarray(v, float))
    if not model.in_ball(u, slack=1e-9):
        raise OutOfDomain(f"state {tuple(u)} leaves B(0, {model.r})")
    return _as_state(u)


def to_coords(model: FluxModel, u) -> RiemannCoords:
    u = np.asarray(u, float)
    if not model.in_ball(u, slack=1e-9):
        raise OutOfDomain(f"state {tuple(u)} leaves B(0, {model.r})")
    return _as_coords(model.invariants.forward(u))


def rarefaction_curve(model: FluxModel, family: int, sigma: float, v, check: bool = True) -> RiemannCoords:
    """Shift ``v_i`` by ``sigma`` and keep the other invariant."""
    out = [float(v[0]), float(v[1])]
    out[family - 1] += float(sigma)
    if check and sigma != 0:
        to_state(model, out)
    return RiemannCoords(*out)


@dataclass(frozen=True)
class HugoniotPoint:
    coords: RiemannCoords
    state: State
    speed: float


def hugoniot_point(model: FluxModel, family: int, sigma: float, v) -> HugoniotPoint:
    """Point of the family's Hugoniot locus whose ``v_i`` jump equals ``sigma``.

    Solves ``f(u) - f(u_l) = s (u - u_l)`` together with
    ``v_i(u) = v_i(u_l) + sigma`` by Newton's method in ``(u, s)``, seeded
    from the rarefaction point.
    """
    i = family - 1
    inv = model.invariants
    v = np.asarray(v, float)
    ul = np.asarray(to_state(model, v), float)
    target = v[i] + sigma
    seed_v = v.copy()
    seed_v[i] = target
    u = inv.inverse(seed_v)
    if sigma == 0:
        lam = model.eigenvalues(ul)[i]
        return HugoniotPoint(_as_coords(v), _as_state(ul), float(lam))
    s = 0.5 * (model.eigenvalues(ul)[i] + model.eigenvalues(u)[i])
    fl = model.flux(ul)
    scale = 1.0 + abs(sigma)
    for _ in range(60):
        du = u - ul
        res = np.empty(3)
        res[:2] = model.flux(u) - fl - s * du
        res[2] = inv.forward(u)[i] - target
        if np.max(np.abs(res)) <= 1e-15 * scale:
            break
        J = np.zeros((3, 3))
        J[:2, :2] = model.jacobian(u) - s * np.eye(2)
        J[:2, 2] = -du
        J[2, :2] = inv.jacobian(u)[i]
        try:
            step = np.linalg.solve(J, res)
        except np.linalg.LinAlgError as exc:
            raise SolverDiverged("singular Hugoniot Jacobian") from exc
        u = u - step[:2]
        s = s - step[2]
        if not np.all(np.isfinite(u)) or abs(u[0]) > 2 * model.r + 1 or abs(u[1]) > 2 * model.r + 1:
            raise SolverDiverged("Hugoniot Newton iteration escaped")
        if np.max(np.abs(step)) <= 1e-16 * scale:
            break
    else:
        raise SolverDiverged(f"Hugoniot locus not found for sigma={sigma}")
    if np.max(np.abs(res)) > 1e-11:
        raise SolverDiverged(f"Hugoniot residual {np.max(np.abs(res)):.3e}")
    if not model.in_ball(u, slack=1e-9):
        raise OutOfDomain(f"shock state {tuple(u)} leaves B(0, {model.r})")
    vr = inv.forward(u)
    vr[i] = target
    return HugoniotPoint(_as_coords(vr), _as_state(u), float(s))


def shock_curve(model: FluxModel, family: int, sigma: float, v, allow_positive: bool = False) -> RiemannCoords:
    """Hugoniot locus reparametrized by the jump of ``v_i``."""
    if sigma > 0 and not allow_positive:
        raise PreconditionError("shock curve is parametrized by sigma <= 0")
    return hugoniot_point(model, family, sigma, v).coords


def blended_curve(model: FluxModel, family: int, sigma: float, v, eps, check: bool = True) -> RiemannCoords:
    """``xi * shock + (1 - xi) * rarefaction`` with ``xi = cutoff(sigma/sqrt(eps))``."""
    w = _params(eps).weight(sigma)
    if w == 0.0:
        return rarefaction_curve(model, family, sigma, v, check=check)
    shock = shock_curve(model, family, sigma, v)
    if w == 1.0:
        return shock
    rare = rarefaction_curve(model, family, sigma, v, check=False)
    return RiemannCoords(w * shock[0] + (1 - w) * rare[0], w * shock[1] + (1 - w) * rare[1])


def _speed_at(model: FluxModel, family: int, v) -> float:
    u = to_state(model, v)
    return float(model.eigenvalues(np.asarray(u))[family - 1])


def averaged_rarefaction_speed(model: FluxModel, family: int, sigma: float, v_left, eps) -> float:
    """Measure-weighted mean of ``lam_i`` at the lower grid value of each cell
    covering the interval swept by the shock, transverse invariant frozen."""
    p = _params(eps)
    e = p.epsilon
    i = family - 1
    a = float(v_left[i]) + sigma
    b = float(v_left[i])
    lo, hi = min(a, b), max(a, b)
    if hi - lo <= 0:
        return _speed_at(model, family, v_left)
    k0 = math.floor(lo / e)
    k1 = math.floor(hi / e)
    total = 0.0
    for k in range(k0, k1 + 1):
        left = max(lo, k * e)
        right = min(hi, (k + 1) * e)
        if right <= left:
            continue
        grid_v = [float(v_left[0]), float(v_left[1])]
        grid_v[i] = k * e
        total += (right - left) * _speed_at(model, family, grid_v)
    return total / (hi - lo)


def blended_shock_speed(model: FluxModel, family: int, sigma: float, v_left, eps) -> float:
    """Speed of a shock front: Hugoniot speed blended with the fan average."""
    if not sigma < 0:
        raise PreconditionError("blended shock speed requires sigma < 0")
    w = _params(eps).weight(sigma)
    if w == 1.0:
        return hugoniot_point(model, family, sigma, v_left).speed
    lam_r = averaged_rarefaction_speed(model, family, sigma, v_left, eps)
    if w == 0.0:
        return lam_r
    lam_s = hugoniot_point(model, family, sigma, v_left).speed
    return w * lam_s + (1 - w) * lam_r


@dataclass(frozen=True)
class Front:
    """One travelling discontinuity, ``x(t) = position + speed * (t - t0)``."""

    family: int
    position: float
    left: State
    right: State
    strength: float
    speed: float
    generation: int = 1
    t0: float = 0.0
    v_left: Optional[RiemannCoords] = None
    v_right: Optional[RiemannCoords] = None
    id: int = -1
    drift: float = 0.0

    @property
    def is_shock(self) -> bool:
        return self.strength < 0

    def position_at(self, t: float) -> float:
        return self.position + (self.speed + self.drift) * (t - self.t0)

    def with_(self, **changes) -> "Front":
        return replace(self, **changes)


@dataclass(frozen=True)
class RiemannFan:
    left: State
    right: State
    middle: State
    fronts: tuple = field(default_factory=tuple)
    sigma: tuple = (0.0, 0.0)


def rarefaction_fan_partition(model: FluxModel, family: int, v_l, v_m, eps, t: float = 0.0,
                              x0: float = 0.0, generation: int = 1) -> list:
    """Staircase approximation of a rarefaction on the ``eps``-grid of ``v_i``.

    Jumps sit at the grid values ``k*eps`` crossed by the wave; each jump
    travels with ``lam_i`` evaluated at the lower end of its cell.
    """
    e = _params(eps).epsilon
    i = family - 1
    lo = float(v_l[i])
    hi = float(v_m[i])
    if hi < lo:
        raise PreconditionError("fan partition needs a non-negative strength")
    if hi == lo:
        return []
    j = math.floor(lo / e)
    k = math.floor(hi / e)
    breaks = [lo] + [m * e for m in range(j + 1, k + 1)] + [hi]
    cells = list(range(j, k + 1))
    fronts = []
    base = [float(v_l[0]), float(v_l[1])]
    prev_state = None
    for cell, a, b in zip(cells, breaks[:-1], breaks[1:]):
        if b - a <= 0:
            continue
        va = list(base)
        va[i] = a
        vb = list(base)
        vb[i] = b
        grid_v = list(base)
        grid_v[i] = cell * e
        ua = prev_state if prev_state is not None else to_state(model, va)
        ub = to_state(model, vb)
        speed = _speed_at(model, family, grid_v)
        fronts.append(Front(family, x0, ua, ub, b - a, speed, generation, t, _as_coords(va), _as_coords(vb)))
        prev_state = ub
    return fronts


def connect(model: FluxModel, sigma: Sequence[float], v_l, eps) -> tuple:
    """Middle and right invariants reached from ``v_l`` by strengths ``sigma``."""
    vm = blended_curve(model, 1, sigma[0], v_l, eps, check=False)
    vr = blended_curve(model, 2, sigma[1], vm, eps, check=False)
    return vm, vr


def solve_strengths(model: FluxModel, v_l, v_r, eps, tol: float = 1e-14, max_iter: int = 50) -> np.ndarray:
    """Damped Newton for ``(sigma1, sigma2)`` in invariant coordinates."""
    v_l = np.asarray(v_l, float)
    v_r = np.asarray(v_r, float)
    sig = v_r - v_l

    def residual(s):
        return np.asarray(connect(model, s, v_l, eps)[1]) - v_r

    try:
        res = residual(sig)
    except (OutOfDomain, SolverDiverged):
        res = None
    if res is not None and np.max(np.abs(res)) <= tol:
        return sig
    if res is None:
        raise SolverDiverged("initial strengths leave the domain")
    h = 1e-7
    for _ in range(max_iter):
        J = np.empty((2, 2))
        for k in range(2):
            d = np.zeros(2)
            d[k] = h
            J[:, k] = (residual(sig + d) - residual(sig - d)) / (2 * h)
        try:
            step = np.linalg.solve(J, res)
        except np.linalg.LinAlgError as exc:
            raise SolverDiverged("singular middle-state Jacobian") from exc
        lam = 1.0
        norm0 = np.max(np.abs(res))
        for _ in range(30):
            trial = sig - lam * step
            try:
                r_trial = residual(trial)
                if np.max(np.abs(r_trial)) < norm0 or np.max(np.abs(r_trial)) <= tol:
                    break
            except (OutOfDomain, SolverDiverged):
                pass
            lam *= 0.5
        else:
            raise SolverDiverged("damped Newton stalled")
        sig = trial
        res = r_trial
        if np.max(np.abs(res)) <= tol:
            return sig
    raise SolverDiverged("middle-state Newton did not converge in 50 iterations")


def solve_riemann(model: FluxModel, u_l, u_r, eps, x0: float = 0.0, t0: float = 0.0,
                  single_front: tuple = (False, False), generations: tuple = (1, 1)) -> RiemannFan:
    """Approximate Riemann solver producing the outgoing fronts.

    ``single_front[i]`` requests the single-front provision for family
    ``i+1``: a positive outgoing wave becomes one front travelling with the
    characteristic speed at the middle state instead of a fan.
    """
    p = _params(eps)
    ul = _as_state(u_l)
    ur = _as_state(u_r)
    vl = to_coords(model, ul)
    vr = to_coords(model, ur)
    if ul == ur:
        return RiemannFan(ul, ur, ul, ())
    sig = solve_strengths(model, vl, vr, p)
    vm, _ = connect(model, sig, vl, p)
    um = to_state(model, vm)
    lam_m = model.eigenvalues(np.asarray(um))
    fronts = []
    for family, s, va, vb, ua, ub in ((1, sig[0], vl, vm, ul, um), (2, sig[1], vm, vr, um, ur)):
        gen = generations[family - 1]
        if abs(s) <= DROP_STRENGTH:
            continue
        if s < 0:
            speed = float(blended_shock_speed(model, family, s, va, p))
            fronts.append(Front(family, x0, ua, ub, float(s), speed, gen, t0, _as_coords(va), _as_coords(vb)))
        elif single_front[family - 1]:
            speed = float(lam_m[family - 1])
            fronts.append(Front(family, x0, ua, ub, float(s), speed, gen, t0, _as_coords(va), _as_coords(vb)))
        else:
            fan = rarefaction_fan_partition(model, family, va, vb, p, t0, x0, gen)
            if fan:
                fan[0] = fan[0].with_(left=ua)
                fan[-1] = fan[-1].with_(right=ub, v_right=_as_coords(vb))
            fronts.extend(fan)
    if abs(sig[0]) <= DROP_STRENGTH or abs(sig[1]) <= DROP_STRENGTH:
        # a dropped wave leaves a state gap below the resolution; close the chain
        fronts = _close_chain(fronts, ul, ur)
    return RiemannFan(ul, ur, um, tuple(fronts), (float(sig[0]), float(sig[1])))


def _close_chain(fronts: list, ul: State, ur: State) -> list:
    if not fronts:
        return fronts
    fronts[0] = fronts[0].with_(left=ul)
    fronts[-1] = fronts[-1].with_(right=ur)
    return fronts
