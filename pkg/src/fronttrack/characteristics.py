"""Minimal backward characteristics through a front-tracking solution.

The solution is piecewise constant, so a generalized characteristic of
family ``i`` is a polyline: a straight line of slope ``lambda_i(u)`` inside a
constant region, or a piece of a front whose speed lies between the family-i
speeds on its two sides.  Going backward in time, the leftmost admissible
continuation is the one with the largest slope, which is what the walk below
picks at every node.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import PreconditionError
from .functionals import FunctionalConfig
from .riemann import Front

HIT_TOL = 1e-12
SPEED_TOL = 1e-9


def _pos(f: Front, t: float) -> float:
    return f.position + (f.speed + f.drift) * (t - f.t0)


def _kspeed(f: Front) -> float:
    return f.speed + f.drift


@dataclass(frozen=True)
class PathPiece:
    """A straight piece of the path between two nodes (forward orientation)."""

    t0: float
    t1: float
    x0: float
    x1: float
    state: tuple  # the state at y(t)- along the piece
    front_id: Optional[int]  # front being followed, if any
    interval: int  # index k: the piece lies after event k (k = -1 before any event)
    qtilde: float  # transverse strength on the upstream side


@dataclass(frozen=True)
class Crossing:
    time: float
    kind: str  # "front" | "interaction_point" | "splitting"
    front_ids: tuple
    families: tuple
    strengths: tuple
    position: float
    step: Optional[int] = None


@dataclass
class CharacteristicPath:
    family: int
    anchor: tuple
    pieces: list = field(default_factory=list)
    crossings: list = field(default_factory=list)
    departures: list = field(default_factory=list)
    fallbacks: int = 0

    @property
    def samples(self) -> list:
        """``(t, x)`` vertices in increasing time."""
        if not self.pieces:
            return [self.anchor]
        pts = [(self.pieces[0].t0, self.pieces[0].x0)]
        for p in self.pieces:
            pts.append((p.t1, p.x1))
        return pts

    def position(self, t: float) -> float:
        for p in self.pieces:
            if p.t0 <= t <= p.t1:
                if p.t1 == p.t0:
                    return p.x1
                return p.x0 + (p.x1 - p.x0) * (t - p.t0) / (p.t1 - p.t0)
        raise PreconditionError(f"time {t} outside the path")

    def lipschitz(self) -> float:
        best = 0.0
        for p in self.pieces:
            if p.t1 > p.t0:
                best = max(best, abs(p.x1 - p.x0) / (p.t1 - p.t0))
        return best


class _Alive:
    """The set of fronts alive on one inter-event interval."""

    def __init__(self, fronts, leftmost):
        self.fronts = {f.id: f for f in fronts}
        self.leftmost = leftmost

    def sorted_at(self, t: float) -> list:
        return sorted(self.fronts.values(), key=lambda f: (_pos(f, t), -_kspeed(f), f.id))

    def neighbours(self, t: float, x: float, tol: float):
        """Fronts strictly left, at, and strictly right of ``x``."""
        left = right = None
        lp, rp = -math.inf, math.inf
        at = []
        for f in self.fronts.values():
            p = _pos(f, t)
            if abs(p - x) <= tol:
                at.append(f)
            elif p < x and p > lp:
                left, lp = f, p
            elif p > x and p < rp:
                right, rp = f, p
        return left, at, right

    def state_left_of(self, t: float, x: float, tol: float):
        left, at, _ = self.neighbours(t, x, tol)
        if at:
            return max(at, key=_kspeed).left
        if left is not None:
            return left.right
        return self.leftmost

    def state_right_of(self, t: float, x: float, tol: float):
        _, at, right = self.neighbours(t, x, tol)
        if at:
            return min(at, key=_kspeed).right
        if right is not None:
            return right.left
        return self.rightmost()

    def rightmost(self):
        if not self.fronts:
            return self.leftmost
        return max(self.fronts.values(), key=lambda f: (_pos(f, 0.0), f.id)).right


def _lam(model, family: int, u) -> float:
    return float(model.eigenvalue(family, np.asarray(u, float)))


def _qtilde(alive: _Alive, t: float, family: int, y: float) -> float:
    total = 0.0
    for f in alive.fronts.values():
        p = _pos(f, t)
        if family == 1 and f.family == 2 and p < y:
            total += abs(f.strength)
        elif family == 2 and f.family == 1 and p > y:
            total += abs(f.strength)
    return total


def _decide(model, family: int, bundle: list, state_in_region, t: float, rng=None):
    """Largest-slope admissible continuation at a node.

    ``bundle`` holds the fronts through the node; returns ``(slope, front or
    None, state, fallback_flag)``.
    """
    if not bundle:
        u = state_in_region
        return _lam(model, family, u), None, u, False
    fs = sorted(bundle, key=lambda f: -_kspeed(f))  # left-to-right at earlier times
    regions = [fs[0].left] + [f.right for f in fs]
    speeds = [_kspeed(f) for f in fs]
    options = []
    for k, u in enumerate(regions):
        lam = _lam(model, family, u)
        hi = speeds[k - 1] if k > 0 else math.inf
        lo = speeds[k] if k < len(fs) else -math.inf
        if lo + SPEED_TOL < lam < hi - SPEED_TOL:
            options.append((lam, 0, None, u))
    for f, s in zip(fs, speeds):
        a, b = _lam(model, family, f.left), _lam(model, family, f.right)
        if min(a, b) - SPEED_TOL <= s <= max(a, b) + SPEED_TOL:
            options.append((s, 1, f, f.left))
    if not options:
        # Numerical corner: follow the front whose speed is closest to the family speed.
        f = min(fs, key=lambda g: abs(_kspeed(g) - _lam(model, family, g.left)))
        return _kspeed(f), f, f.left, True
    if rng is not None:
        lam, _, f, u = options[int(rng.integers(len(options)))]
    else:
        lam, _, f, u = max(options, key=lambda o: (o[0], o[1]))
    return lam, f, u, False


def minimal_backward(log, family: int, anchor: tuple, t_stop: float = 0.0) -> CharacteristicPath:
    """Minimal backward characteristic of ``family`` through ``anchor = (T, X)``."""
    return backward_characteristic(log, family, anchor, t_stop)


def backward_characteristic(log, family: int, anchor: tuple, t_stop: float = 0.0, rng=None) -> CharacteristicPath:
    """Backward generalized characteristic through ``anchor``.

    Without ``rng`` the largest admissible slope is taken at every node, giving
    the minimal one.  With ``rng`` a random admissible option is taken, which
    yields another genuine backward characteristic.
    """
    if family not in (1, 2):
        raise PreconditionError("family must be 1 or 2")
    T, X = map(float, anchor)
    end = log.final.time if log.final is not None else log.config.T
    if not (log.initial.time <= T <= end + 1e-12):
        raise PreconditionError("anchor time outside the run horizon")
    if not math.isfinite(X):
        raise PreconditionError("anchor position must be finite")
    model = log.model
    events = log.events
    other = 3 - family
    k = len(events) - 1
    while k >= 0 and events[k].time > T:
        k -= 1
    pat = log.pattern_at(T)
    alive = _Alive(pat.fronts, pat.leftmost_state)
    path = CharacteristicPath(family, (T, X))
    pieces_rev = []
    t, x = T, X
    t_floor = max(log.initial.time, t_stop)

    def upstream(f_pos: float, y: float) -> bool:
        return f_pos < y if family == 1 else f_pos > y

    def settle(t, x):
        """Decide at ``(t, x)`` from scratch; returns the walk state."""
        tol = HIT_TOL * (1 + abs(x))
        left, at, right = alive.neighbours(t, x, tol)
        region_state = None
        if not at:
            region_state = left.right if left is not None else alive.leftmost
        slope, follow, state, fb = _decide(model, family, at, region_state, t, rng)
        path.fallbacks += fb
        if follow is None and at:
            # leaving the node into a region: neighbours are the bundle ends
            fs = sorted(at, key=lambda f: -_kspeed(f))
            regions_left = [None] + fs
            for idx, u in enumerate([fs[0].left] + [f.right for f in fs]):
                if u is state:
                    left = regions_left[idx] if idx > 0 else left
                    right = fs[idx] if idx < len(fs) else right
                    break
        return slope, follow, state, left, right, at

    slope, following, state, left_nb, right_nb, _ = settle(t, x)
    qt = _qtilde(alive, t, family, x)
    while True:
        t_k = max(events[k].time if k >= 0 else t_floor, t_floor)
        while t > t_k:
            if following is not None:
                x_new = _pos(following, t_k)
                pieces_rev.append(PathPiece(t_k, t, x_new, x, tuple(state), following.id, k, qt))
                t, x = t_k, x_new
                break
            d = t - t_k
            hit = None
            if left_nb is not None and slope > _kspeed(left_nb):
                dl = (x - _pos(left_nb, t)) / (slope - _kspeed(left_nb))
                if dl < d:
                    d, hit = max(dl, 0.0), left_nb
            if right_nb is not None and _kspeed(right_nb) > slope:
                dr = (_pos(right_nb, t) - x) / (_kspeed(right_nb) - slope)
                if dr < d:
                    d, hit = max(dr, 0.0), right_nb
            t_new = t - d
            if hit is None:
                t_new = t_k
                x_new = x - slope * (t - t_k)
            else:
                x_new = _pos(hit, t_new)
            if t_new < t:
                pieces_rev.append(PathPiece(t_new, t, x_new, x, tuple(state), None, k, qt))
            t, x = t_new, x_new
            if hit is None:
                break
            slope, following, state, left_nb, right_nb, bundle = settle(t, x)
            if following is None:
                kind = "front" if len(bundle) == 1 else "interaction_point"
                path.crossings.append(Crossing(t, kind, tuple(f.id for f in bundle),
                                               tuple(f.family for f in bundle),
                                               tuple(f.strength for f in bundle), x))
                if len(bundle) == 1 and bundle[0].family == other:
                    qt += abs(bundle[0].strength)
                else:
                    qt = _qtilde(alive, t - 1e-12 * max(1.0, abs(t)), family, x - slope * 1e-12 * max(1.0, abs(t)))
        if k < 0 or t <= t_floor:
            break
        e = events[k]
        t = e.time
        prev_follow = following
        if e.kind == "splitting":
            alive = _Alive(e.incoming, e.leftmost_before)
            slope, following, state, left_nb, right_nb, at = settle(t, x)
            path.crossings.append(Crossing(t, "splitting", tuple(f.id for f in at), tuple(f.family for f in at),
                                           tuple(f.strength for f in at), x, step=e.step))
            qt = _qtilde(alive, t, family, x)
        else:
            out_ids = {f.id for f in e.outgoing}
            for f in e.outgoing:
                alive.fronts.pop(f.id, None)
            for f in e.incoming:
                alive.fronts[f.id] = f
            tol = HIT_TOL * (1 + abs(x))
            at_node = e.position is not None and abs(e.position - x) <= max(tol, 1e-9 * (1 + abs(x)))
            involved = (following is not None and following.id in out_ids) or at_node
            if not involved and following is None:
                lo = _pos(left_nb, t) if left_nb is not None else -math.inf
                hi = _pos(right_nb, t) if right_nb is not None else math.inf
                if (left_nb is not None and left_nb.id in out_ids) or (right_nb is not None and right_nb.id in out_ids) \
                        or (e.position is not None and lo - tol <= e.position <= hi + tol):
                    _, _, _, left_nb, right_nb, _ = settle(t, x)
            if involved:
                slope, following, state, left_nb, right_nb, _ = settle(t, x)
                if at_node:
                    path.crossings.append(Crossing(t, "interaction_point", tuple(f.id for f in e.incoming),
                                                   tuple(f.family for f in e.incoming),
                                                   tuple(f.strength for f in e.incoming), x))
                qt = _qtilde(alive, t, family, x)
            elif e.position is not None and upstream(e.position, x):
                qt += sum(abs(f.strength) for f in e.incoming if f.family == other)
                qt -= sum(abs(f.strength) for f in e.outgoing if f.family == other)
        if prev_follow is not None and following is None and prev_follow.family == family:
            path.departures.append((t, prev_follow.id, prev_follow.strength))
        k -= 1
    path.pieces = list(reversed(pieces_rev))
    path.crossings.reverse()
    return path


# ---------------------------------------------------------------------------
# Crossing classification and audits
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CrossingRecord:
    time: float
    label: str
    delta_v: float
    bound: float
    passed: Optional[bool]
    detail: str = ""


def _v(model, u, family):
    return float(model.invariants.forward(np.asarray(u, float))[family - 1])


def classify_crossings(path: CharacteristicPath, log, C3: Optional[float] = None) -> list:
    """Label every crossing and audit the change of ``v_i`` against its bound.

    Labels: ``transverse_front``, ``transverse_interaction``,
    ``same_family_interaction``, ``splitting_grid`` / ``splitting_offgrid``
    and ``splitting_on_front``.  When ``C3`` is ``None`` the bounds are the
    bare rates (``|s|^3`` and friends), which is what calibration fits.
    """
    model = log.model
    fam = path.family
    other = 3 - fam
    ds = log.dsource
    out = []
    c = 1.0 if C3 is None else C3
    for cr in path.crossings:
        try:
            before = _piece_before(path, cr.time)
            after = _piece_after(path, cr.time)
        except LookupError:
            continue
        dv = _v(model, after.state, fam) - _v(model, before.state, fam)
        if cr.kind == "front":
            if cr.families[0] == other:
                bound = c * abs(cr.strengths[0]) ** 3
                out.append(CrossingRecord(cr.time, "transverse_front", dv, bound,
                                          abs(dv) <= bound + 1e-12 if C3 is not None else None))
            else:
                out.append(CrossingRecord(cr.time, "same_family_front", dv, math.inf, None,
                                          "family front entered or left"))
        elif cr.kind == "interaction_point":
            if all(f == other for f in cr.families):
                bound = c * sum(abs(s) for s in cr.strengths) ** 3
                out.append(CrossingRecord(cr.time, "transverse_interaction", dv, bound,
                                          abs(dv) <= bound + 1e-12 if C3 is not None else None))
            else:
                out.append(CrossingRecord(cr.time, "same_family_interaction", dv, math.inf, None))
        else:
            n = cr.step
            tw = ds.tau * ds.omega2_step(n) if ds is not None else 0.0
            eps = log.config.epsilon
            j = round(cr.position / eps)
            on_grid = abs(cr.position - j * eps) <= 1e-12 * (1 + abs(cr.position))
            s_other = sum(abs(s) for f, s in zip(cr.families, cr.strengths) if f == other)
            s_same = sum(abs(s) for f, s in zip(cr.families, cr.strengths) if f == fam)
            w1 = ds.omega1_cell(j) if (ds is not None and on_grid and not ds.source.is_zero) else 0.0
            bound = c * (tw * (1 + s_same + s_other + eps * w1) + s_other**3)
            label = "splitting_grid" if on_grid else "splitting_offgrid"
            if cr.front_ids:
                label += "_on_front"
            out.append(CrossingRecord(cr.time, label, dv, bound,
                                      abs(dv) <= bound + 1e-12 if C3 is not None else None))
    return out


def _piece_before(path, t):
    cand = [p for p in path.pieces if p.t1 <= t + 1e-15 and p.t1 > p.t0]
    if not cand:
        raise LookupError
    return cand[-1]


def _piece_after(path, t):
    cand = [p for p in path.pieces if p.t0 >= t - 1e-15 and p.t1 > p.t0]
    if not cand:
        raise LookupError
    return cand[0]


@dataclass(frozen=True)
class ThetaAudit:
    time: float
    before: float
    after: float
    passed: bool

    @property
    def delta(self) -> float:
        return self.after - self.before


def interval_functionals(log, config: FunctionalConfig) -> list:
    """``(Qhat, W)`` on each inter-event interval; entry ``k + 1`` is after event ``k``."""
    from .functionals import approaching_sum

    ds = log.dsource
    w1 = ds.omega1_norm if (ds is not None and not ds.source.is_zero) else 0.0
    alive = {f.id: f for f in log.initial.fronts}

    def values(t, after_step):
        fr = list(alive.values())
        fr.sort(key=lambda f: (_pos(f, t), f.family, f.id))
        V = sum(abs(f.strength) for f in fr)
        W = ds.tail_at(t, after_step) if ds is not None else 0.0
        return config.K * approaching_sum(fr) + config.R * (V + w1) * W, W

    out = [values(log.initial.time, False)]
    for e in log.events:
        for f in e.incoming:
            alive.pop(f.id, None)
        for f in e.outgoing:
            alive[f.id] = f
        out.append(values(e.time, e.kind == "splitting"))
    return out


def theta_along(path: CharacteristicPath, log, config: FunctionalConfig, series: Optional[list] = None) -> list:
    """``Theta_i`` on each piece of the path, in time order."""
    if series is None:
        series = interval_functionals(log, config)
    vals = []
    for p in path.pieces:
        if p.t1 <= p.t0:
            continue
        Qhat, W = series[p.interval + 1]
        v = _v(log.model, p.state, path.family)
        theta = (abs(v) + config.vbar_sup + config.A0 * W) * math.exp(config.Atilde * p.qtilde + config.A * Qhat)
        vals.append((p.t0, p.t1, theta))
    return vals


def theta_audit(path: CharacteristicPath, log, config: FunctionalConfig, series: Optional[list] = None,
                rel_tol: float = 1e-12) -> list:
    """``Delta Theta_i <= tol`` between consecutive pieces of the path."""
    vals = theta_along(path, log, config, series)
    audits = []
    for (a0, a1, th0), (b0, b1, th1) in zip(vals[:-1], vals[1:]):
        tol = rel_tol * (1 + abs(th0))
        audits.append(ThetaAudit(b0, th0, th1, th1 - th0 <= tol))
    return audits
