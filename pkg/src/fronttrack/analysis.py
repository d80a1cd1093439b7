"""Measurable versions of the derived estimates.

Everything here is post-processing of completed runs: positive-variation
decay, windowed total variation, the invariant region of a conserved
component, integral bounds over intervals, the dyadic trapezoid driver for
bounded data and the weak-form residual used for self-convergence studies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import optimize

from .errors import FrontTrackError, NotApplicable, PreconditionError
from .model import FluxModel, SourceModel, max_speed
from .tracker import (
    FunctionDatum,
    PiecewiseConstantDatum,
    RunConfig,
    State,
    WavePattern,
    kinematic_position,
    run,
)


# ---------------------------------------------------------------------------
# Variation of a pattern in invariant coordinates
# ---------------------------------------------------------------------------


def pattern_invariants(model: FluxModel, pattern: WavePattern) -> tuple:
    """Front positions and the invariant values on the pieces, shape (2, n+1)."""
    pos = pattern.positions()
    U = np.array(pattern.states(), float).T
    return pos, model.invariants.forward_many(U)


def tv_plus(pattern: WavePattern, family: int, interval: tuple) -> float:
    """Sum of positive family strengths of the fronts lying in ``[a, b]``."""
    a, b = interval
    total = 0.0
    for f in pattern.fronts:
        if f.family != family or f.strength <= 0:
            continue
        x = kinematic_position(f, pattern.time)
        if a <= x <= b:
            total += f.strength
    return total


def total_variation(model: FluxModel, pattern: WavePattern, interval: Optional[tuple] = None) -> float:
    """``sum |v1 jump| + |v2 jump|`` over the fronts in ``interval`` (all if ``None``)."""
    pos, V = pattern_invariants(model, pattern)
    jumps = np.abs(np.diff(V, axis=1)).sum(axis=0)
    if interval is None:
        return float(jumps.sum())
    a, b = interval
    mask = (pos >= a) & (pos <= b)
    return float(jumps[mask].sum())


def windowed_tv(model: FluxModel, pattern: WavePattern, length: float) -> float:
    """Largest variation inside any window of the given length."""
    pos, V = pattern_invariants(model, pattern)
    if pos.size == 0:
        return 0.0
    jumps = np.abs(np.diff(V, axis=1)).sum(axis=0)
    csum = np.concatenate([[0.0], np.cumsum(jumps)])
    hi = np.searchsorted(pos, pos + length, side="right")
    return float(np.max(csum[hi] - csum[np.arange(pos.size)]))


def sup_norm(model: FluxModel, pattern: WavePattern) -> float:
    """``max |v|`` (Euclidean) over the pieces of the pattern."""
    _, V = pattern_invariants(model, pattern)
    return float(np.max(np.hypot(V[0], V[1])))


def datum_tv(model: FluxModel, datum: PiecewiseConstantDatum, interval: Optional[tuple] = None) -> float:
    U = np.array(datum.states, float).T
    V = model.invariants.forward_many(U)
    jumps = np.abs(np.diff(V, axis=1)).sum(axis=0)
    if interval is None:
        return float(jumps.sum())
    br = np.asarray(datum.breaks, float)
    mask = (br >= interval[0]) & (br <= interval[1])
    return float(jumps[mask].sum())


# ---------------------------------------------------------------------------
# Decay of positive waves
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DecayReport:
    interval: tuple
    time: float
    tv_plus: tuple
    bound: float
    c1: float
    calM: float

    @property
    def margin(self) -> float:
        return self.bound - max(self.tv_plus)

    @property
    def passed(self) -> bool:
        return self.margin >= -1e-12


def decay_bound(interval: tuple, t: float, c1: float, calM: float, vbar_sup: float, omega2_norm: float,
                tv_widened: float) -> float:
    a, b = interval
    return (b - a) / (c1 * t) + calM * (vbar_sup + omega2_norm) * tv_widened


def decay_audit(log, interval: tuple, t: float, c1: float, calM: float, lam_hat: Optional[float] = None,
                datum: Optional[PiecewiseConstantDatum] = None, pattern: Optional[WavePattern] = None) -> DecayReport:
    """Both sides of the positive-variation decay estimate at time ``t``."""
    if t <= 0:
        raise PreconditionError("decay audit needs t > 0")
    model = log.model
    if lam_hat is None:
        lam_hat = max_speed(model, samples=2000)
    if pattern is None:
        pattern = log.pattern_at(t)
    a, b = interval
    widened = (a - lam_hat * t, b + lam_hat * t)
    init = log.initial
    tvw = total_variation(model, init, widened)
    _, V0 = pattern_invariants(model, init)
    vbar = float(np.max(np.abs(V0)))
    w2 = log.dsource.omega2_norm if log.dsource is not None else 0.0
    tvp = (tv_plus(pattern, 1, interval), tv_plus(pattern, 2, interval))
    return DecayReport(interval, t, tvp, decay_bound(interval, t, c1, calM, vbar, w2, tvw), c1, calM)


def fit_decay_envelope(times: Sequence[float], values: Sequence[float]) -> tuple:
    """Non-negative least squares fit of ``A / t + B``; returns ``(A, B, residual)``."""
    t = np.asarray(times, float)
    y = np.asarray(values, float)
    M = np.stack([1.0 / t, np.ones_like(t)], axis=1)
    coef, res = optimize.nnls(M, y)
    return float(coef[0]), float(coef[1]), float(res)


# ---------------------------------------------------------------------------
# Invariant region
# ---------------------------------------------------------------------------


def second_derivative_signature(model: FluxModel, h: float = 1e-4) -> tuple:
    """``(d^2 f1 / du2^2 (0), d^2 f2 / du1^2 (0))`` by central differences."""
    def f(u1, u2):
        return model.flux(np.array([u1, u2], float))

    f1 = (f(0.0, h)[0] - 2 * f(0.0, 0.0)[0] + f(0.0, -h)[0]) / h**2
    f2 = (f(h, 0.0)[1] - 2 * f(0.0, 0.0)[1] + f(-h, 0.0)[1]) / h**2
    return float(f1), float(f2)


@dataclass(frozen=True)
class InvariantRegionSetup:
    """Which component is confined, on which side, and by which invariant bound."""

    component: int  # 1 or 2: the conserved component with a one-sided bound
    invariant: int  # the Riemann invariant controlling it
    v_side: int  # +1: v is bounded above; -1: bounded below
    u_side: int  # +1: u is bounded above (u <= K eta); -1: bounded below (u >= -K eta)
    defect: float
    dJ: float


def invariant_region_setup(model: FluxModel, tol: float = 1e-8) -> list:
    """Cases of the invariant-region lemma that apply to ``model``.

    Raises :class:`NotApplicable` when neither second derivative is nonzero.
    """
    from .model import curve_third_order_defect

    d1, d2 = second_derivative_signature(model)
    cases = []
    for comp, dd, fam in ((1, d1, 2), (2, d2, 1)):
        if abs(dd) <= tol:
            continue
        inv = 3 - fam  # the transverse invariant moved by the cubic defect
        defect = curve_third_order_defect(model, fam)
        defect = float(defect) if np.ndim(defect) == 0 else float(np.asarray(defect)[inv - 1])
        v_side = 1 if defect <= 0 else -1
        Jinv = np.linalg.inv(model.invariants.jacobian(np.zeros(2)))
        dJ = float(Jinv[comp - 1, inv - 1])
        u_side = -v_side if dJ < 0 else v_side
        cases.append(InvariantRegionSetup(comp, inv, v_side, u_side, defect, dJ))
    if not cases:
        raise NotApplicable("both second derivatives vanish at the origin; no invariant region case applies")
    return cases


def all_states(log) -> np.ndarray:
    """Every constant state that occurs anywhere in the run, shape (2, N)."""
    st = [tuple(s) for s in log.initial.states()]
    for e in log.events:
        for f in e.outgoing:
            st.append(tuple(f.left))
            st.append(tuple(f.right))
        if e.kind == "splitting":
            st.append(tuple(e.leftmost_after))
    return np.array(st, float).T


@dataclass(frozen=True)
class InvariantRegionReport:
    setup: InvariantRegionSetup
    eta: float
    calK: float
    extreme_u: float  # min u_c (u_side = -1) or max u_c (u_side = +1)
    u_bound: float
    extreme_v_excess: float  # largest one-sided excess of v over its running bound
    v_passed: bool

    @property
    def u_margin(self) -> float:
        if self.setup.u_side < 0:
            return self.extreme_u - self.u_bound
        return self.u_bound - self.extreme_u

    @property
    def passed(self) -> bool:
        return self.u_margin >= -1e-12


def invariant_region_audit(log, eta: float, calK: float, C5: float = 0.0) -> list:
    """Check ``u_c >= -K eta`` (or ``<= K eta``) over every state of the run.

    Also audits the one-sided running bound of the controlling invariant:
    ``v <= sup v0 + C5 * tau * sum_{k<=n} omega_{2,k}`` (mirrored for the
    lower-bound case), evaluated at each splitting step.
    """
    model = log.model
    out = []
    for setup in invariant_region_setup(model):
        U = all_states(log)
        c = setup.component - 1
        if setup.u_side < 0:
            extreme = float(U[c].min())
            ubound = -calK * eta
        else:
            extreme = float(U[c].max())
            ubound = calK * eta
        # running one-sided bound on the invariant
        inv = setup.invariant - 1
        s = setup.v_side
        V0 = model.invariants.forward_many(np.array(log.initial.states(), float).T)
        level = float(np.max(s * V0[inv]))
        excess = -math.inf
        ds = log.dsource
        acc = 0.0
        seg = [tuple(x) for x in log.initial.states()]
        for e in log.events:
            if e.kind == "splitting" and ds is not None:
                acc += ds.tau * ds.omega2_step(e.step)
            pts = [tuple(f.left) for f in e.outgoing] + [tuple(f.right) for f in e.outgoing]
            if e.kind == "splitting":
                pts.append(tuple(e.leftmost_after))
            if pts:
                Vp = model.invariants.forward_many(np.array(pts, float).T)
                excess = max(excess, float(np.max(s * Vp[inv])) - (level + C5 * acc))
        if not seg:
            excess = 0.0
        out.append(InvariantRegionReport(setup, eta, calK, extreme, ubound, excess, excess <= 1e-12))
    return out


# ---------------------------------------------------------------------------
# Integral over an interval
# ---------------------------------------------------------------------------


def integral_case(model: FluxModel, tol: float = 1e-8) -> str:
    d1, d2 = second_derivative_signature(model)
    nz = (abs(d1) > tol, abs(d2) > tol)
    if all(nz):
        return "both_nonzero"
    if not any(nz):
        return "both_zero"
    return "mixed"


def invariant_integral(model: FluxModel, pattern: WavePattern, interval: tuple) -> np.ndarray:
    """Exact ``int_I v(x) dx`` of the piecewise constant invariants."""
    a, b = interval
    pos, V = pattern_invariants(model, pattern)
    edges = np.concatenate([[-np.inf], pos, [np.inf]])
    lo = np.clip(edges[:-1], a, b)
    hi = np.clip(edges[1:], a, b)
    w = np.maximum(hi - lo, 0.0)
    return V @ w


@dataclass(frozen=True)
class IntegralReport:
    interval: tuple
    time: float
    case: str
    integral: tuple
    bound: float

    @property
    def margin(self) -> float:
        return self.bound - max(abs(self.integral[0]), abs(self.integral[1]))

    @property
    def passed(self) -> bool:
        return self.margin >= -1e-12


def interval_integral_audit(log, interval: tuple, t_bar: float, eta: float, Cp: float, Cpp: float,
                            C: float = 0.0, case: Optional[str] = None) -> IntegralReport:
    """``|int_I v_i(t_bar)| <= C' eta (l + C'' t_bar) [+ C |v|^3 t_bar]``."""
    model = log.model
    detected = integral_case(model)
    if case is not None and case != detected:
        raise PreconditionError(f"case {case!r} does not match the model signature ({detected})")
    pat = log.pattern_at(t_bar)
    val = invariant_integral(model, pat, interval)
    l = interval[1] - interval[0]
    bound = Cp * eta * (l + Cpp * t_bar)
    if detected != "both_nonzero":
        bound += C * sup_norm(model, pat) ** 3 * t_bar
    return IntegralReport(interval, t_bar, detected, (float(val[0]), float(val[1])), bound)


# ---------------------------------------------------------------------------
# Mollification and the dyadic trapezoid driver
# ---------------------------------------------------------------------------


def mollify(datum: Callable, support: tuple, width: float, samples_per_width: int = 16) -> FunctionDatum:
    """Convolve a bounded datum with a compactly supported smooth kernel.

    The kernel is ``bump`` rescaled to ``[-width, width]``; the result is C^1
    with derivative bounded by ``O(sup|datum| / width)``.
    """
    a, b = support[0] - width, support[1] + width
    h = width / samples_per_width
    xs = np.arange(a - width, b + width + h, h)
    vals = np.asarray(datum(xs), float)
    s = np.arange(-samples_per_width, samples_per_width + 1) / samples_per_width
    ker = np.where(np.abs(s) < 1, (1 - s * s) ** 2, 0.0)
    ker /= ker.sum()
    sm = np.stack([np.convolve(v, ker, mode="same") for v in vals])
    far_l = np.asarray(datum(np.array([a - 2 * width])), float)[:, 0]
    far_r = np.asarray(datum(np.array([b + 2 * width])), float)[:, 0]

    def func(x):
        x = np.asarray(x, float)
        out = np.stack([np.interp(x, xs, sm[k]) for k in range(2)])
        out[:, x < a] = far_l[:, None]
        out[:, x > b] = far_r[:, None]
        return out

    return FunctionDatum(func, (a, b))


@dataclass
class TrapezoidScheme:
    L: float
    lam_hat: float
    n_levels: int

    def t(self, m: int) -> float:
        return (2**m - 1) * self.L / (2 * self.lam_hat)

    def dt(self, m: int) -> float:
        return 2 ** (m - 1) * self.L / self.lam_hat

    def x(self, m: int, t: float) -> float:
        return 2**m * self.L - self.lam_hat * (t - self.t(m))

    @property
    def levels(self) -> list:
        return [(self.t(m), self.dt(m), (lambda tt, m=m: self.x(m, tt))) for m in range(self.n_levels)]

    def consistent(self, m: int) -> bool:
        """Level ``m`` ends where level ``m + 1`` starts, with a nonempty top."""
        end = self.t(m) + self.dt(m)
        return abs(end - self.t(m + 1)) <= 1e-12 * (1 + end) and self.x(m, end) > 0


def choose_dyadic_length(model: FluxModel, datum: PiecewiseConstantDatum, ceiling: float, L_max: float,
                         L_min: float = 1e-3) -> float:
    """Largest ``L = L_max / 2^k`` with windowed ``TV(datum, 2L) <= ceiling``."""
    pat = WavePattern(0.0, (), State(*datum.states[0]))
    U = np.array(datum.states, float).T
    V = model.invariants.forward_many(U)
    jumps = np.abs(np.diff(V, axis=1)).sum(axis=0)
    pos = np.asarray(datum.breaks, float)
    csum = np.concatenate([[0.0], np.cumsum(jumps)])
    L = L_max
    while L >= L_min:
        hi = np.searchsorted(pos, pos + 2 * L, side="right")
        tv = float(np.max(csum[hi] - csum[np.arange(pos.size)])) if pos.size else 0.0
        if tv <= ceiling:
            return L
        L /= 2
    raise PreconditionError("no dyadic length satisfies the windowed variation ceiling")


@dataclass
class LevelReport:
    level: int
    t_m: float
    tv_window: float
    tv_ceiling: float
    sup_norm: float
    sup_bound: float
    oleinik: list = field(default_factory=list)  # (t, TV(v(t); lam t / 2))
    aborted: Optional[str] = None

    @property
    def tv_passed(self) -> bool:
        return self.tv_window <= self.tv_ceiling + 1e-12

    @property
    def sup_passed(self) -> bool:
        return self.sup_norm <= self.sup_bound + 1e-12

    @property
    def oleinik_passed(self) -> bool:
        return all(v <= self.tv_ceiling + 1e-12 for _, v in self.oleinik)


@dataclass
class TrapezoidReport:
    scheme: TrapezoidScheme
    eta: float
    Lip: float
    levels: list
    logs: list

    @property
    def passed(self) -> bool:
        return all(l.aborted is None and l.tv_passed and l.sup_passed and l.oleinik_passed for l in self.levels)


def restrict_pattern(pattern: WavePattern, a: float, b: float) -> PiecewiseConstantDatum:
    """Datum equal to the pattern on ``[a, b]`` and constant outside."""
    states = pattern.states()
    pos = pattern.positions()
    keep = [(float(x), i) for i, x in enumerate(pos) if a < x < b]
    if not keep:
        st = pattern.state_at(0.5 * (a + b))
        return PiecewiseConstantDatum((), (State(*st),))
    breaks = tuple(x for x, _ in keep)
    sts = [State(*states[keep[0][1]])] + [State(*states[i + 1]) for _, i in keep]
    return PiecewiseConstantDatum(breaks, tuple(sts))


def trapezoid_driver(datum, model: FluxModel, source: Optional[SourceModel], epsilon: float, tau: float,
                     eta: float, K: float, n_levels: int = 3, L_max: float = 0.5, c0: Optional[float] = None,
                     lam_hat: Optional[float] = None, oleinik_samples: int = 3, seed: int = 0) -> TrapezoidReport:
    """Run the dyadic trapezoid construction level by level.

    ``datum`` is mollified with width ``sqrt(epsilon)`` when it is not already
    piecewise constant; each level restarts from the previous trace
    restricted to its lower basis.
    """
    from .tracker import sample_datum

    if lam_hat is None:
        lam_hat = max_speed(model, samples=2000)
    if c0 is None:
        c0 = model.c0
    ceiling = 20 * lam_hat / c0
    Lip = 0.0
    if isinstance(datum, FunctionDatum):
        width = math.sqrt(epsilon)
        datum = mollify(datum, datum.support, width)
        xs = np.linspace(datum.support[0], datum.support[1], 2001)
        vals = datum(xs)
        Lip = float(np.max(np.abs(np.diff(vals, axis=1))) / (xs[1] - xs[0]))
    pc = sample_datum(datum, epsilon)
    L = choose_dyadic_length(model, pc, ceiling, L_max)
    scheme = TrapezoidScheme(L, lam_hat, n_levels)
    levels, logs = [], []
    current = pc
    for m in range(n_levels):
        t0, t1 = scheme.t(m), scheme.t(m + 1)
        cfg = RunConfig(epsilon, tau, t1 - t0, seed=seed)
        try:
            lg = run(model, current, _shift_source(source, t0), cfg)
        except FrontTrackError as exc:
            levels.append(LevelReport(m, t1, math.nan, ceiling, math.nan, K * math.sqrt(eta), aborted=str(exc)))
            break
        logs.append(lg)
        end = lg.final
        ole = []
        for s in np.linspace(t0, t1, oleinik_samples + 2)[1:]:
            if s < scheme.t(1) - 1e-12:
                continue
            pt = lg.pattern_at(s - t0)
            ole.append((float(s), windowed_tv(model, pt, lam_hat * s / 2)))
        tvw = windowed_tv(model, end, 2 ** (m + 2) * L)
        levels.append(LevelReport(m + 1, t1, tvw, ceiling, sup_norm(model, end), K * math.sqrt(eta), ole))
        half = scheme.x(m + 1, t1)
        current = restrict_pattern(end, -half, half)
    return TrapezoidReport(scheme, eta, Lip, levels, logs)


def _shift_source(source: Optional[SourceModel], t0: float) -> Optional[SourceModel]:
    if source is None or source.is_zero or t0 == 0:
        return source

    def g(t, x, u1, u2):
        return source.g(t + t0, x, u1, u2)

    return SourceModel(g, source.omega1, lambda t: source.omega2(np.asarray(t) + t0), source.T_star - t0,
                       source.x_dependent, source.t_dependent, source.is_zero, source.description,
                       source.omega1_support)


# ---------------------------------------------------------------------------
# Weak form and self-convergence
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TestFunction:
    """``phi(t, x) = psi(t) chi(x)`` with bump profiles in both variables."""

    t_center: float
    t_half: float
    x_center: float
    x_half: float

    def psi(self, t):
        s = (np.asarray(t, float) - self.t_center) / self.t_half
        return np.where(np.abs(s) < 1, (1 - s * s) ** 2, 0.0)

    def dpsi(self, t):
        s = (np.asarray(t, float) - self.t_center) / self.t_half
        return np.where(np.abs(s) < 1, -4 * s * (1 - s * s), 0.0) / self.t_half

    def chi(self, x):
        s = (np.asarray(x, float) - self.x_center) / self.x_half
        return np.where(np.abs(s) < 1, (1 - s * s) ** 2, 0.0)

    def Chi(self, x):
        """Antiderivative of ``chi`` vanishing at the left end of its support."""
        s = np.clip((np.asarray(x, float) - self.x_center) / self.x_half, -1.0, 1.0)
        return self.x_half * (s - 2 * s**3 / 3 + s**5 / 5 + 8.0 / 15.0)


def patterns_at(log, times: Sequence[float]) -> list:
    """Patterns at sorted ``times``, reconstructed in one pass over the log."""
    alive = {f.id: f for f in log.initial.fronts}
    left = log.initial.leftmost_state
    out = []
    k = 0
    ev = log.events
    for t in times:
        while k < len(ev) and ev[k].time <= t:
            e = ev[k]
            for f in e.incoming:
                alive.pop(f.id, None)
            for f in e.outgoing:
                alive[f.id] = f
            if e.kind == "splitting":
                left = e.leftmost_after
            k += 1
        fronts = sorted(alive.values(), key=lambda f: (kinematic_position(f, t), f.family, f.id))
        out.append(WavePattern(float(t), tuple(fronts), left))
    return out


def weak_residual(log, source: Optional[SourceModel], tests: Sequence[TestFunction], datum=None,
                  panels: int = 200, nodes: int = 3) -> np.ndarray:
    """``int int u phi_t + f(u) phi_x + g phi dx dt + int u0 phi(0) dx`` per test function.

    Returns an array of shape (len(tests), 2).  Time integrals use composite
    Gauss-Legendre; space integrals are exact for the transport terms and use
    cell midpoints for the source term.
    """
    model = log.model
    T = log.final.time
    gl, gw = np.polynomial.legendre.leggauss(nodes)
    edges = np.linspace(0.0, T, panels + 1)
    ts, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        ts.extend(a + (b - a) * (gl + 1) / 2)
        ws.extend((b - a) * gw / 2)
    ts = np.asarray(ts)
    ws = np.asarray(ws)
    pats = patterns_at(log, ts)
    res = np.zeros((len(tests), 2))
    for t, w, pat in zip(ts, ws, pats):
        pos = pat.positions()
        U = np.array(pat.states(), float).T
        F = model.flux(U)
        lo = np.concatenate([[-np.inf], pos])
        hi = np.concatenate([pos, [np.inf]])
        for k, tf in enumerate(tests):
            ps, dps = float(tf.psi(t)), float(tf.dpsi(t))
            if ps == 0.0 and dps == 0.0:
                continue
            dChi = tf.Chi(hi) - tf.Chi(lo)
            dchi = tf.chi(hi) - tf.chi(lo)
            res[k] += w * (dps * (U @ dChi) + ps * (F @ dchi))
            if source is not None and not source.is_zero:
                xa, xb = tf.x_center - tf.x_half, tf.x_center + tf.x_half
                xs = np.linspace(xa, xb, 101)
                xm = 0.5 * (xs[:-1] + xs[1:])
                idx = np.searchsorted(pos, xm, side="right")
                Um = U[:, idx]
                G = source(np.full(xm.shape, t), xm, Um)
                res[k] += w * ps * (G @ (tf.chi(xm) * (xs[1] - xs[0])))
    if datum is not None or log.initial is not None:
        pat0 = log.initial
        pos = pat0.positions()
        U = np.array(pat0.states(), float).T
        lo = np.concatenate([[-np.inf], pos])
        hi = np.concatenate([pos, [np.inf]])
        for k, tf in enumerate(tests):
            res[k] += float(tf.psi(0.0)) * (U @ (tf.Chi(hi) - tf.Chi(lo)))
    return res


def l1_distance(model_or_none, pa: WavePattern, pb: WavePattern, interval: tuple) -> float:
    """``int_I |u_a - u_b| dx`` (sum over components) for two patterns."""
    a, b = interval
    pts = np.unique(np.concatenate([[a, b], pa.positions(), pb.positions()]))
    pts = pts[(pts >= a) & (pts <= b)]
    mids = 0.5 * (pts[:-1] + pts[1:])
    Ua = pa.sample(mids)
    Ub = pb.sample(mids)
    return float(np.sum(np.abs(Ua - Ub).sum(axis=0) * np.diff(pts)))
