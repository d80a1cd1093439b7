"""Event-driven front tracking with operator splitting.

Between splitting times ``t_n = n * tau`` the approximate solution is a
finite set of straight fronts separating constant states.  The engine pops
the earliest collision of two adjacent fronts from a priority queue,
replaces the pair by the output of the Riemann solver, and at every
``t_n`` updates each constant state by ``u + tau * g_{n,j}(u)`` and
re-resolves every jump.

Fronts move with their analytic speed plus a tiny deterministic drift so
that no three fronts meet at one point and no collision coincides with a
splitting time.  The drift is stored on the front; the analytic speed is
never modified.
"""

from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import NonTermination, OutOfDomain, PreconditionError, ConfigError, FrontTrackError
from .model import FluxModel, SourceModel, State, max_speed
from .riemann import Front, solve_riemann, to_coords
from .source import DiscretizedSource

log = logging.getLogger(__name__)

_MASK64 = (1 << 64) - 1


def _mix(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def drift_for(front_id: int, seed: int, scale: float) -> float:
    """Deterministic offset in ``[-scale, scale]`` derived from the front id."""
    h = _mix(_mix(seed & _MASK64) ^ (front_id & _MASK64))
    return scale * (2.0 * (h / _MASK64) - 1.0)


@dataclass(frozen=True)
class RunConfig:
    epsilon: float
    tau: float
    T: float
    speed_perturbation_scale: Optional[float] = None
    seed: int = 0
    event_cap: int = 10_000_000
    quad_nodes: int = 4

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")
        if not (0 < self.tau <= self.epsilon):
            raise ConfigError("tau must satisfy 0 < tau <= epsilon")
        if not self.T >= 0:
            raise ConfigError("horizon must be non-negative")

    @property
    def perturbation(self) -> float:
        if self.speed_perturbation_scale is None:
            return 1e-9 * self.epsilon
        return float(self.speed_perturbation_scale)

    @property
    def n_steps(self) -> int:
        return int(math.floor(self.T / self.tau + 1e-9))

    def validate_for(self, model: FluxModel, source: Optional[SourceModel] = None) -> None:
        lam_hat = max_speed(model)
        if not lam_hat * self.tau < self.epsilon:
            raise ConfigError(f"need max_speed * tau < epsilon, got {lam_hat * self.tau:.4g} >= {self.epsilon}")
        if source is not None and self.T > source.T_star:
            raise ConfigError("horizon exceeds the source's time horizon")


# ---------------------------------------------------------------------------
# Data
# ---------------------------------------------------------------------------


def kinematic_position(front: Front, t: float) -> float:
    return front.position + (front.speed + front.drift) * (t - front.t0)


@dataclass(frozen=True)
class WavePattern:
    """The piecewise-constant solution at one instant."""

    time: float
    fronts: tuple
    leftmost_state: State

    def positions(self) -> np.ndarray:
        return np.array([kinematic_position(f, self.time) for f in self.fronts])

    @property
    def rightmost_state(self) -> State:
        return self.fronts[-1].right if self.fronts else self.leftmost_state

    def states(self) -> list:
        return [self.leftmost_state] + [f.right for f in self.fronts]

    def pieces(self) -> list:
        """``(x_left, x_right, state)`` for every constant piece."""
        xs = [-math.inf] + list(self.positions()) + [math.inf]
        states = self.states()
        return [(xs[k], xs[k + 1], states[k]) for k in range(len(states))]

    def state_at(self, x: float, side: str = "left") -> State:
        """Value at ``x``; at a front the left limit unless ``side='right'``."""
        xs = self.positions()
        states = self.states()
        k = int(np.searchsorted(xs, x, side="left" if side == "left" else "right"))
        return states[k]

    def sample(self, xs) -> np.ndarray:
        xs = np.asarray(xs, float)
        pos = self.positions()
        states = np.array(self.states())
        idx = np.searchsorted(pos, xs, side="right")
        return states[idx].T

    def chain_residual(self) -> float:
        worst = 0.0
        for a, b in zip(self.fronts[:-1], self.fronts[1:]):
            worst = max(worst, abs(a.right[0] - b.left[0]), abs(a.right[1] - b.left[1]))
        if self.fronts:
            f0 = self.fronts[0]
            worst = max(worst, abs(f0.left[0] - self.leftmost_state[0]), abs(f0.left[1] - self.leftmost_state[1]))
        return worst

    def is_ordered(self) -> bool:
        pos = self.positions()
        return bool(np.all(np.diff(pos) >= 0))

    def integral(self, a: float, b: float) -> np.ndarray:
        """``int_a^b u dx`` of the piecewise-constant solution."""
        total = np.zeros(2)
        for lo, hi, st in self.pieces():
            lo_c, hi_c = max(lo, a), min(hi, b)
            if hi_c > lo_c:
                total += (hi_c - lo_c) * np.asarray(st)
        return total


@dataclass(frozen=True)
class Event:
    """One processed event together with its inputs and outputs."""

    kind: str  # "interaction" | "splitting"
    time: float
    position: Optional[float]
    incoming: tuple
    outgoing: tuple
    step: Optional[int] = None
    resolutions: tuple = ()
    index: int = 0

    @property
    def participants(self) -> tuple:
        return tuple(f.id for f in self.incoming)


@dataclass(frozen=True)
class JumpResolution:
    """How one jump was re-solved at a splitting step."""

    position: float
    old_front: Optional[int]
    old_family: Optional[int]
    old_strength: float
    new_strengths: tuple
    outgoing: tuple
    cell_boundary: bool


@dataclass
class EventLog:
    """Everything needed to replay and audit a run offline."""

    model: FluxModel
    config: RunConfig
    initial: WavePattern
    events: list = field(default_factory=list)
    final: Optional[WavePattern] = None
    dsource: Optional[DiscretizedSource] = None
    counters: dict = field(default_factory=lambda: {"single_fronts": 0, "fans": 0})

    def __len__(self):
        return len(self.events)

    def interactions(self):
        return [e for e in self.events if e.kind == "interaction"]

    def splittings(self):
        return [e for e in self.events if e.kind == "splitting"]

    def segments(self) -> dict:
        """``id -> (front, t_birth, t_death)`` over the whole run."""
        seg = {}
        end = self.final.time if self.final is not None else self.config.T
        for f in self.initial.fronts:
            seg[f.id] = [f, f.t0, end]
        for e in self.events:
            for f in e.incoming:
                if f.id in seg:
                    seg[f.id][2] = e.time
            for f in e.outgoing:
                seg[f.id] = [f, e.time, end]
        return {k: tuple(v) for k, v in seg.items()}

    def pattern_at(self, t: float) -> WavePattern:
        """Reconstruct the pattern at time ``t``, after all events at ``t``."""
        alive = {f.id: f for f in self.initial.fronts}
        left = self.initial.leftmost_state
        for e in self.events:
            if e.time > t:
                break
            for f in e.incoming:
                alive.pop(f.id, None)
            for f in e.outgoing:
                alive[f.id] = f
            if e.kind == "splitting":
                left = e.leftmost_after
        fronts = sorted(alive.values(), key=lambda f: (kinematic_position(f, t), f.family, f.speed, f.id))
        return WavePattern(t, tuple(fronts), left)

    def pattern_before(self, index: int) -> WavePattern:
        """Pattern just before event ``index`` (at that event's time)."""
        e = self.events[index]
        alive = {f.id: f for f in self.initial.fronts}
        left = self.initial.leftmost_state
        for prev in self.events[:index]:
            for f in prev.incoming:
                alive.pop(f.id, None)
            for f in prev.outgoing:
                alive[f.id] = f
            if prev.kind == "splitting":
                left = prev.leftmost_after
        t = e.time
        fronts = sorted(alive.values(), key=lambda f: (kinematic_position(f, t), f.family, f.speed, f.id))
        return WavePattern(t, tuple(fronts), left)


# Splitting events carry the updated far-left state.
@dataclass(frozen=True)
class SplittingEvent(Event):
    leftmost_after: State = State(0.0, 0.0)
    leftmost_before: State = State(0.0, 0.0)


# ---------------------------------------------------------------------------
# Initial data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PiecewiseConstantDatum:
    """``states[k]`` on ``(breaks[k-1], breaks[k])``; ``len(states) == len(breaks) + 1``."""

    breaks: tuple
    states: tuple

    def __post_init__(self):
        if len(self.states) != len(self.breaks) + 1:
            raise PreconditionError("need one more state than breakpoints")
        if any(b2 <= b1 for b1, b2 in zip(self.breaks[:-1], self.breaks[1:])):
            raise PreconditionError("breakpoints must increase")

    def __call__(self, x):
        x = np.asarray(x, float)
        idx = np.searchsorted(np.asarray(self.breaks, float), x, side="right")
        return np.asarray(self.states, float)[idx].T

    def total_variation(self) -> float:
        s = np.asarray(self.states, float)
        return float(np.sum(np.abs(np.diff(s, axis=0))))


def riemann_datum(u_l, u_r, x0: float = 0.0) -> PiecewiseConstantDatum:
    return PiecewiseConstantDatum((float(x0),), (State(*map(float, u_l)), State(*map(float, u_r))))


@dataclass(frozen=True)
class FunctionDatum:
    """A datum ``x -> (u1, u2)`` that is constant outside ``support``."""

    func: Callable
    support: tuple

    def __call__(self, x):
        return np.asarray(self.func(np.asarray(x, float)), float)


def sample_datum(datum, epsilon: float) -> PiecewiseConstantDatum:
    """Piecewise-constant approximation on the ``eps`` grid.

    Piecewise-constant data are used as they are.  Other data are sampled at
    cell midpoints inside the support, which never increases the total
    variation.
    """
    if isinstance(datum, PiecewiseConstantDatum):
        return datum
    a, b = datum.support
    j0 = int(math.floor(a / epsilon))
    j1 = int(math.ceil(b / epsilon))
    edges = np.arange(j0, j1 + 1) * epsilon
    mids = 0.5 * (edges[:-1] + edges[1:])
    vals = datum(mids).T
    left = datum(np.array([a - 1.0])).T[0]
    right = datum(np.array([b + 1.0])).T[0]
    all_states = [left] + list(vals) + [right]
    breaks = list(edges)
    # merge equal neighbours
    states_out = [State(*map(float, all_states[0]))]
    breaks_out = []
    for x, st in zip(breaks, all_states[1:]):
        st = State(*map(float, st))
        if st != states_out[-1]:
            breaks_out.append(float(x))
            states_out.append(st)
    return PiecewiseConstantDatum(tuple(breaks_out), tuple(states_out))


# ---------------------------------------------------------------------------
# Engine
# ---------------------------------------------------------------------------


class FrontTracker:
    """Front-tracking engine for one model, source and configuration."""

    def __init__(self, model: FluxModel, source: Optional[SourceModel], config: RunConfig,
                 source_support=None, check_config: bool = True):
        self.model = model
        self.source = source if source is not None else SourceModel.zero()
        self.config = config
        if check_config:
            config.validate_for(model, self.source)
        self.dsource = DiscretizedSource(self.source, config.epsilon, config.tau, config.T,
                                         support=source_support, nodes=config.quad_nodes)
        self._next_id = 0
        self._scale = config.perturbation

    # -- front bookkeeping -------------------------------------------------
    def _register(self, front: Front) -> Front:
        fid = self._next_id
        self._next_id += 1
        return replace(front, id=fid, drift=drift_for(fid, self.config.seed, self._scale))

    def _resolve(self, u_l, u_r, x, t, single_front=(False, False), generations=(1, 1), counters=None):
        fan = solve_riemann(self.model, u_l, u_r, self.config.epsilon, x0=x, t0=t,
                            single_front=single_front, generations=generations)
        if counters is not None:
            for fam in (1, 2):
                fams = [f for f in fan.fronts if f.family == fam and f.strength > 0]
                if single_front[fam - 1] and len(fams) == 1:
                    counters["single_fronts"] += 1
                elif fams:
                    counters["fans"] += 1
        return fan, [self._register(f) for f in fan.fronts]

    # -- initialization ----------------------------------------------------
    def init_approximation(self, datum) -> WavePattern:
        pc = sample_datum(datum, self.config.epsilon)
        for st in pc.states:
            if not self.model.in_ball(st):
                raise OutOfDomain(f"initial state {st} outside B(0, {self.model.r})")
        fronts = []
        for x, ul, ur in zip(pc.breaks, pc.states[:-1], pc.states[1:]):
            _, new = self._resolve(ul, ur, float(x), 0.0)
            fronts.extend(new)
        return WavePattern(0.0, tuple(fronts), pc.states[0])

    # -- scheduling --------------------------------------------------------
    @staticmethod
    def collision_time(a: Front, b: Front, t_now: float) -> float:
        sa = a.speed + a.drift
        sb = b.speed + b.drift
        if sa <= sb:
            return math.inf
        gap = kinematic_position(b, t_now) - kinematic_position(a, t_now)
        return t_now + max(gap, 0.0) / (sa - sb)

    def next_event(self, pattern: WavePattern, n_next: int):
        """Earliest collision or splitting step: ``(kind, time, payload)``."""
        t_split = n_next * self.config.tau if n_next <= self.config.n_steps else math.inf
        best = (math.inf, None)
        fr = pattern.fronts
        for k in range(len(fr) - 1):
            tc = self.collision_time(fr[k], fr[k + 1], pattern.time)
            if tc < best[0]:
                best = (tc, k)
        if best[0] < t_split and best[0] <= self.config.T:
            return "interaction", best[0], best[1]
        if t_split <= self.config.T:
            return "splitting", t_split, n_next
        return "end", self.config.T, None

    # -- event resolution --------------------------------------------------
    def resolve_interaction(self, a: Front, b: Front, t: float, counters=None):
        """Outgoing fronts for the collision of adjacent fronts ``a`` (left), ``b``."""
        x = 0.5 * (kinematic_position(a, t) + kinematic_position(b, t))
        single = tuple(any(f.family == fam and f.strength > 0 for f in (a, b)) for fam in (1, 2))
        gens = []
        gmax = max(a.generation, b.generation)
        for fam in (1, 2):
            present = [f.generation for f in (a, b) if f.family == fam]
            gens.append(min(present) if present else gmax + 1)
        _, new = self._resolve(a.left, b.right, x, t, single, tuple(gens), counters)
        return x, new

    def apply_splitting_step(self, pattern: WavePattern, n: int, counters=None):
        """Source update at ``t_n`` followed by re-resolution of every jump."""
        t = n * self.config.tau
        ds = self.dsource
        eps = self.config.epsilon
        tau = self.config.tau
        fronts = list(pattern.fronts)
        pos = [kinematic_position(f, t) for f in fronts]
        states = [pattern.leftmost_state] + [f.right for f in fronts]

        # breakpoints: fronts, plus cell boundaries where g may vary in x
        bounds = []
        if self.source.x_dependent and not self.source.is_zero:
            support = ds.support
            if support is None:
                raise PreconditionError("an x-dependent source needs the support of omega1")
            j0 = ds.cell_index(support[0])
            j1 = ds.cell_index(support[1]) + 1
            bounds = [j * eps for j in range(j0, j1 + 1)]

        # assemble the ordered list of jump locations (front jumps and cell boundaries)
        jumps = []  # (x, front or None)
        bi = 0
        for f, x in zip(fronts, pos):
            while bi < len(bounds) and bounds[bi] < x:
                jumps.append((bounds[bi], None))
                bi += 1
            if bi < len(bounds) and abs(bounds[bi] - x) <= 1e-9 * eps:
                bi += 1
            jumps.append((x, f))
        while bi < len(bounds):
            jumps.append((bounds[bi], None))
            bi += 1

        # state on each sub-piece, updated by the source
        piece_states = []
        k = 0
        for idx in range(len(jumps) + 1):
            piece_states.append(states[k])
            if idx < len(jumps) and jumps[idx][1] is not None:
                k += 1
        xs = [j[0] for j in jumps]
        mids = []
        for idx in range(len(piece_states)):
            lo = xs[idx - 1] if idx > 0 else -math.inf
            hi = xs[idx] if idx < len(xs) else math.inf
            if math.isinf(lo) and math.isinf(hi):
                mids.append(0.0)
            elif math.isinf(lo):
                mids.append(hi - 0.5 * eps)
            elif math.isinf(hi):
                mids.append(lo + 0.5 * eps)
            else:
                mids.append(0.5 * (lo + hi))
        if self.source.is_zero:
            new_states = list(piece_states)
        else:
            U = np.array(piece_states, float).T
            cells = [ds.cell_index(m) for m in mids]
            UN = U + tau * ds.g_cells(n, cells, U)
            r2 = self.model.r ** 2
            bad = np.nonzero(UN[0] ** 2 + UN[1] ** 2 >= r2)[0]
            if bad.size:
                u = U[:, bad[0]]
                raise OutOfDomain(f"splitting step {n} moves {tuple(u)} out of B(0, {self.model.r})")
            new_states = [State(a, b) for a, b in zip(UN[0].tolist(), UN[1].tolist())]

        # collapse coincident jumps (zero-length pieces)
        # Jumps closer than the drift scale are one jump in all but round-off.
        merge_tol = 1e-9 * eps
        merged = []  # (x, [fronts], left_idx, right_idx)
        for idx, (x, f) in enumerate(jumps):
            if merged and x - merged[-1][0] <= merge_tol:
                merged[-1][1].append(f)
                merged[-1][3] = idx + 1
            else:
                merged.append([x, [f], idx, idx + 1])

        out = []
        resolutions = []
        for x, olds, li, ri in merged:
            ul = new_states[li]
            ur = new_states[ri]
            olds_f = [f for f in olds if f is not None]
            single = tuple(any(f.family == fam and f.strength > 0 for f in olds_f) for fam in (1, 2))
            if olds_f:
                gmax = max(f.generation for f in olds_f)
                gens = []
                for fam in (1, 2):
                    present = [f.generation for f in olds_f if f.family == fam]
                    gens.append(min(present) if present else gmax + 1)
                gens = tuple(gens)
            else:
                gens = (1, 1)
            if ul == ur:
                new = []
                sig = (0.0, 0.0)
            elif len(olds) == 1 and len(olds_f) == 1 and ul == olds_f[0].left and ur == olds_f[0].right:
                # Untouched jump: the Riemann solution is the front itself.
                f0 = olds_f[0]
                new = [self._register(f0.with_(position=x, t0=t))]
                sig = (f0.strength, 0.0) if f0.family == 1 else (0.0, f0.strength)
                if counters is not None and f0.strength > 0:
                    counters["single_fronts"] += 1
            else:
                fan, new = self._resolve(ul, ur, x, t, single, gens, counters)
                sig = fan.sigma
            out.extend(new)
            old = olds_f[0] if len(olds_f) == 1 else None
            resolutions.append(JumpResolution(
                position=x,
                old_front=old.id if old is not None else None,
                old_family=old.family if old is not None else None,
                old_strength=old.strength if old is not None else (sum(f.strength for f in olds_f) if olds_f else 0.0),
                new_strengths=tuple(sig),
                outgoing=tuple(f.id for f in new),
                cell_boundary=any(f is None for f in olds),
            ))
        after = WavePattern(t, tuple(out), new_states[0])
        return after, tuple(resolutions)

    # -- main loop ---------------------------------------------------------
    def run(self, datum_or_pattern, monitors: Sequence = (), record: bool = True) -> EventLog:
        """Track until the horizon, invoking ``monitor(before, after, event)``."""
        if isinstance(datum_or_pattern, WavePattern):
            pattern = datum_or_pattern
        else:
            pattern = self.init_approximation(datum_or_pattern)
        runlog = EventLog(self.model, self.config, pattern, dsource=self.dsource)
        for m in monitors:
            if hasattr(m, "start"):
                m.start(pattern, runlog)
        n_next = 1
        while n_next <= self.config.n_steps and n_next * self.config.tau <= pattern.time + 1e-15:
            n_next += 1
        fronts = list(pattern.fronts)
        t = pattern.time
        left_state = pattern.leftmost_state
        heap = []
        alive = {f.id: f for f in fronts}
        nxt = {}
        prv = {}
        order = [f.id for f in fronts]
        for a, b in zip(order[:-1], order[1:]):
            nxt[a] = b
            prv[b] = a
        head = order[0] if order else None
        counter = 0

        def schedule(aid, bid, now):
            nonlocal counter
            tc = self.collision_time(alive[aid], alive[bid], now)
            if tc < math.inf:
                counter += 1
                heapq.heappush(heap, (tc, counter, aid, bid))

        for a, b in zip(order[:-1], order[1:]):
            schedule(a, b, t)

        def current_pattern(now):
            ids = []
            cur = head
            while cur is not None:
                ids.append(alive[cur])
                cur = nxt.get(cur)
            return WavePattern(now, tuple(ids), left_state)

        n_events = 0
        try:
            while True:
                while heap and not (heap[0][2] in alive and heap[0][3] in alive and nxt.get(heap[0][2]) == heap[0][3]):
                    heapq.heappop(heap)
                t_int = heap[0][0] if heap else math.inf
                t_split = n_next * self.config.tau if n_next <= self.config.n_steps else math.inf
                if min(t_int, t_split) > self.config.T:
                    break
                n_events += 1
                if n_events > self.config.event_cap:
                    runlog.final = current_pattern(t)
                    raise NonTermination(f"event cap {self.config.event_cap} exceeded at t={t:.6g}",
                                         log=runlog, pattern=runlog.final)
                if t_int < t_split:
                    tc, _, aid, bid = heapq.heappop(heap)
                    t_ev = max(tc, t)
                    before = current_pattern(t_ev) if monitors else None
                    a, b = alive[aid], alive[bid]
                    x, new = self.resolve_interaction(a, b, t_ev, runlog.counters)
                    lft = prv.get(aid)
                    rgt = nxt.get(bid)
                    for fid in (aid, bid):
                        del alive[fid]
                        nxt.pop(fid, None)
                        prv.pop(fid, None)
                    ids = [f.id for f in new]
                    for f in new:
                        alive[f.id] = f
                    chain = ([lft] if lft is not None else []) + ids + ([rgt] if rgt is not None else [])
                    if lft is None:
                        head = ids[0] if ids else rgt
                    for p, q in zip(chain[:-1], chain[1:]):
                        nxt[p] = q
                        prv[q] = p
                    if rgt is not None and not ids and lft is None:
                        prv.pop(rgt, None)
                    if lft is not None and not ids and rgt is None:
                        nxt.pop(lft, None)
                    for p, q in zip(chain[:-1], chain[1:]):
                        schedule(p, q, t_ev)
                    t = t_ev
                    ev = Event("interaction", t, x, (a, b), tuple(new), index=len(runlog.events))
                else:
                    t = t_split
                    before = current_pattern(t)
                    after, res = self.apply_splitting_step(before, n_next, runlog.counters)
                    ev = SplittingEvent("splitting", t, None, before.fronts, after.fronts, step=n_next,
                                        resolutions=res, index=len(runlog.events),
                                        leftmost_after=after.leftmost_state,
                                        leftmost_before=before.leftmost_state)
                    n_next += 1
                    left_state = after.leftmost_state
                    alive = {f.id: f for f in after.fronts}
                    order = [f.id for f in after.fronts]
                    nxt, prv = {}, {}
                    for p, q in zip(order[:-1], order[1:]):
                        nxt[p] = q
                        prv[q] = p
                    head = order[0] if order else None
                    heap = []
                    for p, q in zip(order[:-1], order[1:]):
                        schedule(p, q, t)
                if record:
                    runlog.events.append(ev)
                if monitors:
                    after_p = current_pattern(t)
                    for m in monitors:
                        m(before, after_p, ev)
            runlog.final = current_pattern(self.config.T if self.config.T >= t else t)
        except FrontTrackError as exc:
            if runlog.final is None:
                runlog.final = current_pattern(t)
            if getattr(exc, "log", None) is None:
                exc.log = runlog
            raise
        for m in monitors:
            if hasattr(m, "finish"):
                m.finish(runlog)
        return runlog


def run(model: FluxModel, datum, source: Optional[SourceModel], config: RunConfig, monitors: Sequence = (),
        source_support=None, check_config: bool = True) -> EventLog:
    """Convenience wrapper: build a tracker and run it."""
    tracker = FrontTracker(model, source, config, source_support=source_support, check_config=check_config)
    return tracker.run(datum, monitors)
