"""Shock structure of a finished run.

A theta-shock of family i is a chain of family-i shock fronts, each of
strength at most -theta/2 and at least one at most -theta, joined end to end
at interaction points or splitting points.  When two such shocks merge, the
chain continues only along the faster incoming one.  Chains are extracted
as maximal paths of the resulting successor graph, which is a forest, so
maximality under inclusion is the same as not being extendable at either end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import PreconditionError
from .functionals import FunctionalConfig, accumulate_muIC, compute_Qhat, compute_V
from .riemann import Front


@dataclass(frozen=True)
class ShockPolyline:
    """Polygonal line in the (t, x) plane traced by a chain of shock fronts."""

    family: int
    nodes: tuple          # ((s_k, z_k), ...), times strictly increasing
    strengths: tuple      # one signed strength per segment
    front_ids: tuple      # one front id per segment
    maximal: bool = True

    @property
    def t_start(self) -> float:
        return self.nodes[0][0]

    @property
    def t_end(self) -> float:
        return self.nodes[-1][0]

    @property
    def peak(self) -> float:
        return max(abs(s) for s in self.strengths)

    def segment_index(self, t: float) -> int:
        times = [n[0] for n in self.nodes]
        if not times[0] <= t <= times[-1]:
            raise PreconditionError(f"t={t} outside [{times[0]}, {times[-1]}]")
        k = int(np.searchsorted(times, t, side="right")) - 1
        return min(max(k, 0), len(self.strengths) - 1)

    def position(self, t: float) -> float:
        k = self.segment_index(t)
        (s0, z0), (s1, z1) = self.nodes[k], self.nodes[k + 1]
        if s1 == s0:
            return z0
        return z0 + (z1 - z0) * (t - s0) / (s1 - s0)

    def series(self) -> list:
        """Node list annotated with the strength of the segment that leaves it."""
        out = []
        for k, (s, z) in enumerate(self.nodes):
            sigma = self.strengths[k] if k < len(self.strengths) else None
            out.append({"t": s, "x": z, "sigma": sigma})
        return out


def _qualifies(f: Front, family: int, theta: float) -> bool:
    return f.family == family and f.strength <= -0.5 * theta


def _successors(log, family: int, theta: float) -> dict:
    """``front id -> successor front`` for qualifying shocks, with the merge rule applied."""
    succ = {}
    for e in log.events:
        if e.kind == "interaction":
            inc = [f for f in e.incoming if _qualifies(f, family, theta)]
            if not inc:
                continue
            outs = [f for f in e.outgoing if _qualifies(f, family, theta)]
            if not outs:
                continue
            nxt = min(outs, key=lambda f: f.strength)
            # Two qualifying shocks merging: only the faster one carries on.
            carrier = max(inc, key=lambda f: (f.speed + f.drift, -f.id))
            succ[carrier.id] = nxt
        else:
            by_id = {f.id: f for f in e.outgoing}
            inc = [f for f in e.incoming if _qualifies(f, family, theta)]
            if not inc:
                continue
            tol = 2e-9 * log.config.epsilon
            for r in e.resolutions:
                # coincident jumps share one resolution, so match by position
                olds = [f for f in inc if abs(f.position + (f.speed + f.drift) * (e.time - f.t0) - r.position) <= tol]
                if not olds:
                    continue
                outs = [by_id[i] for i in r.outgoing if i in by_id and _qualifies(by_id[i], family, theta)]
                if outs:
                    carrier = max(olds, key=lambda f: (f.speed + f.drift, -f.id))
                    succ[carrier.id] = min(outs, key=lambda f: f.strength)
    return succ


def extract_theta_shocks(log, theta: float, family: Optional[int] = None) -> list:
    """All maximal theta-shocks of ``log`` (both families unless one is given)."""
    if not theta > 0:
        raise PreconditionError("theta must be positive")
    families = (1, 2) if family is None else (family,)
    segs = log.segments()
    out = []
    for fam in families:
        succ = _successors(log, fam, theta)
        has_pred = {f.id for f in succ.values()}
        starts = [fid for fid, (f, _, _) in segs.items() if _qualifies(f, fam, theta) and fid not in has_pred]
        starts.sort(key=lambda fid: (segs[fid][1], segs[fid][0].position))
        for fid in starts:
            chain = [fid]
            while chain[-1] in succ:
                chain.append(succ[chain[-1]].id)
            strengths = [segs[i][0].strength for i in chain]
            if min(strengths) > -theta:
                continue
            out.append(_polyline(fam, chain, segs))
    return out


def _polyline(family: int, chain: list, segs: dict) -> ShockPolyline:
    nodes, sig, ids = [], [], []
    for fid in chain:
        f, tb, td = segs[fid]
        x0 = f.position + (f.speed + f.drift) * (tb - f.t0)
        x1 = f.position + (f.speed + f.drift) * (td - f.t0)
        if not nodes:
            nodes.append((tb, x0))
        if td > nodes[-1][0]:
            nodes.append((td, x1))
            sig.append(f.strength)
            ids.append(fid)
    if not sig:
        # a chain made only of instantaneous fronts still records one segment
        f, tb, _ = segs[chain[0]]
        nodes.append(nodes[0])
        sig.append(f.strength)
        ids.append(chain[0])
    return ShockPolyline(family, tuple(nodes), tuple(sig), tuple(ids))


# ---------------------------------------------------------------------------
# Traces and the jump conditions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TraceLimits:
    time: float
    position: float
    family: int
    u_minus: np.ndarray
    u_plus: np.ndarray
    speed: float
    slope: float
    rh_residual: float
    lax_margin: float

    def lax_ok(self, tol: float = 1e-9) -> bool:
        return self.lax_margin >= -tol


def front_trace(model, front: Front, t: float) -> TraceLimits:
    """One-sided states, speed and jump-condition residuals of a shock front."""
    if not front.strength < 0:
        raise PreconditionError("traces are taken on shock fronts only")
    um = np.asarray(front.left, float)
    up = np.asarray(front.right, float)
    s = float(front.speed)
    res = float(np.max(np.abs(model.flux(up) - model.flux(um) - s * (up - um))))
    i = front.family - 1
    lam_m = float(model.eigenvalues(um)[i])
    lam_p = float(model.eigenvalues(up)[i])
    lax = min(s - lam_p, lam_m - s)
    x = front.position + (front.speed + front.drift) * (t - front.t0)
    return TraceLimits(t, x, front.family, um, up, s, s + front.drift, res, lax)


def trace_limits(log, polyline: ShockPolyline, t: float, node_tol: float = 1e-12) -> TraceLimits:
    """Traces of the approximate solution on both sides of ``polyline`` at ``t``.

    The residual uses the front's own speed; the tiny tie-breaking drift is
    reported separately in ``slope``.
    """
    for s, _ in polyline.nodes:
        if abs(t - s) <= node_tol * (1 + abs(s)):
            raise PreconditionError(f"t={t} is a node time of the polyline")
    k = polyline.segment_index(t)
    segs = log.segments()
    f = segs[polyline.front_ids[k]][0]
    return front_trace(log.model, f, t)


def segment_traces(log, polyline: ShockPolyline) -> list:
    """Traces at the midpoint of every segment of positive duration."""
    segs = log.segments()
    out = []
    for k, fid in enumerate(polyline.front_ids):
        s0, s1 = polyline.nodes[k][0], polyline.nodes[k + 1][0]
        if s1 > s0:
            out.append(front_trace(log.model, segs[fid][0], 0.5 * (s0 + s1)))
    return out


# ---------------------------------------------------------------------------
# Counting bound
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CountReport:
    theta: float
    count: int
    bound: float
    Qhat: float
    V: float
    c_star: float

    @property
    def passed(self) -> bool:
        return self.count <= self.bound


def count_bound(log, theta: float, config: FunctionalConfig, c_star: float,
                polylines: Optional[list] = None) -> CountReport:
    """Compare the number of maximal theta-shocks with the interaction budget.

    The budget uses the initial value of the weighted potential, which bounds
    every later value since the potential does not increase.
    """
    if polylines is None:
        polylines = extract_theta_shocks(log, theta)
    Qh = compute_Qhat(log.initial, log.dsource, config)
    V = compute_V(log.initial)
    bound = Qh / (c_star * config.K * theta ** 3) + 2.0 * V / theta
    return CountReport(theta, len(polylines), bound, Qh, V, c_star)


def c_star_ceiling(count: int, theta: float, Qhat: float, V: float, K: float) -> float:
    """Largest c* for which the counting bound holds on one observation."""
    excess = count - 2.0 * V / theta
    if excess <= 0:
        return math.inf
    return Qhat / (K * theta ** 3 * excess)


def chain_mass(log, polyline: ShockPolyline, theta: float, atoms: Optional[list] = None,
               tol: float = 1e-9) -> float:
    """Interaction and cancellation mass on the nodes a chain passes before it first reaches ``theta``.

    The starting node counts only when the chain starts after the initial time.
    """
    if atoms is None:
        atoms = accumulate_muIC(log)
    k_star = next(k for k, s in enumerate(polyline.strengths) if s <= -theta)
    first = 0 if polyline.t_start > log.initial.time else 1
    nodes = polyline.nodes[first:k_star + 1]
    slack = 2e-9 * log.config.epsilon
    total = 0.0
    for s, z in nodes:
        for a in atoms:
            if abs(a.time - s) <= tol * (1 + abs(s)) and abs(a.position - z) <= slack + tol * abs(z):
                total += a.mass
    return total


# ---------------------------------------------------------------------------
# Refinement studies
# ---------------------------------------------------------------------------


def polyline_distance(p: ShockPolyline, q: ShockPolyline, samples: int = 200) -> float:
    """Sup-norm distance of two chains on their common time window plus endpoint gaps."""
    a = max(p.t_start, q.t_start)
    b = min(p.t_end, q.t_end)
    gap = max(abs(p.t_start - q.t_start), abs(p.t_end - q.t_end))
    if b <= a:
        return math.inf
    ts = np.linspace(a, b, samples)
    return max(gap, max(abs(p.position(t) - q.position(t)) for t in ts))


def _match(prev: list, cur: list) -> list:
    """Pair chains of the same family in order of their starting point."""
    key = lambda p: (p.family, p.t_start, p.nodes[0][1])
    pairs = []
    for fam in (1, 2):
        a = sorted((p for p in prev if p.family == fam), key=key)
        b = sorted((p for p in cur if p.family == fam), key=key)
        pairs.extend(zip(a, b))
    return pairs


def fit_exponent(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of ``log y`` against ``log x``; nan if any value is non-positive."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if np.any(x <= 0) or np.any(y <= 0) or len(x) < 2:
        return math.nan
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


@dataclass
class RefinementStudy:
    thetas: tuple
    epsilons: tuple
    counts: dict = field(default_factory=dict)        # theta -> [N per eps]
    distances: dict = field(default_factory=dict)     # theta -> [distance per refinement]
    max_rh: list = field(default_factory=list)        # per eps, over all thetas
    min_lax: list = field(default_factory=list)
    polylines: dict = field(default_factory=dict)     # (theta, eps) -> list

    def stabilized(self, theta: float) -> bool:
        c = self.counts[theta]
        return len(c) >= 2 and c[-1] == c[-2]

    def rh_exponent(self) -> float:
        return fit_exponent(self.epsilons, self.max_rh)

    def distance_factors(self, theta: float) -> list:
        d = self.distances.get(theta, [])
        return [d[k] / d[k + 1] if d[k + 1] > 0 else math.inf for k in range(len(d) - 1)]


def theta_refinement_study(experiment: Callable, thetas: Sequence[float], epsilons: Sequence[float]) -> RefinementStudy:
    """Run ``experiment(eps)`` for each eps and track theta-shock counts and traces."""
    study = RefinementStudy(tuple(thetas), tuple(epsilons))
    prev = {}
    for eps in epsilons:
        log = experiment(eps)
        rh, lax = 0.0, math.inf
        for th in thetas:
            polys = extract_theta_shocks(log, th)
            study.polylines[(th, eps)] = polys
            study.counts.setdefault(th, []).append(len(polys))
            for p in polys:
                for tr in segment_traces(log, p):
                    rh = max(rh, tr.rh_residual)
                    lax = min(lax, tr.lax_margin)
            if th in prev:
                pairs = _match(prev[th], polys)
                d = max((polyline_distance(a, b) for a, b in pairs), default=0.0)
                study.distances.setdefault(th, []).append(d)
            prev[th] = polys
        study.max_rh.append(rh)
        study.min_lax.append(lax)
    return study
