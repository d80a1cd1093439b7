"""Glimm-type functionals, their per-event audits and the interaction measure.

Notation used in this module:

* ``V`` total strength, ``Q`` interaction potential over approaching pairs,
* ``Qhat`` the potential plus a reservoir for future source action,
* ``W`` the remaining source budget, ``Upsilon = V + Qhat``,
* ``Theta_i`` the weighted invariant along a minimal backward characteristic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .riemann import Front, blended_curve, solve_strengths, to_coords, to_state
from .source import DiscretizedSource


@dataclass(frozen=True)
class FunctionalConfig:
    """Weights of the functionals.

    ``from_calibration`` derives every weight from a single calibrated
    constant ``C3``, a total-variation ceiling ``M1`` and the sup of the
    initial invariants.
    """

    K: float
    R: float
    A: float
    A0: float
    Atilde: float
    M1: float = 1.0
    eta: float = 0.0
    C3: float = 0.0
    C1: float = 0.0
    vbar_sup: float = 0.0

    @classmethod
    def from_calibration(cls, C3: float, M1: float, vbar_sup: float, C1: Optional[float] = None,
                         eta: float = 0.0) -> "FunctionalConfig":
        return cls(
            K=8.0 * C3 * M1 * vbar_sup,
            R=4.0 * C3,
            A=4.0 * C3 * M1**2 * vbar_sup**2,
            A0=2.0 * C3,
            Atilde=4.0 * C3 * M1**2 * vbar_sup**2,
            M1=M1,
            eta=eta,
            C3=C3,
            C1=C3 if C1 is None else C1,
            vbar_sup=vbar_sup,
        )

    def hypotheses(self, V: float, vsup: float, omega1_norm: float, omega2_tail: float) -> dict:
        """Side conditions under which the per-event inequalities are proved."""
        C1, C3 = self.C1, self.C3
        return {
            "K>=8RC1|v|W": self.K >= 8 * self.R * C1 * vsup * omega2_tail,
            "R>=4KC3(V+2|w1|)": self.R >= 4 * self.K * C3 * (V + 2 * omega1_norm),
            "C3|w2|<=1/4": C3 * omega2_tail <= 0.25,
            "|v|<=1/(4C3M1)": vsup <= 1.0 / (4 * C3 * self.M1) if C3 > 0 else True,
        }


def strengths(pattern) -> np.ndarray:
    return np.array([f.strength for f in pattern.fronts], float)


def compute_V(pattern) -> float:
    return float(sum(abs(f.strength) for f in pattern.fronts))


def approaching_sum(fronts: Sequence[Front]) -> float:
    """``sum |s s'|`` over approaching pairs, in linear time.

    Two fronts approach when a 2-front lies left of a 1-front, or when they
    belong to the same family and at least one of them is a shock.
    """
    total = 0.0
    seen_2 = 0.0
    for f in fronts:
        if f.family == 2:
            seen_2 += abs(f.strength)
        else:
            total += abs(f.strength) * seen_2
    for fam in (1, 2):
        s = [f.strength for f in fronts if f.family == fam]
        if len(s) < 2:
            continue
        a = np.abs(np.asarray(s))
        pos = a[np.asarray(s) >= 0]
        all_pairs = 0.5 * (a.sum() ** 2 - np.dot(a, a))
        pos_pairs = 0.5 * (pos.sum() ** 2 - np.dot(pos, pos))
        total += all_pairs - pos_pairs
    return float(total)


def is_approaching(left: Front, right: Front) -> bool:
    if left.family != right.family:
        return left.family == 2 and right.family == 1
    return left.strength < 0 or right.strength < 0


def compute_Q(pattern, config: FunctionalConfig) -> float:
    return config.K * approaching_sum(pattern.fronts)


def compute_W(dsource: Optional[DiscretizedSource], t: float, after_step: bool = False) -> float:
    if dsource is None:
        return 0.0
    return dsource.tail_at(t, after_step=after_step)


def compute_Qhat(pattern, dsource: Optional[DiscretizedSource], config: FunctionalConfig,
                 after_step: bool = False, W: Optional[float] = None) -> float:
    if W is None:
        W = compute_W(dsource, pattern.time, after_step)
    w1 = dsource.omega1_norm if dsource is not None else 0.0
    return compute_Q(pattern, config) + config.R * (compute_V(pattern) + w1) * W


def compute_Qtilde(pattern, family: int, y: float) -> float:
    """Transverse strength on the upstream side of the characteristic.

    For family 1 this sums 2-fronts strictly left of ``y``; for family 2 the
    1-fronts strictly right of ``y``.
    """
    total = 0.0
    t = pattern.time
    for f in pattern.fronts:
        x = f.position + (f.speed + f.drift) * (t - f.t0)
        if family == 1 and f.family == 2 and x < y:
            total += abs(f.strength)
        elif family == 2 and f.family == 1 and x > y:
            total += abs(f.strength)
    return total


def invariant_at(model, pattern, y: float, family: int) -> float:
    """``v_i`` at ``y`` with the left-limit convention."""
    st = pattern.state_at(y, side="left")
    return float(model.invariants.forward(np.asarray(st))[family - 1])


def compute_Theta(model, pattern, family: int, y: float, dsource, config: FunctionalConfig,
                  after_step: bool = False, Qhat: Optional[float] = None, W: Optional[float] = None,
                  v_value: Optional[float] = None) -> float:
    if W is None:
        W = compute_W(dsource, pattern.time, after_step)
    if Qhat is None:
        Qhat = compute_Qhat(pattern, dsource, config, after_step, W=W)
    if v_value is None:
        v_value = invariant_at(model, pattern, y, family)
    Qt = compute_Qtilde(pattern, family, y)
    return (abs(v_value) + config.vbar_sup + config.A0 * W) * math.exp(config.Atilde * Qt + config.A * Qhat)


@dataclass(frozen=True)
class FunctionalSnapshot:
    time: float
    V: float
    Q: float
    Qhat: float
    Upsilon: float
    W: float
    Theta: tuple = (math.nan, math.nan)
    Qtilde: tuple = (math.nan, math.nan)
    muIC_total: float = 0.0


def snapshot(pattern, dsource, config: FunctionalConfig, after_step: bool = False,
             muIC_total: float = 0.0) -> FunctionalSnapshot:
    W = compute_W(dsource, pattern.time, after_step)
    V = compute_V(pattern)
    Q = compute_Q(pattern, config)
    w1 = dsource.omega1_norm if dsource is not None else 0.0
    Qhat = Q + config.R * (V + w1) * W
    return FunctionalSnapshot(pattern.time, V, Q, Qhat, V + Qhat, W, muIC_total=muIC_total)


@dataclass(frozen=True)
class EstimateAudit:
    """One inequality ``lhs <= rhs`` checked at one event."""

    name: str
    event_index: int
    time: float
    lhs: float
    rhs: float
    passed: bool
    note: str = ""

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs


def _tol(value: float) -> float:
    return 1e-12 * (1.0 + abs(value))


def outgoing_by_family(fronts) -> tuple:
    s = [0.0, 0.0]
    for f in fronts:
        s[f.family - 1] += f.strength
    return tuple(s)


def cubic_interaction_terms(event) -> Optional[tuple]:
    """Left side of the interaction law and the product ``|s's''|(|s'|+|s''|)``."""
    if event.kind != "interaction" or len(event.incoming) != 2:
        return None
    a, b = event.incoming
    out = outgoing_by_family(event.outgoing)
    prod = abs(a.strength * b.strength) * (abs(a.strength) + abs(b.strength))
    if a.family != b.family:
        inc = [0.0, 0.0]
        inc[a.family - 1] += a.strength
        inc[b.family - 1] += b.strength
        lhs = abs(out[0] - inc[0]) + abs(out[1] - inc[1])
    else:
        i = a.family - 1
        lhs = abs(out[i] - (a.strength + b.strength)) + abs(out[1 - i])
    return lhs, prod


def monitor_event(before: FunctionalSnapshot, after: FunctionalSnapshot, event, config: FunctionalConfig,
                  dsource: Optional[DiscretizedSource] = None, C1: Optional[float] = None,
                  V_before: Optional[float] = None) -> list:
    """Audits (a) to (c) and (e) for one event; see :class:`EstimateAudit`."""
    audits = []
    idx = getattr(event, "index", 0)
    t = event.time
    dU = after.Upsilon - before.Upsilon
    audits.append(EstimateAudit("upsilon", idx, t, dU, _tol(before.Upsilon), dU <= _tol(before.Upsilon)))
    dQh = after.Qhat - before.Qhat
    if event.kind == "interaction":
        a, b = event.incoming
        prod = abs(a.strength * b.strength)
        if is_approaching(a, b):
            rhs = -config.K / 4 * prod + _tol(before.Qhat)
            audits.append(EstimateAudit("qhat_interaction", idx, t, dQh, rhs, dQh <= rhs))
        else:
            audits.append(EstimateAudit("qhat_interaction", idx, t, dQh, _tol(before.Qhat),
                                        dQh <= _tol(before.Qhat), note="non-approaching pair"))
        if C1 is not None:
            terms = cubic_interaction_terms(event)
            if terms is not None:
                lhs, cube = terms
                # absolute slack at the tolerance of the middle-state solve
                rhs = C1 * cube + 1e-12
                audits.append(EstimateAudit("cubic_interaction", idx, t, lhs, rhs, lhs <= rhs))
    elif event.kind == "splitting" and dsource is not None:
        n = event.step
        w2 = dsource.omega2_step(n)
        V0 = before.V if V_before is None else V_before
        rhs = -config.R / 2 * (V0 + dsource.omega1_norm) * dsource.tau * w2 + _tol(before.Qhat)
        audits.append(EstimateAudit("qhat_splitting", idx, t, dQh, rhs, dQh <= rhs))
        dW = after.W - before.W
        expected = -dsource.tau * w2
        ok = abs(dW - expected) <= 1e-12 * (1 + abs(before.W))
        audits.append(EstimateAudit("w_telescopes", idx, t, abs(dW - expected), 1e-12 * (1 + abs(before.W)), ok))
    return audits


class FunctionalMonitor:
    """Tracker monitor computing snapshots and audits after each event."""

    def __init__(self, config: FunctionalConfig, dsource: Optional[DiscretizedSource] = None,
                 C1: Optional[float] = None, keep_snapshots: bool = True):
        self.config = config
        self.dsource = dsource
        self.C1 = C1
        self.snapshots = []
        self.audits = []
        self.keep = keep_snapshots

    def start(self, pattern, runlog):
        if self.dsource is None:
            self.dsource = runlog.dsource
        self.snapshots.append(snapshot(pattern, self.dsource, self.config))

    def __call__(self, before_pattern, after_pattern, event):
        split = event.kind == "splitting"
        before = snapshot(before_pattern, self.dsource, self.config, after_step=False)
        after = snapshot(after_pattern, self.dsource, self.config, after_step=split)
        self.audits.extend(monitor_event(before, after, event, self.config, self.dsource, self.C1))
        if self.keep:
            self.snapshots.append(after)

    def failures(self, name: Optional[str] = None) -> list:
        return [a for a in self.audits if not a.passed and (name is None or a.name == name)]

    def summary(self) -> dict:
        out = {}
        for a in self.audits:
            rec = out.setdefault(a.name, {"checked": 0, "failed": 0, "worst_margin": math.inf})
            rec["checked"] += 1
            rec["failed"] += int(not a.passed)
            rec["worst_margin"] = min(rec["worst_margin"], a.margin)
        return out


# ---------------------------------------------------------------------------
# Interaction-and-cancellation measure
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Atom:
    time: float
    position: float
    mass: float
    kind: str


def interaction_atom(a: Front, b: Front) -> float:
    mass = abs(a.strength * b.strength)
    if a.family == b.family:
        mass += abs(a.strength) + abs(b.strength) - abs(a.strength + b.strength)
    return mass


def accumulate_muIC(runlog, grid_tol: float = 1e-12) -> list:
    """Atoms of the interaction-and-cancellation measure of a finished run."""
    atoms = []
    ds = runlog.dsource
    for e in runlog.events:
        if e.kind == "interaction":
            a, b = e.incoming
            atoms.append(Atom(e.time, e.position, interaction_atom(a, b), "interaction"))
        elif e.kind == "splitting" and ds is not None:
            coef = ds.tau * ds.omega2_step(e.step)
            if coef == 0.0:
                continue
            eps = ds.epsilon
            for f in e.incoming:
                x = f.position + (f.speed + f.drift) * (e.time - f.t0)
                j = round(x / eps)
                on_grid = abs(x - j * eps) <= grid_tol * (1 + abs(x))
                extra = eps * ds.omega1_cell(j) if on_grid else 0.0
                atoms.append(Atom(e.time, x, coef * (abs(f.strength) + extra), "splitting"))
            if not ds.source.is_zero and ds.support is not None:
                occupied = set()
                for f in e.incoming:
                    x = f.position + (f.speed + f.drift) * (e.time - f.t0)
                    j = round(x / eps)
                    if abs(x - j * eps) <= grid_tol * (1 + abs(x)):
                        occupied.add(j)
                for j in sorted(ds.omega1_cells()):
                    if j not in occupied:
                        atoms.append(Atom(e.time, j * eps, coef * eps * ds.omega1_cell(j), "splitting"))
    return atoms


def muIC_total(runlog) -> float:
    return float(sum(a.mass for a in accumulate_muIC(runlog)))


# ---------------------------------------------------------------------------
# Isolated probes of the two elementary perturbation laws
# ---------------------------------------------------------------------------


def interaction_defect(model, left: tuple, right: tuple, v_left=(0.0, 0.0), eps: float = 1e-10) -> tuple:
    """Outcome of two adjacent waves, each given as ``(family, sigma)``.

    The waves are laid down on exact wave curves (``eps`` small enough that no
    blending happens) and the outer Riemann problem is re-solved.  Returns
    ``(lhs, prod)`` in the same form as :func:`cubic_interaction_terms`.
    """
    (fa, sa), (fb, sb) = left, right
    vl = np.asarray(v_left, float)
    vm = np.asarray(blended_curve(model, fa, sa, vl, eps, check=False))
    vr = np.asarray(blended_curve(model, fb, sb, vm, eps, check=False))
    out = solve_strengths(model, vl, vr, eps)
    prod = abs(sa * sb) * (abs(sa) + abs(sb))
    if fa != fb:
        inc = [0.0, 0.0]
        inc[fa - 1] += sa
        inc[fb - 1] += sb
        lhs = abs(out[0] - inc[0]) + abs(out[1] - inc[1])
    else:
        i = fa - 1
        lhs = abs(out[i] - (sa + sb)) + abs(out[1 - i])
    return float(lhs), float(prod)


def step_perturbation(model, source, family: int, sigma: float, tau: float, t: float = 0.0, x: float = 0.0,
                      v_left=(0.0, 0.0), eps: float = 1e-10) -> float:
    """``|sigma_hat - sigma|`` for one front after one explicit source step of size ``tau``."""
    vl = np.asarray(v_left, float)
    vr = np.asarray(blended_curve(model, family, sigma, vl, eps, check=False))
    ul = np.asarray(to_state(model, vl), float)
    ur = np.asarray(to_state(model, vr), float)
    ul2 = ul + tau * np.asarray(source(t, x, ul), float)
    ur2 = ur + tau * np.asarray(source(t, x, ur), float)
    sig = solve_strengths(model, np.asarray(to_coords(model, ul2)), np.asarray(to_coords(model, ur2)), eps)
    return float(abs(sig[family - 1] - sigma))
