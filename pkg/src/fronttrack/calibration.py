"""Empirical calibration of the constants used by the audits.

The estimates being audited hold with constants that are only known to
exist.  Each constant is fitted here on its own small suite of experiments,
multiplied by a safety factor and stored per model.  The suites are disjoint
from the acceptance experiments (different seeds and data), so an audit that
passes with calibrated constants is a real check rather than a restatement.

Constants and their suites:

``C1``  interaction defect over product of strengths, isolated wave pairs.
``C2``  one source step, change of a single front's strength over ``tau``.
``C3``  change of an invariant along minimal characteristics over its bare rate,
        the relative source-step rate and ``C1``.
``M``   sup of the invariants over their initial sup, smallness runs.
``K``   sup of the invariants over ``sqrt(eta)``, smallness runs.
``c1``  rarefaction fans: fan width over ``t * TV+``.
``calM`` excess of ``TV+`` over the fan term, normalized by the source term.
``calK`` one-sided excursion of the controlled component over ``eta``.
``C5``  growth of the controlling invariant over the accumulated source budget.
``Cp``  interval integrals of the invariants over ``eta * (l + Cpp * t)``.
``Cpp`` the maximal characteristic speed (not fitted).
``C_RH`` jump-condition residual of shock fronts over ``eps``.
``c_star`` interaction mass spent by a compressive chain before it reaches
        ``theta``, over ``4 theta^3``.
"""

from __future__ import annotations

import configparser
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .analysis import (
    interval_integral_audit,
    invariant_region_audit,
    invariant_region_setup,
    sup_norm,
    tv_plus,
)
from .characteristics import classify_crossings, minimal_backward
from .errors import NotApplicable
from .experiments import blended_shock_datum, random_small_datum, standard_source, to_states
from .functionals import (
    FunctionalConfig,
    accumulate_muIC,
    interaction_defect,
    step_perturbation,
)
from .model import FluxModel, SourceModel, build_model, max_speed
from .structure import chain_mass, extract_theta_shocks, segment_traces
from .tracker import PiecewiseConstantDatum, RunConfig, run

SAFETY = 2.0
AUDIT_TOL = 1e-12

CONSTANTS = ("C1", "C2", "C3", "M", "K", "c1", "calM", "calK", "C5", "Cp", "Cpp", "C_RH", "c_star")


@dataclass
class Calibration:
    """Calibrated constants of one model, with a note on each suite."""

    model: str
    params: dict
    constants: dict = field(default_factory=dict)
    suites: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> float:
        value = self.constants.get(name)
        if value is None:
            raise KeyError(f"constant {name!r} was not calibrated for model {self.model!r}")
        return value

    def get(self, name: str, default=None):
        v = self.constants.get(name)
        return default if v is None else v

    def functional_config(self, vbar_sup: float, eta: float = 0.0) -> FunctionalConfig:
        return FunctionalConfig.from_calibration(self["C3"], max(self["M"], 1.0), vbar_sup,
                                                 C1=self["C1"], eta=eta)

    # -- persistence -------------------------------------------------------
    def save(self, path) -> Path:
        cp = configparser.ConfigParser()
        cp.optionxform = str
        cp["model"] = {"name": self.model, "params": json.dumps(self.params, sort_keys=True)}
        cp["constants"] = {k: ("none" if v is None else repr(float(v))) for k, v in self.constants.items()}
        cp["suites"] = {k: v for k, v in self.suites.items()}
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as fh:
            cp.write(fh)
        return path

    @classmethod
    def load(cls, path) -> "Calibration":
        cp = configparser.ConfigParser()
        cp.optionxform = str
        if not cp.read(path):
            raise FileNotFoundError(path)
        consts = {k: (None if v == "none" else float(v)) for k, v in cp["constants"].items()}
        suites = dict(cp["suites"]) if cp.has_section("suites") else {}
        return cls(cp["model"]["name"], json.loads(cp["model"]["params"]), consts, suites)

    def model_instance(self) -> FluxModel:
        p = dict(self.params)
        name = p.pop("name", self.model)
        return build_model(name, **p)


def _fit(ratios) -> float:
    ratios = [float(r) for r in ratios if math.isfinite(r)]
    return SAFETY * max(ratios) if ratios else 0.0


# ---------------------------------------------------------------------------
# Individual suites
# ---------------------------------------------------------------------------


def fit_C1(model: FluxModel, strengths=(0.08, 0.04), v_left=(-0.01, 0.015)) -> float:
    pairs = (((2, -1.0), (1, -1.0)), ((1, -1.0), (1, -1.0)), ((1, -1.0), (1, 0.5)),
             ((2, -1.0), (2, -1.0)), ((2, -1.0), (2, 0.5)))
    ratios = []
    for (fa, a), (fb, b) in pairs:
        for s in strengths:
            lhs, prod = interaction_defect(model, (fa, a * s), (fb, b * s), v_left)
            ratios.append(lhs / prod)
    return _fit(ratios)


def fit_C2(model: FluxModel, source: SourceModel, taus=(1e-2, 5e-3), sigmas=(-0.04, 0.04)) -> float:
    ratios = []
    for fam in (1, 2):
        for s in sigmas:
            for tau in taus:
                ratios.append(step_perturbation(model, source, fam, s, tau) / tau)
    return _fit(ratios)


def fit_step_rate(model: FluxModel, source: SourceModel, taus=(1e-2, 5e-3), sigmas=(-0.04, 0.04)) -> float:
    """Relative strength change per unit source budget, ``|dsigma| / (tau * omega2 * |sigma|)``."""
    w2 = float(np.asarray(source.omega2(0.0)))
    if w2 <= 0:
        return 0.0
    ratios = []
    for fam in (1, 2):
        for s in sigmas:
            for tau in taus:
                ratios.append(step_perturbation(model, source, fam, s, tau) / (tau * w2 * abs(s)))
    return _fit(ratios)


def _smallness_logs(model, source, seeds, eta, eps, T):
    logs = []
    for seed in seeds:
        d = random_small_datum(model, eta, seed=seed)
        logs.append(run(model, d, source, RunConfig(eps, eps / 2, T, seed=seed)))
    return logs


def fit_C3(logs, anchors: int = 3) -> float:
    ratios = []
    for log in logs:
        T = log.final.time
        for fam in (1, 2):
            for X in np.linspace(-0.02, 0.02, anchors):
                path = minimal_backward(log, fam, (T, float(X)))
                for rec in classify_crossings(path, log, C3=None):
                    # changes at round-off level carry no information on the rate
                    excess = abs(rec.delta_v) - AUDIT_TOL
                    if rec.bound > 0 and excess > 0:
                        ratios.append(excess / rec.bound)
    return _fit(ratios)


def fit_sup_constants(logs, eta: float) -> tuple:
    """``(M, K)`` from the sup of the invariants over time."""
    rM, rK = [], []
    for log in logs:
        model = log.model
        v0 = sup_norm(model, log.initial)
        for t in np.linspace(0.0, log.final.time, 5):
            s = sup_norm(model, log.pattern_at(float(t)))
            if v0 > 0:
                rM.append(s / v0)
            rK.append(s / math.sqrt(eta))
    return _fit(rM), _fit(rK)


def fit_c1(model: FluxModel, strength: float = 0.2, eps: float = 0.01, times=(0.5, 1.0)) -> float:
    """Fan width over ``t * TV+`` for centred rarefactions of each family."""
    ratios = []
    for fam in (1, 2):
        vl = np.zeros(2)
        vr = np.zeros(2)
        vl[fam - 1] = -0.5 * strength
        vr[fam - 1] = 0.5 * strength
        d = PiecewiseConstantDatum((0.0,), tuple(to_states(model, [vl, vr])))
        log = run(model, d, None, RunConfig(eps, eps / 2, max(times)))
        for t in times:
            pat = log.pattern_at(t)
            xs = [f.position_at(t) for f in pat.fronts if f.family == fam and f.strength > 0]
            if len(xs) < 2:
                continue
            a, b = min(xs), max(xs)
            tvp = tv_plus(pat, fam, (a - 1e-12, b + 1e-12))
            ratios.append(t * tvp / (b - a))
    # c1 is a lower constant: the safety factor divides
    return 1.0 / _fit(ratios) if ratios else math.nan


def fit_calM(logs, c1: float, interval=(-0.05, 0.05)) -> float:
    from .analysis import decay_audit

    ratios = []
    for log in logs:
        lam = max_speed(log.model, samples=2000)
        for t in np.linspace(0.0, log.final.time, 5)[1:]:
            rep = decay_audit(log, interval, float(t), c1, 1.0, lam)
            base = rep.bound - (interval[1] - interval[0]) / (c1 * t)
            excess = max(rep.tv_plus) - (interval[1] - interval[0]) / (c1 * t)
            if base > 0 and excess > 0:
                ratios.append(excess / base)
    return _fit(ratios)


def fit_invariant_region(logs, eta: float) -> tuple:
    """``(calK, C5)``; both ``None`` when the model has no controlled component."""
    try:
        invariant_region_setup(logs[0].model)
    except NotApplicable:
        return None, None
    rK, r5 = [], []
    for log in logs:
        ds = log.dsource
        budget = ds.tau * float(np.sum(ds.omega2_steps)) if ds is not None else 0.0
        for rep in invariant_region_audit(log, eta, calK=0.0, C5=0.0):
            rK.append(abs(rep.extreme_u) / eta if rep.setup.u_side * rep.extreme_u > 0 else 0.0)
            if budget > 0:
                r5.append(max(rep.extreme_v_excess, 0.0) / budget)
    return _fit(rK), _fit(r5)


def fit_Cp(logs, eta: float, Cpp: float, intervals=((-0.05, 0.05), (-0.02, 0.0))) -> float:
    ratios = []
    for log in logs:
        for I in intervals:
            for t in np.linspace(0.0, log.final.time, 3)[1:]:
                rep = interval_integral_audit(log, I, float(t), eta, 1.0, Cpp, 0.0)
                denom = eta * ((I[1] - I[0]) + Cpp * t)
                ratios.append(max(abs(rep.integral[0]), abs(rep.integral[1])) / denom)
    return _fit(ratios)


def fit_C_RH(model: FluxModel, epsilons=(0.02, 0.01)) -> float:
    ratios = []
    for eps in epsilons:
        for fam in (1, 2):
            log = run(model, blended_shock_datum(model, eps, family=fam), None, RunConfig(eps, eps / 2, 0.1))
            th = 1.5 * math.sqrt(eps) * 0.9
            for p in extract_theta_shocks(log, th, fam):
                for tr in segment_traces(log, p):
                    ratios.append(tr.rh_residual / eps)
    return _fit(ratios)


def compression_datum(model: FluxModel, amplitude: float = 0.1, half_width: float = 0.1,
                      eps: float = 0.01, family: int = 1) -> PiecewiseConstantDatum:
    """A staircase ramp in one invariant that steepens into a single shock."""
    n = max(2, int(round(2 * amplitude / eps)))
    xs = np.linspace(-half_width, half_width, n)
    vals = np.linspace(amplitude, -amplitude, n + 1)
    V = np.zeros((n + 1, 2))
    V[:, family - 1] = vals
    return PiecewiseConstantDatum(tuple(float(x) for x in xs), tuple(to_states(model, V)))


def fit_c_star(model: FluxModel, eps: float = 0.01, thetas=(0.1, 0.15)) -> float:
    """Mass spent by compressive chains before reaching ``theta``, over ``4 theta^3``.

    ``Qhat`` drops by at least ``K / 4`` times the interaction mass, so a
    chain that reaches ``theta`` after starting at a positive time has cost
    at least ``c_star * K * theta^3`` when ``c_star`` is this ratio.
    """
    ratios = []
    for fam in (1, 2):
        d = compression_datum(model, eps=eps, family=fam)
        log = run(model, d, None, RunConfig(eps, eps / 2, 1.5))
        atoms = accumulate_muIC(log)
        for th in thetas:
            for p in extract_theta_shocks(log, th, fam):
                if p.t_start > 0:
                    ratios.append(chain_mass(log, p, th, atoms) / (4.0 * th**3))
    return min(ratios) / SAFETY if ratios else math.nan


# ---------------------------------------------------------------------------
# Whole-model calibration
# ---------------------------------------------------------------------------


def calibrate(model: FluxModel, source: Optional[SourceModel] = None, eta: float = 1e-2,
              seeds=(101, 102, 103), eps: float = 0.005, T: float = 0.02) -> Calibration:
    """Fit every constant on the model's micro-suites."""
    src = standard_source() if source is None else source
    params = model.params()
    cal = Calibration(params.get("name", model.name), params)
    c, notes = cal.constants, cal.suites

    c["C1"] = fit_C1(model)
    notes["C1"] = "isolated wave pairs, strengths 0.08 and 0.04, all five interaction shapes"
    c["C2"] = fit_C2(model, src)
    notes["C2"] = "single fronts of strength +-0.04 of each family, tau in {1e-2, 5e-3}"

    logs = _smallness_logs(model, src, seeds, eta, eps, T)
    # C3 is the common constant of all elementary estimates, so it also dominates C1 and C2
    c["C3"] = max(fit_C3(logs), c["C1"], fit_step_rate(model, src))
    notes["C3"] = (f"max of C1, the relative source-step rate and the crossing rates along minimal characteristics "
                   f"(3 anchors per family, smallness seeds {list(seeds)})")
    c["M"], c["K"] = fit_sup_constants(logs, eta)
    notes["M"] = notes["K"] = f"sup of invariants at 5 times, smallness seeds {list(seeds)}, eta={eta}"

    c["c1"] = fit_c1(model)
    notes["c1"] = "centred rarefactions of strength 0.2 per family, t in {0.5, 1}, eps=0.01"
    c["calM"] = fit_calM(logs, c["c1"])
    notes["calM"] = "positive excess of TV+ over the fan term on the smallness runs (0 when none)"

    c["calK"], c["C5"] = fit_invariant_region(logs, eta)
    notes["calK"] = notes["C5"] = ("extremes of the controlled component and excess of the controlling "
                                   "invariant on the smallness runs" if c["calK"] is not None
                                   else "not applicable: no second derivative at the origin")

    c["Cpp"] = max_speed(model, samples=2000)
    c["Cp"] = fit_Cp(logs, eta, c["Cpp"])
    notes["Cp"] = "interval integrals of the invariants on the smallness runs"
    notes["Cpp"] = "maximal characteristic speed on the validity ball"

    c["C_RH"] = fit_C_RH(model)
    notes["C_RH"] = "single shocks of strength 1.5 sqrt(eps) per family, eps in {0.02, 0.01}"
    c["c_star"] = fit_c_star(model)
    notes["c_star"] = "staircase ramps of amplitude 0.1 steepening into one shock, theta in {0.1, 0.15}"
    return cal


def calibration_path(directory, model: FluxModel) -> Path:
    return Path(directory) / f"{model.name}.ini"
