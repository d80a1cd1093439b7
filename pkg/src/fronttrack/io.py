"""Text formats: event logs, pattern snapshots, audit reports and experiment specs.

Event logs are newline-delimited JSON with one record per line: a header,
one record per event, and a trailer with the final pattern.  Floats are
written with ``repr`` precision so a log read back reproduces the run
exactly.  Snapshots are whitespace-separated columns ``x_left u1 u2``.
"""

from __future__ import annotations

import configparser
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigError
from .model import FluxModel, RiemannCoords, SourceModel, State, build_model
from .riemann import Front
from .tracker import (
    Event,
    EventLog,
    FunctionDatum,
    JumpResolution,
    PiecewiseConstantDatum,
    RunConfig,
    SplittingEvent,
    WavePattern,
    riemann_datum,
)
from .expr import Expression


# ---------------------------------------------------------------------------
# Event logs
# ---------------------------------------------------------------------------


def _front_rec(f: Front) -> dict:
    return {
        "id": f.id, "family": f.family, "x": f.position, "t0": f.t0,
        "left": list(f.left), "right": list(f.right), "sigma": f.strength, "speed": f.speed,
        "gen": f.generation, "drift": f.drift,
        "vl": None if f.v_left is None else list(f.v_left),
        "vr": None if f.v_right is None else list(f.v_right),
    }


def _front_from(r: dict) -> Front:
    return Front(
        family=r["family"], position=r["x"], left=State(*r["left"]), right=State(*r["right"]),
        strength=r["sigma"], speed=r["speed"], generation=r["gen"], t0=r["t0"],
        v_left=None if r["vl"] is None else RiemannCoords(*r["vl"]),
        v_right=None if r["vr"] is None else RiemannCoords(*r["vr"]),
        id=r["id"], drift=r["drift"],
    )


def _pattern_rec(p: WavePattern) -> dict:
    return {"time": p.time, "left": list(p.leftmost_state), "fronts": [_front_rec(f) for f in p.fronts]}


def _pattern_from(r: dict) -> WavePattern:
    return WavePattern(r["time"], tuple(_front_from(f) for f in r["fronts"]), State(*r["left"]))


def event_record(e: Event, snapshot=None) -> dict:
    rec = {
        "type": "event", "index": e.index, "kind": e.kind, "time": e.time, "position": e.position,
        "step": e.step, "in": [_front_rec(f) for f in e.incoming], "out": [_front_rec(f) for f in e.outgoing],
    }
    if isinstance(e, SplittingEvent):
        rec["left_before"] = list(e.leftmost_before)
        rec["left_after"] = list(e.leftmost_after)
        rec["resolutions"] = [asdict(r) for r in e.resolutions]
    if snapshot is not None:
        rec["functionals"] = {k: v for k, v in asdict(snapshot).items() if not isinstance(v, tuple)}
    return rec


def _event_from(r: dict) -> Event:
    inc = tuple(_front_from(f) for f in r["in"])
    out = tuple(_front_from(f) for f in r["out"])
    if r["kind"] == "splitting":
        res = tuple(JumpResolution(**{**x, "new_strengths": tuple(x["new_strengths"]),
                                      "outgoing": tuple(x["outgoing"])}) for x in r["resolutions"])
        return SplittingEvent("splitting", r["time"], r["position"], inc, out, step=r["step"], resolutions=res,
                              index=r["index"], leftmost_after=State(*r["left_after"]),
                              leftmost_before=State(*r["left_before"]))
    return Event(r["kind"], r["time"], r["position"], inc, out, step=r["step"], index=r["index"])


def write_event_log(log: EventLog, path, snapshots: Optional[list] = None) -> Path:
    """Write ``log`` as NDJSON; ``snapshots[k]`` (if given) annotates event ``k``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cfg = log.config
    header = {
        "type": "header", "model": _jsonable(log.model.params()),
        "config": {"epsilon": cfg.epsilon, "tau": cfg.tau, "T": cfg.T, "seed": cfg.seed,
                   "speed_perturbation_scale": cfg.speed_perturbation_scale,
                   "event_cap": cfg.event_cap, "quad_nodes": cfg.quad_nodes},
        "initial": _pattern_rec(log.initial), "counters": dict(log.counters),
    }
    with open(path, "w") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for k, e in enumerate(log.events):
            snap = snapshots[k] if snapshots is not None and k < len(snapshots) else None
            fh.write(json.dumps(event_record(e, snap), sort_keys=True) + "\n")
        trailer = {"type": "final", "pattern": None if log.final is None else _pattern_rec(log.final)}
        fh.write(json.dumps(trailer, sort_keys=True) + "\n")
    return path


def read_event_log(path, source: Optional[SourceModel] = None) -> EventLog:
    """Rebuild an :class:`EventLog`; the discretized source is rebuilt only when ``source`` is given."""
    from .source import DiscretizedSource

    with open(path) as fh:
        lines = [json.loads(line) for line in fh if line.strip()]
    if not lines or lines[0].get("type") != "header":
        raise ConfigError(f"{path}: missing header record")
    h = lines[0]
    params = dict(h["model"])
    model = build_model(params.pop("name"), **params)
    c = h["config"]
    cfg = RunConfig(c["epsilon"], c["tau"], c["T"], c["speed_perturbation_scale"], c["seed"],
                    c["event_cap"], c["quad_nodes"])
    ds = None
    if source is not None:
        ds = DiscretizedSource(source, cfg.epsilon, cfg.tau, cfg.T, nodes=cfg.quad_nodes)
    log = EventLog(model, cfg, _pattern_from(h["initial"]), dsource=ds, counters=h.get("counters", {}))
    for r in lines[1:]:
        if r["type"] == "event":
            log.events.append(_event_from(r))
        elif r["type"] == "final" and r["pattern"] is not None:
            log.final = _pattern_from(r["pattern"])
    return log


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


# ---------------------------------------------------------------------------
# Snapshots and reports
# ---------------------------------------------------------------------------


def write_snapshot(pattern: WavePattern, path) -> Path:
    """Columns ``x_left u1 u2``; the first piece starts at ``-inf``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    xs = [-math.inf] + [float(x) for x in pattern.positions()]
    with open(path, "w") as fh:
        fh.write(f"# t = {pattern.time!r}\n# x_left u1 u2\n")
        for x, u in zip(xs, pattern.states()):
            fh.write(f"{x!r} {float(u[0])!r} {float(u[1])!r}\n")
    return path


def read_snapshot(path) -> PiecewiseConstantDatum:
    """A snapshot as a piecewise-constant datum."""
    rows = np.loadtxt(path, comments="#", ndmin=2)
    states = tuple(State(float(a), float(b)) for a, b in rows[:, 1:])
    return PiecewiseConstantDatum(tuple(float(x) for x in rows[1:, 0]), states)


def write_records(records, path) -> Path:
    """One JSON object per line; dataclasses are flattened, properties such as ``margin`` included."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for r in records:
            fh.write(json.dumps(_jsonable(_as_dict(r)), sort_keys=True) + "\n")
    return path


def _as_dict(r) -> dict:
    if isinstance(r, dict):
        return r
    d = asdict(r)
    for extra in ("margin", "passed"):
        if extra not in d and hasattr(r, extra):
            d[extra] = getattr(r, extra)
    return d


def write_series(xs, ys, path, header: str = "x y") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(f"# {header}\n")
        for x, y in zip(xs, ys):
            fh.write(f"{float(x)!r} {float(y)!r}\n")
    return path


def write_summary_table(summary: dict, path) -> Path:
    """Per-audit table: name, checked, failed, worst margin."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(f"{'audit':<22}{'checked':>10}{'failed':>10}{'worst_margin':>16}\n")
        for name in sorted(summary):
            s = summary[name]
            fh.write(f"{name:<22}{s['checked']:>10}{s['failed']:>10}{s['worst_margin']:>16.4e}\n")
    return path


# ---------------------------------------------------------------------------
# Experiment specs
# ---------------------------------------------------------------------------


@dataclass
class ExperimentSpec:
    """Everything needed to reproduce one run and its audits."""

    model: str
    model_params: dict = field(default_factory=dict)
    source: Optional[dict] = None
    datum: dict = field(default_factory=lambda: {"kind": "constant", "u": (0.0, 0.0)})
    epsilon: float = 0.01
    tau: float = 0.005
    T: float = 1.0
    seed: int = 0
    speed_perturbation_scale: Optional[float] = None
    snapshots: tuple = ()
    audits: dict = field(default_factory=dict)
    calibration: Optional[str] = None
    output: Optional[str] = None
    name: str = "experiment"

    def build_model(self) -> FluxModel:
        return build_model(self.model, **self.model_params)

    def build_source(self) -> Optional[SourceModel]:
        if not self.source:
            return None
        s = self.source
        support = s.get("support")
        return SourceModel.from_expressions(s["g1"], s["g2"], s.get("omega1", "0"), s.get("omega2", "0"),
                                            float(s.get("T_star", math.inf)),
                                            omega1_support=tuple(support) if support else None)

    def build_datum(self, base: Path = Path(".")):
        d = self.datum
        kind = d.get("kind", "constant")
        if kind == "constant":
            return PiecewiseConstantDatum((), (State(*d["u"]),))
        if kind == "riemann":
            return riemann_datum(d["left"], d["right"], float(d.get("x0", 0.0)))
        if kind == "expression":
            e1 = Expression(d["u1"], ("x",))
            e2 = Expression(d["u2"], ("x",))
            a, b = d["support"]

            def func(x):
                x = np.asarray(x, float)
                inside = (x >= a) & (x <= b)
                return np.stack([np.where(inside, np.broadcast_to(e1(x=x), x.shape), 0.0),
                                 np.where(inside, np.broadcast_to(e2(x=x), x.shape), 0.0)])

            return FunctionDatum(func, (a, b))
        if kind == "piecewise":
            return PiecewiseConstantDatum(tuple(d["breaks"]), tuple(State(*u) for u in d["states"]))
        if kind == "file":
            p = Path(d["path"])
            return read_snapshot(p if p.is_absolute() else base / p)
        raise ConfigError(f"unknown datum kind {kind!r}")

    def run_config(self) -> RunConfig:
        return RunConfig(self.epsilon, self.tau, self.T, self.speed_perturbation_scale, self.seed)

    def validate(self, base: Path = Path(".")) -> None:
        """Check the spec's invariants without running it."""
        if not self.tau <= self.epsilon:
            raise ConfigError(f"tau={self.tau} exceeds epsilon={self.epsilon}")
        model = self.build_model()
        src = self.build_source()
        if src is not None and self.T > src.T_star:
            raise ConfigError(f"T={self.T} exceeds the source horizon {src.T_star}")
        datum = self.build_datum(base)
        if isinstance(datum, PiecewiseConstantDatum):
            pts = np.array(datum.states, float)
        else:
            xs = np.linspace(datum.support[0], datum.support[1], 401)
            pts = np.asarray(datum(xs), float).T
        if np.any(np.hypot(pts[:, 0], pts[:, 1]) >= model.r):
            raise ConfigError(f"datum leaves the validity ball of radius {model.r}")
        self.run_config().validate_for(model, src)


def _floats(text: str) -> tuple:
    return tuple(float(t) for t in text.replace(";", ",").split(",") if t.strip())


def _value(text: str):
    t = text.strip()
    for conv in (int, float):
        try:
            return conv(t)
        except ValueError:
            pass
    if "," in t:
        try:
            return _floats(t)
        except ValueError:
            pass
    low = t.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    return t


def parse_spec(text: str, name: str = "experiment") -> ExperimentSpec:
    """Parse the INI form of an experiment spec."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"spec is not valid INI: {exc}") from exc
    if not cp.has_section("model") or "name" not in cp["model"]:
        raise ConfigError("spec needs [model] with a name")
    try:
        mp = {k: _value(v) for k, v in cp["model"].items() if k != "name"}
        spec = ExperimentSpec(model=cp["model"]["name"].strip(), model_params=mp, name=name)
        if cp.has_section("source"):
            s = dict(cp["source"])
            if "support" in s:
                s["support"] = _floats(s["support"])
            spec.source = s
        if cp.has_section("datum"):
            d = {}
            for k, v in cp["datum"].items():
                if k in ("u", "left", "right", "support", "breaks"):
                    d[k] = _floats(v)
                elif k == "states":
                    d[k] = tuple(_floats(p) for p in v.split("|"))
                elif k == "x0":
                    d[k] = float(v)
                else:
                    d[k] = v.strip()
            spec.datum = d
        if cp.has_section("run"):
            r = cp["run"]
            spec.epsilon = float(r.get("epsilon", spec.epsilon))
            spec.tau = float(r.get("tau", spec.epsilon / 2))
            spec.T = float(r.get("T", spec.T))
            spec.seed = int(r.get("seed", spec.seed))
            if "speed_perturbation_scale" in r:
                spec.speed_perturbation_scale = float(r["speed_perturbation_scale"])
            if "snapshots" in r:
                spec.snapshots = _floats(r["snapshots"])
        if cp.has_section("audits"):
            spec.audits = {k: _value(v) for k, v in cp["audits"].items()}
            spec.calibration = spec.audits.pop("calibration", None)
        if cp.has_section("output"):
            spec.output = cp["output"].get("directory")
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad spec value: {exc}") from exc
    return spec


def load_spec(path) -> ExperimentSpec:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read spec {path}: {exc}") from exc
    return parse_spec(text, name=path.stem)
