"""Batch front-end: run one experiment spec, calibrate a model, or sweep a directory of specs.

Exit codes: 0 when every hard audit passes, 1 when a run aborts or a hard
audit fails, 2 for configuration errors.  ``FRONTTRACK_LOG`` sets the log
level (``DEBUG``, ``INFO``, ``WARNING``...).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import io
from .analysis import invariant_region_audit, pattern_invariants
from .calibration import Calibration, calibrate, calibration_path
from .characteristics import interval_functionals, minimal_backward, theta_audit
from .errors import ConfigError, FrontTrackError, NotApplicable
from .functionals import FunctionalMonitor
from .structure import count_bound, extract_theta_shocks, segment_traces
from .tracker import FrontTracker

log = logging.getLogger("fronttrack")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _setup_logging() -> None:
    level = os.environ.get("FRONTTRACK_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


@dataclasses.dataclass
class RunResult:
    name: str
    status: int
    out_dir: str
    events: int = 0
    message: str = ""
    summary: dict = dataclasses.field(default_factory=dict)
    epsilon: float = math.nan

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _load_or_fit_calibration(spec: io.ExperimentSpec, model, source, out: Path, base: Path) -> Calibration:
    if spec.calibration:
        p = Path(spec.calibration)
        return Calibration.load(p if p.is_absolute() else base / p)
    cal = calibrate(model, source)
    cal.save(calibration_path(out, model))
    return cal


def run_experiment(spec: io.ExperimentSpec, out_dir=None, base: Path = Path(".")) -> RunResult:
    """Run ``spec`` and write its artifacts; never raises for run-time failures."""
    out = Path(out_dir or spec.output or f"out/{spec.name}")
    res = RunResult(spec.name, EXIT_OK, str(out), epsilon=spec.epsilon)
    try:
        spec.validate(base)
        model = spec.build_model()
        source = spec.build_source()
        datum = spec.build_datum(base)
        cfg = spec.run_config()
    except (FrontTrackError, ValueError, KeyError) as exc:
        res.status, res.message = EXIT_CONFIG, f"configuration error: {exc}"
        return res
    out.mkdir(parents=True, exist_ok=True)
    audits = spec.audits or {}
    eta = float(audits.get("eta", 0.0))
    monitors = []
    fmon = None
    try:
        tracker = FrontTracker(model, source, cfg)
        init = tracker.init_approximation(datum)
        cal = None
        if audits.get("functionals") or audits.get("characteristics") or audits.get("invariant_region") \
                or audits.get("theta"):
            cal = _load_or_fit_calibration(spec, model, source, out, base)
        if audits.get("functionals") or audits.get("characteristics"):
            _, V0 = pattern_invariants(model, init)
            vbar = float(np.max(np.abs(V0))) if V0.size else 0.0
            fcfg = cal.functional_config(vbar, eta)
            fmon = FunctionalMonitor(fcfg, C1=cal["C1"])
            if audits.get("functionals"):
                monitors.append(fmon)
        runlog = tracker.run(init, monitors)
    except FrontTrackError as exc:
        partial = getattr(exc, "log", None)
        if partial is not None:
            io.write_event_log(partial, out / "events.ndjson")
        res.status, res.message = EXIT_FAIL, f"run aborted: {type(exc).__name__}: {exc}"
        _write_report(out, res)
        return res

    res.events = len(runlog.events)
    snaps = fmon.snapshots[1:] if fmon is not None and audits.get("functionals") else None
    io.write_event_log(runlog, out / "events.ndjson", snaps)
    for t in spec.snapshots:
        io.write_snapshot(runlog.pattern_at(float(t)), out / f"snapshot_t{float(t):g}.txt")
    io.write_snapshot(runlog.final, out / "snapshot_final.txt")

    hard_fail = False
    if audits.get("functionals"):
        io.write_records(fmon.audits, out / "audits.ndjson")
        summary = fmon.summary()
        io.write_summary_table(summary, out / "summary.txt")
        res.summary.update(summary)
        if fmon.failures("upsilon"):
            hard_fail = True
            res.message = f"{len(fmon.failures('upsilon'))} Upsilon audits failed"
        io.write_series([s.time for s in fmon.snapshots], [s.Upsilon for s in fmon.snapshots],
                        out / "upsilon_series.txt", "t Upsilon")
    n_chars = int(audits.get("characteristics", 0) or 0)
    if n_chars:
        series = interval_functionals(runlog, fmon.config)
        recs = []
        xs = runlog.final.positions()
        lo, hi = (float(xs.min()), float(xs.max())) if xs.size else (-1.0, 1.0)
        for fam in (1, 2):
            for X in np.linspace(lo, hi, n_chars):
                path = minimal_backward(runlog, fam, (runlog.final.time, float(X)))
                for a in theta_audit(path, runlog, fmon.config, series):
                    recs.append({"family": fam, "anchor": float(X), **dataclasses.asdict(a)})
        io.write_records(recs, out / "characteristics.ndjson")
        failed = sum(not r["passed"] for r in recs)
        res.summary["theta"] = {"checked": len(recs), "failed": failed}
    if audits.get("invariant_region"):
        try:
            reps = invariant_region_audit(runlog, eta, cal["calK"], cal.get("C5", 0.0))
            io.write_records(reps, out / "invariant_region.ndjson")
            res.summary["invariant_region"] = {"checked": len(reps), "failed": sum(not r.passed for r in reps)}
        except (NotApplicable, KeyError) as exc:
            res.summary["invariant_region"] = {"not_applicable": str(exc)}
    thetas = audits.get("theta")
    if thetas:
        thetas = thetas if isinstance(thetas, tuple) else (float(thetas),)
        _, V0 = pattern_invariants(model, runlog.initial)
        fcfg = cal.functional_config(float(np.max(np.abs(V0))), eta)
        recs = []
        for th in thetas:
            polys = extract_theta_shocks(runlog, th)
            cb = count_bound(runlog, th, fcfg, cal["c_star"], polys)
            rh = [tr.rh_residual for p in polys for tr in segment_traces(runlog, p)]
            recs.append({"theta": th, "count": cb.count, "bound": cb.bound, "count_passed": cb.passed,
                         "max_rh": max(rh, default=0.0), "rh_bound": cal["C_RH"] * spec.epsilon,
                         "polylines": [p.series() for p in polys]})
        io.write_records(recs, out / "structure.ndjson")
    if hard_fail:
        res.status = EXIT_FAIL
    _write_report(out, res)
    return res


def _write_report(out: Path, res: RunResult) -> None:
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "report.json", "w") as fh:
        json.dump(io._jsonable(res.to_dict()), fh, sort_keys=True, indent=1)


def _run_path(args) -> dict:
    path, out, seed = args
    try:
        spec = io.load_spec(path)
    except ConfigError as exc:
        return RunResult(Path(path).stem, EXIT_CONFIG, str(out), message=str(exc)).to_dict()
    if seed is not None:
        spec.seed = seed
    return run_experiment(spec, out, Path(path).parent).to_dict()


def sweep(spec_paths: Sequence, out_dir, jobs: int = 1, seed: Optional[int] = None) -> dict:
    """Run independent specs in parallel and aggregate their outcomes."""
    out = Path(out_dir)
    tasks = [(str(p), str(out / Path(p).stem), seed) for p in sorted(map(str, spec_paths))]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_run_path, tasks))
    else:
        results = [_run_path(t) for t in tasks]
    report = {"runs": results, "passed": sum(r["status"] == EXIT_OK for r in results), "total": len(results),
              "refinement": _refinement_tables(tasks, results)}
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep_report.json", "w") as fh:
        json.dump(io._jsonable(report), fh, sort_keys=True, indent=1)
    return report


def _refinement_tables(tasks, results) -> list:
    """Group runs that differ only in (epsilon, tau) and list their worst margins by epsilon."""
    groups = {}
    for (path, _, _), r in zip(tasks, results):
        try:
            spec = io.load_spec(path)
        except ConfigError:
            continue
        d = dataclasses.asdict(spec)
        for k in ("epsilon", "tau", "name", "output"):
            d.pop(k, None)
        key = json.dumps(io._jsonable(d), sort_keys=True)
        groups.setdefault(key, []).append(r)
    tables = []
    for runs in groups.values():
        if len(runs) < 2:
            continue
        runs = sorted(runs, key=lambda r: -r["epsilon"])
        rows = []
        for r in runs:
            margins = {k: v.get("worst_margin") for k, v in r["summary"].items() if isinstance(v, dict)}
            rows.append({"name": r["name"], "epsilon": r["epsilon"], "events": r["events"], "margins": margins})
        tables.append(rows)
    return tables


def main(argv: Optional[Sequence[str]] = None) -> int:
    _setup_logging()
    ap = argparse.ArgumentParser(prog="fronttrack", description=__doc__.splitlines()[0])
    ap.add_argument("--spec", help="experiment spec (INI)")
    ap.add_argument("--calibrate", action="store_true", help="calibrate the spec's model and write its constants")
    ap.add_argument("--sweep", metavar="DIR", help="run every *.ini spec in DIR")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--seed", type=int)
    args = ap.parse_args(argv)

    if args.sweep:
        d = Path(args.sweep)
        if not d.is_dir():
            print(f"error: {d} is not a directory", file=sys.stderr)
            return EXIT_CONFIG
        rep = sweep(sorted(d.glob("*.ini")), args.out or "out/sweep", args.jobs, args.seed)
        print(f"{rep['passed']}/{rep['total']} runs passed")
        codes = [r["status"] for r in rep["runs"]]
        return max(codes, default=EXIT_OK) if EXIT_CONFIG not in codes else EXIT_CONFIG
    if not args.spec:
        ap.print_usage(sys.stderr)
        print("error: one of --spec or --sweep is required", file=sys.stderr)
        return EXIT_CONFIG
    try:
        spec = io.load_spec(args.spec)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        spec.seed = args.seed
    base = Path(args.spec).parent
    if args.calibrate:
        try:
            model = spec.build_model()
            src = spec.build_source()
        except (FrontTrackError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        out = Path(args.out or spec.output or "calibration")
        path = calibrate(model, src).save(calibration_path(out, model))
        print(f"calibration written to {path}")
        return EXIT_OK
    res = run_experiment(spec, args.out, base)
    if res.message:
        print(res.message, file=sys.stderr)
    print(f"{res.name}: exit {res.status}, {res.events} events, artifacts in {res.out_dir}")
    return res.status


if __name__ == "__main__":
    sys.exit(main())
