import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from fronttrack import io
from fronttrack.calibration import Calibration
from fronttrack.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_OK, main
from fronttrack.errors import ConfigError
from fronttrack.tracker import RunConfig, riemann_datum, run

BURGERS_SPEC = """
[model]
name = burgers
[datum]
kind = riemann
left = 0.2, 0.0
right = -0.1, 0.1
[run]
epsilon = 0.01
tau = 0.005
T = 0.5
snapshots = 0.25
"""

QUAD_SPEC = """
[model]
name = quadratic
[source]
g1 = 0.01*exp(-t)*sin(u1+u2)
g2 = 0.01*exp(-t)*(cos(u2)-1+0.5*u1)
omega2 = 0.02*exp(-t)
T_star = 10
[datum]
kind = piecewise
breaks = -0.01, 0.01
states = 0.005, 0.0 | -0.004, 0.006 | 0.0, -0.005
[run]
epsilon = 0.005
tau = 0.0025
T = 0.01
[audits]
functionals = true
characteristics = 2
invariant_region = true
theta = 0.005
eta = 0.01
calibration = cal.ini
"""


def quadratic_calibration():
    consts = dict(C1=0.14, C2=0.1, C3=1.4, M=2.6, K=0.27, c1=0.47, calM=0.0, calK=1.8, C5=0.012,
                  Cp=1.2, Cpp=1.42, C_RH=0.11, c_star=0.36)
    return Calibration("quadratic", {"name": "quadratic", "r": 0.4, "c0": 1.0,
                                     "alpha": [1.0, 0.0, 1.0], "beta": [0.0, 0.0, 1.0]}, consts)


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_parse_spec_fields():
    spec = io.parse_spec(QUAD_SPEC)
    assert spec.model == "quadratic"
    assert spec.datum["states"][1] == (-0.004, 0.006)
    assert spec.tau == 0.0025 and spec.T == 0.01
    assert spec.calibration == "cal.ini"
    assert spec.audits["characteristics"] == 2


@pytest.mark.parametrize("text", ["not an ini", "[run]\nepsilon = 0.1\n", "[model]\nname = burgers\n[run]\nepsilon = x\n"])
def test_parse_spec_rejects_bad_input(text):
    with pytest.raises(ConfigError):
        io.parse_spec(text)


def test_event_log_round_trip(tmp_path, quadratic_log):
    path = io.write_event_log(quadratic_log, tmp_path / "ev.ndjson")
    back = io.read_event_log(path)
    assert len(back.events) == len(quadratic_log.events)
    assert back.final.fronts == quadratic_log.final.fronts
    assert back.initial.fronts == quadratic_log.initial.fronts
    assert back.pattern_at(0.17).fronts == quadratic_log.pattern_at(0.17).fronts


def test_snapshot_round_trip(tmp_path, burgers):
    log = run(burgers, riemann_datum((0.2, 0.0), (-0.1, 0.1)), None, RunConfig(0.01, 0.005, 0.3))
    path = io.write_snapshot(log.final, tmp_path / "s.txt")
    datum = io.read_snapshot(path)
    xs = np.linspace(-1, 1, 101)
    assert np.array_equal(datum(xs), log.final.sample(xs))


def test_calibration_round_trip(tmp_path):
    cal = quadratic_calibration()
    cal.suites["C1"] = "pairwise interactions"
    back = Calibration.load(cal.save(tmp_path / "c.ini"))
    assert back.constants == cal.constants
    assert back.suites == cal.suites
    assert back.model_instance().params() == cal.model_instance().params()
    with pytest.raises(KeyError):
        Calibration("burgers", {}, {"C1": None})["C1"]


def test_cli_run_is_deterministic(tmp_path):
    spec = write(tmp_path, "b.ini", BURGERS_SPEC)
    assert main(["--spec", str(spec), "--out", str(tmp_path / "o1")]) == EXIT_OK
    assert main(["--spec", str(spec), "--out", str(tmp_path / "o2")]) == EXIT_OK
    a = (tmp_path / "o1" / "events.ndjson").read_bytes()
    b = (tmp_path / "o2" / "events.ndjson").read_bytes()
    assert a == b
    assert (tmp_path / "o1" / "snapshot_t0.25.txt").exists()
    report = json.loads((tmp_path / "o1" / "report.json").read_text())
    assert report["status"] == EXIT_OK


def test_cli_audited_run(tmp_path):
    quadratic_calibration().save(tmp_path / "cal.ini")
    spec = write(tmp_path, "q.ini", QUAD_SPEC)
    assert main(["--spec", str(spec), "--out", str(tmp_path / "o")]) == EXIT_OK
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert report["summary"]["upsilon"]["failed"] == 0
    for name in ("audits.ndjson", "characteristics.ndjson", "invariant_region.ndjson", "structure.ndjson"):
        assert (tmp_path / "o" / name).exists()


def test_cli_configuration_errors(tmp_path):
    bad_tau = write(tmp_path, "t.ini", BURGERS_SPEC.replace("tau = 0.005", "tau = 0.02"))
    assert main(["--spec", str(bad_tau), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert main(["--spec", str(tmp_path / "missing.ini")]) == EXIT_CONFIG
    outside = write(tmp_path, "r.ini", BURGERS_SPEC.replace("left = 0.2, 0.0", "left = 0.6, 0.0"))
    assert main(["--spec", str(outside), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert main([]) == EXIT_CONFIG


def test_cli_aborted_run(tmp_path):
    text = BURGERS_SPEC.replace("[datum]", "[source]\ng1 = 1/u1\ng2 = 0\nomega2 = 1\nT_star = 10\n[datum]")
    spec = write(tmp_path, "a.ini", text.replace("left = 0.2, 0.0", "left = 0.0, 0.0"))
    assert main(["--spec", str(spec), "--out", str(tmp_path / "o")]) == EXIT_FAIL


def test_sweep_reports_config_errors(tmp_path):
    d = tmp_path / "specs"
    d.mkdir()
    write(d, "good.ini", BURGERS_SPEC)
    assert main(["--sweep", str(d), "--out", str(tmp_path / "s")]) == EXIT_OK
    write(d, "bad.ini", BURGERS_SPEC.replace("tau = 0.005", "tau = 0.02"))
    assert main(["--sweep", str(d), "--out", str(tmp_path / "s2")]) == EXIT_CONFIG
    rep = json.loads((tmp_path / "s2" / "sweep_report.json").read_text())
    assert rep["total"] == 2 and rep["passed"] == 1


def test_module_entry_point(tmp_path):
    spec = write(tmp_path, "b.ini", BURGERS_SPEC)
    proc = subprocess.run([sys.executable, "-m", "fronttrack.cli", "--spec", str(spec), "--out", str(tmp_path / "o")],
                          capture_output=True, text=True)
    assert proc.returncode == EXIT_OK
    assert "exit 0" in proc.stdout
