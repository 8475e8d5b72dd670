import csv
import json
import os

import pytest

from cdde import config as cfgmod
from cdde.cli import run


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_solve_writes_trajectory(tmp_path):
    cfg = write(tmp_path, "ex_u.json", {"field": "u", "history": 1, "T": 2})
    out = tmp_path / "out"
    assert run(["solve", "--config", cfg, "--out", str(out)]) == 0
    table = {float(r["t"]): r for r in rows(out / "trajectory.csv")}
    assert float(table[1.0]["x1"]) == pytest.approx(2.0, abs=1e-3)
    assert float(table[1.0]["dx1"]) == 1.0
    rep = json.loads((out / "solve_report.json").read_text())
    assert {"blow_up", "b_estimate", "residual_max", "picard"} <= set(rep)
    prov = json.loads((out / "provenance.json").read_text())
    assert prov["config"]["solver"]["h"] == 1e-3
    assert {"cdde", "python", "numpy", "kernels"} <= set(prov["versions"])
    assert prov["wall_time_s"] >= 0


def test_resolution_flag_overrides_step(tmp_path):
    cfg = write(tmp_path, "c.json", {"field": "u", "T": 1})
    out = tmp_path / "o"
    assert run(["solve", "--config", cfg, "--out", str(out), "--resolution", "0.1"]) == 0
    assert len(rows(out / "trajectory.csv")) == 11


def test_selftest(tmp_path, capsys):
    assert run(["selftest", "--out", str(tmp_path)]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines and all(line.startswith("PASS ") for line in lines)


def test_seminorm_zero_field(tmp_path):
    cfg = write(tmp_path, "zero.json", {"field": "0", "seminorms": [
        {"kind": "TB"}, {"kind": "TTheta", "theta": {"type": "linear", "c": 2}},
        {"kind": "sigmaThetaD", "x_point": [0], "theta": "m_bounds"},
        {"kind": "TThetaThetaHat", "p": 2, "theta": {"type": "linear", "c": 1},
         "theta_hat": {"type": "holder", "j": 1, "p": 2}}]})
    assert run(["seminorm", "--config", cfg, "--out", str(tmp_path)]) == 0
    table = rows(tmp_path / "seminorms.csv")
    assert len(table) == 4 and all(float(r["value"]) == 0.0 for r in table)
    for r in table:
        if r["path_file"]:
            assert os.path.exists(tmp_path / r["path_file"])


def test_distance_and_hull(tmp_path):
    d = write(tmp_path, "d.json", {"f": "x", "g": "x", "metric": {"kind": "TB", "R": 2}})
    assert run(["distance", "--config", d, "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "distance.json").read_text())["distance"] == 0.0
    h = write(tmp_path, "h.json", {"field": "x*u", "times": [0, 0.5],
                                   "metric": {"kind": "TTheta", "theta": {"type": "linear", "c": 3}}})
    assert run(["hull", "--config", h, "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "hull.json").read_text())["matrix"] == [[0.0, 0.0], [0.0, 0.0]]


def test_bounds_outputs(tmp_path):
    cfg = write(tmp_path, "b.json", {"family": ["3"], "kinds": ["m", "l"], "time_res": 0.1})
    assert run(["bounds", "--config", cfg, "--out", str(tmp_path)]) == 0
    table = rows(tmp_path / "bounds.csv")
    assert list(table[0])[:4] == ["kind", "j", "t", "value"]
    assert {float(r["value"]) for r in table if r["kind"] == "m"} == {3.0}
    assert json.loads((tmp_path / "family_report.json").read_text())["lp_sup"]["1"]["1"] == pytest.approx(6.0, abs=1e-12)


def test_experiment_outputs(tmp_path):
    cfg = write(tmp_path, "e.json", {"field": "u + 1/n", "limit": "u", "ns": [1, 2], "kind": "TB",
                                     "solver": {"h": 0.01}})
    assert run(["experiment", "--scenario", "dependence_TB", "--config", cfg, "--out", str(tmp_path)]) == 0
    table = rows(tmp_path / "decay.csv")
    assert list(table[0]) == ["n", "field_distance", "data_distance", "solution_error", "norm_kind", "config_hash"]
    assert json.loads((tmp_path / "report.json").read_text())["ok"]


def test_identical_runs_are_byte_identical(tmp_path):
    cfg = write(tmp_path, "e.json", {"field": "sin(n*t)*u", "limit": "0", "ns": [1, 2, 4], "kind": "TTheta",
                                     "solver": {"h": 0.01}, "resolution": {"dt": 0.05, "dx": 0.25}})
    outs = []
    for k, workers in enumerate(("1", "3")):
        out = tmp_path / f"run{k}"
        argv = ["experiment", "--scenario", "dependence_TB", "--config", cfg, "--out", str(out), "--workers", workers]
        assert run(argv) == 0
        outs.append(out)
    for name in ("report.json", "decay.csv"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_every_output_names_the_hash(tmp_path):
    cfg = write(tmp_path, "c.json", {"field": "u", "T": 0.5})
    assert run(["solve", "--config", cfg, "--out", str(tmp_path)]) == 0
    tag = json.loads((tmp_path / "provenance.json").read_text())["config_hash"]
    for name in ("trajectory.csv", "solve_report.json"):
        assert tag in (tmp_path / name).read_text()


def test_csv_floats_round_trip(tmp_path):
    cfg = write(tmp_path, "c.json", {"field": "sin(t)*u + x/3", "T": 1, "solver": {"h": 0.01}})
    assert run(["solve", "--config", cfg, "--out", str(tmp_path)]) == 0
    for r in rows(tmp_path / "trajectory.csv"):
        assert repr(float(r["x1"])) == r["x1"]


def test_usage_errors(tmp_path, capsys):
    assert run(["solve", "--bogus"]) == 2
    assert "usage" in capsys.readouterr().err
    assert run(["frobnicate"]) == 2
    assert run([]) == 2


def test_validation_errors(tmp_path):
    bad = write(tmp_path, "bad.json", {"field": "u", "T": -1})
    assert run(["solve", "--config", bad, "--out", str(tmp_path)]) == 2
    extra = write(tmp_path, "extra.json", {"field": "u", "colour": "red"})
    assert run(["solve", "--config", extra, "--out", str(tmp_path)]) == 2
    syntax = write(tmp_path, "syn.json", {"field": "u +"})
    assert run(["solve", "--config", syntax, "--out", str(tmp_path)]) == 2
    assert run(["solve", "--config", str(tmp_path / "missing.json")]) == 2
    kind = write(tmp_path, "k.json", {"field": "x", "seminorms": [{"kind": "TD"}]})
    assert run(["seminorm", "--config", kind, "--out", str(tmp_path)]) == 2
    assert run(["selftest", "--out", str(tmp_path), "--seed", "-1"]) == 2


def test_numerical_failure(tmp_path):
    cfg = write(tmp_path, "c.json", {"field": "1/x", "history": 0})
    assert run(["solve", "--config", cfg, "--out", str(tmp_path)]) == 3


def test_config_defaults_and_hash():
    a = cfgmod.resolve("solve", {"field": "u"})
    assert a["solver"]["h"] == 1e-3 and a["T"] == 1.0 and a["history"] == "1"
    b = cfgmod.resolve("solve", {"T": 1.0, "field": "u"})
    assert cfgmod.config_hash("solve", a, 0) == cfgmod.config_hash("solve", b, 0)
    assert cfgmod.config_hash("solve", a, 0) != cfgmod.config_hash("solve", a, 1)
    assert len(cfgmod.config_hash("solve", a, 0)) == 16
    with pytest.raises(cfgmod.ConfigError):
        cfgmod.resolve("nope", {})
