import json

import numpy as np
import pytest

from cdde.dde import InitialHistory, SolverParams
from cdde.lab import (ExperimentSpec, ScenarioError, bound_propagation_check, cocycle_corpus, gronwall_constant,
                      run_scenario, skewproduct_orbit, translation_continuity_experiment)
from cdde.model import LinearModulus, VectorField
from cdde.topologies import MetricConfig, Resolution

H = 0.01
FAST = dict(solver=SolverParams(h=H), resolution=Resolution(0.05, 0.25), bound_spatial_res=0.25,
            bound_time_res=0.05)
TTHETAB = MetricConfig("TThetaB", theta=LinearModulus(5.0), theta_hat=LinearModulus(5.0))


def test_translation_zero_cases():
    f = VectorField.parse("sin(2*pi*t)*x")
    rep = translation_continuity_experiment(f, 0.3, [0.3] * 4, TTHETAB, Resolution(0.05, 0.25))
    assert np.all(rep.column("field_distance") == 0) and rep.ok
    auto = VectorField.parse("x*u")
    rep = translation_continuity_experiment(auto, 0.0, [0.5, 0.25, 0.125], TTHETAB, Resolution(0.05, 0.25))
    assert np.all(rep.column("field_distance") == 0) and rep.ok


def test_dependence_identical_data():
    rep = run_scenario(ExperimentSpec("dependence_TB", field="u - x", limit="u - x", ns=(1, 2, 4), **FAST))
    assert np.all(rep.column("solution_error") == 0) and rep.ok
    assert "zero_error" in rep.verdicts


def test_dependence_shifted_field():
    ns = (1, 2, 4, 8)
    rep = run_scenario(ExperimentSpec("dependence_TB", field="u + 1/n", limit="u", ns=ns, **FAST))
    err = rep.column("solution_error")
    assert np.all(np.abs(err - 1 / np.array(ns)) <= 5 * H)
    assert rep.ok


def test_c1p_dependence():
    same = run_scenario(ExperimentSpec("dependence_C1p", field="u", limit="u", p=2, ns=(1, 2), **FAST))
    assert np.all(same.column("solution_error") == 0)
    ns = (1, 2, 4)
    rep = run_scenario(ExperimentSpec("dependence_C1p", field="u + 1/n", limit="u", p=2, ns=ns, **FAST))
    assert np.all(np.abs(rep.column("solution_error") - 2 / np.array(ns)) <= 10 * H)


def test_c1p_positive_interval_variant():
    common = dict(p=1, ns=(1, 4, 16, 64), history="sin(n*t)/n^2", history_derivative="cos(n*t)/n",
                  history_limit="0", norm_interval="positive", D=((0.0,),), **FAST)
    flat = run_scenario(ExperimentSpec("dependence_C11", field="x", limit="x", **common))
    assert np.all(flat.column("solution_error") == 0) and flat.ok
    rep = run_scenario(ExperimentSpec("dependence_C11", field="u", limit="u", **common))
    err = rep.column("solution_error")
    assert np.all(np.diff(err) < 0) and rep.verdicts["error_decays"]["ok"]


def test_equivalence_identical():
    rep = run_scenario(ExperimentSpec("equivalence_lbounds", field="x*u", limit="x*u", ns=(1, 2), **FAST))
    assert rep.verdicts["identically_zero"]["ok"]


def test_bound_propagation_examples():
    f = VectorField.parse("sin(3*t)*x + u")
    same = bound_propagation_check([f], [f], 1.0, 1.0, spatial_res=0.25)
    assert same["ok"] and same["limits"][0]["gap"] == 0.0
    fam = [VectorField.parse(f"(1 - 1/{n})*x") for n in (2, 4, 8, 16, 2 ** 22)]
    tight = bound_propagation_check(fam, [VectorField.parse("x")], 1.0, 1.0, spatial_res=0.25)
    assert tight["ok"] and abs(tight["limits"][0]["gap"]) <= 1e-6
    per = VectorField.parse("1 + sin(2*pi*t)")
    from cdde.model import translate
    tr = bound_propagation_check([translate(per, s) for s in (0.1, 0.2, 0.3)], [translate(per, 0.45)], 1.0, 1.0,
                                 spatial_res=0.25, time_res=0.005)
    assert tr["limits"][0]["gap"] <= 1e-3


def test_skewproduct_orbit():
    one = InitialHistory.constant(np.array([1.0]))
    params = SolverParams(h=1e-3)
    f = VectorField.parse("-x")
    orb = skewproduct_orbit(f, one, [0.0, 1.0, 2.0], TTHETAB, params, Resolution(0.05, 0.25),
                            cocycle_pairs=[(0.5, 1.0)])
    assert orb["rows"][0]["base_distance"] == 0.0
    assert np.all(orb["rows"][0]["segment"].values == 1.0)
    assert all(r["base_distance"] == 0.0 for r in orb["rows"])
    s = np.linspace(-1, 0, 11)
    for r in orb["rows"][1:]:
        np.testing.assert_allclose(r["segment"](s)[:, 0], np.exp(-(r["t"] + s)), atol=1e-3)
    assert orb["cocycle"][0]["error"] <= 1e-3
    g = VectorField.parse("sin(2*pi*t)*u")
    orb = skewproduct_orbit(g, one, [0.0], None, params, cocycle_pairs=[(0.3, 0.4)])
    assert orb["cocycle"][0]["error"] <= 5 * params.h


def test_cocycle_corpus_smoke():
    out = cocycle_corpus(SolverParams(h=0.01), pairs=((0.5, 0.5),))
    assert all(r["ok"] for r in out)


def test_gronwall_constant():
    assert gronwall_constant([VectorField.parse("0")], 1.0, 1.0) == 1.0
    c = gronwall_constant([VectorField.parse("x + u")], 1.0, 1.0, spatial_res=0.1)
    assert c == pytest.approx(np.exp(2.0), rel=0.25)


def test_spec_validation():
    with pytest.raises(ScenarioError):
        ExperimentSpec("nope")
    with pytest.raises(ScenarioError):
        ExperimentSpec("dependence_TB", ns=())


def test_limit_blow_up_reported():
    with pytest.raises(ScenarioError):
        run_scenario(ExperimentSpec("dependence_TB", field="x^2", limit="x^2", T=2.0, ns=(1,), **FAST))


def test_report_is_json_serializable():
    rep = run_scenario(ExperimentSpec("dependence_TB", field="u + 1/n", limit="u", ns=(1, 2), **FAST))
    json.dumps(rep.to_json())
    assert [r["n"] for r in rep.decay_rows()] == [1, 2]


EQUIV = dict(limit="0", resolution=Resolution(1 / 128, 1 / 128), bound_spatial_res=0.1, bound_time_res=1 / 256)


def test_equivalence_bounded_family():
    rep = run_scenario(ExperimentSpec("equivalence_lbounds", field="sin(n*t)*(x+u)", ns=(4, 16, 64), **EQUIV))
    assert rep.hypotheses["l_bounds_lp_bounded"] and rep.verdicts["both_decay"]["ok"]


def test_equivalence_negative_control():
    rep = run_scenario(ExperimentSpec("equivalence_lbounds", field="n*sin(n^2*t)*x*u", ns=(2, 4, 8),
                                      second_kind="TTheta", theta={"type": "linear", "c": 1.0}, **EQUIV))
    assert not rep.hypotheses["l_bounds_lp_bounded"]
    assert rep.verdicts["non_equivalence"]["ok"]
    second = rep.column("second_distance")
    assert second[-1] >= second[0]
