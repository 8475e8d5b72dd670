import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cdde.bounds import (InvalidModulusError, bound, equicontinuity_table, family_report, field_moduli,
                         lp_loc_bound, moduli_from_m_bounds, optimal_l1_bound, optimal_l2_bound,
                         optimal_l_bound, optimal_m_bound)
from cdde.lab import random_field
from cdde.model import RationalInterval, VectorField

I01 = RationalInterval(0, 1)
RES = 0.05


def test_constant_m_bound():
    for j in (0.5, 1.0, 3.0):
        assert np.all(optimal_m_bound(VectorField.parse("3"), j, I01).values == 3.0)


def test_m_bound_of_time_scaled_sum():
    b = optimal_m_bound(VectorField.parse("t*(x+u)"), 1.0, I01, spatial_res=RES)
    assert np.all(np.abs(b.values - b.t * np.sqrt(2)) <= 2 * RES)


def test_m_bound_of_projection():
    b = optimal_m_bound(VectorField.parse("u"), 2.0, I01, spatial_res=RES)
    assert np.all(np.abs(b.values - 2.0) <= 2 * RES)


def test_m_bound_dominates_samples():
    f = VectorField.parse("sin(5*t)*x*u - u")
    b = optimal_m_bound(f, 1.0, I01, spatial_res=0.1)
    rng = np.random.default_rng(0)
    v = rng.normal(size=(200, 2))
    v *= rng.uniform(0, 1, (200, 1)) / np.linalg.norm(v, axis=1, keepdims=True)
    for t, m in zip(b.t[::7], b.values[::7]):
        vals = np.abs(f.eval(np.full(200, t), v[:, :1], v[:, 1:]))[:, 0]
        assert vals.max() <= m + 1e-12


def test_l_bounds_of_constant_vanish():
    assert np.all(optimal_l_bound(VectorField.parse("2"), 1.0, I01).values == 0.0)


def test_l_bounds_of_time_scaled_sum():
    f = VectorField.parse("t*(x+u)")
    l = optimal_l_bound(f, 1.0, I01, spatial_res=RES)
    l1 = optimal_l1_bound(f, 1.0, I01, spatial_res=RES)
    l2 = optimal_l2_bound(f, 1.0, I01, spatial_res=RES)
    assert np.all(np.abs(l.values - l.t * np.sqrt(2)) <= 2 * RES)
    assert np.all(np.abs(l1.values - l1.t) <= 2 * RES)
    assert np.all(np.abs(l2.values - l2.t) <= 2 * RES)


@settings(max_examples=20)
@given(st.integers(0, 2 ** 32 - 1))
def test_l_below_l1_plus_l2(seed):
    f = random_field(np.random.default_rng(seed))
    l, l1, l2 = (bound(f, k, 1.0, I01, spatial_res=0.25, time_res=0.05) for k in ("l", "l1", "l2"))
    assert np.all(l.values <= l1.values + l2.values + 1e-12)


def test_bound_rejects_unknown_kind():
    with pytest.raises(ValueError):
        bound(VectorField.parse("x"), "q", 1.0, I01)


def test_lp_loc_bound():
    assert lp_loc_bound([VectorField.parse("1")], 1.0, 1.0, 1) == pytest.approx(2.0, abs=1e-12)
    fam = [VectorField.parse(f"sin({n}*t)*u") for n in range(1, 5)]
    assert 0 <= lp_loc_bound(fam, 1.0, 1.0, 1, spatial_res=RES) <= 2.0
    assert lp_loc_bound([VectorField.parse("t*u")], 2.0, 1.0, 2, spatial_res=RES) == pytest.approx(8 / 3, abs=1e-6)


def test_equicontinuity_constant_density():
    step = 0.01
    for c, eps in ((2.0, 0.5), (1.0, 0.3), (0.5, 5.0)):
        (_, delta), = equicontinuity_table([VectorField.parse(str(c))], 1.0, 1.0, [eps], time_res=step)
        assert abs(delta - min(eps / c, 2.0)) <= step + 1e-12


def test_equicontinuity_detects_concentration():
    fam = [VectorField.parse(f"{n}*indicator(0, {1 / n})*u") for n in range(1, 17)]
    step = 1 / 128
    (_, delta), = equicontinuity_table(fam, 1.0, 1.0, [0.5], spatial_res=0.25, time_res=step)
    assert delta <= 1 / 16 + step


def test_equicontinuity_of_bounded_densities():
    fam = [VectorField.parse(f"sin({n}*t)*u") for n in (1, 3, 7)]
    step = 0.01
    for eps, delta in equicontinuity_table(fam, 1.0, 1.0, [0.05, 0.2, 0.6], spatial_res=0.25, time_res=step):
        assert delta >= eps - step


def test_family_report_json():
    rep = family_report([VectorField.parse("1"), VectorField.parse("x")], [1.0], [1.0])
    js = rep.to_json()
    assert js["lp_sup"]["1.0"]["1.0"] == pytest.approx(2.0)


def test_moduli_from_constant_m_bounds():
    s = np.linspace(0, 1, 21)
    th = moduli_from_m_bounds([VectorField.parse("2")], [1.0], [I01]).lookup(I01, 1.0)
    np.testing.assert_allclose(th(s), 2 * s, atol=1e-6)
    two = moduli_from_m_bounds([VectorField.parse("2"), VectorField.parse("5")], [1.0], [I01])
    np.testing.assert_allclose(two.lookup(I01, 1.0)(s), 5 * s, atol=1e-6)


def test_moduli_of_linear_density():
    s = np.linspace(0, 1, 21)
    th = moduli_from_m_bounds([VectorField.parse("t")], [1.0], [I01], time_res=0.001).lookup(I01, 1.0)
    np.testing.assert_allclose(th(s), s + s ** 2 / 2, atol=1e-4)


def test_moduli_monotone():
    fam = [VectorField.parse("sin(3*t)*x + cos(t)*u")]
    Is = [RationalInterval(0, 1), RationalInterval(-1, 1)]
    ms = moduli_from_m_bounds(fam, [1.0, 2.0], Is, spatial_res=0.25)
    s = np.linspace(0, 2, 41)
    small, big = ms.lookup(Is[0], 1.0)(s), ms.lookup(Is[1], 2.0)(s)
    assert small[0] == 0.0 and np.all(np.diff(small) >= 0)
    assert np.all(big >= small)
    assert not ms.violations()


def test_invalid_modulus_for_concentrating_density():
    fam = [VectorField.parse("indicator(0.5, 0.5001)*10000")]
    with pytest.raises(InvalidModulusError):
        moduli_from_m_bounds(fam, [1.0], [I01], time_res=0.01)


def test_field_moduli_period():
    f = VectorField.parse("1 + sin(2*pi*t)")
    ms = field_moduli(f, [1.0], RationalInterval(0, 1), period=1.0, time_res=0.005)
    assert ms.lookup(RationalInterval(3, 4), 1.0)(1.0) == pytest.approx(1.0, abs=1e-3)
