import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cdde.dde import (InitialHistory, PicardError, SolverParams, UnsupportedExponentError, c1p_modulus_tau,
                      c1p_norm, integrate_caratheodory_ode, segment, solve, step_reduce, trajectory_difference)
from cdde.model import SampledPath, VectorField

P = SolverParams(h=1e-3)
ONE = InitialHistory.constant(np.array([1.0]))


def f(text):
    return VectorField.parse(text, 1)


def test_step_reduce():
    g = step_reduce(f("u"), ONE.path)
    assert np.all(g(np.array([0.1, 0.9]), np.array([[5.0], [-2.0]])) == 1.0)
    g = step_reduce(f("x"), InitialHistory.from_function(lambda t: np.sin(t)).path)
    assert g(0.3, np.array([4.0]))[0] == 4.0
    hist = InitialHistory.from_function(lambda t: 1 + t, n=100)
    g = step_reduce(f("x*u"), hist.path)
    for t in (0.1, 0.45, 0.8):
        assert g(t, np.array([2.0]))[0] == pytest.approx(2.0 * t, abs=1e-12)
    assert 0.5 in step_reduce(f("where(t < 0.5, 0, 1)"), ONE.path).breakpoints


def test_ode_examples():
    zero = integrate_caratheodory_ode(step_reduce(f("0"), ONE.path), np.array([2.5]), (0, 1))
    assert np.all(zero.path.values == 2.5)
    dec = integrate_caratheodory_ode(step_reduce(f("-x"), ONE.path), np.array([1.0]), (0, 1), h=1e-3)
    assert dec.path.values[-1, 0] == pytest.approx(np.exp(-1), abs=1e-4)
    pw = integrate_caratheodory_ode(step_reduce(f("where(t < 0.5, 0, 1)"), ONE.path), np.array([0.0]), (0, 1),
                                    h=0.03)
    assert pw.path.values[-1, 0] == pytest.approx(0.5, abs=1e-12)


@settings(max_examples=20)
@given(st.floats(-2, 2), st.floats(-2, 2))
def test_linear_ode_closed_form(a, x0):
    r = integrate_caratheodory_ode(step_reduce(f(f"{a}*x"), ONE.path), np.array([x0]), (0, 1), h=1e-3)
    assert r.path.values[-1, 0] == pytest.approx(x0 * np.exp(a), abs=1e-6 * max(1, abs(x0) * np.exp(a)))


def test_picard_failure_reported():
    with pytest.raises(PicardError):
        integrate_caratheodory_ode(step_reduce(f("-1000*x"), ONE.path), np.array([1.0]), (0, 1), h=0.5,
                                   picard_max=3, max_bisect=0)


def test_solve_examples():
    const = solve(f("0"), InitialHistory.constant(np.array([3.0])), 2.0, P)
    assert np.all(const.values == 3.0)
    lin = solve(f("u"), ONE, 2.0, P)
    assert lin(1.0)[0] == pytest.approx(2.0, abs=1e-3)
    assert lin(2.0)[0] == pytest.approx(3.5, abs=1e-3)
    t = np.linspace(0, 3, 31)
    dec = solve(f("-x"), ONE, 3.0, P)
    np.testing.assert_allclose(dec(t)[:, 0], np.exp(-t), atol=1e-4)
    blow = solve(f("x^2"), ONE, 2.0, P)
    assert blow.blow_up and 0.95 <= blow.b_estimate <= 1.05


def test_solve_vector_system():
    hist = InitialHistory.from_function(lambda t: np.array([np.cos(t), -np.sin(t)]), n=2000)
    tr = solve(VectorField.parse(["x2", "-x1"]), hist, 1.0, P)
    np.testing.assert_allclose(tr(1.0), [np.cos(1.0), -np.sin(1.0)], atol=1e-6)


def test_solver_is_deterministic():
    a = solve(f("sin(3*t)*u - x"), ONE, 2.0, SolverParams(h=0.01))
    b = solve(f("sin(3*t)*u - x"), ONE, 2.0, SolverParams(h=0.01))
    assert np.array_equal(a.values, b.values) and np.array_equal(a.derivative, b.derivative)


def test_residual_invariant():
    tr = solve(f("where(t < 0.3, 1, -1)*u + sin(x)"), ONE, 2.0, SolverParams(h=0.01))
    assert tr.residual_ok
    assert tr.report()["residual_max"] <= 5 * 0.01


def test_solve_validation():
    with pytest.raises(ValueError):
        solve(f("u"), ONE, -1.0)
    with pytest.raises(ValueError):
        solve(VectorField.parse(["x1", "x2"]), ONE, 1.0)


def test_segments():
    tr = solve(f("u"), ONE, 2.0, P)
    s0 = segment(tr, 0.0)
    assert np.all(s0.values == 1.0)
    s1 = segment(tr, 1.0)
    s = np.linspace(-1, 0, 11)
    np.testing.assert_allclose(s1(s)[:, 0], 2 + s, atol=1e-3)
    flat = solve(f("0"), InitialHistory.constant(np.array([2.0])), 3.0, P)
    assert np.all(segment(flat, 2.5).values == 2.0)
    with pytest.raises(ValueError):
        segment(tr, 5.0)


def test_c1p_norm_examples():
    g = np.linspace(0, 1, 101)
    assert c1p_norm(SampledPath(g, np.full((101, 1), -2.0)), SampledPath(g, np.zeros((101, 1))), (0, 1), 2) == 2.0
    assert c1p_norm(SampledPath(g, g[:, None]), SampledPath(g, np.ones((101, 1))), (0, 1), 2) == pytest.approx(2.0)
    s = np.linspace(-1, 0, 20001)
    x = SampledPath(s, np.sin(2 * np.pi * s)[:, None])
    dx = SampledPath(s, (2 * np.pi * np.cos(2 * np.pi * s))[:, None])
    assert c1p_norm(x, dx, (-1, 0), 1) == pytest.approx(5.0, abs=1e-3)
    with pytest.raises(ValueError):
        c1p_norm(x, None, (-1, 0), 1)


def test_trajectory_difference_zero():
    a = solve(f("u"), ONE, 1.0, P)
    x, pieces = trajectory_difference(a, a)
    assert np.all(x.values == 0) and all(np.all(p.values == 0) for p in pieces)


def test_c1p_modulus_tau():
    tau = c1p_modulus_tau(1.0, 2.0)
    h = np.linspace(0, 1, 101)
    np.testing.assert_allclose(tau(h), np.sqrt(h))
    assert tau(3.0) == 1.0
    for p in (1.5, 2.0, 4.0):
        v = c1p_modulus_tau(2.0, p)(np.linspace(0, 3, 61))
        assert v[0] == 0 and np.all(np.diff(v) >= 0)
    with pytest.raises(UnsupportedExponentError):
        c1p_modulus_tau(1.0, 1.0)


def test_holder_extremal_path():
    # phi(t) = j * t^(1 - 1/p) normalized into the C^{1,p} ball reaches the envelope
    p, j = 2.0, 1.0
    tau = c1p_modulus_tau(j, p)
    rng = np.random.default_rng(0)
    t = rng.uniform(0, 1, 1000)
    h = rng.uniform(0, 1, 1000)
    phi = lambda s: j * np.minimum(s, 1.0) ** (1 - 1 / p) / 2
    assert np.all(np.abs(phi(t + h) - phi(t)) <= tau(h) + 1e-9)


def test_history_consistency():
    hist = InitialHistory.from_function(lambda t: np.sin(t), derivative=lambda t: np.cos(t), n=1000)
    assert hist.consistency_error() < 1e-5
