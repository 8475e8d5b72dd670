"""Embedded corpus of exact identities, run by ``cdde selftest``."""

from __future__ import annotations

import numpy as np

from .bounds import equicontinuity_table, lp_loc_bound, moduli_from_m_bounds, optimal_l_bound, optimal_m_bound
from .dde import InitialHistory, SolverParams, c1p_modulus_tau, c1p_norm, integrate_caratheodory_ode, \
    segment, solve, step_reduce
from .dp import DPProblem, lattice_transitions, sup_path_integral
from .model import (LinearModulus, RationalInterval, SampledPath, VectorField, difference, merge_moduli,
                    shared_modulus, translate)
from .topologies import KINDS, NEEDS_POINT, MetricConfig, Resolution, SeminormIndex, metric, seminorm, \
    seminorm_alternative


def _probes(rng, n=100, dim=1):
    return rng.uniform(-3, 3, n), rng.uniform(-2, 2, (n, dim)), rng.uniform(-2, 2, (n, dim))


def _close(a, b, tol=1e-12) -> bool:
    return bool(np.all(np.abs(np.asarray(a, float) - np.asarray(b, float)) <= tol))


def _check_eval():
    ok = VectorField.parse("u").eval(0.3, [2.0], [5.0])[0] == 5.0
    ok &= VectorField.parse("x+u").eval(0.0, [1.0], [1.0])[0] == 2.0
    return ok and VectorField.parse("where(t < 0.5, 1, 2)*u").eval(0.7, [0.0], [3.0])[0] == 6.0


def _check_translate(rng):
    f = VectorField.parse("sin(3*t)*x + where(t < 0.2, u, 2*u)")
    t, X, U = _probes(rng)
    same = _close(translate(f, 0.0).eval(t, X, U), f.eval(t, X, U))
    flow = _close(translate(translate(f, 0.3), 0.45).eval(t, X, U), translate(f, 0.75).eval(t, X, U), 1e-12)
    return same and flow


def _check_difference(rng):
    f = VectorField.parse("cos(t)*x*u")
    t, X, U = _probes(rng)
    zero = _close(difference(f, f).eval(t, X, U), 0.0)
    quarter = _close(difference(VectorField.parse("u+1/4"), VectorField.parse("u")).eval(t, X, U), 0.25)
    a, b = VectorField.parse("where(t < 0.2, x, u)"), VectorField.parse("where(t < 0.7, 1, 2)")
    bp = set(difference(a, b).breakpoints) == set(a.breakpoints) | set(b.breakpoints)
    return zero and quarter and bp


def _check_moduli():
    s = np.linspace(0, 2, 41)
    th = LinearModulus(1.5)
    idem = _close(merge_moduli(th, th)(s), th(s))
    dom = _close(merge_moduli(LinearModulus(1.0), LinearModulus(2.0))(s), 2.0 * s)
    g = np.linspace(0, 1, 101)
    const = _close(shared_modulus([SampledPath(g, np.ones((101, 1)))])(s[:10]), 0.0)
    lip = _close(shared_modulus([SampledPath(g, g[:, None])])(g[:50]), g[:50], 1e-12)
    return idem and dom and const and lip


def _check_bounds():
    I = RationalInterval(0, 1)
    m = optimal_m_bound(VectorField.parse("3"), 1.0, I).values
    l_zero = optimal_l_bound(VectorField.parse("2"), 1.0, I).values
    lp = lp_loc_bound([VectorField.parse("1")], 1.0, 1.0, 1)
    th = moduli_from_m_bounds([VectorField.parse("2"), VectorField.parse("5")], [1.0], [I])
    s = np.linspace(0, 1, 11)
    eq = equicontinuity_table([VectorField.parse("2")], 1.0, 1.0, [0.5], time_res=0.01)
    return (_close(m, 3.0) and _close(l_zero, 0.0) and abs(lp - 2.0) < 1e-9
            and _close(th.lookup(I, 1.0)(s), 5.0 * s, 1e-6) and abs(eq[0][1] - 0.25) <= 0.01 + 1e-12)


def _check_dp():
    t = np.linspace(0, 1, 2001)
    w = np.sin(2 * np.pi * 0.5 * (t[1:] + t[:-1])) * np.diff(t)
    ks = np.arange(-3, 4)[:, None]
    tr = lattice_transitions(ks, 1.0)
    layers = [np.full(len(ks), v) for v in w]
    hi = sup_path_integral(DPProblem(layers, [tr] * (len(w) - 1), "max")).value
    lo = sup_path_integral(DPProblem(layers, [tr] * (len(w) - 1), "min")).value
    return abs(hi) < 1e-6 and abs(lo) < 1e-6


def _check_seminorms(rng):
    res = Resolution(0.1, 0.5)
    zero = VectorField.parse("0")
    th = LinearModulus(5.0)
    ok = True
    for kind in KINDS:
        pt = None
        if kind in NEEDS_POINT:
            pt = (0.0, 0.0) if kind in ("TD", "sigmaD") else (0.0,)
        idx = SeminormIndex(kind, (0, 1), 1.0, 1, pt, th, th)
        ok &= seminorm(zero, idx, res) == 0.0
    g = VectorField.parse("sin(t)*x")
    idx = SeminormIndex("TThetaThetaHat", (0, 1), 1.0, 1, None, th, th)
    ok &= seminorm(g, idx, res) == seminorm_alternative(g, idx, res)
    cfg = MetricConfig("TTheta", 1, 1, theta=th)
    f, h = VectorField.parse("cos(t)*x + u"), VectorField.parse("x*u")
    ok &= metric(f, f, cfg, res) == 0.0
    ok &= abs(metric(f, h, cfg, res) - metric(h, f, cfg, res)) <= 1e-12
    auto = VectorField.parse("x*u - x")
    ok &= metric(translate(auto, 0.37), auto, cfg, res) == 0.0
    return bool(ok)


def _check_solver():
    phi = InitialHistory.constant(np.array([1.0]))
    g = step_reduce(VectorField.parse("u"), phi.path)
    red = _close(g(np.array([0.2, 0.9]), np.array([[7.0], [-1.0]])), 1.0)
    g2 = step_reduce(VectorField.parse("x"), phi.path)
    red &= _close(g2(0.3, np.array([4.0])), 4.0)
    still = integrate_caratheodory_ode(step_reduce(VectorField.parse("0"), phi.path), np.array([2.5]), (0, 1))
    red &= _close(still.path.values, 2.5)
    tr = solve(VectorField.parse("0"), InitialHistory.constant(np.array([3.0])), 2.0, SolverParams(h=0.01))
    red &= _close(tr.values, 3.0)
    seg0 = segment(tr, 0.0)
    red &= _close(seg0.values, 3.0) and _close(segment(tr, 1.5).values, 3.0)
    g1 = np.linspace(0, 1, 101)
    c = c1p_norm(SampledPath(g1, np.full((101, 1), -2.0)), SampledPath(g1, np.zeros((101, 1))), (0, 1), 2)
    lin = c1p_norm(SampledPath(g1, g1[:, None]), SampledPath(g1, np.ones((101, 1))), (0, 1), 2)
    tau = c1p_modulus_tau(1.0, 2.0)
    s = np.linspace(0, 3, 31)
    mono = tau(0.0) == 0.0 and bool(np.all(np.diff(tau(s)) >= 0))
    return bool(red and abs(c - 2.0) < 1e-12 and abs(lin - 2.0) < 1e-12 and mono)


CORPUS = (
    ("field evaluation", lambda rng: _check_eval()),
    ("translation identity and flow", _check_translate),
    ("field difference", _check_difference),
    ("modulus merge and shared modulus", lambda rng: _check_moduli()),
    ("bounds of constant fields", lambda rng: _check_bounds()),
    ("signed DP of an odd integrand", lambda rng: _check_dp()),
    ("seminorms and metrics", _check_seminorms),
    ("solver identities", lambda rng: _check_solver()),
)


def run_selftest(seed: int = 0) -> list[tuple[str, bool, str]]:
    out = []
    for name, check in CORPUS:
        try:
            ok, detail = bool(check(np.random.default_rng(seed))), ""
        except Exception as err:  # report and keep going
            ok, detail = False, f"{type(err).__name__}: {err}"
        out.append((name, ok, detail or ("" if ok else "identity violated")))
    return out
