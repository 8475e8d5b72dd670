"""Hull samples, translation flows and the experiment harness.

Every experiment turns a parameterized family ``f_n`` (an expression with the
free parameter ``n``) and initial data ``phi_n`` into a decay table: distance
of ``f_n`` to the limit in a chosen metric, sup distance of the data, and the
error between the two solutions.  Verdicts are computed from named table rows
so a report can be audited without rerunning it.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .bounds import (InvalidModulusError, lp_loc_bound, moduli_from_m_bounds, optimal_l1_bound,
                     optimal_l2_bound, optimal_m_bound)
from .dde import (InitialHistory, SolverParams, Trajectory, c1p_modulus_tau, c1p_norm, segment, solve,
                  trajectory_difference, UnsupportedExponentError)
from .model import (LinearModulus, ModulusSet, RationalInterval, SampledPath, VectorField,
                    merge_moduli, modulus_from_json, shared_modulus, translate)
from .topologies import (NEEDS_POINT, NEEDS_THETA, NEEDS_THETA_HAT, MetricConfig, Resolution,
                         metric, metric_terms, ordering_check)

SCENARIOS = ("dependence_TB", "dependence_TD", "dependence_sigmaD", "dependence_TThetaB",
             "dependence_sigmaThetaD", "dependence_C1p", "dependence_C11", "equivalence_lbounds",
             "equivalence_l2bounds", "translation_continuity", "bound_propagation", "weak_vs_strong",
             "ordering_chain")

DEFAULT_KIND = {
    "dependence_TB": "TB", "dependence_TD": "TD", "dependence_sigmaD": "sigmaD",
    "dependence_TThetaB": "TThetaB", "dependence_sigmaThetaD": "sigmaThetaD",
    "dependence_C1p": "TThetaThetaHat", "dependence_C11": "TThetaD",
    "equivalence_lbounds": "sigmaD", "equivalence_l2bounds": "sigmaThetaD",
    "translation_continuity": "TThetaB", "bound_propagation": "TB",
    "weak_vs_strong": "sigmaThetaD", "ordering_chain": "TB",
}
SECOND_KIND = {"equivalence_lbounds": "sigmaTheta", "equivalence_l2bounds": "sigmaThetaThetaHat",
               "weak_vs_strong": "TThetaD"}
DEFAULT_NS = (1, 2, 4, 8, 16, 32, 64, 128, 256)


class ScenarioError(ValueError):
    pass


# ---------------------------------------------------------------------------
# specs and reports


@dataclass(frozen=True, eq=False)
class ExperimentSpec:
    """One scenario run.

    ``field`` and ``history`` are expression templates in ``n`` (the history
    also in ``t``); ``limit`` / ``history_limit`` are their limits.  ``theta``
    is ``"m_bounds"`` (moduli generated by the family's m-bounds) or a modulus
    in JSON form.
    """

    scenario: str
    field: str = "0"
    limit: str = "0"
    dim: int = 1
    history: str | None = None
    history_limit: str = "1"
    history_derivative: str | None = None
    history_limit_derivative: str | None = None
    ns: tuple = DEFAULT_NS
    T: float = 1.0
    kind: str | None = None
    second_kind: str | None = None
    R: int = 1
    J: int = 1
    D: tuple = ((1.0,),)
    p: int = 1
    theta: object = "m_bounds"
    theta_hat: object = None
    norm_interval: str = "full"
    resolution: Resolution = Resolution(0.01, 0.01)
    solver: SolverParams = SolverParams()
    bound_spatial_res: float = 0.1
    bound_time_res: float = 0.01
    directions: int = 16
    hypotheses: dict = dataclasses.field(default_factory=dict)
    threshold: float | None = None
    params: dict = dataclasses.field(default_factory=dict)
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ScenarioError(f"unknown scenario {self.scenario!r}")
        object.__setattr__(self, "ns", tuple(int(n) for n in self.ns))
        object.__setattr__(self, "D", tuple(tuple(float(v) for v in np.atleast_1d(d)) for d in self.D))
        if not self.ns:
            raise ScenarioError("ns must be nonempty")

    @property
    def metric_kind(self) -> str:
        return self.kind or DEFAULT_KIND[self.scenario]

    @property
    def metric_kind_2(self) -> str | None:
        return self.second_kind or SECOND_KIND.get(self.scenario)

    def field_at(self, n) -> VectorField:
        return VectorField.parse(self.field, self.dim, {**self.params, "n": float(n)})

    def limit_field(self) -> VectorField:
        return VectorField.parse(self.limit, self.dim, self.params)

    def _nodes(self) -> int:
        return max(int(round(1.0 / self.solver.h)), 1)

    def history_at(self, n) -> InitialHistory:
        if self.history is None:
            return self.limit_history()
        return _history(self.history, self.history_derivative, self.dim, {**self.params, "n": float(n)},
                        self._nodes())

    def limit_history(self) -> InitialHistory:
        return _history(self.history_limit, self.history_limit_derivative, self.dim, self.params,
                        self._nodes())


def _history(text: str, deriv: str | None, dim: int, params: dict, n_nodes: int = 1000) -> InitialHistory:
    """Sampled history; constant histories get only the two end nodes so they
    add no kinks to the solver grid."""
    f = VectorField.parse(text, dim, params)
    g = np.linspace(-1.0, 0.0, 2 if f.autonomous else n_nodes + 1)
    zeros = np.zeros((len(g), dim))
    vals = f.eval(g, zeros, zeros)
    if deriv is not None:
        d = VectorField.parse(deriv, dim, params).eval(g, zeros, zeros)
    elif len(g) == 2:
        d = np.repeat((vals[1:] - vals[:1]) / (g[1] - g[0]), 2, axis=0)
    else:
        d = np.gradient(vals, g, axis=0, edge_order=2)
    return InitialHistory(SampledPath(g, vals), SampledPath(g, d))


@dataclass
class ExperimentReport:
    scenario: str
    rows: list = field(default_factory=list)
    verdicts: dict = field(default_factory=dict)
    hypotheses: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def verdict(self, name: str, ok: bool, rows: Sequence[int], rule: str):
        self.verdicts[name] = {"ok": bool(ok), "rows": [int(r) for r in rows], "rule": rule}

    @property
    def ok(self) -> bool:
        return all(v["ok"] for v in self.verdicts.values())

    def column(self, key: str) -> np.ndarray:
        return np.array([r[key] for r in self.rows], dtype=float)

    def to_json(self) -> dict:
        return {"scenario": self.scenario, "rows": self.rows, "verdicts": self.verdicts,
                "hypotheses": self.hypotheses, "tolerances": self.tolerances, "notes": self.notes,
                "ok": self.ok}

    def decay_rows(self) -> list[dict]:
        keys = ("n", "field_distance", "data_distance", "solution_error", "norm_kind")
        return [{k: r.get(k) for k in keys} for r in self.rows if "n" in r]


def _decreasing(v) -> bool:
    v = np.asarray(v, dtype=float)
    return bool(np.all(np.diff(v) < 0))


def _decays(d) -> bool:
    d = np.asarray(d, dtype=float)
    return bool(d[-1] < d[0] / 2 or np.max(d) <= 1e-12)


def _pmap(fn: Callable, items: Sequence, workers: int) -> list:
    """Ordered map; threads only change wall time, never results."""
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# metrics


def theta_for(family: Sequence[VectorField], spec_theta, R: int, J: int, with_shift: bool,
              spatial_res: float = 0.1, time_res: float = 0.01) -> ModulusSet:
    """Moduli indexed by ``([-r, r], j)`` (and ``[-r-1, r-1]`` when needed)."""
    if spec_theta is None:
        return None
    if spec_theta != "m_bounds":
        m = modulus_from_json(spec_theta) if isinstance(spec_theta, dict) else spec_theta
        return m if isinstance(m, ModulusSet) else ModulusSet.single(m)
    I_list = []
    for r in range(1, R + 1):
        I = RationalInterval.symmetric(r)
        I_list.append(I)
        if with_shift:
            I_list.append(I.shift(-1))
    return moduli_from_m_bounds(family, list(range(1, J + 1)), I_list, s_max=2.0 * R,
                                spatial_res=spatial_res, time_res=time_res)


def _merge_set(ms: ModulusSet, extra) -> ModulusSet:
    if extra is None:
        return ms
    if ms.entries:
        return ModulusSet({k: merge_moduli(v, extra) for k, v in ms.entries.items()})
    if ms.by_radius:
        return ModulusSet(by_radius={k: merge_moduli(v, extra) for k, v in ms.by_radius.items()})
    return ModulusSet.single(merge_moduli(ms.uniform, extra))


def metric_config(kind: str, family: Sequence[VectorField], spec: ExperimentSpec,
                  theta_extra=None, theta_hat_extra=None) -> MetricConfig:
    theta = theta_hat = None
    if kind in NEEDS_THETA:
        theta = theta_for(family, spec.theta, spec.R, spec.J, False, spec.bound_spatial_res,
                          spec.bound_time_res)
        theta = _merge_set(theta, theta_extra)
    if kind in NEEDS_THETA_HAT:
        src = spec.theta_hat if spec.theta_hat is not None else spec.theta
        theta_hat = theta_for(family, src, spec.R, spec.J, True, spec.bound_spatial_res, spec.bound_time_res)
        theta_hat = _merge_set(theta_hat, theta_hat_extra)
    D = spec.D
    if kind in ("TD", "sigmaD"):
        N = spec.dim
        D = tuple(d if len(d) == 2 * N else tuple(d) * 2 for d in D)
    return MetricConfig(kind, spec.R, spec.J, D if kind in NEEDS_POINT else (), theta, theta_hat,
                        spec.p if not kind.startswith("sigma") else 1, None, spec.directions)


# ---------------------------------------------------------------------------
# hull and translation flow


@dataclass(frozen=True, eq=False)
class HullSample:
    field: VectorField
    times: tuple
    kind: str
    matrix: np.ndarray

    def to_json(self) -> dict:
        return {"field": str(self.field), "times": list(self.times), "kind": self.kind,
                "matrix": self.matrix.tolist()}


def hull_sample(f: VectorField, times: Sequence[float], config: MetricConfig,
                res: Resolution = Resolution(), workers: int = 1) -> HullSample:
    """Translates ``f_t`` for ``t`` in ``times`` and their pairwise distances."""
    times = tuple(float(t) for t in times)
    shifted = [translate(f, t) for t in times]
    pairs = [(a, b) for a in range(len(times)) for b in range(a + 1, len(times))]
    vals = _pmap(lambda ab: metric(shifted[ab[0]], shifted[ab[1]], config, res), pairs, workers)
    M = np.zeros((len(times), len(times)))
    for (a, b), v in zip(pairs, vals):
        M[a, b] = M[b, a] = v
    return HullSample(f, times, config.kind, M)


def field_theta(f: VectorField, spec: ExperimentSpec) -> ModulusSet:
    """Moduli for metrics on the hull of a single field: generated by the
    m-bounds of ``f`` over the translates it will be compared against."""
    return theta_for([f], spec.theta, spec.R, spec.J, spec.metric_kind in NEEDS_THETA_HAT,
                     spec.bound_spatial_res, spec.bound_time_res)


def translation_continuity_experiment(f: VectorField, t_target: float, t_sequence: Sequence[float],
                                      config: MetricConfig, res: Resolution = Resolution(),
                                      hypotheses: dict | None = None, workers: int = 1) -> ExperimentReport:
    """``d(f_{t_n}, f_t)`` along ``t_n -> t``."""
    rep = ExperimentReport("translation_continuity", hypotheses=dict(hypotheses or {}))
    if config.kind.startswith("sigma") and not rep.hypotheses.get("l1_equicontinuous_m_bounds", False):
        rep.notes.append("hypotheses not satisfied: weak kinds need L1_loc-equicontinuous m-bounds")
    ft = translate(f, t_target)
    ds = _pmap(lambda tn: metric(translate(f, tn), ft, config, res), list(t_sequence), workers)
    for k, (tn, d) in enumerate(zip(t_sequence, ds)):
        rep.rows.append({"n": k + 1, "t_n": float(tn), "field_distance": float(d), "data_distance": 0.0,
                         "solution_error": None, "norm_kind": config.kind})
    d = np.array(ds)
    idx = list(range(len(ds)))
    if np.all(d == 0):
        rep.verdict("identically_zero", True, idx, "all distances are 0")
    else:
        rep.verdict("monotone_decay", _decreasing(d), idx, "d(f_{t_n}, f_t) strictly decreasing in n")
        rep.verdict("below_first_over_10", d[-1] < d[0] / 10, [0, len(d) - 1], "last < first / 10")
    return rep


# ---------------------------------------------------------------------------
# dependence experiments


def gronwall_constant(fields: Sequence[VectorField], radius: float, T: float,
                      spatial_res: float = 0.1, time_res: float = 0.01) -> float:
    """``exp(int_0^T (l1 + l2))`` with l-bounds maximized over ``fields`` on the
    ball of the given radius."""
    if T <= 0:
        return 1.0
    I = RationalInterval(0, RationalInterval(0, T).q2)
    tot = 0.0
    for f in fields:
        a = optimal_l1_bound(f, radius, I, spatial_res, time_res).integral(1)
        b = optimal_l2_bound(f, radius, I, spatial_res, time_res).integral(1)
        tot = max(tot, a + b)
    return float(np.exp(tot))


def _sup_error(a: Trajectory, b: Trajectory) -> float:
    x, _ = trajectory_difference(a, b)
    return float(np.max(np.linalg.norm(x.values, axis=1)))


def _data_distance(a: InitialHistory, b: InitialHistory) -> float:
    return a.path.sup_distance(b.path)


def _solve_limit(spec: ExperimentSpec):
    f = spec.limit_field()
    phi = spec.limit_history()
    ref = solve(f, phi, spec.T, spec.solver)
    if ref.blow_up:
        raise ScenarioError(f"the limit problem blows up at t ~ {ref.b_estimate:.4g} < T = {spec.T}; "
                            f"choose a smaller T")
    return f, phi, ref


def continuous_dependence_experiment(spec: ExperimentSpec) -> ExperimentReport:
    """Solve ``(f_n, phi_n)`` and ``(f, phi)``; tabulate field distance, data
    distance and ``sup_{[-1, T]} |x_n - x|``."""
    rep = ExperimentReport(spec.scenario, hypotheses=dict(spec.hypotheses))
    f, phi, ref = _solve_limit(spec)
    fam = [spec.field_at(n) for n in spec.ns]
    hists = [spec.history_at(n) for n in spec.ns]
    kind = spec.metric_kind
    extra = None
    if kind in ("sigmaD", "sigmaThetaD"):
        extra = shared_modulus([h.path for h in hists] + [phi.path])
        rep.notes.append("theta merged with the shared modulus of the initial data")
    cfg = metric_config(kind, fam + [f], spec, theta_extra=extra)

    def cell(k):
        fn, hn = fam[k], hists[k]
        tr = solve(fn, hn, spec.T, spec.solver)
        err = _sup_error(tr, ref) if not tr.blow_up else np.inf
        return {"n": spec.ns[k], "field_distance": metric(fn, f, cfg, spec.resolution),
                "data_distance": _data_distance(hn, phi), "solution_error": err, "norm_kind": "sup",
                "blow_up": bool(tr.blow_up), "residual_max": tr.residual_max}

    rep.rows = _pmap(cell, list(range(len(spec.ns))), spec.workers)
    rep.tolerances["residual"] = spec.solver.residual_factor * spec.solver.h
    _dependence_verdicts(rep, spec)
    return rep


def _dependence_verdicts(rep: ExperimentReport, spec: ExperimentSpec):
    err = rep.column("solution_error")
    drive = rep.column("field_distance") + rep.column("data_distance")
    idx = list(range(len(err)))
    if np.all(drive == 0):
        rep.verdict("zero_error", bool(np.all(err == 0)), idx, "identical data give identical solutions")
        return
    first, last = 0, len(err) - 1
    rep.verdict("error_decays", bool(err[last] < err[first]) or err[first] == 0, [first, last],
                "last solution error below the first")
    rep.verdict("drive_decays", bool(drive[last] < drive[first]), [first, last],
                "field distance + data distance decreases along the sequence")
    thr = spec.threshold
    if thr is not None:
        rep.verdict("final_below_threshold", bool(err[last] < thr), [last], f"final error < {thr}")
        rep.tolerances["threshold"] = thr


def c1p_dependence_experiment(spec: ExperimentSpec) -> ExperimentReport:
    """Dependence with errors in ``C^{1,p}([-1, T])`` (``norm_interval="full"``)
    or ``C^{1,p}([0, T])`` (``"positive"``)."""
    p = spec.p
    kind = spec.metric_kind
    if kind in NEEDS_THETA_HAT and p <= 1:
        raise UnsupportedExponentError("C^{1,p} scenarios with a ThetaHat topology need p > 1")
    rep = ExperimentReport(spec.scenario, hypotheses=dict(spec.hypotheses))
    f, phi, ref = _solve_limit(spec)
    fam = [spec.field_at(n) for n in spec.ns]
    hists = [spec.history_at(n) for n in spec.ns]
    tau = None
    if kind in NEEDS_THETA_HAT:
        radius = max(spec.J, 1)
        tau = c1p_modulus_tau(radius, p)
        rep.notes.append(f"ThetaHat merged with the Hoelder envelope tau_{radius} (p = {p})")
    cfg = metric_config(kind, fam + [f], spec, theta_hat_extra=tau)
    lo = -1.0 if spec.norm_interval == "full" else 0.0

    def cell(k):
        fn, hn = fam[k], hists[k]
        tr = solve(fn, hn, spec.T, spec.solver)
        x, pieces = trajectory_difference(tr, ref)
        err = c1p_norm(x, pieces, (lo, spec.T), p)
        return {"n": spec.ns[k], "field_distance": metric(fn, f, cfg, spec.resolution),
                "data_distance": _data_distance(hn, phi), "solution_error": err,
                "norm_kind": f"C1,{p}[{lo:g},{spec.T:g}]", "blow_up": bool(tr.blow_up)}

    rep.rows = _pmap(cell, list(range(len(spec.ns))), spec.workers)
    _dependence_verdicts(rep, spec)
    return rep


# ---------------------------------------------------------------------------
# equivalence, bound propagation, weak vs strong


def bound_flags(family: Sequence[VectorField], kind: str, j: float, r: float, p: int,
                spatial_res: float = 0.1, time_res: float = 0.01, growth: float = 4.0) -> dict:
    """Finite-sample proxy for L^p_loc-boundedness of l- or l2-bounds: the
    integrals over the ordered family may not exceed ``growth`` times the
    first member's value."""
    vals = [lp_loc_bound([f], j, r, p, spatial_res, time_res, kind=kind) for f in family]
    ok = max(vals) <= growth * max(vals[0], 1e-12)
    return {"kind": kind, "values": vals, "bounded": bool(ok), "growth": growth}


def equivalence_experiment(spec: ExperimentSpec) -> ExperimentReport:
    """Distances of ``f_n`` to the limit in two topologies of one chain."""
    rep = ExperimentReport(spec.scenario, hypotheses=dict(spec.hypotheses))
    f = spec.limit_field()
    fam = [spec.field_at(n) for n in spec.ns]
    bkind = "l2" if spec.scenario == "equivalence_l2bounds" else "l"
    p = 1 if spec.metric_kind.startswith("sigma") else spec.p
    flags = bound_flags(fam + [f], bkind, float(spec.J), float(spec.R), p, spec.bound_spatial_res,
                        spec.bound_time_res)
    rep.hypotheses[f"{bkind}_bounds_lp_bounded"] = flags["bounded"]
    rep.hypotheses["bound_integrals"] = flags["values"]
    if not flags["bounded"]:
        rep.notes.append("hypotheses violated: bound integrals grow along the family")
    k1, k2 = spec.metric_kind, spec.metric_kind_2
    cfgs = []
    for kind in (k1, k2):
        try:
            cfgs.append(metric_config(kind, fam + [f], spec))
        except InvalidModulusError as err:
            rep.notes.append(f"{kind}: moduli from m-bounds invalid ({err}); using a linear modulus")
            cfgs.append(metric_config(kind, fam + [f], replace(spec, theta={"type": "linear", "c": 1.0})))

    def cell(k):
        fn = fam[k]
        return {"n": spec.ns[k], "field_distance": metric(fn, f, cfgs[0], spec.resolution),
                "second_distance": metric(fn, f, cfgs[1], spec.resolution), "data_distance": 0.0,
                "solution_error": None, "norm_kind": f"{k1}|{k2}"}

    rep.rows = _pmap(cell, list(range(len(spec.ns))), spec.workers)
    d1, d2 = rep.column("field_distance"), rep.column("second_distance")
    last = len(d1) - 1
    if np.all(d1 == 0) and np.all(d2 == 0):
        rep.verdict("identically_zero", True, list(range(len(d1))), "all distances are 0")
        return rep
    dec1, dec2 = _decays(d1), _decays(d2)
    rep.tolerances["decay_rule"] = "last < first / 2, or every value below 1e-12"
    rep.notes.append(f"{k1} decays: {dec1}; {k2} decays: {dec2}")
    if flags["bounded"]:
        rep.verdict("both_decay", dec1 and dec2, [0, last], "both distances decay")
    else:
        rep.verdict("non_equivalence", dec1 != dec2, [0, last],
                    "hypotheses violated and the two topologies disagree")
    return rep


def bound_propagation_check(family: Sequence[VectorField], limit_candidates: Sequence[VectorField],
                            j: float, r: float, topology: str = "TB", tol: float = 1e-6,
                            spatial_res: float = 0.1, time_res: float = 0.01) -> dict:
    """``int_{-r}^{r} m_limit^j <= sup_family int_{-r}^{r} m_f^j + tol`` for each
    candidate limit (the caller asserts convergence in ``topology``)."""
    I = RationalInterval.symmetric(r)
    fam = [optimal_m_bound(f, j, I, spatial_res, time_res).integral(1) for f in family]
    sup = max(fam)
    out = []
    for g in limit_candidates:
        v = optimal_m_bound(g, j, I, spatial_res, time_res).integral(1)
        out.append({"limit": str(g), "integral": v, "holds": bool(v <= sup + tol), "gap": v - sup})
    return {"topology": topology, "j": j, "r": r, "family_sup": sup, "family_integrals": fam,
            "limits": out, "tol": tol, "ok": all(o["holds"] for o in out)}


def weak_vs_strong(spec: ExperimentSpec) -> ExperimentReport:
    """Distance of ``f_n`` to the limit in a weak and a strong topology."""
    rep = ExperimentReport("weak_vs_strong", hypotheses=dict(spec.hypotheses))
    f = spec.limit_field()
    fam = [spec.field_at(n) for n in spec.ns]
    weak_cfg = metric_config(spec.metric_kind, fam + [f], spec)
    strong_cfg = metric_config(spec.metric_kind_2, fam + [f], spec)

    def cell(k):
        fn = fam[k]
        w = metric_terms(fn, f, weak_cfg, spec.resolution)
        s = metric_terms(fn, f, strong_cfg, spec.resolution)
        return {"n": spec.ns[k], "weak_seminorms": w, "strong_seminorms": s,
                "field_distance": _frechet(w), "strong_distance": _frechet(s),
                "data_distance": 0.0, "solution_error": None,
                "norm_kind": f"{spec.metric_kind}|{spec.metric_kind_2}"}

    rep.rows = _pmap(cell, list(range(len(spec.ns))), spec.workers)
    w, s = rep.column("field_distance"), rep.column("strong_distance")
    last = len(w) - 1
    idx = list(range(len(w)))
    rep.verdict("weak_strictly_decreasing", _decreasing(w), idx, "weak distance strictly decreasing")
    rep.verdict("weak_below_tenth", bool(w[last] < 0.1 * w[0]), [0, last], "last < 0.1 * first")
    rep.verdict("strong_above_half", bool(np.all(s > 0.5 * s[0])), idx, "every strong distance > 0.5 * first")
    rep.tolerances.update({"weak_ratio": 0.1, "strong_ratio": 0.5})
    return rep


def _frechet(terms) -> float:
    return float(sum(2.0 ** -(k + 1) * v / (1.0 + v) for k, v in enumerate(terms)))


# ---------------------------------------------------------------------------
# ordering chain on random fields


_ATOMS = ("x", "u", "x*u", "abs(x-u)", "sin(x+u)", "x^2", "min(x,u)", "max(x,0)*u", "exp(-u^2)")
_TIME = ("1", "t", "sin({a}*t)", "cos({a}*t)", "step({c})", "indicator({c},{d})", "abs(t-{c})")


def random_field(rng: np.random.Generator, terms: int = 3) -> VectorField:
    """A random scalar field: sum of (time factor) * (state atom) * coefficient."""
    parts = []
    for _ in range(terms):
        a = round(float(rng.uniform(0.5, 8.0)), 3)
        c = round(float(rng.uniform(0.1, 0.6)), 3)
        d = round(c + float(rng.uniform(0.1, 0.3)), 3)
        tf = _TIME[rng.integers(len(_TIME))].format(a=a, c=c, d=d)
        coef = round(float(rng.uniform(-2.0, 2.0)), 3)
        parts.append(f"({coef})*({tf})*({_ATOMS[rng.integers(len(_ATOMS))]})")
    return VectorField.parse(" + ".join(parts), 1)


def ordering_chain(count: int = 20, seed: int = 0, interval=(0, 1), j: float = 1.0, p: int = 1,
                   res: Resolution = Resolution(0.05, 0.25), theta=None, theta_hat=None,
                   workers: int = 1) -> ExperimentReport:
    """``ordering_check`` on ``count`` random fields with lattice D points."""
    rng = np.random.default_rng(seed)
    theta = theta or LinearModulus(res.dx / res.dt)
    theta_hat = theta_hat or LinearModulus(2 * res.dx / res.dt)
    fields = [random_field(rng) for _ in range(count)]
    kmax = int(np.floor(j / np.sqrt(2) / res.dx))
    pts = [tuple(float(v) * res.dx for v in rng.integers(-kmax, kmax + 1, size=2)) for _ in range(count)]
    I = RationalInterval.from_json(list(interval))
    rep = ExperimentReport("ordering_chain")
    reports = _pmap(lambda k: ordering_check(fields[k], I, j, p, theta, theta_hat, [pts[k]], res),
                    list(range(count)), workers)
    for k, r in enumerate(reports):
        bad = [f"{a} <= {b}" for a, b, _, _, ok in r.relations if not ok]
        rep.rows.append({"field": str(fields[k]), "D": list(pts[k]), "values": r.values, "violations": bad})
    rep.verdict("all_inequalities_hold", all(not r["violations"] for r in rep.rows),
                list(range(count)), "every chain inequality holds on the shared grid")
    return rep


# ---------------------------------------------------------------------------
# skew-product orbits


def skewproduct_orbit(f: VectorField, phi, sample_times: Sequence[float], config: MetricConfig | None,
                      params: SolverParams = SolverParams(), res: Resolution = Resolution(),
                      cocycle_pairs: Sequence[tuple] = (), T: float | None = None) -> dict:
    """Base distances ``d(f_t, f)``, state segments ``x_t`` and cocycle checks
    ``x_t(f_s, x_s) == x_{s+t}(f, phi)``."""
    times = [float(t) for t in sample_times]
    horizon = max(times + [s + t for s, t in cocycle_pairs] + [0.0]) if T is None else T
    traj = solve(f, phi, horizon, params)
    if traj.blow_up:
        bad = [t for t in times if t >= traj.t_end]
        if bad:
            raise ScenarioError(f"sample times {bad} leave the maximal interval (b ~ {traj.b_estimate:.4g})")
    rows = []
    for t in times:
        base = 0.0 if config is None or t == 0.0 else metric(translate(f, t), f, config, res)
        rows.append({"t": t, "base_distance": base, "segment": segment(traj, t)})
    checks = []
    for s, t in cocycle_pairs:
        again = solve(translate(f, s), InitialHistory(segment(traj, s)), t, params)
        direct = segment(traj, s + t)
        got = segment(again, t)
        err = got.sup_distance(direct)
        checks.append({"s": s, "t": t, "error": err, "tol": 10 * params.h, "ok": bool(err <= 10 * params.h)})
    return {"trajectory": traj, "rows": rows, "cocycle": checks,
            "ok": all(c["ok"] for c in checks)}


ORACLE_CORPUS = (
    ("u", "1"),
    ("-x", "1"),
    ("x*u", "1+t"),
    ("sin(2*pi*t)*u", "1"),
    ("piecewise([0.5], 0, 1) + u/2", "cos(t)"),
    ("-x + indicator(0.25, 0.75)*u", "1"),
    ("sin(x) - u", "t"),
)
COCYCLE_PAIRS = ((0.3, 0.4), (0.5, 1.0), (1.2, 0.7), (0.3333, 0.5))


def cocycle_corpus(params: SolverParams = SolverParams(), pairs=COCYCLE_PAIRS) -> list[dict]:
    """Cocycle spot-checks over the oracle corpus."""
    out = []
    for fx, hx in ORACLE_CORPUS:
        f = VectorField.parse(fx, 1)
        phi = _history(hx, None, 1, {}, max(int(round(1.0 / params.h)), 1))
        orb = skewproduct_orbit(f, phi, [0.0], None, params, cocycle_pairs=pairs)
        out.append({"field": fx, "history": hx, "checks": orb["cocycle"], "ok": orb["ok"]})
    return out


# ---------------------------------------------------------------------------
# scenario dispatch


def run_scenario(spec: ExperimentSpec) -> ExperimentReport:
    s = spec.scenario
    if s.startswith("dependence_C"):
        return c1p_dependence_experiment(spec)
    if s.startswith("dependence_"):
        return continuous_dependence_experiment(spec)
    if s.startswith("equivalence_"):
        return equivalence_experiment(spec)
    if s == "weak_vs_strong":
        return weak_vs_strong(spec)
    if s == "ordering_chain":
        return ordering_chain(count=len(spec.ns) if spec.ns != DEFAULT_NS else 20, seed=spec.seed,
                              p=spec.p, workers=spec.workers)
    if s == "translation_continuity":
        f = spec.limit_field()
        t0 = float(spec.params.get("t0", 0.0))
        cfg = metric_config(spec.metric_kind, [f], spec)
        return translation_continuity_experiment(f, t0, [t0 + 2.0 ** -n for n in spec.ns], cfg,
                                                 spec.resolution, spec.hypotheses, spec.workers)
    if s == "bound_propagation":
        fam = [spec.field_at(n) for n in spec.ns]
        out = bound_propagation_check(fam, [spec.limit_field()], float(spec.J), float(spec.R),
                                      spec.metric_kind, spatial_res=spec.bound_spatial_res,
                                      time_res=spec.bound_time_res)
        rep = ExperimentReport(s, hypotheses=dict(spec.hypotheses))
        for n, v in zip(spec.ns, out["family_integrals"]):
            rep.rows.append({"n": n, "m_integral": v, "field_distance": None, "data_distance": 0.0,
                             "solution_error": None, "norm_kind": "m-integral"})
        rep.rows.append({"limit": out["limits"][0]["limit"], "m_integral": out["limits"][0]["integral"]})
        rep.verdict("limit_within_family_sup", out["ok"], list(range(len(rep.rows))),
                    f"limit integral <= family sup + {out['tol']}")
        rep.tolerances["propagation"] = out["tol"]
        return rep
    raise ScenarioError(f"unknown scenario {s!r}")
